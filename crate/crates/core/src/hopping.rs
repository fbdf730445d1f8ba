//! Wilson hopping matrix and the even/odd preconditioned operator.
//!
//! The hopping term applied to a field of parity `p` produces parity `1 - p`:
//!
//! ```text
//! (D x)(y) = Σ_mu [ (1 - γ_mu) U_mu(y) x(y + mu) + (1 + γ_mu) U_mu(y - mu)† x(y - mu) ]
//! ```
//!
//! with `M = 1 - κ D` and the Schur complement on even sites
//! `M̂ = 1 - κ² D_eo D_oe`. `D†` is the same stencil with the two projectors
//! swapped. Per output site the terms are accumulated with `mu` ascending and
//! the forward term before the backward one, in every build and at every rank
//! count, so results are bitwise independent of the decomposition.
//!
//! Gamma matrices use the chiral (DeGrand–Rossi) basis:
//!
//! ```text
//! γ_x = [ 0  0  0  i ]   γ_y = [ 0  0  0 -1 ]   γ_z = [ 0  0  i  0 ]   γ_t = [ 0  0  1  0 ]
//!       [ 0  0  i  0 ]         [ 0  0  1  0 ]         [ 0  0  0 -i ]         [ 0  0  0  1 ]
//!       [ 0 -i  0  0 ]         [ 0  1  0  0 ]         [-i  0  0  0 ]         [ 1  0  0  0 ]
//!       [-i  0  0  0 ]         [-1  0  0  0 ]         [ 0  i  0  0 ]         [ 0  1  0  0 ]
//! ```
//!
//! Every row has one non-zero entry, so `γ ψ` is a permutation of spin
//! components times a phase in `{±1, ±i}`. The kernel projects each term to
//! two spin components, multiplies those by the link and reconstructs the
//! other two.
//!
//! Flops are counted by convention, not by instruction: 1320 per output site
//! per hopping application, 8 per complex element for axpy-type updates and
//! dot products, 4 per complex element for squared norms.

use thiserror::Error;

use crate::algebra::{adjoint_matvec, matvec, xpay_in_place, AlgebraError, ColorVector, Complex, FermionField, GaugeField, Spinor};
use crate::comm::{halo_exchange, Comm, CommError, HaloPlan};
use crate::exec::Executor;
use crate::geometry::{neighbor, Decomposition, Owner, Parity, Sign, NDIM};

pub const FLOPS_PER_HOPPING_SITE: u64 = 1320;
pub const FLOPS_AXPY_PER_COMPLEX: u64 = 8;
pub const FLOPS_DOT_PER_COMPLEX: u64 = 8;
pub const FLOPS_NORM2_PER_COMPLEX: u64 = 4;

pub fn flops_per_hopping_site() -> u64 {
    FLOPS_PER_HOPPING_SITE
}

#[derive(Debug, Error)]
pub enum HoppingError {
    #[error("parity mismatch: {0}")]
    ParityMismatch(&'static str),
    #[error("stale halo on {0}: exchange it before applying the stencil")]
    HaloStale(&'static str),
    #[error("fields live on different layouts")]
    LayoutMismatch,
    #[error("elapsed time must be positive")]
    ZeroElapsed,
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoppingParams {
    pub kappa: f64,
    /// `+1` periodic, `-1` antiperiodic, per axis.
    pub boundary: [f64; NDIM],
}

impl HoppingParams {
    /// Periodic in space, antiperiodic in time.
    pub fn new(kappa: f64) -> Self {
        Self {
            kappa,
            boundary: [1.0, 1.0, 1.0, -1.0],
        }
    }

    pub fn periodic(kappa: f64) -> Self {
        Self {
            kappa,
            boundary: [1.0; NDIM],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.kappa.is_finite() && self.boundary.iter().all(|b| *b == 1.0 || *b == -1.0)
    }
}

/// Monotone count of floating-point operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlopCounter(u64);

impl FlopCounter {
    pub fn new() -> Self {
        Self(0)
    }

    pub fn add(&mut self, flops: u64) {
        self.0 += flops;
    }

    pub fn get(&self) -> u64 {
        self.0
    }
}

/// What one rank-worker carries through a solve.
#[derive(Debug)]
pub struct RankCtx<'c> {
    pub comm: &'c mut Comm,
    pub exec: Executor,
    pub flops: FlopCounter,
}

impl<'c> RankCtx<'c> {
    pub fn new(comm: &'c mut Comm, exec: Executor) -> Self {
        Self {
            comm,
            exec,
            flops: FlopCounter::new(),
        }
    }
}

/// `(spin permutation, phase)` per row: `(γ_mu ψ)_s = phase[s] · ψ_{perm[s]}`.
pub struct Gamma {
    pub perm: [usize; 4],
    pub phase: [Complex; 4],
}

const I: Complex = Complex::new(0.0, 1.0);
const NI: Complex = Complex::new(0.0, -1.0);
const P1: Complex = Complex::new(1.0, 0.0);
const M1: Complex = Complex::new(-1.0, 0.0);

pub const GAMMA: [Gamma; NDIM] = [
    Gamma {
        perm: [3, 2, 1, 0],
        phase: [I, I, NI, NI],
    },
    Gamma {
        perm: [3, 2, 1, 0],
        phase: [M1, P1, P1, M1],
    },
    Gamma {
        perm: [2, 3, 0, 1],
        phase: [I, NI, NI, I],
    },
    Gamma {
        perm: [2, 3, 0, 1],
        phase: [P1, P1, P1, P1],
    },
];

/// `(1 + s·γ_mu) ψ` applied directly, for checks against the projected kernel.
pub fn apply_projector(mu: usize, s: f64, psi: &Spinor) -> Spinor {
    let g = &GAMMA[mu];
    Spinor(std::array::from_fn(|a| std::array::from_fn(|c| psi.0[a][c] + g.phase[a] * psi.0[g.perm[a]][c] * s)))
}

/// `γ_mu ψ`.
pub fn apply_gamma(mu: usize, psi: &Spinor) -> Spinor {
    let g = &GAMMA[mu];
    Spinor(std::array::from_fn(|a| std::array::from_fn(|c| g.phase[a] * psi.0[g.perm[a]][c])))
}

/// Projection coefficients for `(1 + s·γ_mu)`: upper rows `h_a = ψ_a + proj[a] ψ_{perm[a]}`,
/// lower rows reconstructed as `recon[a] · h_a` into spin `perm[a]`.
#[derive(Clone, Copy)]
struct Projector {
    perm: [usize; 2],
    proj: [Complex; 2],
    recon: [Complex; 2],
}

impl Projector {
    const fn zero() -> Self {
        Self {
            perm: [0; 2],
            proj: [Complex::new(0.0, 0.0); 2],
            recon: [Complex::new(0.0, 0.0); 2],
        }
    }
}

fn projectors(s: f64) -> [Projector; NDIM] {
    let mut out = [Projector::zero(); NDIM];
    for (mu, g) in GAMMA.iter().enumerate() {
        for a in 0..2 {
            let t = g.perm[a];
            out[mu].perm[a] = t;
            out[mu].proj[a] = g.phase[a] * s;
            out[mu].recon[a] = g.phase[t] * s;
        }
    }
    out
}

#[inline(always)]
fn project(p: &Projector, psi: &Spinor) -> [ColorVector; 2] {
    std::array::from_fn(|a| std::array::from_fn(|c| psi.0[a][c] + p.proj[a] * psi.0[p.perm[a]][c]))
}

#[inline(always)]
fn accumulate(p: &Projector, acc: &mut Spinor, uh: &[ColorVector; 2], sign: f64) {
    for a in 0..2 {
        for c in 0..3 {
            let v = if sign < 0.0 { -uh[a][c] } else { uh[a][c] };
            acc.0[a][c] += v;
            acc.0[p.perm[a]][c] += p.recon[a] * v;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SiteHops {
    /// Storage index of the output site among all local sites.
    pub site: u32,
    /// Input-buffer index of `y + mu`; at or past the half volume it is a ghost slot.
    pub fwd: [u32; NDIM],
    pub bwd: [u32; NDIM],
    /// Link index of `U_mu(y - mu)`; at or past the volume it is a ghost link.
    pub bwd_link: [u32; NDIM],
    /// Bit `mu`: forward hop crosses the global boundary; bit `4 + mu`: backward hop does.
    pub crosses: u8,
}

#[derive(Debug)]
pub(crate) struct StencilTable {
    pub hops: Vec<SiteHops>,
}

impl StencilTable {
    pub(crate) fn build(decomp: &Decomposition, origin: [usize; NDIM], out_parity: Parity, in_plan: &HaloPlan, gauge_plan: &HaloPlan) -> Self {
        let local = decomp.local;
        let global = decomp.global.dims().0;
        let half = local.half_volume();
        let volume = local.volume();
        let in_offset = out_parity.flip().index() * half;
        let hops = (0..half)
            .map(|i| {
                let site = out_parity.index() * half + i;
                let c = crate::geometry::index_to_site(site, local).expect("site in range");
                let mut h = SiteHops {
                    site: site as u32,
                    fwd: [0; NDIM],
                    bwd: [0; NDIM],
                    bwd_link: [0; NDIM],
                    crosses: 0,
                };
                for mu in 0..NDIM {
                    let (n, owner) = neighbor(c, mu, Sign::Forward, local);
                    h.fwd[mu] = match owner {
                        Owner::Local => (crate::geometry::site_index_unchecked(n, local) - in_offset) as u32,
                        Owner::Adjacent => (half + in_plan.ghost_slot(c, mu, Sign::Forward)) as u32,
                    };
                    let (n, owner) = neighbor(c, mu, Sign::Backward, local);
                    match owner {
                        Owner::Local => {
                            let s = crate::geometry::site_index_unchecked(n, local);
                            h.bwd[mu] = (s - in_offset) as u32;
                            h.bwd_link[mu] = s as u32;
                        }
                        Owner::Adjacent => {
                            h.bwd[mu] = (half + in_plan.ghost_slot(c, mu, Sign::Backward)) as u32;
                            h.bwd_link[mu] = (volume + gauge_plan.ghost_slot(c, mu, Sign::Backward)) as u32;
                        }
                    }
                    let g = origin[mu] + c.0[mu];
                    if g + 1 == global[mu] {
                        h.crosses |= 1 << mu;
                    }
                    if g == 0 {
                        h.crosses |= 1 << (NDIM + mu);
                    }
                }
                h
            })
            .collect();
        Self { hops }
    }
}

/// Applies `D` (or `D†`) to `x`, writing the opposite-parity result into
/// `out`. `x` and `gauge` must have fresh halos.
pub fn apply_hopping_into(
    gauge: &GaugeField,
    x: &FermionField,
    out: &mut FermionField,
    params: &HoppingParams,
    dagger: bool,
    exec: &Executor,
    flops: &mut FlopCounter,
) -> Result<(), HoppingError> {
    if !x.layout().same_shape(gauge.layout()) || !out.layout().same_shape(gauge.layout()) {
        return Err(HoppingError::LayoutMismatch);
    }
    if out.parity() != x.parity().flip() {
        return Err(HoppingError::ParityMismatch("output must have the opposite parity of the input"));
    }
    if !gauge.halo_is_fresh() {
        return Err(HoppingError::HaloStale("gauge field"));
    }
    if !x.halo_is_fresh() {
        return Err(HoppingError::HaloStale("fermion input"));
    }

    let layout = std::sync::Arc::clone(x.layout());
    let table = &layout.stencils[out.parity().index()];
    // D uses (1 - γ) forward and (1 + γ) backward; D† swaps them.
    let (fwd_s, bwd_s) = if dagger { (1.0, -1.0) } else { (-1.0, 1.0) };
    let fwd_p = projectors(fwd_s);
    let bwd_p = projectors(bwd_s);
    let boundary = params.boundary;
    let input = x.buffer();

    exec.for_each_mut(out.sites_mut(), |i, out_site| {
        let h = &table.hops[i];
        let mut acc = Spinor::ZERO;
        for mu in 0..NDIM {
            let sign = if h.crosses & (1 << mu) != 0 { boundary[mu] } else { 1.0 };
            let half = project(&fwd_p[mu], &input[h.fwd[mu] as usize]);
            let u = &gauge.links()[h.site as usize][mu];
            let uh = [matvec(u, &half[0]), matvec(u, &half[1])];
            accumulate(&fwd_p[mu], &mut acc, &uh, sign);

            let sign = if h.crosses & (1 << (NDIM + mu)) != 0 { boundary[mu] } else { 1.0 };
            let half = project(&bwd_p[mu], &input[h.bwd[mu] as usize]);
            let u = gauge.link_at(h.bwd_link[mu] as usize, mu);
            let uh = [adjoint_matvec(u, &half[0]), adjoint_matvec(u, &half[1])];
            accumulate(&bwd_p[mu], &mut acc, &uh, sign);
        }
        *out_site = acc;
    });
    flops.add(FLOPS_PER_HOPPING_SITE * layout.half_volume() as u64);
    Ok(())
}

/// `D x` for an input whose halo is already exchanged.
pub fn apply_hopping(
    gauge: &GaugeField,
    x: &FermionField,
    params: &HoppingParams,
    exec: &Executor,
    flops: &mut FlopCounter,
) -> Result<FermionField, HoppingError> {
    let mut out = FermionField::zeros(x.layout(), x.parity().flip());
    apply_hopping_into(gauge, x, &mut out, params, false, exec, flops)?;
    Ok(out)
}

/// `D† x` for an input whose halo is already exchanged.
pub fn apply_hopping_dagger(
    gauge: &GaugeField,
    x: &FermionField,
    params: &HoppingParams,
    exec: &Executor,
    flops: &mut FlopCounter,
) -> Result<FermionField, HoppingError> {
    let mut out = FermionField::zeros(x.layout(), x.parity().flip());
    apply_hopping_into(gauge, x, &mut out, params, true, exec, flops)?;
    Ok(out)
}

fn axpy_flops(field: &FermionField) -> u64 {
    FLOPS_AXPY_PER_COMPLEX * Spinor::COMPONENTS as u64 * field.len() as u64
}

/// `M̂ x` or `M̂† x` with caller-provided odd scratch.
fn preconditioned_into(
    gauge: &GaugeField,
    params: &HoppingParams,
    x: &mut FermionField,
    odd: &mut FermionField,
    out: &mut FermionField,
    dagger: bool,
    ctx: &mut RankCtx<'_>,
) -> Result<(), HoppingError> {
    if x.parity() != Parity::Even || out.parity() != Parity::Even {
        return Err(HoppingError::ParityMismatch("the preconditioned operator acts on even fields"));
    }
    if !x.halo_is_fresh() {
        halo_exchange(x, ctx.comm)?;
    }
    apply_hopping_into(gauge, x, odd, params, dagger, &ctx.exec, &mut ctx.flops)?;
    halo_exchange(odd, ctx.comm)?;
    apply_hopping_into(gauge, odd, out, params, dagger, &ctx.exec, &mut ctx.flops)?;
    let k2 = params.kappa * params.kappa;
    xpay_in_place(x, Complex::new(-k2, 0.0), out, &ctx.exec)?;
    ctx.flops.add(axpy_flops(x));
    Ok(())
}

/// The even/odd preconditioned Wilson operator with its scratch fields.
pub struct EvenOddOperator<'g> {
    gauge: &'g GaugeField,
    params: HoppingParams,
    odd: FermionField,
    even: FermionField,
}

impl<'g> EvenOddOperator<'g> {
    pub fn new(gauge: &'g GaugeField, params: HoppingParams) -> Self {
        Self {
            gauge,
            params,
            odd: FermionField::zeros(gauge.layout(), Parity::Odd),
            even: FermionField::zeros(gauge.layout(), Parity::Even),
        }
    }

    pub fn params(&self) -> &HoppingParams {
        &self.params
    }

    pub fn gauge(&self) -> &GaugeField {
        self.gauge
    }

    /// `out ← M̂ x`
    pub fn apply(&mut self, x: &mut FermionField, out: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), HoppingError> {
        preconditioned_into(self.gauge, &self.params, x, &mut self.odd, out, false, ctx)
    }

    /// `out ← M̂† x`
    pub fn apply_dagger(&mut self, x: &mut FermionField, out: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), HoppingError> {
        preconditioned_into(self.gauge, &self.params, x, &mut self.odd, out, true, ctx)
    }

    /// `out ← M̂† M̂ x`
    pub fn apply_normal(&mut self, x: &mut FermionField, out: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), HoppingError> {
        let Self { gauge, params, odd, even } = self;
        preconditioned_into(gauge, params, x, odd, even, false, ctx)?;
        preconditioned_into(gauge, params, even, odd, out, true, ctx)
    }
}

/// `M̂ x = x - κ² D_eo D_oe x`.
pub fn apply_preconditioned(
    gauge: &GaugeField,
    x: &mut FermionField,
    params: &HoppingParams,
    ctx: &mut RankCtx<'_>,
) -> Result<FermionField, HoppingError> {
    let mut out = FermionField::zeros(x.layout(), Parity::Even);
    EvenOddOperator::new(gauge, *params).apply(x, &mut out, ctx)?;
    Ok(out)
}

/// `M̂† x`.
pub fn apply_preconditioned_dagger(
    gauge: &GaugeField,
    x: &mut FermionField,
    params: &HoppingParams,
    ctx: &mut RankCtx<'_>,
) -> Result<FermionField, HoppingError> {
    let mut out = FermionField::zeros(x.layout(), Parity::Even);
    EvenOddOperator::new(gauge, *params).apply_dagger(x, &mut out, ctx)?;
    Ok(out)
}

/// `M̂† M̂ x`.
pub fn apply_normal(
    gauge: &GaugeField,
    x: &mut FermionField,
    params: &HoppingParams,
    ctx: &mut RankCtx<'_>,
) -> Result<FermionField, HoppingError> {
    let mut out = FermionField::zeros(x.layout(), Parity::Even);
    EvenOddOperator::new(gauge, *params).apply_normal(x, &mut out, ctx)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopRates {
    pub mflops_per_rank: f64,
    pub gflops_overall: f64,
}

/// Mean Mflop/s per rank and overall Gflop/s. The overall rate is derived
/// from the per-rank one, so `overall = ranks · per_rank / 1000` holds
/// exactly in floating point.
pub fn flop_report(flops: u64, elapsed_s: f64, ranks: usize) -> Result<FlopRates, HoppingError> {
    if !(elapsed_s > 0.0) {
        return Err(HoppingError::ZeroElapsed);
    }
    let mflops_per_rank = flops as f64 / (ranks as f64 * elapsed_s * 1e6);
    Ok(FlopRates {
        mflops_per_rank,
        gflops_overall: ranks as f64 * mflops_per_rank / 1000.0,
    })
}
