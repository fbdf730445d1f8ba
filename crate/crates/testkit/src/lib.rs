//! Dense reference operators assembled site by site from the gauge links.
//!
//! Nothing here reuses the stencil tables, projector tables or storage
//! indexing of `lqcd-core`; fields are read and written only through
//! coordinate lookups, so a disagreement points at the kernel rather than
//! at shared plumbing.

pub mod checks;
pub mod runs;

use std::sync::Arc;

use lqcd_core::algebra::{FermionField, GaugeField, Spinor};
use lqcd_core::geometry::{Dims, Parity, SiteCoord};
use lqcd_core::hopping::HoppingParams;
use lqcd_core::layout::Layout;
use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64 as C;

const I: C = C::new(0.0, 1.0);
const R: C = C::new(1.0, 0.0);
const O: C = C::new(0.0, 0.0);

/// Dirac matrices in the chiral (DeGrand–Rossi) basis, typed out in full.
pub fn gamma(mu: usize) -> Matrix4<C> {
    let m = match mu {
        0 => [[O, O, O, I], [O, O, I, O], [O, -I, O, O], [-I, O, O, O]],
        1 => [[O, O, O, -R], [O, O, R, O], [O, R, O, O], [-R, O, O, O]],
        2 => [[O, O, I, O], [O, O, O, -I], [-I, O, O, O], [O, I, O, O]],
        3 => [[O, O, R, O], [O, O, O, R], [R, O, O, O], [O, R, O, O]],
        _ => panic!("no gamma matrix for direction {mu}"),
    };
    Matrix4::from_fn(|i, j| m[i][j])
}

pub fn gamma5() -> Matrix4<C> {
    gamma(0) * gamma(1) * gamma(2) * gamma(3)
}

fn parity_of(c: &[usize; 4]) -> Parity {
    if c.iter().sum::<usize>() % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

fn lex(c: &[usize; 4], d: &[usize; 4]) -> usize {
    c[0] + d[0] * (c[1] + d[1] * (c[2] + d[2] * c[3]))
}

/// Vector slot of a site within its parity: lexicographic index halved.
pub fn slot(c: &[usize; 4], d: &[usize; 4]) -> usize {
    lex(c, d) / 2
}

fn sites_of(d: &[usize; 4], p: Parity) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for t in 0..d[3] {
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    let c = [x, y, z, t];
                    if parity_of(&c) == p {
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

fn dims_of(layout: &Layout) -> [usize; 4] {
    let Dims(d) = layout.local();
    d
}

/// Field values as a dense vector indexed by `12·slot + 3·spin + colour`.
pub fn to_vector(field: &FermionField) -> DVector<C> {
    let d = dims_of(field.layout());
    let half = d.iter().product::<usize>() / 2;
    let mut v = DVector::zeros(12 * half);
    for c in sites_of(&d, field.parity()) {
        let s = field.at(SiteCoord(c)).expect("site of field parity");
        let base = 12 * slot(&c, &d);
        for spin in 0..4 {
            for col in 0..3 {
                v[base + 3 * spin + col] = s.0[spin][col];
            }
        }
    }
    v
}

pub fn from_vector(layout: &Arc<Layout>, parity: Parity, v: &DVector<C>) -> FermionField {
    let d = dims_of(layout);
    FermionField::from_global_fn(layout, parity, |g| {
        let base = 12 * slot(&g.0, &d);
        Spinor(std::array::from_fn(|spin| std::array::from_fn(|col| v[base + 3 * spin + col])))
    })
}

/// Dense hopping block from `out_parity.flip()` to `out_parity` on a single
/// rank holding the whole lattice:
/// `D x(y) = Σ_μ (1 − γ_μ) U_μ(y) x(y+μ) + (1 + γ_μ) U_μ(y−μ)† x(y−μ)`,
/// with the projector signs exchanged for `D†`.
pub fn hopping_matrix(gauge: &GaugeField, params: &HoppingParams, out_parity: Parity, dagger: bool) -> DMatrix<C> {
    let d = dims_of(gauge.layout());
    let half = d.iter().product::<usize>() / 2;
    let mut m = DMatrix::<C>::zeros(12 * half, 12 * half);
    let one = Matrix4::<C>::identity();
    let s = if dagger { -1.0 } else { 1.0 };
    for y in sites_of(&d, out_parity) {
        let row = 12 * slot(&y, &d);
        for mu in 0..4 {
            let g = gamma(mu);
            let mut fwd = y;
            fwd[mu] = (y[mu] + 1) % d[mu];
            let fwd_bc = if y[mu] + 1 == d[mu] { params.boundary[mu] } else { 1.0 };
            let pf = (one - g * C::from(s)) * C::from(fwd_bc);
            let uf = gauge.link(SiteCoord(y), mu);

            let mut bwd = y;
            bwd[mu] = (y[mu] + d[mu] - 1) % d[mu];
            let bwd_bc = if y[mu] == 0 { params.boundary[mu] } else { 1.0 };
            let pb = (one + g * C::from(s)) * C::from(bwd_bc);
            let ub = gauge.link(SiteCoord(bwd), mu);

            let cf = 12 * slot(&fwd, &d);
            let cb = 12 * slot(&bwd, &d);
            for a in 0..4 {
                for b in 0..4 {
                    for i in 0..3 {
                        for j in 0..3 {
                            m[(row + 3 * a + i, cf + 3 * b + j)] += pf[(a, b)] * uf.0[i][j];
                            m[(row + 3 * a + i, cb + 3 * b + j)] += pb[(a, b)] * ub.0[j][i].conj();
                        }
                    }
                }
            }
        }
    }
    m
}

/// `a · b`, skipping the structural zeros of `a`.
pub fn sparse_product(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    let mut out = DMatrix::<C>::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let aik = a[(i, k)];
            if aik == O {
                continue;
            }
            for j in 0..b.ncols() {
                out[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    out
}

/// `1 − κ² D_eo D_oe`, or its adjoint built from the `D†` blocks.
pub fn preconditioned_matrix(gauge: &GaugeField, params: &HoppingParams, dagger: bool) -> DMatrix<C> {
    let d_eo = hopping_matrix(gauge, params, Parity::Even, dagger);
    let d_oe = hopping_matrix(gauge, params, Parity::Odd, dagger);
    let k2 = C::from(params.kappa * params.kappa);
    let n = d_eo.nrows();
    DMatrix::<C>::identity(n, n) - sparse_product(&d_eo, &d_oe) * k2
}

/// `max |a − b| / max |b|`.
pub fn max_rel_err(a: &DVector<C>, b: &DVector<C>) -> f64 {
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    diff / scale
}

/// Solves `m x = b` by LU.
pub fn dense_solve(m: &DMatrix<C>, b: &DVector<C>) -> DVector<C> {
    m.clone().lu().solve(b).expect("dense operator is invertible")
}
