//! Algebraic property checks over many random samples. Each returns the
//! number of samples checked, or a description of the first violation.

use std::sync::Arc;

use lqcd_core::algebra::{
    dot, norm2, random_fermion, random_gauge, random_su3, scale, site_rng, axpy, Complex, Spinor, ONE,
};
use lqcd_core::comm::{gauge_halo_exchange, halo_exchange, Comm};
use lqcd_core::exec::Executor;
use lqcd_core::geometry::{GlobalLattice, Parity};
use lqcd_core::hopping::{apply_gamma, apply_hopping, apply_hopping_dagger, apply_projector, FlopCounter, HoppingParams};
use lqcd_core::layout::Layout;
use rand::Rng;

fn random_spinor(rng: &mut impl Rng) -> Spinor {
    Spinor::from_fn(|_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

/// γ² = 1, {γ_μ, γ_ν} = 2δ_μν, (1−γ)(1+γ) = 0 and (1±γ)² = 2(1±γ), checked
/// bitwise on random spinors.
pub fn gamma_properties(samples: usize, seed: u64) -> Result<usize, String> {
    let mut rng = site_rng(seed, 1, 0);
    for n in 0..samples {
        let psi = random_spinor(&mut rng);
        for mu in 0..4 {
            let gg = apply_gamma(mu, &apply_gamma(mu, &psi));
            ensure(gg == psi, || format!("sample {n}: γ_{mu}² ψ != ψ"))?;
            for nu in (mu + 1)..4 {
                let ac = apply_gamma(mu, &apply_gamma(nu, &psi)) + apply_gamma(nu, &apply_gamma(mu, &psi));
                ensure(ac == Spinor::ZERO, || format!("sample {n}: {{γ_{mu}, γ_{nu}}} ψ != 0"))?;
            }
            let annihilated = apply_projector(mu, -1.0, &apply_projector(mu, 1.0, &psi));
            ensure(annihilated == Spinor::ZERO, || format!("sample {n}: (1-γ_{mu})(1+γ_{mu}) ψ != 0"))?;
            for s in [1.0, -1.0] {
                let p = apply_projector(mu, s, &psi);
                ensure(apply_projector(mu, s, &p) == 2.0 * p, || {
                    format!("sample {n}: (1{}γ_{mu})² != 2(1{}γ_{mu})", sign(s), sign(s))
                })?;
            }
        }
    }
    Ok(samples)
}

/// γ_μ† = γ_μ through the inner product: ⟨φ, γψ⟩ = ⟨γφ, ψ⟩ bitwise.
pub fn gamma_hermiticity(samples: usize, seed: u64) -> Result<usize, String> {
    let mut rng = site_rng(seed, 2, 0);
    for n in 0..samples {
        let (phi, psi) = (random_spinor(&mut rng), random_spinor(&mut rng));
        for mu in 0..4 {
            let (a, b) = (phi.dot(&apply_gamma(mu, &psi)), apply_gamma(mu, &phi).dot(&psi));
            ensure((a - b).norm() <= 1e-15 * (1.0 + a.norm()), || format!("sample {n}: γ_{mu} not Hermitian"))?;
        }
    }
    Ok(samples)
}

fn sign(s: f64) -> char {
    if s > 0.0 {
        '+'
    } else {
        '-'
    }
}

/// Unitarity and unit determinant of generated links to 1e-12.
pub fn su3_properties(samples: usize, seed: u64) -> Result<usize, String> {
    for n in 0..samples {
        let u = random_su3(&mut site_rng(seed, 3, n as u64));
        ensure(u.unitarity_defect() <= 1e-12, || format!("sample {n}: ‖U†U − 1‖ = {:e}", u.unitarity_defect()))?;
        let det = u.determinant();
        ensure((det - ONE).norm() <= 1e-12, || format!("sample {n}: det U = {det}"))?;
    }
    Ok(samples)
}

/// `norm2(a·x) = |a|² norm2(x)` within 1e-13 and `axpy(a, x, y) − y = a·x`.
pub fn vector_axioms(samples: usize, seed: u64) -> Result<usize, String> {
    let layout = Layout::single(GlobalLattice::new([2, 2, 2, 2]).unwrap());
    let exec = Executor::sequential();
    let mut comm = Comm::serial();
    let mut rng = site_rng(seed, 4, 0);
    let x = random_fermion(&layout, Parity::Even, seed);
    let y = random_fermion(&layout, Parity::Even, seed + 1);
    let nx = norm2(&x, &mut comm, &exec).map_err(|e| e.to_string())?;
    for n in 0..samples {
        let a = Complex::new(4.0 * rng.random::<f64>() - 2.0, 4.0 * rng.random::<f64>() - 2.0);
        let na = norm2(&scale(a, &x, &exec), &mut comm, &exec).map_err(|e| e.to_string())?;
        let expect = a.norm_sqr() * nx;
        ensure((na - expect).abs() <= 1e-13 * expect, || format!("sample {n}: norm2 scaling off by {:e}", (na - expect).abs() / expect))?;
        let z = axpy(a, &x, &y, &exec).map_err(|e| e.to_string())?;
        for ((zi, yi), xi) in z.sites().iter().zip(y.sites()).zip(x.sites()) {
            let d = (*zi - *yi - xi.scale(a)).norm2().sqrt();
            ensure(d <= 1e-14 * (1.0 + xi.scale(a).norm2().sqrt()), || format!("sample {n}: axpy not linear"))?;
        }
    }
    Ok(samples)
}

/// `⟨y, D_eo x⟩ = conj⟨x, D†_oe y⟩` within 1e-12 relative on a 4⁴ lattice.
pub fn adjoint_consistency(samples: usize, seed: u64) -> Result<usize, String> {
    let layout: Arc<Layout> = Layout::single(GlobalLattice::new([4, 4, 4, 4]).unwrap());
    let exec = Executor::sequential();
    let mut comm = Comm::serial();
    let mut g = random_gauge(&layout, seed);
    gauge_halo_exchange(&mut g, &mut comm).map_err(|e| e.to_string())?;
    let params = HoppingParams::new(0.15);
    let mut flops = FlopCounter::new();
    for n in 0..samples {
        let s = seed.wrapping_add(100 * n as u64);
        let mut x = random_fermion(&layout, Parity::Odd, s);
        let mut y = random_fermion(&layout, Parity::Even, s + 1);
        halo_exchange(&mut x, &mut comm).map_err(|e| e.to_string())?;
        halo_exchange(&mut y, &mut comm).map_err(|e| e.to_string())?;
        let dx = apply_hopping(&g, &x, &params, &exec, &mut flops).map_err(|e| e.to_string())?;
        let dy = apply_hopping_dagger(&g, &y, &params, &exec, &mut flops).map_err(|e| e.to_string())?;
        let lhs = dot(&y, &dx, &mut comm, &exec).map_err(|e| e.to_string())?;
        let rhs = dot(&x, &dy, &mut comm, &exec).map_err(|e| e.to_string())?.conj();
        ensure((lhs - rhs).norm() <= 1e-12 * lhs.norm(), || format!("sample {n}: {lhs} vs {rhs}"))?;
    }
    Ok(samples)
}
