//! Conjugate gradient on the normal equations of the preconditioned operator.
//!
//! `M̂` is not Hermitian, so CG runs on `A = M̂† M̂` with right-hand side
//! `M̂† b`, starting from zero. Every inner product is a deterministic global
//! reduction, so all ranks take identical decisions and the iteration count
//! does not depend on the decomposition.

use std::time::Instant;

use thiserror::Error;

use crate::algebra::{axpy_in_place, dot, norm2, xpay_in_place, AlgebraError, Complex, FermionField, GaugeField, Spinor};
use crate::geometry::Parity;
use crate::hopping::{
    EvenOddOperator, HoppingError, HoppingParams, RankCtx, FLOPS_AXPY_PER_COMPLEX, FLOPS_DOT_PER_COMPLEX, FLOPS_NORM2_PER_COMPLEX,
};

/// Iterations between true-residual checks.
pub const TRUE_RESIDUAL_INTERVAL: usize = 100;
/// A true residual further than this many `tol` from the recursive one flags the run.
pub const DRIFT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CGConfig {
    /// Target for `‖r‖ / ‖M̂† b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CGConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CGResult {
    pub solution: FermionField,
    pub iterations: usize,
    /// Relative residuals; entry 0 is the starting residual and the last entry
    /// is the true residual recomputed at exit.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Flops counted on this rank during the solve.
    pub flops: u64,
    pub elapsed_s: f64,
    pub true_residual_checks: usize,
    /// A periodic check found the recursive residual drifting from the true one.
    pub drift_flagged: bool,
}

impl CGResult {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("right-hand side is zero")]
    ZeroRhs,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence after {} iterations (residual {:.3e})", .0.iterations, .0.final_residual())]
    MaxIterExceeded(Box<CGResult>),
    #[error("p†Ap = {value:e} at iteration {iteration}: operator is not positive definite")]
    BreakdownPAp { iteration: usize, value: f64 },
    #[error(transparent)]
    Hopping(#[from] HoppingError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// The operator CG needs: `A = M̂† M̂` and `M̂†` for the right-hand side.
pub trait NormalOperator {
    fn apply_normal(&mut self, x: &mut FermionField, out: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), HoppingError>;
    fn apply_dagger(&mut self, x: &mut FermionField, out: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), HoppingError>;
}

impl NormalOperator for EvenOddOperator<'_> {
    fn apply_normal(&mut self, x: &mut FermionField, out: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), HoppingError> {
        EvenOddOperator::apply_normal(self, x, out, ctx)
    }

    fn apply_dagger(&mut self, x: &mut FermionField, out: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), HoppingError> {
        EvenOddOperator::apply_dagger(self, x, out, ctx)
    }
}

fn complex_elems(f: &FermionField) -> u64 {
    (f.len() * Spinor::COMPONENTS) as u64
}

fn counted_norm2(x: &FermionField, ctx: &mut RankCtx<'_>) -> Result<f64, AlgebraError> {
    ctx.flops.add(FLOPS_NORM2_PER_COMPLEX * complex_elems(x));
    norm2(x, ctx.comm, &ctx.exec)
}

fn counted_dot(x: &FermionField, y: &FermionField, ctx: &mut RankCtx<'_>) -> Result<Complex, AlgebraError> {
    ctx.flops.add(FLOPS_DOT_PER_COMPLEX * complex_elems(x));
    dot(x, y, ctx.comm, &ctx.exec)
}

fn counted_axpy(a: f64, x: &FermionField, y: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), AlgebraError> {
    ctx.flops.add(FLOPS_AXPY_PER_COMPLEX * complex_elems(x));
    axpy_in_place(Complex::new(a, 0.0), x, y, &ctx.exec)
}

fn counted_xpay(x: &FermionField, a: f64, y: &mut FermionField, ctx: &mut RankCtx<'_>) -> Result<(), AlgebraError> {
    ctx.flops.add(FLOPS_AXPY_PER_COMPLEX * complex_elems(x));
    xpay_in_place(x, Complex::new(a, 0.0), y, &ctx.exec)
}

/// Writes `rhs - A x` into `res` and returns its squared norm.
fn residual_into<Op: NormalOperator>(
    op: &mut Op,
    x: &mut FermionField,
    rhs: &FermionField,
    res: &mut FermionField,
    ctx: &mut RankCtx<'_>,
) -> Result<f64, SolverError> {
    op.apply_normal(x, res, ctx)?;
    counted_xpay(rhs, -1.0, res, ctx)?;
    Ok(counted_norm2(res, ctx)?)
}

/// Solves `M̂† M̂ x = M̂† b` for the even-parity `b`.
pub fn cg_solve(
    gauge: &GaugeField,
    b: &FermionField,
    params: &HoppingParams,
    cfg: &CGConfig,
    ctx: &mut RankCtx<'_>,
) -> Result<CGResult, SolverError> {
    let mut op = EvenOddOperator::new(gauge, *params);
    cg_solve_with(&mut op, b, cfg, ctx)
}

pub fn cg_solve_with<Op: NormalOperator>(
    op: &mut Op,
    b: &FermionField,
    cfg: &CGConfig,
    ctx: &mut RankCtx<'_>,
) -> Result<CGResult, SolverError> {
    if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
        return Err(SolverError::InvalidConfig(format!("tol must lie in (0, 1), got {}", cfg.tol)));
    }
    if cfg.max_iter == 0 {
        return Err(SolverError::InvalidConfig("max_iter must be positive".into()));
    }
    if b.parity() != Parity::Even {
        return Err(HoppingError::ParityMismatch("right-hand side must be even").into());
    }
    let start = Instant::now();
    let flops_start = ctx.flops.get();

    if counted_norm2(b, ctx)? == 0.0 {
        return Err(SolverError::ZeroRhs);
    }
    let mut b_work = b.clone();
    let mut rhs = b.zeros_like();
    op.apply_dagger(&mut b_work, &mut rhs, ctx)?;
    let rhs_norm = counted_norm2(&rhs, ctx)?.sqrt();
    if rhs_norm == 0.0 {
        return Err(SolverError::ZeroRhs);
    }

    let mut x = b.zeros_like();
    let mut r = rhs.clone();
    let mut p = rhs.clone();
    let mut ap = b.zeros_like();
    let mut rr = rhs_norm * rhs_norm;
    let mut history = vec![rr.sqrt() / rhs_norm];
    let mut checks = 0;
    let mut drift_flagged = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        op.apply_normal(&mut p, &mut ap, ctx)?;
        let pap = counted_dot(&p, &ap, ctx)?.re;
        if !(pap > 0.0) {
            return Err(SolverError::BreakdownPAp {
                iteration: iterations,
                value: pap,
            });
        }
        let alpha = rr / pap;
        counted_axpy(alpha, &p, &mut x, ctx)?;
        counted_axpy(-alpha, &ap, &mut r, ctx)?;
        let mut rr_new = counted_norm2(&r, ctx)?;
        iterations += 1;
        let mut rel = rr_new.sqrt() / rhs_norm;

        if rel <= cfg.tol || iterations % TRUE_RESIDUAL_INTERVAL == 0 {
            // ap is free until the next operator application.
            let true_rr = residual_into(op, &mut x, &rhs, &mut ap, ctx)?;
            checks += 1;
            let true_rel = true_rr.sqrt() / rhs_norm;
            if (true_rel - rel).abs() > DRIFT_FACTOR * cfg.tol {
                drift_flagged = true;
            }
            if rel <= cfg.tol {
                if true_rel <= cfg.tol {
                    history.push(true_rel);
                    converged = true;
                    break;
                }
                // The recursion ran ahead of the true residual: continue from it.
                r.copy_from(&ap);
                rr_new = true_rr;
                rel = true_rel;
            }
        }
        history.push(rel);
        if iterations == cfg.max_iter {
            break;
        }
        counted_xpay(&r, rr_new / rr, &mut p, ctx)?;
        rr = rr_new;
    }

    if !converged {
        let true_rr = residual_into(op, &mut x, &rhs, &mut ap, ctx)?;
        checks += 1;
        *history.last_mut().expect("non-empty") = true_rr.sqrt() / rhs_norm;
    }

    let result = CGResult {
        solution: x,
        iterations,
        residual_history: history,
        converged,
        flops: ctx.flops.get() - flops_start,
        elapsed_s: start.elapsed().as_secs_f64(),
        true_residual_checks: checks,
        drift_flagged,
    };
    if converged {
        Ok(result)
    } else {
        Err(SolverError::MaxIterExceeded(Box::new(result)))
    }
}

/// `‖M̂† b − M̂† M̂ x‖ / ‖M̂† b‖`.
pub fn true_residual(
    gauge: &GaugeField,
    x: &FermionField,
    b: &FermionField,
    params: &HoppingParams,
    ctx: &mut RankCtx<'_>,
) -> Result<f64, SolverError> {
    let mut op = EvenOddOperator::new(gauge, *params);
    let mut b_work = b.clone();
    let mut rhs = b.zeros_like();
    op.apply_dagger(&mut b_work, &mut rhs, ctx)?;
    let rhs_norm = counted_norm2(&rhs, ctx)?.sqrt();
    if rhs_norm == 0.0 {
        return Err(SolverError::ZeroRhs);
    }
    let mut x_work = x.clone();
    let mut res = b.zeros_like();
    let rr = residual_into(&mut op, &mut x_work, &rhs, &mut res, ctx)?;
    Ok(rr.sqrt() / rhs_norm)
}
