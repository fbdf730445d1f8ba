//! Complex colour algebra, field containers and the vector-space operations
//! the solver needs.
//!
//! Inner products are accumulated exactly with [`ExactSum`] and combined
//! across ranks through [`Comm::allreduce_det`], so their values do not depend
//! on the decomposition or the executor width.

mod exact;
mod field;
pub mod io;
mod matrix;
mod random;

use thiserror::Error;

use crate::comm::{Comm, CommError};
use crate::exec::Executor;

pub use exact::ExactSum;
pub use field::{FermionField, GaugeField};
pub use matrix::{adjoint_matvec, matvec, ColorMatrix, ColorVector, Complex, Spinor, ONE, ZERO};
pub use random::{random_fermion, random_gauge, random_su3, site_rng, unit_gauge};

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("fields differ in layout or parity")]
    ShapeMismatch,
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error("field file: {0}")]
    Io(#[from] std::io::Error),
    #[error("field file: {0}")]
    Format(String),
}

fn check_shape(x: &FermionField, y: &FermionField) -> Result<(), AlgebraError> {
    if x.parity() != y.parity() || !x.layout().same_shape(y.layout()) {
        return Err(AlgebraError::ShapeMismatch);
    }
    Ok(())
}

#[inline(always)]
fn spinor_axpy(a: Complex, x: &Spinor, y: &Spinor) -> Spinor {
    Spinor(std::array::from_fn(|s| std::array::from_fn(|c| a * x.0[s][c] + y.0[s][c])))
}

/// `y ← a·x + y`
pub fn axpy_in_place(a: Complex, x: &FermionField, y: &mut FermionField, exec: &Executor) -> Result<(), AlgebraError> {
    check_shape(x, y)?;
    let xs = x.sites();
    exec.for_each_mut(y.sites_mut(), |i, yi| *yi = spinor_axpy(a, &xs[i], yi));
    Ok(())
}

/// `a·x + y` as a new field.
pub fn axpy(a: Complex, x: &FermionField, y: &FermionField, exec: &Executor) -> Result<FermionField, AlgebraError> {
    let mut out = y.clone();
    axpy_in_place(a, x, &mut out, exec)?;
    Ok(out)
}

/// `y ← x + a·y`
pub fn xpay_in_place(x: &FermionField, a: Complex, y: &mut FermionField, exec: &Executor) -> Result<(), AlgebraError> {
    check_shape(x, y)?;
    let xs = x.sites();
    exec.for_each_mut(y.sites_mut(), |i, yi| *yi = spinor_axpy(a, yi, &xs[i]));
    Ok(())
}

pub fn scale_in_place(a: Complex, x: &mut FermionField, exec: &Executor) {
    exec.for_each_mut(x.sites_mut(), |_, xi| *xi = xi.scale(a));
}

pub fn scale(a: Complex, x: &FermionField, exec: &Executor) -> FermionField {
    let mut out = x.clone();
    scale_in_place(a, &mut out, exec);
    out
}

#[derive(Clone, Copy)]
struct DotSum([ExactSum; 2]);

impl std::ops::Add for DotSum {
    type Output = DotSum;

    fn add(self, rhs: DotSum) -> DotSum {
        DotSum([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

fn local_dot_sums(x: &FermionField, y: &FermionField, exec: &Executor) -> Result<[ExactSum; 2], AlgebraError> {
    check_shape(x, y)?;
    let (xs, ys) = (x.sites(), y.sites());
    let sums = exec.chunked_sum(xs.len(), DotSum([ExactSum::new(); 2]), |r| {
        let mut acc = [ExactSum::new(); 2];
        for (a, b) in xs[r.clone()].iter().zip(&ys[r]) {
            let d = a.dot(b);
            acc[0].push(d.re);
            acc[1].push(d.im);
        }
        DotSum(acc)
    });
    Ok(sums.0)
}

fn local_norm2_sum(x: &FermionField, exec: &Executor) -> ExactSum {
    let xs = x.sites();
    exec.chunked_sum(xs.len(), ExactSum::new(), |r| xs[r].iter().map(Spinor::norm2).collect())
}

/// Rank-local `Σ conj(x_i)·y_i`.
pub fn local_dot(x: &FermionField, y: &FermionField, exec: &Executor) -> Result<Complex, AlgebraError> {
    let [re, im] = local_dot_sums(x, y, exec)?;
    Ok(Complex::new(re.value(), im.value()))
}

pub fn local_norm2(x: &FermionField, exec: &Executor) -> f64 {
    local_norm2_sum(x, exec).value()
}

fn global_value(comm: &mut Comm, sums: &[ExactSum]) -> Result<Vec<f64>, AlgebraError> {
    let wire: Vec<f64> = sums.iter().flat_map(ExactSum::to_wire).collect();
    let total = comm.allreduce_det(&wire)?;
    Ok(total.chunks_exact(ExactSum::WIRE_LEN).map(|w| ExactSum::from_wire(w).value()).collect())
}

/// `Σ conj(x_i)·y_i` over all ranks.
pub fn dot(x: &FermionField, y: &FermionField, comm: &mut Comm, exec: &Executor) -> Result<Complex, AlgebraError> {
    let g = global_value(comm, &local_dot_sums(x, y, exec)?)?;
    Ok(Complex::new(g[0], g[1]))
}

pub fn norm2(x: &FermionField, comm: &mut Comm, exec: &Executor) -> Result<f64, AlgebraError> {
    Ok(global_value(comm, &[local_norm2_sum(x, exec)])?[0])
}
