//! Multi-rank runs gathered onto rank 0 for comparison with a one-rank run.

use std::time::Duration;

use lqcd_core::algebra::{random_fermion, random_gauge, Spinor};
use lqcd_core::comm::{gather_fermion, gauge_halo_exchange, halo_exchange, run_ranks, CommError, TransportKind};
use lqcd_core::exec::Executor;
use lqcd_core::geometry::{decompose, GeometryError, GlobalLattice, Parity, ProcessGrid};
use lqcd_core::hopping::{apply_hopping, HoppingError, HoppingParams, RankCtx};
use lqcd_core::layout::Layout;
use lqcd_core::solver::{cg_solve, CGConfig, SolverError};

/// Any failure of a grid run, rendered as text.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError(pub String);

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! run_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for RunError {
            fn from(e: $t) -> Self {
                RunError(e.to_string())
            }
        }
    )*};
}

run_error_from!(CommError, GeometryError, HoppingError, SolverError);

#[derive(Debug, Clone)]
pub struct GridRun {
    pub ranks: usize,
    /// `D` applied to a random odd field, in one-rank storage order.
    pub hopping: Vec<Spinor>,
    pub iterations: usize,
    pub history: Vec<f64>,
    /// CG flops summed over ranks.
    pub flops: u64,
}

/// Seeds gauge and fields, applies `D` once and runs CG, all on `grid`.
pub fn run_on_grid(global: [usize; 4], grid: [usize; 4], seed: u64, kappa: f64, cfg: CGConfig) -> Result<GridRun, RunError> {
    let global = GlobalLattice::new(global)?;
    let grid = ProcessGrid::new(grid)?;
    let decomp = decompose(global, grid)?;
    let params = HoppingParams::new(kappa);
    let kind = if grid.ranks() == 1 { TransportKind::Serial } else { TransportKind::Concurrent };
    let out = run_ranks(grid, kind, Some(Duration::from_secs(120)), |comm| {
        let layout = Layout::new(decomp, comm.rank())?;
        let mut g = random_gauge(&layout, seed);
        gauge_halo_exchange(&mut g, comm)?;
        let mut x = random_fermion(&layout, Parity::Odd, seed + 1);
        halo_exchange(&mut x, comm)?;
        let mut ctx = RankCtx::new(comm, Executor::sequential());
        let dx = apply_hopping(&g, &x, &params, &ctx.exec, &mut ctx.flops)?;
        let hopping = gather_fermion(&dx, ctx.comm)?;

        let b = random_fermion(&layout, Parity::Even, seed + 2);
        let res = cg_solve(&g, &b, &params, &cfg, &mut ctx)?;
        let flops = ctx.comm.allreduce_det(&[res.flops as f64])?[0] as u64;
        Ok::<_, RunError>((hopping, res.iterations, res.residual_history, flops))
    })?;
    let (hopping, iterations, history, flops) = out.into_iter().next().expect("rank 0 result");
    Ok(GridRun {
        ranks: grid.ranks(),
        hopping: hopping.expect("rank 0 gathers"),
        iterations,
        history,
        flops,
    })
}

/// Largest per-entry relative difference between two residual histories.
pub fn history_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0, f64::max)
}
