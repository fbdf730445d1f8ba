//! Timed solves across rank counts.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use lqcd_core::algebra::{random_fermion, random_gauge, AlgebraError};
use lqcd_core::comm::{gauge_halo_exchange, run_ranks, Comm, CommError, TransportKind};
use lqcd_core::exec::Executor;
use lqcd_core::geometry::{decompose, GlobalLattice, Parity, ProcessGrid};
use lqcd_core::hopping::{EvenOddOperator, HoppingError, HoppingParams, RankCtx};
use lqcd_core::layout::Layout;
use lqcd_core::solver::{cg_solve_with, CGConfig, SolverError};

use crate::record::{render_json, render_markdown, scaling_columns, write_csv, RunRecord};
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Md,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "md" => Ok(Format::Md),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}; expected csv, md or json")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub global: GlobalLattice,
    pub grids: Vec<ProcessGrid>,
    pub kappa: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub transport: TransportKind,
    pub width: usize,
    pub timeout: Option<Duration>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl SweepConfig {
    pub fn new(global: GlobalLattice, grids: Vec<ProcessGrid>) -> Self {
        Self {
            global,
            grids,
            kappa: 0.15,
            tol: 1e-8,
            max_iter: 10_000,
            seed: 7,
            transport: TransportKind::Concurrent,
            width: 1,
            timeout: None,
            out: None,
            format: Format::Csv,
        }
    }

    pub fn cg(&self) -> CGConfig {
        CGConfig {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

struct RankOutcome {
    iterations: usize,
    flops: u64,
    elapsed_s: f64,
}

#[derive(Debug)]
enum RankError {
    Comm(CommError),
    Solver(SolverError),
}

impl From<CommError> for RankError {
    fn from(e: CommError) -> Self {
        RankError::Comm(e)
    }
}

impl From<SolverError> for RankError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Hopping(HoppingError::Comm(c)) => RankError::Comm(c),
            SolverError::Algebra(AlgebraError::Comm(c)) => RankError::Comm(c),
            SolverError::Hopping(HoppingError::Algebra(AlgebraError::Comm(c))) => RankError::Comm(c),
            other => RankError::Solver(other),
        }
    }
}

impl From<RankError> for BenchError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::Comm(CommError::Timeout { stalled, waited }) => BenchError::Timeout(format!("{stalled} for {waited:?}")),
            RankError::Comm(c) => BenchError::Comm(c),
            RankError::Solver(s) => BenchError::SolveFailed(s.to_string()),
        }
    }
}

fn solve_on_rank(comm: &mut Comm, cfg: &SweepConfig, layout: std::sync::Arc<Layout>) -> Result<RankOutcome, RankError> {
    let mut gauge = random_gauge(&layout, cfg.seed);
    gauge_halo_exchange(&mut gauge, comm)?;
    let b = random_fermion(&layout, Parity::Even, cfg.seed.wrapping_add(1));
    let mut op = EvenOddOperator::new(&gauge, HoppingParams::new(cfg.kappa));
    let mut ctx = RankCtx::new(comm, Executor::new(cfg.width));
    // Setup above is excluded from the timing.
    ctx.comm.barrier()?;
    let start = Instant::now();
    let res = cg_solve_with(&mut op, &b, &cfg.cg(), &mut ctx)?;
    ctx.comm.barrier()?;
    Ok(RankOutcome {
        iterations: res.iterations,
        flops: res.flops,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// Times one solve on `grid`. The decomposition is checked before any
/// rank is started.
pub fn run_benchmark(cfg: &SweepConfig, grid: ProcessGrid) -> Result<RunRecord, BenchError> {
    let decomp = decompose(cfg.global, grid)?;
    let outcomes = run_ranks(grid, cfg.transport, cfg.timeout, |comm| {
        let layout = Layout::new(decomp, comm.rank())?;
        solve_on_rank(comm, cfg, layout)
    })?;
    let iterations = outcomes[0].iterations;
    if outcomes.iter().any(|o| o.iterations != iterations) {
        return Err(BenchError::Consistency(vec!["ranks disagree on the iteration count".into()]));
    }
    let flops_total = outcomes.iter().map(|o| o.flops).sum();
    let elapsed = outcomes.iter().map(|o| o.elapsed_s).fold(0.0, f64::max);
    let record = RunRecord::new(decomp.ranks(), cfg.width, decomp.local, iterations, elapsed, flops_total);
    record.validate(Some(cfg.global))?;
    Ok(record)
}

#[derive(Debug)]
pub struct SweepRow {
    pub grid: ProcessGrid,
    pub result: Result<RunRecord, BenchError>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn records(&self) -> Vec<RunRecord> {
        self.rows.iter().filter_map(|r| r.result.as_ref().ok().cloned()).collect()
    }

    pub fn failures(&self) -> Vec<(ProcessGrid, &BenchError)> {
        self.rows.iter().filter_map(|r| r.result.as_ref().err().map(|e| (r.grid, e))).collect()
    }

    /// `(speedup, efficiency)` of each successful row against the smallest
    /// rank count.
    pub fn scaling(&self) -> Vec<(f64, f64)> {
        scaling_columns(&self.records().iter().map(|r| (r.ranks, r.total_time_s)).collect::<Vec<_>>())
    }

    /// Distinct flop totals across the successful rows; a strong-scaling
    /// sweep should have exactly one.
    pub fn distinct_flops(&self) -> Vec<u64> {
        let mut f: Vec<u64> = self.records().iter().map(|r| r.flops_total).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn render(&self, format: Format) -> Result<String, BenchError> {
        let records = self.records();
        let mut out = match format {
            Format::Csv => {
                let mut buf = Vec::new();
                write_csv(&mut buf, &records)?;
                String::from_utf8(buf).expect("csv is utf-8")
            }
            Format::Md => render_markdown(&records),
            Format::Json => render_json(&records)?,
        };
        if format == Format::Md {
            for (grid, err) in self.failures() {
                out += &format!("grid {}: {err}\n", grid.dims());
            }
        }
        Ok(out)
    }
}

/// Runs every grid in turn. A failing grid is recorded and the sweep moves
/// on.
pub fn scaling_sweep(cfg: &SweepConfig) -> Result<SweepReport, BenchError> {
    if cfg.grids.is_empty() {
        return Err(BenchError::InvalidConfig("sweep needs at least one grid".into()));
    }
    let rows = cfg
        .grids
        .iter()
        .map(|&grid| SweepRow {
            grid,
            result: run_benchmark(cfg, grid),
        })
        .collect();
    Ok(SweepReport { rows })
}
