use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lqcd_bench::config::expand_config;
use lqcd_bench::harness::{run_benchmark, scaling_sweep, Format, SweepConfig, SweepReport, SweepRow};
use lqcd_bench::model::{fit_model, predict, ModelOptions, ModelParams, Observation};
use lqcd_bench::paper::{check_rows, load_rows};
use lqcd_bench::record::{read_csv, CSV_HEADER};
use lqcd_bench::BenchError;
use lqcd_core::comm::TransportKind;
use lqcd_core::geometry::{Dims, GlobalLattice, ProcessGrid};

/// Lattice QCD strong-scaling benchmark.
#[derive(Parser)]
#[command(name = "bench", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time one solve on one process grid.
    Run {
        #[arg(long, default_value = "1x1x1x1")]
        grid: Dims,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Time the same solve on several grids and report speedup.
    Sweep {
        /// Comma-separated grids, e.g. 1x1x1x1,1x1x1x2.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<Dims>,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Check a reference table for internal consistency.
    ValidatePaper {
        #[arg(long)]
        table: PathBuf,
    },
    /// Predict the solver time from model parameters.
    Predict {
        /// r=FLOP/S,alpha=S,beta=S_PER_BYTE
        #[arg(long)]
        model: ModelParams,
        #[arg(long)]
        global: Dims,
        #[arg(long)]
        grid: Dims,
        #[arg(long)]
        iters: usize,
        #[command(flatten)]
        model_opts: ModelArgs,
    },
    /// Fit model parameters to a run report or reference table.
    FitModel {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        iters: usize,
        #[command(flatten)]
        model_opts: ModelArgs,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "8x8x8x16")]
    global: Dims,
    #[arg(long, default_value_t = 0.15)]
    kappa: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "concurrent")]
    transport: TransportKind,
    /// Data-parallel width inside each rank.
    #[arg(long, default_value_t = 1)]
    width: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Arms the watchdog on every blocking receive.
    #[arg(long)]
    timeout_s: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 192)]
    bytes_per_site: usize,
    /// Global reductions per CG iteration; 0 drops the reduction latency term.
    #[arg(long, default_value_t = 2)]
    reductions_per_iter: usize,
}

impl ModelArgs {
    fn options(&self) -> ModelOptions {
        ModelOptions {
            bytes_per_site: self.bytes_per_site,
            reductions_per_iter: self.reductions_per_iter,
        }
    }
}

fn sweep_config(solve: &SolveArgs, grids: &[Dims]) -> Result<SweepConfig, BenchError> {
    let global = GlobalLattice::new(solve.global.0)?;
    let grids = grids.iter().map(|g| ProcessGrid::new(g.0)).collect::<Result<Vec<_>, _>>()?;
    let timeout = match solve.timeout_s {
        Some(s) if !(s > 0.0) => return Err(BenchError::InvalidConfig("--timeout-s must be positive".into())),
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => None,
    };
    Ok(SweepConfig {
        kappa: solve.kappa,
        tol: solve.tol,
        max_iter: solve.max_iter,
        seed: solve.seed,
        transport: solve.transport,
        width: solve.width,
        timeout,
        out: solve.out.clone(),
        format: solve.format,
        ..SweepConfig::new(global, grids)
    })
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fit_rows(path: &Path) -> Result<Vec<Observation>, BenchError> {
    let text = std::fs::read_to_string(path)?;
    if text.lines().next().is_some_and(|h| h.trim() == CSV_HEADER) {
        return Ok(read_csv(text.as_bytes())?
            .into_iter()
            .map(|r| Observation {
                ranks: r.ranks,
                local: r.local(),
                time_s: r.total_time_s,
                work_flops: r.flops_total as f64,
            })
            .collect());
    }
    let rows = load_rows(path)?;
    let work = check_rows(&rows).work_gflop * 1e9;
    Ok(rows
        .iter()
        .map(|r| Observation {
            ranks: r.ranks,
            local: r.local,
            time_s: r.total_time_s,
            work_flops: work,
        })
        .collect())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { grid, solve } => {
            let cfg = sweep_config(&solve, &[grid])?;
            let record = run_benchmark(&cfg, cfg.grids[0])?;
            let report = SweepReport {
                rows: vec![SweepRow { grid: cfg.grids[0], result: Ok(record) }],
            };
            emit(&report.render(cfg.format)?, cfg.out.as_deref())?;
        }
        Command::Sweep { grids, solve } => {
            let cfg = sweep_config(&solve, &grids)?;
            let report = scaling_sweep(&cfg)?;
            emit(&report.render(cfg.format)?, cfg.out.as_deref())?;
            let worst = report.rows.into_iter().filter_map(|r| r.result.err()).max_by_key(BenchError::exit_code);
            if let Some(e) = worst {
                return Err(e.into());
            }
        }
        Command::ValidatePaper { table } => {
            let report = check_rows(&load_rows(&table)?);
            print!("{}", report.render());
            if !report.passed() {
                return Err(BenchError::Consistency(report.failures).into());
            }
        }
        Command::Predict {
            model,
            global,
            grid,
            iters,
            model_opts,
        } => {
            let global = GlobalLattice::new(global.0).map_err(BenchError::from)?;
            let grid = ProcessGrid::new(grid.0).map_err(BenchError::from)?;
            let p = predict(&model, global, grid, iters, &model_opts.options())?;
            println!("time_s,efficiency,comm_share");
            println!("{},{},{}", p.time_s, p.efficiency, p.comm_share);
        }
        Command::FitModel { rows, iters, model_opts } => {
            let obs = fit_rows(&rows)?;
            let fit = fit_model(&obs, iters, &model_opts.options()).map_err(BenchError::from)?;
            println!("r={},alpha={},beta={}", fit.params.r, fit.params.alpha, fit.params.beta);
            for (o, res) in obs.iter().zip(&fit.residuals) {
                println!("ranks {:>6}  local {:<12}  measured {:>10.4} s  residual {:+.3e}", o.ranks, o.local, o.time_s, res);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<BenchError>().map_or(2, BenchError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
