//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any FAIL.

use std::sync::Arc;
use std::time::{Duration, Instant};

use lqcd_bench::harness::{scaling_sweep, Format, SweepConfig};
use lqcd_bench::model::{fit_model, predict_time, work_flops, ModelOptions, ModelParams, Observation};
use lqcd_bench::paper::{check_rows, parse_rows, TABLE1, TABLE2};
use lqcd_bench::record::CSV_HEADER;
use lqcd_core::algebra::{random_fermion, random_gauge, unit_gauge, FermionField, GaugeField, Spinor};
use lqcd_core::comm::{gauge_halo_exchange, halo_exchange, Comm, TransportKind};
use lqcd_core::exec::Executor;
use lqcd_core::geometry::{decompose, GlobalLattice, Parity, ProcessGrid};
use lqcd_core::hopping::{apply_hopping, apply_normal, apply_preconditioned, FlopCounter, HoppingParams, RankCtx};
use lqcd_core::layout::Layout;
use lqcd_core::solver::{cg_solve, true_residual, CGConfig};
use lqcd_testkit::runs::{history_deviation, run_on_grid};
use lqcd_testkit::{checks, dense_solve, hopping_matrix, max_rel_err, preconditioned_matrix, to_vector};
use num_complex::Complex64;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn small_system(seed: u64) -> (Arc<Layout>, GaugeField) {
    let layout = Layout::single(GlobalLattice::new([4, 4, 4, 4]).unwrap());
    let mut g = random_gauge(&layout, seed);
    gauge_halo_exchange(&mut g, &mut Comm::serial()).unwrap();
    (layout, g)
}

fn dense_oracle() -> Outcome {
    let (layout, g) = small_system(101);
    let params = HoppingParams::new(0.15);
    let mut comm = Comm::serial();
    let mut worst: f64 = 0.0;
    for p in [Parity::Even, Parity::Odd] {
        let mut x = random_fermion(&layout, p, 5);
        halo_exchange(&mut x, &mut comm).map_err(|e| e.to_string())?;
        let out = apply_hopping(&g, &x, &params, &Executor::sequential(), &mut FlopCounter::new()).map_err(|e| e.to_string())?;
        let dense = hopping_matrix(&g, &params, p.flip(), false);
        worst = worst.max(max_rel_err(&to_vector(&out), &(&dense * &to_vector(&x))));
    }
    let m = preconditioned_matrix(&g, &params, false);
    let m_dag = preconditioned_matrix(&g, &params, true);
    let mut x = random_fermion(&layout, Parity::Even, 6);
    let xv = to_vector(&x);
    let mut ctx = RankCtx::new(&mut comm, Executor::sequential());
    let out = apply_preconditioned(&g, &mut x, &params, &mut ctx).map_err(|e| e.to_string())?;
    worst = worst.max(max_rel_err(&to_vector(&out), &(&m * &xv)));
    let out = apply_normal(&g, &mut x, &params, &mut ctx).map_err(|e| e.to_string())?;
    worst = worst.max(max_rel_err(&to_vector(&out), &(&m_dag * (&m * &xv))));
    ensure(worst <= 1e-12, || format!("max rel err {worst:.2e} > 1e-12"))?;
    Ok(format!("max rel err {worst:.2e}"))
}

fn cg_vs_dense() -> Outcome {
    let (layout, g) = small_system(101);
    let params = HoppingParams::new(0.15);
    let b = random_fermion(&layout, Parity::Even, 8);
    let exact = dense_solve(&preconditioned_matrix(&g, &params, false), &to_vector(&b));
    let mut comm = Comm::serial();
    let mut ctx = RankCtx::new(&mut comm, Executor::sequential());
    let cfg = CGConfig { tol: 1e-10, max_iter: 5000 };
    let res = cg_solve(&g, &b, &params, &cfg, &mut ctx).map_err(|e| e.to_string())?;
    let rel = (&to_vector(&res.solution) - &exact).norm() / exact.norm();
    let tr = true_residual(&g, &res.solution, &b, &params, &mut ctx).map_err(|e| e.to_string())?;
    ensure(rel <= 1e-6, || format!("solution differs by {rel:.2e}"))?;
    ensure(tr <= 2.0 * cfg.tol, || format!("true residual {tr:.2e} > 2e-10"))?;
    Ok(format!("{} iterations, solution rel err {rel:.2e}, true residual {tr:.2e}", res.iterations))
}

fn rank_invariance() -> Outcome {
    let global = [8, 8, 8, 16];
    let cfg = CGConfig { tol: 1e-8, max_iter: 2000 };
    let reference = run_on_grid(global, [1, 1, 1, 1], 7, 0.15, cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for grid in [[1, 1, 1, 2], [1, 1, 2, 2], [1, 2, 2, 2], [2, 2, 2, 2]] {
        let run = run_on_grid(global, grid, 7, 0.15, cfg).map_err(|e| e.to_string())?;
        ensure(run.hopping == reference.hopping, || format!("{} ranks: hopping output not bitwise identical", run.ranks))?;
        ensure(run.iterations == reference.iterations, || {
            format!("{} ranks: {} iterations vs {}", run.ranks, run.iterations, reference.iterations)
        })?;
        let dev = history_deviation(&run.history, &reference.history);
        ensure(dev <= 1e-10, || format!("{} ranks: history deviation {dev:.2e}", run.ranks))?;
        worst = worst.max(dev);
    }
    Ok(format!("1..16 ranks, {} iterations, max history deviation {worst:.1e}", reference.iterations))
}

fn reference_tables() -> Outcome {
    let mut details = Vec::new();
    for (name, text, expected) in [("table 1", TABLE1, 1.510e7), ("table 2", TABLE2, 2.256e5)] {
        let rows = parse_rows(text).map_err(|e| e.to_string())?;
        let report = check_rows(&rows);
        ensure(report.passed(), || format!("{name}: {}", report.failures.join("; ")))?;
        // Quoted to four significant figures.
        ensure((report.work_gflop - expected).abs() <= 5e-4 * expected, || {
            format!("{name}: W = {:.4e}, expected {expected:.3e}", report.work_gflop)
        })?;
        details.push(format!("{name} W = {:.4e} Gflop (spread {:.3}%)", report.work_gflop, 100.0 * report.work_spread));
    }
    let t1 = parse_rows(TABLE1).map_err(|e| e.to_string())?;
    let r = &t1[3];
    let computed = r.cores as f64 * r.mflops_per_core / 1000.0;
    ensure((computed - 9088.72).abs() / 9088.72 <= 5e-4, || format!("8192 · 1109.46 / 1000 = {computed}"))?;
    Ok(details.join(", "))
}

fn free_field() -> Outcome {
    let layout = Layout::single(GlobalLattice::new([4, 4, 4, 4]).unwrap());
    let mut comm = Comm::serial();
    let mut g = unit_gauge(&layout);
    gauge_halo_exchange(&mut g, &mut comm).map_err(|e| e.to_string())?;
    let psi0 = Spinor::from_fn(|s, c| Complex64::new(0.3 + s as f64, 1.0 - 0.4 * c as f64));
    let params = HoppingParams::periodic(0.125);
    let target = (8.0 * psi0).norm2().sqrt();
    let mut worst: f64 = 0.0;
    for p in [Parity::Even, Parity::Odd] {
        let mut x = FermionField::from_global_fn(&layout, p, |_| psi0);
        halo_exchange(&mut x, &mut comm).map_err(|e| e.to_string())?;
        let out = apply_hopping(&g, &x, &params, &Executor::sequential(), &mut FlopCounter::new()).map_err(|e| e.to_string())?;
        for s in out.sites() {
            worst = worst.max((*s - 8.0 * psi0).norm2().sqrt() / target);
        }
    }
    ensure(worst <= 1e-13, || format!("D ψ0 deviates from 8 ψ0 by {worst:.2e}"))?;
    let mut x = FermionField::from_global_fn(&layout, Parity::Even, |_| psi0);
    let mut ctx = RankCtx::new(&mut comm, Executor::sequential());
    let out = apply_preconditioned(&g, &mut x, &params, &mut ctx).map_err(|e| e.to_string())?;
    let norm = |f: &FermionField| f.sites().iter().map(Spinor::norm2).sum::<f64>().sqrt();
    let ratio = norm(&out) / norm(&x);
    ensure(ratio <= 1e-12, || format!("‖M̂ψ0‖/‖ψ0‖ = {ratio:.2e}"))?;
    Ok(format!("D ψ0 = 8 ψ0 to {worst:.1e}, ‖M̂ψ0‖/‖ψ0‖ = {ratio:.1e}"))
}

fn property_suite() -> Outcome {
    let suites: [(&str, fn(usize, u64) -> Result<usize, String>, usize); 5] = [
        ("gamma", checks::gamma_properties, 1000),
        ("hermiticity", checks::gamma_hermiticity, 1000),
        ("su3", checks::su3_properties, 5000),
        ("vector", checks::vector_axioms, 1000),
        ("adjoint", checks::adjoint_consistency, 1000),
    ];
    let mut counts = Vec::new();
    for (name, check, samples) in suites {
        let n = check(samples, 2024).map_err(|e| format!("{name}: {e}"))?;
        counts.push(format!("{name} {n}"));
    }
    Ok(counts.join(", "))
}

/// Returns the main outcome and, when the machine has too few cores for the
/// speedup gate, the measured speedup to report as skipped.
fn desk_scaling() -> (Outcome, Option<String>) {
    let global = GlobalLattice::new([16, 16, 16, 32]).unwrap();
    let grids = [[1, 1, 1, 1], [1, 1, 1, 2], [1, 1, 2, 2]].map(|g| ProcessGrid::new(g).unwrap()).to_vec();
    let mut cfg = SweepConfig::new(global, grids);
    cfg.transport = TransportKind::Concurrent;
    cfg.timeout = Some(Duration::from_secs(300));
    let report = match scaling_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), None),
    };
    let check = || -> Outcome {
        if let Some((grid, e)) = report.failures().first() {
            return Err(format!("grid {}: {e}", grid.dims()));
        }
        let flops = report.distinct_flops();
        ensure(flops.len() == 1, || format!("flops_total differs across rows: {flops:?}"))?;
        let csv = report.render(Format::Csv).map_err(|e| e.to_string())?;
        ensure(csv.lines().next() == Some(CSV_HEADER), || "csv header mismatch".into())?;
        let md = report.render(Format::Md).map_err(|e| e.to_string())?;
        let header = md.lines().next().unwrap_or("");
        let order = ["# Ranks", "Local Lattice", "Total Time [s]", "Mean Perf. per Rank", "Overall Perf. [Gflop/s]"];
        let pos: Option<Vec<usize>> = order.iter().map(|h| header.find(h)).collect();
        ensure(pos.is_some_and(|p| p.windows(2).all(|w| w[0] < w[1])), || "report columns out of order".into())?;
        Ok(format!("flops_total {} on every row, {} iterations", flops[0], report.records()[0].iterations))
    };
    let outcome = check();
    let Some(&(speedup4, _)) = report.scaling().last() else {
        return (outcome, None);
    };
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores >= 4 {
        let gated = outcome.and_then(|d| {
            ensure(speedup4 >= 2.0, || format!("speedup(4) = {speedup4:.3} < 2.0"))?;
            Ok(format!("{d}, speedup(4) {speedup4:.3}"))
        });
        (gated, None)
    } else {
        (outcome, Some(format!("speedup(4) >= 2.0 needs >= 4 cores, {cores} available; measured {speedup4:.3}")))
    }
}

/// Fits the first three rows of the second reference table and predicts the
/// fourth, with and without the reduction latency term.
fn negative_scaling() -> Outcome {
    let rows = parse_rows(TABLE2).map_err(|e| e.to_string())?;
    let work = check_rows(&rows).work_gflop * 1e9;
    let obs: Vec<Observation> = rows
        .iter()
        .map(|r| Observation {
            ranks: r.ranks,
            local: r.local,
            time_s: r.total_time_s,
            work_flops: work,
        })
        .collect();
    // The prediction does not depend on the nominal iteration count.
    let iters = 1000;
    let predict = |opts: &ModelOptions| -> Result<(f64, f64), String> {
        let fit = fit_model(&obs[..3], iters, opts).map_err(|e| e.to_string())?;
        let t = |o: &Observation| predict_time(&fit.params, o.ranks, o.local, o.work_flops, iters, opts);
        Ok((t(&obs[2]), t(&obs[3])))
    };
    let (t3, t4) = predict(&ModelOptions::default())?;
    let (l3, l4) = predict(&ModelOptions {
        reductions_per_iter: 0,
        ..ModelOptions::default()
    })?;
    ensure(t4 > t3, || format!("T(131072) = {t4:.2} s <= T(65536) = {t3:.2} s"))?;
    Ok(format!(
        "T(65536) = {t3:.2} s, T(131072) = {t4:.2} s; without reduction term {l3:.2} s -> {l4:.2} s"
    ))
}

fn round_trip_fit() -> Outcome {
    let truth = ModelParams {
        r: 1.7e9,
        alpha: 3e-6,
        beta: 5e-10,
    };
    let global = GlobalLattice::new([32, 32, 32, 64]).unwrap();
    let opts = ModelOptions::default();
    let iters = 400;
    let work = work_flops(global, iters);
    let obs: Vec<Observation> = [[1, 1, 1, 1], [1, 1, 2, 2], [2, 2, 2, 2], [2, 2, 4, 4], [4, 4, 4, 8]]
        .into_iter()
        .map(|g| {
            let d = decompose(global, ProcessGrid::new(g).unwrap()).unwrap();
            Observation {
                ranks: d.ranks(),
                local: d.local,
                time_s: predict_time(&truth, d.ranks(), d.local, work, iters, &opts),
                work_flops: work,
            }
        })
        .collect();
    let fit = fit_model(&obs, iters, &opts).map_err(|e| e.to_string())?;
    let errs = [
        (fit.params.r - truth.r) / truth.r,
        (fit.params.alpha - truth.alpha) / truth.alpha,
        (fit.params.beta - truth.beta) / truth.beta,
    ];
    let worst = errs.iter().map(|e| e.abs()).fold(0.0, f64::max);
    ensure(worst <= 0.01, || format!("parameter error {worst:.2e} > 1%"))?;
    Ok(format!("max parameter error {worst:.1e}"))
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
}

fn report(c: &Criterion, outcome: Outcome, elapsed: Duration) -> bool {
    let secs = elapsed.as_secs_f64();
    let outcome = outcome.and_then(|d| {
        ensure(elapsed <= c.budget, || format!("{d}; took {secs:.2} s, budget {} s", c.budget.as_secs()))?;
        Ok(d)
    });
    match &outcome {
        Ok(d) => println!("PASS {} {}: {d} ({secs:.2} s)", c.id, c.name),
        Err(e) => println!("FAIL {} {}: {e} ({secs:.2} s)", c.id, c.name),
    }
    outcome.is_ok()
}

fn main() {
    let checks: [(Criterion, fn() -> Outcome); 8] = [
        (Criterion { id: 1, name: "dense oracle", budget: Duration::from_secs(30) }, dense_oracle),
        (Criterion { id: 2, name: "cg vs dense solve", budget: Duration::from_secs(30) }, cg_vs_dense),
        (Criterion { id: 3, name: "rank-count invariance", budget: Duration::from_secs(120) }, rank_invariance),
        (Criterion { id: 4, name: "reference tables", budget: Duration::from_secs(1) }, reference_tables),
        (Criterion { id: 5, name: "free field", budget: Duration::from_secs(5) }, free_field),
        (Criterion { id: 6, name: "property suite", budget: Duration::from_secs(10) }, property_suite),
        (Criterion { id: 8, name: "model negative scaling", budget: Duration::from_secs(1) }, negative_scaling),
        (Criterion { id: 9, name: "round-trip fit", budget: Duration::from_secs(1) }, round_trip_fit),
    ];
    let mut ok = true;
    for (c, f) in checks.iter().take(6) {
        let start = Instant::now();
        let outcome = f();
        ok &= report(c, outcome, start.elapsed());
    }

    let c7 = Criterion { id: 7, name: "desk-scale strong scaling", budget: Duration::from_secs(600) };
    let start = Instant::now();
    let (outcome, skipped) = desk_scaling();
    ok &= report(&c7, outcome, start.elapsed());
    if let Some(s) = skipped {
        println!("SKIP 7 {}: {s}", c7.name);
    }

    for (c, f) in checks.iter().skip(6) {
        let start = Instant::now();
        let outcome = f();
        ok &= report(c, outcome, start.elapsed());
    }
    if !ok {
        std::process::exit(1);
    }
}
