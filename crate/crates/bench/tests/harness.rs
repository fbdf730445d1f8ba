use lqcd_bench::harness::{run_benchmark, scaling_sweep, Format, SweepConfig};
use lqcd_bench::paper::{check_rows, parse_rows, TABLE1, TABLE2};
use lqcd_bench::record::{read_csv, scaling_columns};
use lqcd_bench::BenchError;
use lqcd_core::comm::TransportKind;
use lqcd_core::geometry::{GeometryError, GlobalLattice, ProcessGrid};

fn global() -> GlobalLattice {
    GlobalLattice::new([8, 8, 8, 16]).unwrap()
}

fn grids(list: &[[usize; 4]]) -> Vec<ProcessGrid> {
    list.iter().map(|&g| ProcessGrid::new(g).unwrap()).collect()
}

#[test]
fn sweep_does_identical_work_on_every_grid() {
    let cfg = SweepConfig::new(global(), grids(&[[1, 1, 1, 1], [1, 1, 1, 2], [1, 1, 2, 2], [1, 2, 2, 2]]));
    let report = scaling_sweep(&cfg).unwrap();
    assert!(report.failures().is_empty());
    let records = report.records();
    assert_eq!(records.iter().map(|r| r.ranks).collect::<Vec<_>>(), [1, 2, 4, 8]);
    assert!(records.iter().all(|r| r.iterations == records[0].iterations));
    assert_eq!(report.distinct_flops().len(), 1);
    for r in &records {
        r.validate(Some(global())).unwrap();
    }
    let csv = report.render(Format::Csv).unwrap();
    assert_eq!(read_csv(csv.as_bytes()).unwrap(), records);
    assert_eq!(report.scaling()[0], (1.0, 1.0));
}

#[test]
fn failing_grid_is_recorded_and_sweep_continues() {
    let cfg = SweepConfig::new(global(), grids(&[[5, 1, 1, 1], [1, 1, 1, 2]]));
    let report = scaling_sweep(&cfg).unwrap();
    let failures = report.failures();
    assert_eq!(failures.len(), 1);
    assert!(matches!(
        failures[0].1,
        BenchError::Geometry(GeometryError::NonDivisible { axis: 0, global: 8, grid: 5 })
    ));
    assert_eq!(report.records().len(), 1);
    assert!(report.render(Format::Md).unwrap().contains("grid 5x1x1x1"));
}

#[test]
fn serial_transport_rejects_multiple_ranks() {
    let mut cfg = SweepConfig::new(global(), grids(&[[1, 1, 1, 2]]));
    cfg.transport = TransportKind::Serial;
    let err = run_benchmark(&cfg, cfg.grids[0]).unwrap_err();
    assert!(matches!(err, BenchError::Comm(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unconverged_solve_is_a_failure() {
    let mut cfg = SweepConfig::new(global(), grids(&[[1, 1, 1, 1]]));
    cfg.max_iter = 3;
    let err = run_benchmark(&cfg, cfg.grids[0]).unwrap_err();
    assert!(matches!(err, BenchError::SolveFailed(_)), "{err}");
}

#[test]
fn width_does_not_change_the_record() {
    let mut cfg = SweepConfig::new(global(), grids(&[[1, 1, 1, 2]]));
    let a = run_benchmark(&cfg, cfg.grids[0]).unwrap();
    cfg.width = 3;
    let b = run_benchmark(&cfg, cfg.grids[0]).unwrap();
    assert_eq!((a.iterations, a.flops_total), (b.iterations, b.flops_total));
    assert_eq!(b.width, 3);
}

#[test]
fn reference_scaling_columns() {
    // Largest job against the smallest: T0 / Tn and T0 / (16 Tn).
    for (text, t0, tn, speedup, efficiency) in
        [(TABLE1, 8096.74, 1298.62, 6.2349, 0.38968), (TABLE2, 29.62, 10.45, 2.8344, 0.17715)]
    {
        let rows = parse_rows(text).unwrap();
        let cols = scaling_columns(&rows.iter().map(|r| (r.cores, r.total_time_s)).collect::<Vec<_>>());
        let (s, e): (f64, f64) = *cols.last().unwrap();
        assert_eq!(s, t0 / tn);
        assert_eq!(e, t0 / tn / 16.0);
        assert!((s - speedup).abs() < 1e-4 && (e - efficiency).abs() < 1e-5);
    }
}

#[test]
fn reference_tables_are_consistent() {
    for (text, w) in [(TABLE1, 8096.74 * 1865.15), (TABLE2, 29.62 * 7619.30)] {
        let report = check_rows(&parse_rows(text).unwrap());
        assert!(report.passed(), "{:?}", report.failures);
        assert!((report.work_gflop - w).abs() <= 1e-3 * w);
    }
}
