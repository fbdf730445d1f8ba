//! Bundled reference measurements and their internal consistency checks.
//!
//! Each data file lists one row per job: the core count, MPI tasks and
//! threads per task, the local lattice, the solver time, the mean rate per
//! core and the overall rate. Two identities must hold: the overall rate is
//! the per-core rate times the core count, and the total work `time × rate`
//! is the same for every row of a strong-scaling table.

use std::path::Path;

use lqcd_core::geometry::{decompose, Dims, GlobalLattice, ProcessGrid};
use serde::Deserialize;

use crate::record::scaling_columns;
use crate::BenchError;

/// Relative tolerance of `overall = cores · per_core / 1000`.
pub const ROW_TOLERANCE: f64 = 5e-4;
/// Relative spread allowed in the total work of one table.
pub const WORK_TOLERANCE: f64 = 1e-3;

pub const TABLE1: &str = include_str!("../data/table1.csv");
pub const TABLE2: &str = include_str!("../data/table2.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct PaperRow {
    pub table: u8,
    pub global: GlobalLattice,
    pub cores: usize,
    /// Message-passing ranks; `cores / threads`.
    pub ranks: usize,
    pub threads: usize,
    pub local: Dims,
    pub total_time_s: f64,
    pub mflops_per_core: f64,
    pub gflops_overall: f64,
}

#[derive(Deserialize)]
struct RawRow {
    table: u8,
    global: String,
    cores: usize,
    tasks: usize,
    threads: usize,
    local: String,
    total_time_s: f64,
    mflops_per_core: f64,
    gflops_overall: f64,
}

impl PaperRow {
    /// Total work in Gflop implied by the row.
    pub fn work_gflop(&self) -> f64 {
        self.total_time_s * self.gflops_overall
    }
}

pub fn parse_rows(text: &str) -> Result<Vec<PaperRow>, BenchError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, raw) in rdr.deserialize::<RawRow>().enumerate() {
        let raw = raw?;
        let bad = |what: String| BenchError::Parse(format!("row {}: {what}", i + 1));
        let global: Dims = raw.global.parse().map_err(|e| bad(format!("{e}")))?;
        let global = GlobalLattice::new(global.0).map_err(|e| bad(e.to_string()))?;
        let local: Dims = raw.local.parse().map_err(|e| bad(format!("{e}")))?;
        if raw.tasks * raw.threads != raw.cores {
            return Err(bad(format!("{} tasks × {} threads != {} cores", raw.tasks, raw.threads, raw.cores)));
        }
        let grid: [usize; 4] = std::array::from_fn(|mu| global.dims().0[mu] / local.0[mu].max(1));
        let decomp = ProcessGrid::new(grid).and_then(|g| decompose(global, g)).map_err(|e| bad(e.to_string()))?;
        if decomp.local != local || decomp.ranks() != raw.tasks {
            return Err(bad(format!("{} tasks of {local} do not tile {}", raw.tasks, global.dims())));
        }
        rows.push(PaperRow {
            table: raw.table,
            global,
            cores: raw.cores,
            ranks: raw.tasks,
            threads: raw.threads,
            local,
            total_time_s: raw.total_time_s,
            mflops_per_core: raw.mflops_per_core,
            gflops_overall: raw.gflops_overall,
        });
    }
    if rows.is_empty() {
        return Err(BenchError::Parse("no rows".into()));
    }
    Ok(rows)
}

pub fn load_rows(path: &Path) -> Result<Vec<PaperRow>, BenchError> {
    parse_rows(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowCheck {
    pub cores: usize,
    /// `cores · per_core / 1000`.
    pub computed_gflops: f64,
    pub reported_gflops: f64,
    pub rel_error: f64,
    pub work_gflop: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaperReport {
    pub rows: Vec<RowCheck>,
    /// Mean total work over the rows, in Gflop.
    pub work_gflop: f64,
    /// `(max − min) / mean` of the per-row work.
    pub work_spread: f64,
    pub failures: Vec<String>,
}

impl PaperReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("cores,computed_gflops,reported_gflops,rel_error,work_gflop,speedup,efficiency\n");
        for r in &self.rows {
            out += &format!(
                "{},{:.2},{:.2},{:.2e},{:.6e},{:.3},{:.1}%\n",
                r.cores,
                r.computed_gflops,
                r.reported_gflops,
                r.rel_error,
                r.work_gflop,
                r.speedup,
                100.0 * r.efficiency
            );
        }
        out += &format!("W = {:.6e} Gflop (spread {:.3}%)\n", self.work_gflop, 100.0 * self.work_spread);
        out += if self.passed() { "consistent\n" } else { "INCONSISTENT\n" };
        for f in &self.failures {
            out += &format!("  {f}\n");
        }
        out
    }
}

/// Checks the rate identity per row and the constant total work per table.
pub fn check_rows(rows: &[PaperRow]) -> PaperReport {
    let scaling = scaling_columns(&rows.iter().map(|r| (r.cores, r.total_time_s)).collect::<Vec<_>>());
    let mut failures = Vec::new();
    let checks: Vec<RowCheck> = rows
        .iter()
        .zip(scaling)
        .map(|(r, (speedup, efficiency))| {
            let computed = r.cores as f64 * r.mflops_per_core / 1000.0;
            let rel_error = (computed - r.gflops_overall).abs() / r.gflops_overall;
            if rel_error > ROW_TOLERANCE {
                failures.push(format!(
                    "{} cores: {} · {} / 1000 = {computed:.2} vs reported {} ({:.3}%)",
                    r.cores,
                    r.cores,
                    r.mflops_per_core,
                    r.gflops_overall,
                    100.0 * rel_error
                ));
            }
            RowCheck {
                cores: r.cores,
                computed_gflops: computed,
                reported_gflops: r.gflops_overall,
                rel_error,
                work_gflop: r.work_gflop(),
                speedup,
                efficiency,
            }
        })
        .collect();
    let works: Vec<f64> = checks.iter().map(|c| c.work_gflop).collect();
    let mean = works.iter().sum::<f64>() / works.len() as f64;
    let (lo, hi) = works.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
    let spread = (hi - lo) / mean;
    if spread > WORK_TOLERANCE {
        failures.push(format!("total work varies by {:.3}% across rows", 100.0 * spread));
    }
    PaperReport {
        rows: checks,
        work_gflop: mean,
        work_spread: spread,
        failures,
    }
}

/// Parses and checks one table file; a violation is an error carrying the
/// failing rows.
pub fn validate_paper(path: &Path) -> Result<PaperReport, BenchError> {
    let report = check_rows(&load_rows(path)?);
    if report.passed() {
        Ok(report)
    } else {
        Err(BenchError::Consistency(report.failures))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tables_parse_verbatim() {
        let t1 = parse_rows(TABLE1).unwrap();
        let t2 = parse_rows(TABLE2).unwrap();
        assert_eq!(t1.len(), 5);
        assert_eq!(t2.len(), 4);
        assert_eq!(t1[3].cores, 8192);
        assert_eq!(t1[3].mflops_per_core, 1109.46);
        assert_eq!(t1[3].gflops_overall, 9088.72);
        assert_eq!(t2[3].ranks, 16384);
        assert_eq!(t2[3].local, Dims([8, 8, 4, 6]));
        assert!(t2.iter().all(|r| r.threads == 8));
    }

    #[test]
    fn rejects_rows_that_do_not_tile() {
        let bad = TABLE1.replace("96x12x12x12", "96x12x12x24");
        assert!(matches!(parse_rows(&bad), Err(BenchError::Parse(_))));
        let bad = TABLE2.replace("1024,8", "1000,8");
        assert!(matches!(parse_rows(&bad), Err(BenchError::Parse(_))));
    }

    #[test]
    fn perturbed_rate_is_flagged() {
        let mut rows = parse_rows(TABLE1).unwrap();
        rows[2].gflops_overall *= 1.01;
        let report = check_rows(&rows);
        assert!(!report.passed());
        assert!(report.failures[0].starts_with("4096 cores"));
    }
}
