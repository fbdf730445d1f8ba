//! Per-run records and the reports built from them.

use std::fmt::Write as _;
use std::io::{Read, Write};

use lqcd_core::geometry::{decompose, Dims, GlobalLattice, ProcessGrid};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Exact CSV header of a run report.
pub const CSV_HEADER: &str = "ranks,width,lx,ly,lz,lt,iterations,total_time_s,flops_total,mflops_per_rank,gflops_overall";

/// Printed with every report so rates can be compared with other codes.
pub const FLOP_CONVENTION: &str = "flop convention: 1320 per output site per hopping application; \
complex axpy 8, dot 8, norm2 4 per element; double precision";

pub const GAUGE_NOTE: &str = "gauge field: synthetic, seeded random SU(3) links";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub ranks: usize,
    /// In-rank data-parallel width.
    pub width: usize,
    pub lx: usize,
    pub ly: usize,
    pub lz: usize,
    pub lt: usize,
    pub iterations: usize,
    pub total_time_s: f64,
    pub flops_total: u64,
    pub mflops_per_rank: f64,
    pub gflops_overall: f64,
}

impl RunRecord {
    /// Builds a record from the measured quantities. The overall rate is
    /// computed from the per-rank one so `gflops = ranks · mflops / 1000`
    /// holds exactly.
    pub fn new(ranks: usize, width: usize, local: Dims, iterations: usize, total_time_s: f64, flops_total: u64) -> Self {
        let mflops_per_rank = flops_total as f64 / (ranks as f64 * total_time_s * 1e6);
        let [lx, ly, lz, lt] = local.0;
        Self {
            ranks,
            width,
            lx,
            ly,
            lz,
            lt,
            iterations,
            total_time_s,
            flops_total,
            mflops_per_rank,
            gflops_overall: ranks as f64 * mflops_per_rank / 1000.0,
        }
    }

    pub fn local(&self) -> Dims {
        Dims([self.lx, self.ly, self.lz, self.lt])
    }

    /// Checks the rate identities and, when `global` is known, that the
    /// local lattice tiles it with `ranks` domains.
    pub fn validate(&self, global: Option<GlobalLattice>) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::Consistency(vec![msg]));
        if !(self.total_time_s > 0.0) {
            return fail(format!("total time {} is not positive", self.total_time_s));
        }
        if self.gflops_overall != self.ranks as f64 * self.mflops_per_rank / 1000.0 {
            return fail(format!(
                "overall {} != ranks · per-rank / 1000 = {}",
                self.gflops_overall,
                self.ranks as f64 * self.mflops_per_rank / 1000.0
            ));
        }
        let direct = self.flops_total as f64 / (self.total_time_s * 1e9);
        if (self.gflops_overall - direct).abs() > 1e-12 * direct {
            return fail(format!("overall {} != flops / time = {direct}", self.gflops_overall));
        }
        if let Some(global) = global {
            let g = global.dims().0;
            let l = self.local().0;
            let grid: [usize; 4] = std::array::from_fn(|mu| if l[mu] == 0 { 0 } else { g[mu] / l[mu] });
            let tiles = ProcessGrid::new(grid).ok().and_then(|p| decompose(global, p).ok());
            match tiles {
                Some(d) if d.local == self.local() && d.ranks() == self.ranks => {}
                _ => return fail(format!("{} ranks of {} do not tile {}", self.ranks, self.local(), global.dims())),
            }
        }
        Ok(())
    }
}

/// Speedup and efficiency of each row against the row with the fewest
/// resources: `speedup = T(p0)/T(p)`, `efficiency = speedup · p0 / p`.
pub fn scaling_columns(rows: &[(usize, f64)]) -> Vec<(f64, f64)> {
    let Some(&(p0, t0)) = rows.iter().min_by_key(|(p, _)| *p) else {
        return Vec::new();
    };
    rows.iter()
        .map(|&(p, t)| {
            let speedup = t0 / t;
            (speedup, speedup * p0 as f64 / p as f64)
        })
        .collect()
}

pub fn write_csv<W: Write>(w: W, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    if records.is_empty() {
        out.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(BenchError::Parse(format!("unexpected header {:?}", header.join(","))));
    }
    rdr.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

/// Aligned text table in the column order of the reference tables, with the
/// derived scaling columns appended.
pub fn render_markdown(records: &[RunRecord]) -> String {
    let scaling = scaling_columns(&records.iter().map(|r| (r.ranks, r.total_time_s)).collect::<Vec<_>>());
    let header = [
        "# Ranks",
        "Width",
        "Local Lattice",
        "Iterations",
        "Total Time [s]",
        "Mean Perf. per Rank [Mflop/s]",
        "Overall Perf. [Gflop/s]",
        "Speedup",
        "Efficiency",
    ];
    let rows: Vec<[String; 9]> = records
        .iter()
        .zip(&scaling)
        .map(|(r, (s, e))| {
            [
                r.ranks.to_string(),
                r.width.to_string(),
                r.local().to_string(),
                r.iterations.to_string(),
                format!("{:.3}", r.total_time_s),
                format!("{:.2}", r.mflops_per_rank),
                format!("{:.3}", r.gflops_overall),
                format!("{s:.3}"),
                format!("{:.1}%", 100.0 * e),
            ]
        })
        .collect();
    let widths: Vec<usize> =
        (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    let mut out = String::new();
    let line = |cells: &[&str], out: &mut String| {
        out.push('|');
        for (c, cell) in cells.iter().enumerate() {
            let _ = write!(out, " {cell:>w$} |", w = widths[c]);
        }
        out.push('\n');
    };
    line(&header, &mut out);
    out.push('|');
    for w in &widths {
        let _ = write!(out, "{}:|", "-".repeat(w + 1));
    }
    out.push('\n');
    for r in &rows {
        line(&r.iter().map(String::as_str).collect::<Vec<_>>(), &mut out);
    }
    let _ = writeln!(out, "\n{FLOP_CONVENTION}\n{GAUGE_NOTE}");
    out
}

pub fn render_json(records: &[RunRecord]) -> Result<String, BenchError> {
    Ok(serde_json::to_string_pretty(records)?)
}
