//! Analytic strong-scaling model.
//!
//! The solver time on `p` ranks is modelled as
//!
//! ```text
//! T = W / (p r) + iters · (α (8 + 2 R (p − 1)) + β · (S / 2) · bytes_per_site)
//! ```
//!
//! where `W` is the total work in flops, `S` the surface count of the local
//! lattice and `R` the number of global reductions per iteration. Each
//! iteration performs eight halo messages per rank, and each reduction costs
//! `2 (p − 1)` messages on the root because contributions are collected and
//! broadcast in ascending rank order. `R = 0` drops the reduction term.
//!
//! All three parameters enter linearly, so fitting is a nonnegative least
//! squares problem in `(1/r, α, β)`.

use lqcd_core::geometry::{decompose, surface_count, Dims, GlobalLattice, ProcessGrid};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub const DEFAULT_BYTES_PER_SITE: usize = 192;
/// `p†Ap` and `‖r‖²` in every CG iteration.
pub const DEFAULT_REDUCTIONS_PER_ITER: usize = 2;
const HALO_MESSAGES: f64 = 8.0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("fit needs at least 3 rows, got {rows}")]
    Underdetermined { rows: usize },
    #[error("no fit with a positive compute rate")]
    NoPositiveFit,
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Compute rate per rank, flop/s.
    pub r: f64,
    /// Latency per message, s.
    pub alpha: f64,
    /// Inverse bandwidth, s/byte.
    pub beta: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(ModelError::InvalidParams(format!("r = {} must be positive", self.r)));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "alpha = {}, beta = {} must be nonnegative",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for ModelParams {
    type Err = ModelError;

    /// Parses `r=...,alpha=...,beta=...` in any order.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut r, mut alpha, mut beta) = (None, None, None);
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| ModelError::InvalidParams(format!("expected key=value, got {part:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| ModelError::InvalidParams(format!("bad number {v:?}")))?;
            match k.trim() {
                "r" => r = Some(v),
                "alpha" => alpha = Some(v),
                "beta" => beta = Some(v),
                other => return Err(ModelError::InvalidParams(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| ModelError::InvalidParams(format!("missing {k}"));
        let params = ModelParams {
            r: r.ok_or_else(|| missing("r"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            beta: beta.ok_or_else(|| missing("beta"))?,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub bytes_per_site: usize,
    pub reductions_per_iter: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            bytes_per_site: DEFAULT_BYTES_PER_SITE,
            reductions_per_iter: DEFAULT_REDUCTIONS_PER_ITER,
        }
    }
}

/// One measured (or synthetic) strong-scaling point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub ranks: usize,
    pub local: Dims,
    pub time_s: f64,
    pub work_flops: f64,
}

/// Coefficients of `(1/r, α, β)` in the predicted time.
fn columns(ranks: usize, local: Dims, work_flops: f64, iters: usize, opts: &ModelOptions) -> [f64; 3] {
    let it = iters as f64;
    let messages = HALO_MESSAGES + 2.0 * opts.reductions_per_iter as f64 * (ranks as f64 - 1.0);
    [
        work_flops / ranks as f64,
        it * messages,
        it * (surface_count(local) / 2) as f64 * opts.bytes_per_site as f64,
    ]
}

pub fn predict_time(params: &ModelParams, ranks: usize, local: Dims, work_flops: f64, iters: usize, opts: &ModelOptions) -> f64 {
    let c = columns(ranks, local, work_flops, iters, opts);
    c[0] / params.r + c[1] * params.alpha + c[2] * params.beta
}

/// Flops of a converged solve of `iters` iterations on `global`, with the
/// solver's accounting: setup, per-iteration work, the skipped final
/// direction update and one true-residual check per hundred iterations.
pub fn work_flops(global: GlobalLattice, iters: usize) -> f64 {
    let half = global.volume() as f64 / 2.0;
    let checks = 1 + iters.saturating_sub(1) / 100;
    half * (2832.0 + 5904.0 * iters as f64 - 96.0 + 5616.0 * checks as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub time_s: f64,
    /// Against one rank holding the whole lattice.
    pub efficiency: f64,
    /// Fraction of the time spent communicating.
    pub comm_share: f64,
}

pub fn predict(
    params: &ModelParams,
    global: GlobalLattice,
    grid: ProcessGrid,
    iters: usize,
    opts: &ModelOptions,
) -> Result<Prediction, crate::BenchError> {
    params.validate()?;
    let decomp = decompose(global, grid)?;
    let work = work_flops(global, iters);
    let time_s = predict_time(params, decomp.ranks(), decomp.local, work, iters, opts);
    let base = predict_time(params, 1, global.dims(), work, iters, opts);
    let compute = work / (decomp.ranks() as f64 * params.r);
    Ok(Prediction {
        time_s,
        efficiency: base / (decomp.ranks() as f64 * time_s),
        comm_share: 1.0 - compute / time_s,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub params: ModelParams,
    /// `(T_pred − T_meas) / T_meas` per row.
    pub residuals: Vec<f64>,
}

/// Nonnegative least squares of `Σ ((T_pred − T) / T)²` over `(1/r, α, β)`.
///
/// With three unknowns every active set can be tried: the optimum is the
/// best unconstrained solution restricted to some support that happens to
/// be nonnegative.
pub fn fit_model(rows: &[Observation], iters: usize, opts: &ModelOptions) -> Result<Fit, ModelError> {
    if rows.len() < 3 {
        return Err(ModelError::Underdetermined { rows: rows.len() });
    }
    let a = DMatrix::from_fn(rows.len(), 3, |i, j| {
        let o = &rows[i];
        columns(o.ranks, o.local, o.work_flops, iters, opts)[j] / o.time_s
    });
    let ones = DVector::from_element(rows.len(), 1.0);

    let mut best: Option<(f64, [f64; 3])> = None;
    for mask in 1u8..8 {
        if mask & 1 == 0 {
            continue;
        }
        let support: Vec<usize> = (0..3).filter(|j| mask & (1 << j) != 0).collect();
        let scales: Vec<f64> = support.iter().map(|&j| a.column(j).norm()).collect();
        if scales.iter().any(|&s| s == 0.0) {
            continue;
        }
        let sub = DMatrix::from_fn(rows.len(), support.len(), |i, k| a[(i, support[k])] / scales[k]);
        let Ok(sol) = sub.svd(true, true).solve(&ones, 1e-14) else {
            continue;
        };
        let mut x = [0.0; 3];
        for (k, &j) in support.iter().enumerate() {
            x[j] = sol[k] / scales[k];
        }
        if !(x[0] > 0.0) || x[1] < 0.0 || x[2] < 0.0 {
            continue;
        }
        let resid = (&a * DVector::from_column_slice(&x) - &ones).norm_squared();
        if best.is_none_or(|(b, _)| resid < b) {
            best = Some((resid, x));
        }
    }
    let (_, x) = best.ok_or(ModelError::NoPositiveFit)?;
    let params = ModelParams {
        r: 1.0 / x[0],
        alpha: x[1],
        beta: x[2],
    };
    let residuals = rows
        .iter()
        .map(|o| (predict_time(&params, o.ranks, o.local, o.work_flops, iters, opts) - o.time_s) / o.time_s)
        .collect();
    Ok(Fit { params, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global() -> GlobalLattice {
        GlobalLattice::new([32, 32, 32, 64]).unwrap()
    }

    fn obs(params: &ModelParams, grid: [usize; 4], iters: usize, opts: &ModelOptions) -> Observation {
        let d = decompose(global(), ProcessGrid::new(grid).unwrap()).unwrap();
        let work = work_flops(global(), iters);
        Observation {
            ranks: d.ranks(),
            local: d.local,
            time_s: predict_time(params, d.ranks(), d.local, work, iters, opts),
            work_flops: work,
        }
    }

    #[test]
    fn no_communication_scales_linearly() {
        let p = ModelParams { r: 1e9, alpha: 0.0, beta: 0.0 };
        let opts = ModelOptions::default();
        let t1 = predict(&p, global(), ProcessGrid::single(), 500, &opts).unwrap().time_s;
        for grid in [[2, 1, 1, 1], [2, 2, 2, 2], [4, 4, 2, 8]] {
            let g = ProcessGrid::new(grid).unwrap();
            let pr = predict(&p, global(), g, 500, &opts).unwrap();
            assert!((pr.time_s * g.ranks() as f64 / t1 - 1.0).abs() < 1e-14);
            assert!((pr.efficiency - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn smaller_domains_raise_communication_share() {
        let p = ModelParams { r: 1e9, alpha: 1e-6, beta: 1e-9 };
        let opts = ModelOptions::default();
        let coarse = predict(&p, global(), ProcessGrid::new([1, 1, 2, 2]).unwrap(), 100, &opts).unwrap();
        let fine = predict(&p, global(), ProcessGrid::new([2, 2, 4, 4]).unwrap(), 100, &opts).unwrap();
        assert!(fine.comm_share > coarse.comm_share);
    }

    #[test]
    fn params_parse_and_validate() {
        let p: ModelParams = "alpha=2e-6, r=1.5e9,beta=1e-10".parse().unwrap();
        assert_eq!(p, ModelParams { r: 1.5e9, alpha: 2e-6, beta: 1e-10 });
        assert!("r=1,alpha=-1,beta=0".parse::<ModelParams>().is_err());
        assert!("r=1,alpha=0".parse::<ModelParams>().is_err());
        assert!("r=0,alpha=0,beta=0".parse::<ModelParams>().is_err());
    }

    #[test]
    fn fit_recovers_known_parameters() {
        let truth = ModelParams { r: 2.3e9, alpha: 4e-6, beta: 7e-10 };
        let opts = ModelOptions::default();
        let rows: Vec<_> = [[1, 1, 1, 2], [1, 2, 2, 2], [2, 2, 2, 4], [2, 4, 4, 4], [4, 4, 4, 8]]
            .into_iter()
            .map(|g| obs(&truth, g, 300, &opts))
            .collect();
        let fit = fit_model(&rows, 300, &opts).unwrap();
        for (got, want) in [(fit.params.r, truth.r), (fit.params.alpha, truth.alpha), (fit.params.beta, truth.beta)] {
            assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");
        }
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn compute_only_data_pins_communication_at_zero() {
        let truth = ModelParams { r: 1e9, alpha: 0.0, beta: 0.0 };
        let opts = ModelOptions::default();
        let rows: Vec<_> = [[1, 1, 1, 1], [1, 1, 2, 2], [2, 2, 2, 2], [2, 2, 4, 4]]
            .into_iter()
            .map(|g| obs(&truth, g, 100, &opts))
            .collect();
        let fit = fit_model(&rows, 100, &opts).unwrap();
        assert!((fit.params.r / 1e9 - 1.0).abs() < 1e-10);
        let t_min = rows.iter().map(|o| o.time_s).fold(f64::INFINITY, f64::min);
        assert!(fit.params.alpha * 100.0 * 8.0 <= 1e-9 * t_min);
        assert!(fit.params.beta <= 1e-20);
    }

    #[test]
    fn too_few_rows() {
        let opts = ModelOptions::default();
        let truth = ModelParams { r: 1e9, alpha: 0.0, beta: 0.0 };
        let rows = vec![obs(&truth, [1, 1, 1, 1], 10, &opts); 2];
        assert_eq!(fit_model(&rows, 10, &opts), Err(ModelError::Underdetermined { rows: 2 }));
    }

    #[test]
    fn work_matches_solver_accounting() {
        let g = GlobalLattice::new([4, 4, 4, 4]).unwrap();
        // One iteration, one final check.
        assert_eq!(work_flops(g, 1), 128.0 * (2832.0 + 5904.0 - 96.0 + 5616.0));
        // Checks at 100 and 200, plus the final one at 250.
        assert_eq!(work_flops(g, 250), 128.0 * (2832.0 + 5904.0 * 250.0 - 96.0 + 3.0 * 5616.0));
    }
}
