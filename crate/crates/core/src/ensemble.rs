//! Ensemble statistics over trajectory records, analytic references, the
//! settling-time estimator and parameter sweeps.
//!
//! Trajectory `i` of a run always uses stream `i` of the seeded generator,
//! and reductions run in index order, so every result is independent of
//! the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcwf::{Engine, SimParams, TrajectoryRecord};

/// Start of the steady-state window in s.
pub const STEADY_STATE_START: f64 = 10e-3;

/// Settling detector: |dF/dt| below this (per second) ...
pub const SETTLING_SLOPE: f64 = 0.01 / 1e-3;
/// ... over a window of this length (s).
pub const SETTLING_WINDOW: f64 = 1e-3;

/// Pointwise ensemble averages on a shared time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub f_mean: Vec<f64>,
    pub f_stderr: Vec<f64>,
    pub pos_mean: Vec<f64>,
    /// Ensemble position spread: √(E[Var R] + Var(E_traj R)).
    pub pos_std: Vec<f64>,
    pub mean_number: Vec<f64>,
    pub mean_number_stderr: Vec<f64>,
    pub gamma_l1: Vec<f64>,
    pub gamma_l2: Vec<f64>,
    pub n_trajectories: usize,
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the first sample at or after `t`, up to rounding.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        window(&self.times, t).ok()
    }
}

/// Sample mean and standard error (n − 1 standard deviation over √n).
pub fn mean_and_stderr(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (n, mean, m2) = welford(xs);
    if n < 2 {
        return (mean, 0.0);
    }
    let var = m2 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample mean and n − 1 standard deviation.
pub fn mean_and_std(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (n, mean, m2) = welford(xs);
    if n < 2 {
        return (mean, 0.0);
    }
    (mean, (m2 / (n - 1) as f64).sqrt())
}

fn welford(xs: impl IntoIterator<Item = f64>) -> (usize, f64, f64) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    (n, mean, m2)
}

fn check_grids(records: &[TrajectoryRecord]) -> Result<&TrajectoryRecord> {
    let first = records.first().ok_or(Error::InvalidParameter {
        name: "records",
        reason: "at least one trajectory record is required".into(),
    })?;
    for r in records {
        if r.times != first.times {
            return Err(Error::MismatchedGrids(format!(
                "{} samples vs {} samples",
                r.times.len(),
                first.times.len()
            )));
        }
    }
    Ok(first)
}

/// Pointwise means and standard errors over records sharing a time grid.
pub fn ensemble_average(records: &[TrajectoryRecord]) -> Result<EnsembleStats> {
    let first = check_grids(records)?;
    let m = first.len();
    let mut stats = EnsembleStats {
        times: first.times.clone(),
        f_mean: Vec::with_capacity(m),
        f_stderr: Vec::with_capacity(m),
        pos_mean: Vec::with_capacity(m),
        pos_std: Vec::with_capacity(m),
        mean_number: Vec::with_capacity(m),
        mean_number_stderr: Vec::with_capacity(m),
        gamma_l1: Vec::with_capacity(m),
        gamma_l2: Vec::with_capacity(m),
        n_trajectories: records.len(),
    };
    let n = records.len() as f64;
    for k in 0..m {
        let (f, fe) = mean_and_stderr(records.iter().map(|r| r.overlap[k]));
        stats.f_mean.push(f.clamp(0.0, 1.0));
        stats.f_stderr.push(fe);
        let (x, _) = mean_and_std(records.iter().map(|r| r.pos_mean[k]));
        let spread: f64 = records
            .iter()
            .map(|r| r.pos_var[k] + (r.pos_mean[k] - x).powi(2))
            .sum::<f64>()
            / n;
        stats.pos_mean.push(x);
        stats.pos_std.push(spread.max(0.0).sqrt());
        let (nm, ne) = mean_and_stderr(records.iter().map(|r| r.mean_number[k]));
        stats.mean_number.push(nm);
        stats.mean_number_stderr.push(ne);
        stats
            .gamma_l1
            .push(records.iter().map(|r| r.gamma_l1[k]).sum::<f64>() / n);
        stats
            .gamma_l2
            .push(records.iter().map(|r| r.gamma_l2[k]).sum::<f64>() / n);
    }
    Ok(stats)
}

/// Time averages over t ≥ t_start with one-standard-deviation bars (the
/// spread of the averaged curve over the window).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub f: f64,
    pub f_std: f64,
    pub gamma_l1: f64,
    pub gamma_l1_std: f64,
    pub gamma_l2: f64,
    pub gamma_l2_std: f64,
    pub n_points: usize,
}

fn window(times: &[f64], t_start: f64) -> Result<usize> {
    let last = times.last().copied().unwrap_or(f64::NEG_INFINITY);
    // sample times are multiples of the step; allow for rounding
    let tol = 1e-9 * last.abs().max(1e-12);
    times
        .iter()
        .position(|&t| t >= t_start - tol)
        .ok_or(Error::EmptyWindow { t_start })
}

pub fn steady_state_average(stats: &EnsembleStats, t_start: f64) -> Result<SteadyState> {
    let i0 = window(&stats.times, t_start)?;
    let (f, f_std) = mean_and_std(stats.f_mean[i0..].iter().copied());
    let (g1, g1s) = mean_and_std(stats.gamma_l1[i0..].iter().copied());
    let (g2, g2s) = mean_and_std(stats.gamma_l2[i0..].iter().copied());
    Ok(SteadyState {
        f,
        f_std,
        gamma_l1: g1,
        gamma_l1_std: g1s,
        gamma_l2: g2,
        gamma_l2_std: g2s,
        n_points: stats.len() - i0,
    })
}

/// Steady-state overlap and total correction rate estimated from
/// per-trajectory time averages; the bars are standard errors of the mean
/// over trajectories, i.e. the uncertainty of ⟨F⟩_s itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateEstimate {
    pub f: f64,
    pub f_err: f64,
    pub gamma: f64,
    pub gamma_err: f64,
}

pub fn steady_state_estimate(
    records: &[TrajectoryRecord],
    t_start: f64,
) -> Result<SteadyStateEstimate> {
    let first = check_grids(records)?;
    let i0 = window(&first.times, t_start)?;
    let avg = |xs: &[f64]| xs[i0..].iter().sum::<f64>() / (xs.len() - i0) as f64;
    let (f, f_err) = mean_and_stderr(records.iter().map(|r| avg(&r.overlap)));
    let (gamma, gamma_err) =
        mean_and_stderr(records.iter().map(|r| avg(&r.gamma_l1) + avg(&r.gamma_l2)));
    Ok(SteadyStateEstimate {
        f,
        f_err,
        gamma,
        gamma_err,
    })
}

/// F_free(t) = 1/4 + (3/4) e^{−4Γt/3}: Bell fidelity under depolarization
/// of one particle at rate Γ.
pub fn depolarizing_reference(gamma: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be non-negative and finite, got {gamma}"),
        });
    }
    Ok(times
        .iter()
        .map(|&t| 0.25 + 0.75 * (-4.0 * gamma * t / 3.0).exp())
        .collect())
}

/// Least-squares slope of ys against xs.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Settling time t_s and the overlap e^{−Γ t_s} it predicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settling {
    pub t_s: f64,
    pub predicted_f: f64,
}

/// First time t such that the least-squares slope of F over [t, t + window]
/// has magnitude below `slope_threshold`.
pub fn settling_time(stats: &EnsembleStats, slope_threshold: f64, window_s: f64) -> Result<f64> {
    let t = &stats.times;
    if t.len() < 3 {
        return Err(Error::NoSteadyState);
    }
    let tol = 1e-9 * window_s;
    for i in 0..t.len() {
        let Some(len) = t[i..].iter().position(|&x| x > t[i] + window_s + tol) else {
            break;
        };
        if len < 3 {
            continue;
        }
        let slope = ls_slope(&t[i..i + len], &stats.f_mean[i..i + len]);
        if slope.abs() < slope_threshold {
            return Ok(t[i]);
        }
    }
    Err(Error::NoSteadyState)
}

pub fn settling_consistency(stats: &EnsembleStats, gamma: f64) -> Result<Settling> {
    settling_consistency_with(stats, gamma, SETTLING_SLOPE, SETTLING_WINDOW)
}

pub fn settling_consistency_with(
    stats: &EnsembleStats,
    gamma: f64,
    slope_threshold: f64,
    window_s: f64,
) -> Result<Settling> {
    let t_s = settling_time(stats, slope_threshold, window_s)?;
    Ok(Settling {
        t_s,
        predicted_f: (-gamma * t_s).exp(),
    })
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::MismatchedGrids(format!(
            "{} vs {} values",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("pearson"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation of the mean correction rates over the full record.
pub fn rate_anticorrelation(stats: &EnsembleStats) -> Result<f64> {
    if stats.len() < 10 {
        return Err(Error::InvalidParameter {
            name: "stats",
            reason: format!("need at least 10 time points, got {}", stats.len()),
        });
    }
    pearson(&stats.gamma_l1, &stats.gamma_l2)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "workers",
            reason: e.to_string(),
        })
}

/// Runs trajectories 0..n on `workers` threads; the result is ordered by
/// trajectory index.
pub fn run_ensemble(params: &SimParams, n: usize, workers: usize) -> Result<Vec<TrajectoryRecord>> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "trajectories",
            reason: "must be at least 1".into(),
        });
    }
    let engine = Engine::new(params.clone())?;
    pool(workers)?.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| engine.run(i))
            .collect()
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// |R_L1| with R_L1 = +v, R_L2 = −v.
    CorrectorPosition,
    /// Bath occupation n̄.
    TemperatureNbar,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::CorrectorPosition => "corrector_position_um",
            SweepKind::TemperatureNbar => "nbar",
        }
    }

    pub fn apply(self, base: &SimParams, value: f64) -> SimParams {
        match self {
            SweepKind::CorrectorPosition => SimParams {
                r_l1: value,
                r_l2: -value,
                ..base.clone()
            },
            SweepKind::TemperatureNbar => SimParams {
                nbar: value,
                ..base.clone()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub values: Vec<f64>,
    pub f_s: Vec<f64>,
    pub f_s_err: Vec<f64>,
    pub gamma_s: Vec<f64>,
    pub gamma_s_err: Vec<f64>,
    pub gamma_l1_s: Vec<f64>,
    pub gamma_l2_s: Vec<f64>,
    pub n_trajectories: usize,
}

impl SweepResult {
    pub fn argmax(&self) -> Option<usize> {
        self.f_s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

/// Runs `n_traj` trajectories per value (common seeds across values) and
/// reduces each point to its steady-state estimate.
pub fn sweep(
    kind: SweepKind,
    values: &[f64],
    base: &SimParams,
    n_traj: usize,
    workers: usize,
    t_start: f64,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: "sweep needs at least one value".into(),
        });
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: format!("sweep values must be finite and non-negative, got {v}"),
        });
    }
    let mut out = SweepResult {
        parameter: kind.name().to_string(),
        values: values.to_vec(),
        f_s: Vec::new(),
        f_s_err: Vec::new(),
        gamma_s: Vec::new(),
        gamma_s_err: Vec::new(),
        gamma_l1_s: Vec::new(),
        gamma_l2_s: Vec::new(),
        n_trajectories: n_traj,
    };
    for &v in values {
        let params = kind.apply(base, v);
        let records = run_ensemble(&params, n_traj, workers)?;
        let est = steady_state_estimate(&records, t_start)?;
        let stats = ensemble_average(&records)?;
        let ss = steady_state_average(&stats, t_start)?;
        out.f_s.push(est.f);
        out.f_s_err.push(est.f_err);
        out.gamma_s.push(est.gamma);
        out.gamma_s_err.push(est.gamma_err);
        out.gamma_l1_s.push(ss.gamma_l1);
        out.gamma_l2_s.push(ss.gamma_l2);
    }
    Ok(out)
}
