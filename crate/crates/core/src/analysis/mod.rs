//! Steady-state reduction, convergence checks and cross-session statistics.

mod batch;
pub mod svg;

pub use batch::{run_batch, BatchOutcome, BatchSpec, SeedPolicy, SessionResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{SimLog, StepRecord};

/// Fewest samples a steady-state window may hold.
pub const MIN_WINDOW_SAMPLES: usize = 10;

/// Mean absolute errors over the final part of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub samples: usize,
    /// Mean Euclidean centroid error, normalized units.
    pub centroid: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// Mean centroid error in pixels.
    pub centroid_px: f64,
    pub sigma: f64,
    pub angle_deg: f64,
    /// Largest `|1 - L_j|` in the window, per constraint.
    pub barrier_gap: [f64; 2],
}

/// Reduces the last `window` fraction of `records`.
///
/// `alpha` holds the focal lengths used to express the centroid error in pixels.
pub fn steady_state_error(records: &[StepRecord], window: f64, alpha: (f64, f64)) -> Result<SteadyState> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Config(format!("window fraction must lie in (0, 1], got {window}")));
    }
    let samples = ((records.len() as f64) * window).round() as usize;
    if samples < MIN_WINDOW_SAMPLES {
        return Err(Error::ShortRun { samples, required: MIN_WINDOW_SAMPLES });
    }
    let tail = &records[records.len() - samples..];
    let mean = |f: &dyn Fn(&StepRecord) -> f64| tail.iter().map(f).sum::<f64>() / samples as f64;
    let gap = |j: usize| tail.iter().map(|r| (1.0 - r.barriers[j]).abs()).fold(0.0, f64::max);
    Ok(SteadyState {
        samples,
        centroid: mean(&|r| r.error[0].hypot(r.error[1])),
        centroid_x: mean(&|r| r.error[0].abs()),
        centroid_y: mean(&|r| r.error[1].abs()),
        centroid_px: mean(&|r| (r.error[0] * alpha.0).hypot(r.error[1] * alpha.1)),
        sigma: mean(&|r| r.error[2].abs()),
        angle_deg: mean(&|r| r.angle_error_deg.abs()),
        barrier_gap: [gap(0), gap(1)],
    })
}

/// Thresholds checked on the steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub centroid: f64,
    pub sigma: f64,
    pub angle_deg: f64,
    pub barrier_gap: f64,
}

impl Thresholds {
    pub fn from_log(log: &SimLog) -> Self {
        let c = &log.convergence;
        Self {
            centroid: c.centroid_fraction * log.intrinsics.normalized_half_width(),
            sigma: c.sigma,
            angle_deg: c.angle_deg,
            barrier_gap: c.barrier_gap,
        }
    }

    pub fn accepts(&self, ss: &SteadyState) -> bool {
        ss.centroid <= self.centroid
            && ss.sigma <= self.sigma
            && ss.angle_deg <= self.angle_deg
            && ss.barrier_gap.iter().all(|g| *g <= self.barrier_gap)
    }
}

/// Per-run figures written to the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub aborted: bool,
    pub recovery_steps: usize,
    /// Steps after the first whose measurement violated the constraints.
    pub infeasible_starts_after_init: usize,
    pub min_barrier: [f64; 2],
    pub terminal_set_hits: usize,
    pub max_iterations: usize,
    pub steady_state: Option<SteadyState>,
    pub thresholds: Thresholds,
    pub converged: bool,
}

pub fn summarize(log: &SimLog) -> RunSummary {
    let r = &log.records;
    let min_barrier = [0, 1].map(|j| r.iter().map(|s| s.barriers[j]).fold(f64::INFINITY, f64::min));
    let thresholds = Thresholds::from_log(log);
    let alpha = (log.intrinsics.alpha_x, log.intrinsics.alpha_y);
    let steady_state = steady_state_error(r, log.convergence.window, alpha).ok();
    let safe = min_barrier.iter().all(|l| *l > 0.0);
    let converged = !log.aborted() && safe && steady_state.as_ref().is_some_and(|ss| thresholds.accepts(ss));
    RunSummary {
        steps: r.len(),
        aborted: log.aborted(),
        recovery_steps: r.iter().filter(|s| !s.feasible).count(),
        infeasible_starts_after_init: r.iter().skip(1).filter(|s| s.infeasible_start).count(),
        min_barrier,
        terminal_set_hits: r.iter().filter(|s| s.terminal_set).count(),
        max_iterations: r.iter().map(|s| s.iterations).max().unwrap_or(0),
        steady_state,
        thresholds,
        converged,
    }
}

/// Mean, extremes and population standard deviation of one variable across sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            // Summation rounding would otherwise leave a tiny spread for equal inputs.
            return Some(Self { mean: min, min, max, std: 0.0 });
        }
        Some(Self { mean: mean.clamp(min, max), min, max, std: var.sqrt() })
    }
}

/// Steady-state statistics across sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub sessions: usize,
    pub centroid: Stat,
    pub centroid_px: Stat,
    pub sigma: Stat,
    pub angle_deg: Stat,
}

pub const STATS_HEADER: &str = "variable,unit,mean,min,max,std,sessions";

impl SessionStats {
    pub fn from_steady_states(ss: &[SteadyState]) -> Option<Self> {
        let pick = |f: fn(&SteadyState) -> f64| Stat::of(&ss.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            sessions: ss.len(),
            centroid: pick(|s| s.centroid)?,
            centroid_px: pick(|s| s.centroid_px)?,
            sigma: pick(|s| s.sigma)?,
            angle_deg: pick(|s| s.angle_deg)?,
        })
    }

    pub fn rows(&self) -> [(&'static str, &'static str, Stat); 4] {
        [
            ("centroid", "normalized", self.centroid),
            ("centroid", "px", self.centroid_px),
            ("sigma_bar", "normalized", self.sigma),
            ("angle", "deg", self.angle_deg),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{STATS_HEADER}\n");
        for (name, unit, s) in self.rows() {
            out.push_str(&format!("{name},{unit},{},{},{},{},{}\n", s.mean, s.min, s.max, s.std, self.sessions));
        }
        out
    }
}
