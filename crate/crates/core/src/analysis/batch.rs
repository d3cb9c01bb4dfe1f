use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svg::{barrier_plot, error_plot, stats_bar_chart};
use super::{summarize, SessionStats, SteadyState};
use crate::error::{Error, Result};
use crate::sim::{run_scenario, ScenarioConfig};

/// Fraction of sessions that must converge for a batch to pass.
pub const BATCH_PASS_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedPolicy {
    /// Every repetition keeps the scenario's own seed.
    Fixed,
    /// Repetition `r` uses seed `base + r`.
    Sequential { base: u64 },
}

/// A set of scenarios, each repeated with its own seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub name: String,
    /// Scenario files, relative to the spec file.
    pub scenarios: Vec<PathBuf>,
    pub repetitions: usize,
    pub seed_policy: SeedPolicy,
    #[serde(default)]
    pub plots: bool,
}

impl BatchSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        if spec.scenarios.is_empty() || spec.repetitions == 0 {
            return Err(Error::Config("batch needs at least one scenario and one repetition".into()));
        }
        Ok(spec)
    }

    /// Loads the scenarios and expands the repetitions into session configs.
    pub fn sessions(&self, base_dir: &Path) -> Result<Vec<ScenarioConfig>> {
        let mut out = Vec::new();
        let mut names = BTreeSet::new();
        for path in &self.scenarios {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| Error::Config(format!("{}: {e}", full.display())))?;
            let cfg = ScenarioConfig::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", full.display())))?;
            for rep in 0..self.repetitions {
                let mut session = cfg.clone();
                if let SeedPolicy::Sequential { base } = self.seed_policy {
                    session.seed = base + rep as u64;
                }
                session.name = format!("{}_r{rep:02}", cfg.name);
                if !names.insert(session.name.clone()) {
                    return Err(Error::Config(format!("duplicate session output name {}", session.name)));
                }
                out.push(session);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub name: String,
    pub seed: u64,
    pub converged: bool,
    pub aborted: bool,
    pub steady_state: Option<SteadyState>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub sessions: Vec<SessionResult>,
    /// Over sessions that produced a steady state.
    pub stats: Option<SessionStats>,
    pub converged_fraction: f64,
}

impl BatchOutcome {
    pub fn passed(&self) -> bool {
        self.converged_fraction >= BATCH_PASS_FRACTION
    }
}

pub const SESSIONS_HEADER: &str = "name,seed,converged,aborted,centroid,centroid_px,sigma,angle_deg,error";

fn run_session(cfg: &ScenarioConfig, out_dir: &Path, plots: bool) -> SessionResult {
    let failed = |e: Error, aborted| SessionResult {
        name: cfg.name.clone(),
        seed: cfg.seed,
        converged: false,
        aborted,
        steady_state: None,
        error: Some(e.to_string()),
    };
    let log = match run_scenario(cfg) {
        Ok(log) => log,
        Err(e) => return failed(e, true),
    };
    if let Err(e) = log.write(out_dir) {
        return failed(e, log.aborted());
    }
    if plots {
        let written = std::fs::write(out_dir.join(format!("{}_errors.svg", cfg.name)), error_plot(&log))
            .and_then(|_| std::fs::write(out_dir.join(format!("{}_barriers.svg", cfg.name)), barrier_plot(&log)));
        if let Err(e) = written {
            return failed(e.into(), log.aborted());
        }
    }
    let summary = summarize(&log);
    SessionResult {
        name: cfg.name.clone(),
        seed: cfg.seed,
        converged: summary.converged,
        aborted: summary.aborted,
        steady_state: summary.steady_state,
        error: log.abort.as_ref().map(|a| a.error.clone()),
    }
}

/// Runs every session on a pool of `jobs` threads and writes per-session
/// logs, `sessions.csv`, `aggregate.csv` and `summary.svg` into `out_dir`.
///
/// Individual failures are recorded and do not stop the batch.
pub fn run_batch(spec: &BatchSpec, base_dir: &Path, out_dir: &Path, jobs: usize) -> Result<BatchOutcome> {
    let sessions = spec.sessions(base_dir)?;
    std::fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<SessionResult> =
        pool.install(|| sessions.par_iter().map(|cfg| run_session(cfg, out_dir, spec.plots)).collect());

    let steady: Vec<SteadyState> = results.iter().filter_map(|r| r.steady_state).collect();
    let stats = SessionStats::from_steady_states(&steady);
    let converged = results.iter().filter(|r| r.converged).count();
    let outcome = BatchOutcome { converged_fraction: converged as f64 / results.len() as f64, sessions: results, stats };

    let mut table = format!("{SESSIONS_HEADER}\n");
    for r in &outcome.sessions {
        let ss = r.steady_state.map_or([f64::NAN; 4], |s| [s.centroid, s.centroid_px, s.sigma, s.angle_deg]);
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{err}\n",
            r.name,
            r.seed,
            u8::from(r.converged),
            u8::from(r.aborted),
            ss[0],
            ss[1],
            ss[2],
            ss[3]
        ));
    }
    std::fs::write(out_dir.join("sessions.csv"), table)?;
    if let Some(stats) = &outcome.stats {
        std::fs::write(out_dir.join("aggregate.csv"), stats.to_csv())?;
        std::fs::write(out_dir.join("summary.svg"), stats_bar_chart(&format!("{}: steady-state errors", spec.name), stats))?;
    }
    Ok(outcome)
}
