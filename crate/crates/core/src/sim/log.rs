use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{ConvergenceSpec, ScenarioConfig, SimMode};
use super::Setup;
use crate::analysis::{summarize, RunSummary};
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::nmpc::Diagnostics;
use crate::polygon::{MomentState, PolygonFeatures};

pub const CSV_HEADER: &str = "t,sx,sy,sigbar,abar,ex,ey,esig,eang,L1,L2,vx,vy,vz,wx,wy,wz,cost,iters,feasible";

/// One logged control step. The state is the true one, before disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: MomentState,
    /// True state minus setpoint.
    pub error: [f64; 4],
    /// `atan(a_bar) - atan(a_bar_des)`, degrees.
    pub angle_error_deg: f64,
    pub barriers: [f64; 2],
    pub applied: [f64; 6],
    /// Optimal cost; NaN when the step ran in recovery.
    pub cost: f64,
    pub iterations: usize,
    /// The OCP was solved (not in recovery).
    pub feasible: bool,
    /// The measured state itself violated the constraints. Not stored in the CSV.
    pub infeasible_start: bool,
    /// The predicted terminal state lay in the terminal set. Not stored in the CSV.
    pub terminal_set: bool,
}

/// Inputs of one solve, kept in memory for replaying predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub polygon: PolygonFeatures,
    pub measured: MomentState,
    pub flow: DVector<f64>,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub step: usize,
    pub t: f64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SimLog {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: SimMode,
    pub dt: f64,
    pub intrinsics: CameraIntrinsics,
    pub x_des: MomentState,
    pub disturbance_bound: f64,
    pub diagnostics: Diagnostics,
    pub convergence: ConvergenceSpec,
    pub records: Vec<StepRecord>,
    pub trace: Vec<TraceStep>,
    pub abort: Option<AbortRecord>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    name: &'a str,
    config_hash: &'a str,
    seed: u64,
    mode: SimMode,
    dt: f64,
    steps: usize,
    x_des: &'a MomentState,
    disturbance_bound: f64,
    diagnostics: &'a Diagnostics,
    summary: RunSummary,
    abort: &'a Option<AbortRecord>,
}

impl SimLog {
    pub(crate) fn new(cfg: &ScenarioConfig, setup: &Setup) -> Self {
        Self {
            name: cfg.name.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            mode: cfg.mode,
            dt: setup.ocp.dt,
            intrinsics: cfg.intrinsics,
            x_des: setup.x_des,
            disturbance_bound: setup.disturbance_bound,
            diagnostics: setup.diagnostics.clone(),
            convergence: cfg.convergence,
            records: Vec::with_capacity(cfg.steps()),
            trace: Vec::with_capacity(cfg.steps()),
            abort: None,
        }
    }

    pub fn aborted(&self) -> bool {
        self.abort.is_some()
    }

    /// CSV with the fixed header; numbers use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(200 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let s = &r.state;
            let _ = write!(out, "{},{},{},{},{}", r.t, s.sbar_x, s.sbar_y, s.sigma_bar, s.a_bar);
            let _ = write!(out, ",{},{},{},{}", r.error[0], r.error[1], r.error[2], r.angle_error_deg);
            let _ = write!(out, ",{},{}", r.barriers[0], r.barriers[1]);
            for v in r.applied {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{},{},{}", r.cost, r.iterations, u8::from(r.feasible));
        }
        out
    }

    pub fn sidecar_json(&self) -> String {
        let sidecar = Sidecar {
            name: &self.name,
            config_hash: &self.config_hash,
            seed: self.seed,
            mode: self.mode,
            dt: self.dt,
            steps: self.records.len(),
            x_des: &self.x_des,
            disturbance_bound: self.disturbance_bound,
            diagnostics: &self.diagnostics,
            summary: summarize(self),
            abort: &self.abort,
        };
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes")
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`; returns the CSV path.
    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.name));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(dir.join(format!("{}.json", self.name)), self.sidecar_json())?;
        Ok(csv)
    }
}

/// Parses a log CSV back into records. Columns not stored in the CSV are
/// left at their defaults.
pub fn read_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("unexpected CSV header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| Error::Config(format!("CSV row {}: {what}", i + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 20 {
                return Err(bad("expected 20 columns"));
            }
            let num = |j: usize| fields[j].parse::<f64>().map_err(|_| bad(&format!("column {j} is not a number")));
            Ok(StepRecord {
                t: num(0)?,
                state: MomentState::new(num(1)?, num(2)?, num(3)?, num(4)?),
                error: [num(5)?, num(6)?, num(7)?, 0.0],
                angle_error_deg: num(8)?,
                barriers: [num(9)?, num(10)?],
                applied: [num(11)?, num(12)?, num(13)?, num(14)?, num(15)?, num(16)?],
                cost: num(17)?,
                iterations: fields[18].parse().map_err(|_| bad("iteration count"))?,
                feasible: match fields[19] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad("feasible flag")),
                },
                infeasible_start: false,
                terminal_set: false,
            })
        })
        .collect()
}
