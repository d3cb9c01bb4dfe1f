use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::{ActuationMask, CameraIntrinsics};
use crate::error::{Error, Result};
use crate::nmpc::OcpSettings;
use crate::polygon::MomentState;
use crate::target::DeformableTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// All six velocity components are commanded.
    FreeCamera,
    /// Level multirotor: `nu_x, nu_y, nu_z, omega_z` only.
    Uav,
}

impl SimMode {
    pub fn mask(self) -> ActuationMask {
        match self {
            SimMode::FreeCamera => ActuationMask::full(),
            SimMode::Uav => ActuationMask::uav(),
        }
    }
}

/// Level camera pose: world position in metres and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

/// Either an explicit state or the state seen from a reference pose at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DesiredSpec {
    State(MomentState),
    FromPose(PoseSpec),
}

/// Output disturbance added to the measured state, uniform per component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSpec {
    /// Absolute per-component bound.
    pub bound: Option<f64>,
    /// Bound as a fraction of the feasibility bound reported by the diagnostics.
    pub feasibility_fraction: Option<f64>,
}

/// Thresholds deciding whether a run counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSpec {
    /// Fraction of the run, counted from the end, used for steady-state statistics.
    pub window: f64,
    /// Centroid error bound as a fraction of the normalized image half-width.
    pub centroid_fraction: f64,
    pub sigma: f64,
    pub angle_deg: f64,
    /// Allowed steady-state gap between each barrier constraint and 1.
    pub barrier_gap: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self { window: 0.2, centroid_fraction: 0.02, sigma: 0.05, angle_deg: 2.0, barrier_gap: 0.02 }
    }
}

/// Where `run` writes its artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "runs".into(), plots: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: SimMode,
    pub intrinsics: CameraIntrinsics,
    pub target: DeformableTarget,
    #[serde(default = "default_reference_pair")]
    pub reference_pair: [usize; 2],
    pub initial_pose: PoseSpec,
    pub desired: DesiredSpec,
    pub controller: OcpSettings,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    /// Seeds the disturbance sequence and is added to the target's phase seed.
    #[serde(default)]
    pub seed: u64,
    /// Run length in seconds; the control period is `controller.dt`.
    pub duration: f64,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_reference_pair() -> [usize; 2] {
    [0, 1]
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if !(self.controller.dt > 0.0) || self.duration < 2.0 * self.controller.dt {
            return Err(Error::Config("duration must cover at least two control periods".into()));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config("name must be non-empty and free of path separators".into()));
        }
        if self.initial_pose.position[2] <= 0.1 {
            return Err(Error::Config("initial camera height must exceed 0.1 m".into()));
        }
        let d = &self.disturbance;
        match (d.bound, d.feasibility_fraction) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either disturbance.bound or disturbance.feasibility_fraction".into()))
            }
            (Some(b), None) if !(b >= 0.0) => return Err(Error::Config("disturbance bound must be non-negative".into())),
            (None, Some(f)) if !(f >= 0.0) => return Err(Error::Config("feasibility fraction must be non-negative".into())),
            _ => {}
        }
        let c = &self.convergence;
        if !(c.window > 0.0 && c.window <= 1.0) {
            return Err(Error::Config("convergence window must lie in (0, 1]".into()));
        }
        self.controller.build(&self.intrinsics, self.mode.mask())?;
        Ok(())
    }

    /// Number of control steps.
    pub fn steps(&self) -> usize {
        (self.duration / self.controller.dt).round() as usize
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
