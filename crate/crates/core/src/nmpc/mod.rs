//! Barrier-augmented receding-horizon control of the polygon state.
//!
//! The decision variable is the stacked sequence of masked velocity commands
//! over the horizon. Costs are evaluated on a single-shooting rollout of the
//! coupled Euler model with the latest flow estimate held constant.

mod controller;
mod cost;
mod diagnostics;
mod solver;

pub use controller::{local_controller, local_gain_bound, shifted_warm_start, NmpcController, StepOutcome};
pub use cost::{quadratic_stage_cost, rollout, stage_cost, terminal_cost, OcpProblem, Prediction};
pub use diagnostics::{
    cost_difference_bound, cost_difference_constant, disturbance_feasibility_bound, empirical_lipschitz_lf,
    empirical_lipschitz_lfv, lipschitz_lf, lipschitz_stage_cost, prediction_error_bound, terminal_radius, Diagnostics,
    FeasibilityBound,
};
pub use solver::{solve_ocp, OcpSolution, SolveStatus};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::barrier::{AreaBounds, InputLimits, RecenteringAnchor, StateConstraints, VisibilityParams};
use crate::camera::{ActuationMask, CameraIntrinsics, CameraVelocity};
use crate::error::{Error, Result};
use crate::polygon::MomentState;

/// Diagonal weights of the stage and terminal costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub q: [f64; 4],
    /// One entry per velocity component; entries of masked-out components are unused.
    pub r: [f64; 6],
    pub p: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub fd_step: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { max_iterations: 60, gradient_tolerance: 1e-6, armijo_c1: 1e-4, backtrack: 0.5, max_backtracks: 40, fd_step: 1e-6 }
    }
}

fn default_local_gain() -> f64 {
    3.0
}

fn default_a_bar_bound() -> f64 {
    2.0
}

/// Scenario-file form of the controller settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcpSettings {
    pub horizon: usize,
    pub dt: f64,
    pub weights: Weights,
    /// Visibility margin in normalized units.
    pub gamma: f64,
    pub area: AreaBounds,
    pub limits: InputLimits,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default = "default_local_gain")]
    pub local_gain: f64,
    /// Bound on `|a_bar|` used for the state box of the stage-cost Lipschitz constant.
    #[serde(default = "default_a_bar_bound")]
    pub a_bar_bound: f64,
}

impl OcpSettings {
    pub fn build(&self, intrinsics: &CameraIntrinsics, mask: ActuationMask) -> Result<OcpConfig> {
        let cfg = OcpConfig {
            horizon: self.horizon,
            dt: self.dt,
            weights: self.weights,
            constraints: StateConstraints {
                visibility: VisibilityParams::from_intrinsics(self.gamma, intrinsics)?,
                area: self.area,
            },
            limits: self.limits,
            mask,
            solver: self.solver,
            local_gain: self.local_gain,
            a_bar_bound: self.a_bar_bound,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpConfig {
    pub horizon: usize,
    pub dt: f64,
    pub weights: Weights,
    pub constraints: StateConstraints,
    pub limits: InputLimits,
    pub mask: ActuationMask,
    pub solver: SolverParams,
    pub local_gain: f64,
    pub a_bar_bound: f64,
}

impl OcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::Config("horizon must be at least 2".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("control period must be positive".into()));
        }
        let w = &self.weights;
        let used_r = self.mask.indices().into_iter().map(|i| w.r[i]);
        if !w.q.iter().chain(&w.p).copied().chain(used_r).all(|v| v > 0.0 && v.is_finite()) {
            return Err(Error::Config("all weights must be positive".into()));
        }
        self.constraints.area.validate()?;
        self.limits.validate()?;
        let s = &self.solver;
        if s.max_iterations == 0
            || !(s.fd_step > 0.0)
            || !(s.backtrack > 0.0 && s.backtrack < 1.0)
            || !(s.armijo_c1 > 0.0 && s.armijo_c1 < 0.5)
        {
            return Err(Error::Config("invalid solver parameters".into()));
        }
        if !(self.local_gain > 0.0) || !(self.a_bar_bound > 0.0) {
            return Err(Error::Config("local gain and a_bar bound must be positive".into()));
        }
        Ok(())
    }

    /// Number of actuated inputs per step.
    pub fn inputs(&self) -> usize {
        self.mask.count()
    }

    pub fn anchor(&self, x_des: MomentState) -> Result<RecenteringAnchor> {
        RecenteringAnchor::new(&self.constraints, x_des)
    }
}

/// Stacked masked commands `nu_F`, step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonControls {
    inputs: usize,
    values: DVector<f64>,
}

impl HorizonControls {
    pub fn zeros(horizon: usize, inputs: usize) -> Self {
        Self { inputs, values: DVector::zeros(horizon * inputs) }
    }

    pub fn from_vector(values: DVector<f64>, inputs: usize) -> Result<Self> {
        if inputs == 0 || !values.len().is_multiple_of(inputs) {
            return Err(Error::Config("control vector length is not a multiple of the input count".into()));
        }
        Ok(Self { inputs, values })
    }

    pub fn horizon(&self) -> usize {
        self.values.len() / self.inputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.values.as_slice()[i * self.inputs..(i + 1) * self.inputs]
    }

    pub fn set_step(&mut self, i: usize, values: &[f64]) {
        self.values.as_mut_slice()[i * self.inputs..(i + 1) * self.inputs].copy_from_slice(values);
    }

    pub fn velocity(&self, i: usize, mask: &ActuationMask) -> CameraVelocity {
        mask.expand(self.step(i))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }
}
