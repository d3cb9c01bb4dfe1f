use nalgebra::{DMatrix, DVector, Vector4};

use super::cost::OcpProblem;
use super::solver::{solve_ocp, OcpSolution};
use super::{HorizonControls, OcpConfig};
use crate::barrier::RecenteringAnchor;
use crate::camera::{apply_actuation_mask, CameraVelocity, DepthModel};
use crate::error::{Error, Result};
use crate::polygon::{dynamics_matrix, DynamicsMode, MomentState, PolygonFeatures};

/// Fraction of each input limit the local controller may use.
const LOCAL_SATURATION: f64 = 0.9;
/// Tikhonov damping of the pseudo-inverse.
const PINV_DAMPING: f64 = 1e-6;
/// Relative singular-value floor below which the masked `g` counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-9;

fn masked_pinv(poly: &PolygonFeatures, x: &MomentState, depth: DepthModel, cfg: &OcpConfig) -> Result<Option<DMatrix<f64>>> {
    let g = dynamics_matrix(poly, x, depth, DynamicsMode::ChainRule)?;
    let g = apply_actuation_mask(&DMatrix::from_column_slice(4, 6, g.as_slice()), &cfg.mask)?;
    let sv = g.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if !(hi.is_finite() && hi > 0.0) || lo < RANK_TOLERANCE * hi {
        return Ok(None);
    }
    let ggt = &g * g.transpose() + DMatrix::identity(4, 4) * PINV_DAMPING;
    let inv = ggt.try_inverse().ok_or_else(|| Error::Config("local controller: singular Gram matrix".into()))?;
    Ok(Some(g.transpose() * inv))
}

/// `h(x) = clamp(-K g^+ x_err)` on the actuated inputs; zero if `g` is rank deficient under the mask.
pub fn local_controller(
    err: &Vector4<f64>,
    poly: &PolygonFeatures,
    x: &MomentState,
    depth: DepthModel,
    cfg: &OcpConfig,
) -> Result<Vec<f64>> {
    let m = cfg.inputs();
    let Some(pinv) = masked_pinv(poly, x, depth, cfg)? else {
        return Ok(vec![0.0; m]);
    };
    let raw = -cfg.local_gain * pinv * DVector::from_column_slice(err.as_slice());
    let limits = cfg.limits.as_array();
    Ok(cfg
        .mask
        .indices()
        .into_iter()
        .enumerate()
        .map(|(slot, axis)| {
            let cap = LOCAL_SATURATION * limits[axis];
            raw[slot].clamp(-cap, cap)
        })
        .collect())
}

/// `L_h = K * ||g^+||_2`, so that `||h(x)|| <= L_h ||x_err||` (clamping only shrinks).
pub fn local_gain_bound(poly: &PolygonFeatures, x: &MomentState, depth: DepthModel, cfg: &OcpConfig) -> Result<f64> {
    Ok(match masked_pinv(poly, x, depth, cfg)? {
        Some(pinv) => cfg.local_gain * pinv.singular_values().max(),
        None => 0.0,
    })
}

/// Previous controls shifted one step, with the local controller appended at
/// the predicted terminal state.
pub fn shifted_warm_start(prev: &OcpSolution, anchor: &RecenteringAnchor, depth: DepthModel, cfg: &OcpConfig) -> HorizonControls {
    let n = prev.controls.horizon();
    let mut next = HorizonControls::zeros(n, prev.controls.inputs());
    for i in 1..n {
        next.set_step(i - 1, prev.controls.step(i));
    }
    let xn = prev.prediction.states[n];
    let err = xn.to_vector() - anchor.x_des.to_vector();
    if let Ok(tail) = local_controller(&err, &prev.prediction.polygons[n], &xn, depth, cfg) {
        next.set_step(n - 1, &tail);
    }
    next
}

/// Result of one receding-horizon step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub applied: CameraVelocity,
    /// `None` in recovery mode.
    pub solution: Option<OcpSolution>,
    pub recovery: bool,
    /// The measurement itself violated the state constraints.
    pub infeasible_start: bool,
}

impl StepOutcome {
    pub fn cost(&self) -> f64 {
        self.solution.as_ref().map_or(f64::NAN, |s| s.cost)
    }

    pub fn iterations(&self) -> usize {
        self.solution.as_ref().map_or(0, |s| s.iterations)
    }
}

/// Stateful receding-horizon controller holding the setpoint and the warm start.
#[derive(Debug, Clone)]
pub struct NmpcController {
    cfg: OcpConfig,
    anchor: RecenteringAnchor,
    previous: Option<OcpSolution>,
}

impl NmpcController {
    pub fn new(cfg: OcpConfig, x_des: MomentState) -> Result<Self> {
        cfg.validate()?;
        let anchor = cfg.anchor(x_des)?;
        Ok(Self { cfg, anchor, previous: None })
    }

    pub fn config(&self) -> &OcpConfig {
        &self.cfg
    }

    pub fn anchor(&self) -> &RecenteringAnchor {
        &self.anchor
    }

    pub fn previous(&self) -> Option<&OcpSolution> {
        self.previous.as_ref()
    }

    /// Warm start the next solve would use.
    pub fn warm_start(&self, depth: DepthModel) -> Option<HorizonControls> {
        self.previous.as_ref().map(|p| shifted_warm_start(p, &self.anchor, depth, &self.cfg))
    }

    fn closed_loop_guess(
        &self,
        poly: &PolygonFeatures,
        x: &MomentState,
        flow: &DVector<f64>,
        depth: DepthModel,
    ) -> HorizonControls {
        let mut u = HorizonControls::zeros(self.cfg.horizon, self.cfg.inputs());
        let (mut p, mut s) = (poly.clone(), *x);
        for i in 0..self.cfg.horizon {
            let err = s.to_vector() - self.anchor.x_des.to_vector();
            let Ok(h) = local_controller(&err, &p, &s, depth, &self.cfg) else { break };
            u.set_step(i, &h);
            match crate::polygon::propagate_discrete(&p, &s, &self.cfg.mask.expand(&h), flow, depth, self.cfg.dt) {
                Ok((np, ns)) => {
                    p = np;
                    s = ns;
                }
                Err(_) => break,
            }
        }
        u
    }

    /// Solves the OCP from the measurement and returns the first control.
    pub fn step(
        &mut self,
        poly: &PolygonFeatures,
        x: &MomentState,
        flow: &DVector<f64>,
        depth: DepthModel,
    ) -> Result<StepOutcome> {
        let problem = OcpProblem { cfg: &self.cfg, anchor: &self.anchor, polygon: poly, state: *x, flow, depth };
        let warm = self.warm_start(depth);
        let result = match solve_ocp(&problem, warm.as_ref()) {
            Err(Error::InfeasibleRollout { .. }) => solve_ocp(&problem, Some(&self.closed_loop_guess(poly, x, flow, depth))),
            other => other,
        };
        match result {
            Ok(solution) => {
                let applied = solution.controls.velocity(0, &self.cfg.mask);
                self.previous = Some(solution.clone());
                Ok(StepOutcome { applied, solution: Some(solution), recovery: false, infeasible_start: false })
            }
            Err(e @ (Error::InfeasibleStart | Error::InfeasibleRollout { .. })) => {
                self.previous = None;
                let infeasible_start = e == Error::InfeasibleStart;
                let err = x.to_vector() - self.anchor.x_des.to_vector();
                let h = local_controller(&err, poly, x, depth, &self.cfg)?;
                Ok(StepOutcome { applied: self.cfg.mask.expand(&h), solution: None, recovery: true, infeasible_start })
            }
            Err(e) => Err(e),
        }
    }
}
