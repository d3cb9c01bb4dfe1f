use nalgebra::{DVector, Vector4};

use super::{HorizonControls, OcpConfig};
use crate::barrier::{barrier_bnu, barrier_bx, RecenteringAnchor};
use crate::camera::{CameraVelocity, DepthModel};
use crate::error::{Error, Result};
use crate::polygon::{propagate_discrete, MomentState, PolygonFeatures};

/// Quadratic part `x^T Q x + nu^T R nu` of the stage cost, on the state error.
pub fn quadratic_stage_cost(err: &Vector4<f64>, nu: &CameraVelocity, cfg: &OcpConfig) -> f64 {
    let w = &cfg.weights;
    let quad_x: f64 = (0..4).map(|i| w.q[i] * err[i] * err[i]).sum();
    let quad_u: f64 = (0..6).filter(|&i| cfg.mask.0[i]).map(|i| w.r[i] * nu.0[i] * nu.0[i]).sum();
    quad_x + quad_u
}

/// `F = x^T Q x + nu^T R nu + B_x + B_nu` at state `x` (not the error).
pub fn stage_cost(x: &MomentState, nu: &CameraVelocity, cfg: &OcpConfig, anchor: &RecenteringAnchor) -> Result<f64> {
    let err = x.to_vector() - anchor.x_des.to_vector();
    Ok(quadratic_stage_cost(&err, nu, cfg) + barrier_bx(x, &cfg.constraints, anchor)? + barrier_bnu(nu, &cfg.limits)?)
}

/// `E = x^T P x` on the state error.
pub fn terminal_cost(err: &Vector4<f64>, cfg: &OcpConfig) -> f64 {
    (0..4).map(|i| cfg.weights.p[i] * err[i] * err[i]).sum()
}

/// Predicted trajectory over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `n + 1` polygons, starting with the measured one.
    pub polygons: Vec<PolygonFeatures>,
    /// `n + 1` states, starting with the measured one.
    pub states: Vec<MomentState>,
    /// `prefix[i]` is the sum of the first `i` stage costs; `n + 1` entries.
    pub prefix: Vec<f64>,
    pub terminal: f64,
}

impl Prediction {
    pub fn cost(&self) -> f64 {
        self.prefix[self.prefix.len() - 1] + self.terminal
    }
}

/// One optimal control problem instance.
#[derive(Debug, Clone, Copy)]
pub struct OcpProblem<'a> {
    pub cfg: &'a OcpConfig,
    pub anchor: &'a RecenteringAnchor,
    pub polygon: &'a PolygonFeatures,
    pub state: MomentState,
    pub flow: &'a DVector<f64>,
    pub depth: DepthModel,
}

impl OcpProblem<'_> {
    fn step(
        &self,
        poly: &PolygonFeatures,
        x: &MomentState,
        nu: &CameraVelocity,
        i: usize,
    ) -> Result<(PolygonFeatures, MomentState)> {
        let infeasible = |_| Error::InfeasibleRollout { step: i + 1 };
        let next = propagate_discrete(poly, x, nu, self.flow, self.depth, self.cfg.dt).map_err(infeasible)?;
        if !self.cfg.constraints.is_safe(&next.1) {
            return Err(Error::InfeasibleRollout { step: i + 1 });
        }
        Ok(next)
    }

    /// Rolls out the model and accumulates costs.
    pub fn evaluate(&self, u: &HorizonControls) -> Result<Prediction> {
        if !self.cfg.constraints.is_safe(&self.state) {
            return Err(Error::InfeasibleStart);
        }
        let n = u.horizon();
        let mut polygons = Vec::with_capacity(n + 1);
        let mut states = Vec::with_capacity(n + 1);
        let mut prefix = Vec::with_capacity(n + 1);
        polygons.push(self.polygon.clone());
        states.push(self.state);
        prefix.push(0.0);
        for i in 0..n {
            let nu = u.velocity(i, &self.cfg.mask);
            let f = stage_cost(&states[i], &nu, self.cfg, self.anchor).map_err(|_| Error::InfeasibleRollout { step: i })?;
            prefix.push(prefix[i] + f);
            let (p, x) = self.step(&polygons[i], &states[i], &nu, i)?;
            polygons.push(p);
            states.push(x);
        }
        let terminal = terminal_cost(&(states[n].to_vector() - self.anchor.x_des.to_vector()), self.cfg);
        Ok(Prediction { polygons, states, prefix, terminal })
    }

    /// Total cost; `+inf` when the rollout leaves the safe set or an input hits its limit.
    pub fn total_cost(&self, u: &HorizonControls) -> f64 {
        self.evaluate(u).map(|p| p.cost()).unwrap_or(f64::INFINITY)
    }

    /// Cost of `u`, reusing the first `from` steps of `base`, which must have
    /// been computed for controls agreeing with `u` on those steps.
    pub fn cost_from(&self, base: &Prediction, from: usize, u: &HorizonControls) -> f64 {
        let n = u.horizon();
        let mut poly = base.polygons[from].clone();
        let mut x = base.states[from];
        let mut total = base.prefix[from];
        for i in from..n {
            let nu = u.velocity(i, &self.cfg.mask);
            match stage_cost(&x, &nu, self.cfg, self.anchor) {
                Ok(f) => total += f,
                Err(_) => return f64::INFINITY,
            }
            match self.step(&poly, &x, &nu, i) {
                Ok((p, nx)) => {
                    poly = p;
                    x = nx;
                }
                Err(_) => return f64::INFINITY,
            }
        }
        total + terminal_cost(&(x.to_vector() - self.anchor.x_des.to_vector()), self.cfg)
    }
}

/// Iterated coupled Euler steps with the flow held constant.
pub fn rollout(
    polygon: &PolygonFeatures,
    state: &MomentState,
    controls: &HorizonControls,
    flow: &DVector<f64>,
    depth: DepthModel,
    cfg: &OcpConfig,
) -> Result<(Vec<PolygonFeatures>, Vec<MomentState>)> {
    let mut polygons = vec![polygon.clone()];
    let mut states = vec![*state];
    for i in 0..controls.horizon() {
        let nu = controls.velocity(i, &cfg.mask);
        let (p, x) = propagate_discrete(&polygons[i], &states[i], &nu, flow, depth, cfg.dt)
            .map_err(|_| Error::InfeasibleRollout { step: i + 1 })?;
        if !cfg.constraints.is_safe(&x) {
            return Err(Error::InfeasibleRollout { step: i + 1 });
        }
        polygons.push(p);
        states.push(x);
    }
    Ok((polygons, states))
}
