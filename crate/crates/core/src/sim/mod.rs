//! Deterministic closed-loop simulation.
//!
//! Each control period the world projects the true target, the measured
//! state receives an additive output disturbance, the centroid-flow estimator
//! and the NMPC produce a command, and the camera integrates it. The log keeps
//! the true state alongside everything needed to replay the predictions.

mod config;
mod log;
mod world;

pub use config::{ConvergenceSpec, DesiredSpec, DisturbanceSpec, OutputSpec, PoseSpec, ScenarioConfig, SimMode};
pub use log::{read_csv, AbortRecord, SimLog, StepRecord, TraceStep, CSV_HEADER};
pub use world::{inject_disturbance, integrate_pose, level_pose, observe, step_world, MIN_HEIGHT};

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{point_interaction, CameraPose, CameraVelocity, DepthModel, Matrix2x6};
use crate::error::{Error, Result};
use crate::nmpc::{empirical_lipschitz_lf, prediction_error_bound, Diagnostics, NmpcController, OcpConfig};
use crate::polygon::{centroid, extract_state, propagate_discrete, MomentState, PolygonFeatures};
use crate::target::{CentroidFlowEstimator, TargetModel};

/// Everything fixed before the first control step.
#[derive(Debug, Clone)]
pub struct Setup {
    pub ocp: OcpConfig,
    pub target: TargetModel,
    pub pose: CameraPose,
    pub x_des: MomentState,
    pub diagnostics: Diagnostics,
    pub disturbance_bound: f64,
}

impl Setup {
    /// Resolves the target, the setpoint, the diagnostics and the disturbance bound.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let ocp = cfg.controller.build(&cfg.intrinsics, cfg.mode.mask())?;
        let mut target_spec = cfg.target.clone();
        target_spec.seed = target_spec.seed.wrapping_add(cfg.seed);
        let target = target_spec.build()?;
        target.validate(cfg.duration, cfg.steps().max(2))?;
        let pair = (cfg.reference_pair[0], cfg.reference_pair[1]);
        let pose = level_pose(cfg.initial_pose.position, cfg.initial_pose.yaw);
        let x_des = match cfg.desired {
            DesiredSpec::State(x) => x,
            DesiredSpec::FromPose(p) => {
                let (poly, _) = observe(&target, &level_pose(p.position, p.yaw), 0.0, &cfg.intrinsics, pair)?;
                extract_state(&poly)?
            }
        };
        if !ocp.constraints.is_safe(&x_des) {
            return Err(Error::Config("desired state violates the barrier constraints".into()));
        }
        let anchor = ocp.anchor(x_des)?;
        let (poly0, depth0) = observe(&target, &pose, 0.0, &cfg.intrinsics, pair)?;
        let diagnostics = Diagnostics::compute(&ocp, &anchor, &poly0, depth0)?;
        let disturbance_bound = match (cfg.disturbance.bound, cfg.disturbance.feasibility_fraction) {
            (Some(b), _) => b,
            (None, Some(f)) => f * diagnostics.xi_max,
            (None, None) => 0.0,
        };
        Ok(Self { ocp, target, pose, x_des, diagnostics, disturbance_bound })
    }
}

/// Mean of the vertex interaction matrices: the centroid rows under a shared depth.
fn centroid_interaction(poly: &PolygonFeatures, depth: DepthModel) -> Matrix2x6 {
    let inv_z = 1.0 / depth.z;
    let sum = poly.vertices().iter().fold(Matrix2x6::zeros(), |acc, p| acc + point_interaction(p.x, p.y, inv_z));
    sum / poly.len() as f64
}

/// Runs the closed loop for `cfg.duration`.
///
/// Configuration problems are returned as errors. Failures during the run
/// (target lost, unrecoverable solver errors) end it early and are stored in
/// [`SimLog::abort`].
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog> {
    let setup = Setup::new(cfg)?;
    let dt = setup.ocp.dt;
    let pair = (cfg.reference_pair[0], cfg.reference_pair[1]);
    let mut controller = NmpcController::new(setup.ocp.clone(), setup.x_des)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut estimator = CentroidFlowEstimator::new();
    let mut log = SimLog::new(cfg, &setup);
    let mut pose = setup.pose;
    let (mut poly, mut depth) = observe(&setup.target, &pose, 0.0, &cfg.intrinsics, pair)?;

    for k in 0..cfg.steps() {
        let t = k as f64 * dt;
        match closed_loop_step(&setup, &mut controller, &mut rng, &mut estimator, &poly, depth, t, &mut log) {
            Ok(applied) => match step_world(&pose, &setup.target, t, &applied, dt, cfg.mode, &cfg.intrinsics, pair) {
                Ok((p, s, d)) => {
                    pose = p;
                    poly = s;
                    depth = d;
                }
                Err(e) => {
                    log.abort = Some(AbortRecord { step: k + 1, t: t + dt, error: e.to_string() });
                    break;
                }
            },
            Err(e) => {
                log.abort = Some(AbortRecord { step: k, t, error: e.to_string() });
                break;
            }
        }
    }
    Ok(log)
}

#[allow(clippy::too_many_arguments)]
fn closed_loop_step(
    setup: &Setup,
    controller: &mut NmpcController,
    rng: &mut ChaCha8Rng,
    estimator: &mut CentroidFlowEstimator,
    poly: &PolygonFeatures,
    depth: DepthModel,
    t: f64,
    log: &mut SimLog,
) -> Result<CameraVelocity> {
    let x_true = extract_state(poly)?;
    let xi = inject_disturbance(rng, setup.disturbance_bound);
    let measured = MomentState::from_vector(&(x_true.to_vector() + xi));
    let (cx, cy) = centroid(poly);
    let flow = estimator.update(Vector2::new(cx, cy), t, poly.len())?.per_vertex_flow;
    let outcome = controller.step(poly, &measured, &flow, depth)?;
    estimator.record_command(centroid_interaction(poly, depth), outcome.applied);

    let err = x_true.to_vector() - setup.x_des.to_vector();
    let terminal_hit = outcome
        .solution
        .as_ref()
        .map(|s| {
            let n = s.prediction.states.len() - 1;
            setup.diagnostics.in_terminal_set(&(s.prediction.states[n].to_vector() - setup.x_des.to_vector()), &setup.ocp)
        })
        .unwrap_or(false);
    log.records.push(StepRecord {
        t,
        state: x_true,
        error: err.into(),
        angle_error_deg: (x_true.a_bar.atan() - setup.x_des.a_bar.atan()).to_degrees(),
        barriers: setup.ocp.constraints.values(&x_true),
        applied: outcome.applied.0.into(),
        cost: outcome.cost(),
        iterations: outcome.iterations(),
        feasible: !outcome.recovery,
        infeasible_start: outcome.infeasible_start,
        terminal_set: terminal_hit,
    });
    log.trace.push(TraceStep { polygon: poly.clone(), measured, flow, depth: depth.z });
    Ok(outcome.applied)
}

/// Result of replaying the nominal model along a logged run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PredictionAudit {
    /// Largest one-step gap between a measured state and its model prediction.
    pub xi_one_step: f64,
    /// Lipschitz estimate used for the bound: the largest sampled value over logged polygons.
    pub lf: f64,
    /// Worst ratio of observed `i`-step error to its bound; at most 1 when the bound holds.
    /// Equals 1 at the step defining `xi_one_step`.
    pub worst_ratio: f64,
    /// Same, over `i >= 2` only.
    pub worst_ratio_multistep: f64,
    pub violations: usize,
    pub checks: usize,
}

/// Checks the multi-step prediction-error bound on a log.
///
/// From every logged step `k` the coupled model is rolled forward with the
/// controls actually applied afterwards, holding the flow and depth of step
/// `k`. The `i`-step gap to the measured state is compared with
/// `sum_{j<i} L_f^j xi`, where `xi` is the largest one-step gap in the run.
pub fn audit_predictions(log: &SimLog, ocp: &OcpConfig, horizon: usize, lf_samples: usize) -> Result<PredictionAudit> {
    let trace = &log.trace;
    let steps = trace.len();
    // Safety is not part of the bound, so the replay skips the constraint checks.
    let predict = |k: usize, len: usize| -> Result<Vec<MomentState>> {
        let tr = &trace[k];
        let depth = DepthModel::new(tr.depth)?;
        let (mut poly, mut x) = (tr.polygon.clone(), tr.measured);
        let mut states = vec![x];
        for i in 0..len {
            let nu = CameraVelocity(log.records[k + i].applied.into());
            (poly, x) = propagate_discrete(&poly, &x, &nu, &tr.flow, depth, ocp.dt)?;
            states.push(x);
        }
        Ok(states)
    };

    let mut xi: f64 = 0.0;
    for k in 0..steps.saturating_sub(1) {
        if let Ok(states) = predict(k, 1) {
            xi = xi.max((states[1].to_vector() - trace[k + 1].measured.to_vector()).norm());
        }
    }
    let stride = (steps / lf_samples.max(1)).max(1);
    let mut lf: f64 = 0.0;
    for k in (0..steps).step_by(stride) {
        let depth = DepthModel::new(trace[k].depth)?;
        if let Ok(v) = empirical_lipschitz_lf(&trace[k].polygon, ocp, depth, 200, 7 + k as u64) {
            lf = lf.max(v);
        }
    }
    let (mut worst_ratio, mut worst_ratio_multistep, mut violations, mut checks) = (0.0f64, 0.0f64, 0, 0);
    for k in 0..steps {
        let len = horizon.min(steps - 1 - k);
        if len == 0 {
            break;
        }
        let Ok(states) = predict(k, len) else { continue };
        for i in 1..=len {
            let e = (states[i].to_vector() - trace[k + i].measured.to_vector()).norm();
            let bound = prediction_error_bound(i, xi, lf);
            checks += 1;
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(e / bound);
                if i >= 2 {
                    worst_ratio_multistep = worst_ratio_multistep.max(e / bound);
                }
            }
            if e > bound * (1.0 + 1e-9) + 1e-15 {
                violations += 1;
            }
        }
    }
    Ok(PredictionAudit { xi_one_step: xi, lf, worst_ratio, worst_ratio_multistep, violations, checks })
}
