//! Lipschitz constants, terminal-set scalars and the disturbance bounds used
//! in the feasibility and cost-decrease arguments.

use nalgebra::{DVector, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::controller::local_gain_bound;
use super::cost::stage_cost;
use super::OcpConfig;
use crate::barrier::RecenteringAnchor;
use crate::camera::{CameraVelocity, DepthModel, NormalizedPoint};
use crate::error::{Error, Result};
use crate::polygon::{extract_state, propagate_discrete, MomentState, PolygonFeatures};

/// Model Lipschitz constant from the closed-form expression
/// `sqrt(2 max(4 (1 + nu_z dt / z)^2, 4 (omega_z dt)^2))`.
pub fn lipschitz_lf(nu_z_max: f64, omega_z_max: f64, depth: f64, dt: f64) -> f64 {
    let a = 4.0 * (1.0 + nu_z_max * dt / depth).powi(2);
    let b = 4.0 * (omega_z_max * dt).powi(2);
    (2.0 * a.max(b)).sqrt()
}

/// Stage-cost Lipschitz constant `2 ||state box|| sigma_max(Q)`.
pub fn lipschitz_stage_cost(state_box: &[f64; 4], q: &[f64; 4]) -> f64 {
    let norm = state_box.iter().map(|b| b * b).sum::<f64>().sqrt();
    2.0 * norm * q.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `sum_{j < i} L_f^j xi`.
pub fn prediction_error_bound(i: usize, xi: f64, lf: f64) -> f64 {
    geometric_sum(lf, i) * xi
}

/// `sum_{j < count} r^j`, with the `r = 1` limit.
fn geometric_sum(r: f64, count: usize) -> f64 {
    if (r - 1.0).abs() < 1e-12 {
        count as f64
    } else {
        (r.powi(count as i32) - 1.0) / (r - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityBound {
    /// Bound for each `m = 0..n-1`.
    pub per_m: Vec<f64>,
    pub min: f64,
}

/// `xi <= (a_eps - a_eps_f) / (L_E L_f^(n-1-m) sum_{i<=m} L_f^i)` for every `m`.
pub fn disturbance_feasibility_bound(a_eps: f64, a_eps_f: f64, l_e: f64, lf: f64, n: usize) -> Result<FeasibilityBound> {
    if !(a_eps > a_eps_f && a_eps_f > 0.0) {
        return Err(Error::Config(format!("need a_eps > a_eps_f > 0, got {a_eps} and {a_eps_f}")));
    }
    if !(lf > 0.0 && l_e > 0.0) || n == 0 {
        return Err(Error::Config("Lipschitz constants must be positive".into()));
    }
    let per_m: Vec<f64> =
        (0..n).map(|m| (a_eps - a_eps_f) / (l_e * lf.powi((n - 1 - m) as i32) * geometric_sum(lf, m + 1))).collect();
    let min = per_m.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FeasibilityBound { per_m, min })
}

/// `L_zm = L_E L_f^(n-1-m) + L_F (L_f^(n-1-m) - 1) / (L_f - 1)`.
pub fn cost_difference_constant(m: usize, n: usize, l_e: f64, lf: f64, l_cost: f64) -> f64 {
    let k = n - 1 - m;
    l_e * lf.powi(k as i32) + l_cost * geometric_sum(lf, k)
}

/// Upper bound on `J*(k+m) - J*(k-1)` given the prediction error `e` and the
/// norms of the states entering the lower-bound sum. Returns `(bound, L_zm)`.
pub fn cost_difference_bound(m: usize, e: f64, diag: &Diagnostics, past_state_norms: &[f64]) -> (f64, f64) {
    let l_zm = cost_difference_constant(m, diag.horizon, diag.l_e, diag.lf_empirical, diag.l_cost);
    let lower: f64 = past_state_norms.iter().map(|x| diag.f_lower * x * x).sum();
    (l_zm * e - lower, l_zm)
}

/// Largest `eps0` for which the ellipsoid `x^T P x <= max(p) eps0^2` stays
/// within half the distance from `x_des` to the constraint boundaries.
pub fn terminal_radius(cfg: &OcpConfig, x_des: &MomentState) -> f64 {
    let p = &cfg.weights.p;
    let p_max = p.iter().fold(0.0f64, |a, b| a.max(*b));
    let fov = &cfg.constraints.visibility.fov;
    let area = &cfg.constraints.area;
    let w_centroid = fov.signed_edge_distance(x_des.sbar_x, x_des.sbar_y);
    let w_area = (x_des.sigma_bar - area.sigma_min.ln()).min(area.sigma_max.ln() - x_des.sigma_bar);
    let r = [w_centroid * (p[0] / p_max).sqrt(), w_centroid * (p[1] / p_max).sqrt(), w_area * (p[2] / p_max).sqrt()];
    0.5 * r.iter().fold(f64::INFINITY, |a, b| a.min(*b))
}

fn similarity(poly: &PolygonFeatures, shift: (f64, f64), scale: f64, angle: f64) -> Result<PolygonFeatures> {
    let (cx, cy) = crate::polygon::centroid(poly);
    let (c, s) = (angle.cos(), angle.sin());
    let pts = poly
        .vertices()
        .iter()
        .map(|p| {
            let (dx, dy) = (scale * (p.x - cx), scale * (p.y - cy));
            NormalizedPoint::new(cx + shift.0 + c * dx - s * dy, cy + shift.1 + s * dx + c * dy)
        })
        .collect();
    PolygonFeatures::with_reference(pts, poly.reference_pair())
}

fn random_input(rng: &mut ChaCha8Rng, cfg: &OcpConfig, fraction: f64) -> CameraVelocity {
    let limits = cfg.limits.as_array();
    let masked: Vec<f64> = cfg.mask.indices().into_iter().map(|i| rng.random_range(-fraction..fraction) * limits[i]).collect();
    cfg.mask.expand(&masked)
}

/// Sampled Lipschitz constant of the one-step state map around `poly`.
///
/// Pairs of nearby polygons are drawn as similarity transforms of `poly`
/// (shift, scale and rotation span all four state directions) under a common
/// random input; the estimate is the largest ratio of output to input
/// distance.
pub fn empirical_lipschitz_lf(
    poly: &PolygonFeatures,
    cfg: &OcpConfig,
    depth: DepthModel,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flow = DVector::zeros(2 * poly.len());
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let shift = (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
        let scale = rng.random_range(0.9..1.1);
        let angle = rng.random_range(-0.2..0.2);
        let nu = random_input(&mut rng, cfg, 0.9);
        let eps = 1e-4;
        let tweak = (rng.random_range(-eps..eps), rng.random_range(-eps..eps));
        let tweak_scale = 1.0 + rng.random_range(-eps..eps);
        let tweak_angle = rng.random_range(-eps..eps);
        let (Ok(a), Ok(b)) = (
            similarity(poly, shift, scale, angle),
            similarity(poly, (shift.0 + tweak.0, shift.1 + tweak.1), scale * tweak_scale, angle + tweak_angle),
        ) else {
            continue;
        };
        let (Ok(xa), Ok(xb)) = (extract_state(&a), extract_state(&b)) else { continue };
        let (Ok((_, ya)), Ok((_, yb))) =
            (propagate_discrete(&a, &xa, &nu, &flow, depth, cfg.dt), propagate_discrete(&b, &xb, &nu, &flow, depth, cfg.dt))
        else {
            continue;
        };
        let din = (xa.to_vector() - xb.to_vector()).norm();
        if din > 0.0 {
            best = best.max((ya.to_vector() - yb.to_vector()).norm() / din);
        }
    }
    if best > 0.0 {
        Ok(best)
    } else {
        Err(Error::Config("no valid samples for the empirical Lipschitz estimate".into()))
    }
}

/// Sampled Lipschitz constant of the stage cost in the input at `x`, over
/// inputs within `fraction` of the limits.
pub fn empirical_lipschitz_lfv(
    x: &MomentState,
    cfg: &OcpConfig,
    anchor: &RecenteringAnchor,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let a = random_input(&mut rng, cfg, 0.9);
        let b = random_input(&mut rng, cfg, 0.9);
        let d = (a.0 - b.0).norm();
        if d > 0.0 {
            best = best.max((stage_cost(x, &a, cfg, anchor)? - stage_cost(x, &b, cfg, anchor)?).abs() / d);
        }
    }
    Ok(best)
}

/// Constants and bounds reported once per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub horizon: usize,
    pub lf_formula: f64,
    pub lf_empirical: f64,
    pub l_cost: f64,
    pub l_cost_input_empirical: f64,
    pub l_e: f64,
    pub l_h: f64,
    /// Coefficient of the quadratic lower bound on the stage cost.
    pub f_lower: f64,
    pub eps0: f64,
    pub a_eps: f64,
    pub a_eps_f: f64,
    /// Feasibility bound on the disturbance using the empirical `L_f`.
    pub xi_max: f64,
    pub xi_per_m: Vec<f64>,
    /// Same bound with the closed-form `L_f`.
    pub xi_max_formula: f64,
    /// `L_zm` for `m = 0..n-1`, empirical `L_f`.
    pub l_zm: Vec<f64>,
}

impl Diagnostics {
    /// `poly` is a representative polygon of the operating region, typically the first measurement.
    pub fn compute(cfg: &OcpConfig, anchor: &RecenteringAnchor, poly: &PolygonFeatures, depth: DepthModel) -> Result<Self> {
        let n = cfg.horizon;
        let x_des = anchor.x_des;
        let limits = cfg.limits.as_array();
        let lf_formula = lipschitz_lf(limits[2], limits[5], depth.z, cfg.dt);
        let lf_empirical = empirical_lipschitz_lf(poly, cfg, depth, 400, 7)?;
        let fov = &cfg.constraints.visibility.fov;
        let area = &cfg.constraints.area;
        let state_box = [
            fov.x_min.abs().max(fov.x_max.abs()),
            fov.y_min.abs().max(fov.y_max.abs()),
            area.sigma_min.ln().abs().max(area.sigma_max.ln().abs()),
            cfg.a_bar_bound,
        ];
        let l_cost = lipschitz_stage_cost(&state_box, &cfg.weights.q);
        let p_max = cfg.weights.p.iter().fold(0.0f64, |a, b| a.max(*b));
        let eps0 = terminal_radius(cfg, &x_des);
        if !(eps0 > 0.0) {
            return Err(Error::Config("desired state leaves no room for a terminal set".into()));
        }
        let a_eps = p_max * eps0 * eps0;
        let a_eps_f = a_eps / 2.0;
        let l_e = 2.0 * eps0 * p_max;
        let bound = disturbance_feasibility_bound(a_eps, a_eps_f, l_e, lf_empirical, n)?;
        let bound_formula = disturbance_feasibility_bound(a_eps, a_eps_f, l_e, lf_formula, n)?;
        let r_min = cfg.mask.indices().into_iter().map(|i| cfg.weights.r[i]).fold(f64::INFINITY, f64::min);
        let f_lower = cfg.weights.q.iter().copied().fold(r_min, f64::min);
        let x_poly = extract_state(poly)?;
        Ok(Self {
            horizon: n,
            lf_formula,
            lf_empirical,
            l_cost,
            l_cost_input_empirical: empirical_lipschitz_lfv(&x_des, cfg, anchor, 2000, 11)?,
            l_e,
            l_h: local_gain_bound(poly, &x_poly, depth, cfg)?,
            f_lower,
            eps0,
            a_eps,
            a_eps_f,
            xi_max: bound.min,
            xi_per_m: bound.per_m,
            xi_max_formula: bound_formula.min,
            l_zm: (0..n).map(|m| cost_difference_constant(m, n, l_e, lf_empirical, l_cost)).collect(),
        })
    }

    /// Whether the terminal error lies in `E_f = { x^T P x <= a_eps }`.
    pub fn in_terminal_set(&self, err: &Vector4<f64>, cfg: &OcpConfig) -> bool {
        super::cost::terminal_cost(err, cfg) <= self.a_eps
    }
}
