//! Visibility and area constraints, their reciprocal and recentered barriers,
//! and the input-saturation barrier.
//!
//! Both state constraints share one shape: with `d` a distance to the
//! constraint boundary and `m` a margin,
//!
//! ```text
//! L(d) = 0                              d <= 0
//!      = 1 - exp(-(d / (d - m))^2)      0 < d <= m
//!      = 1                              d > m
//! ```
//!
//! The barrier is `b = 1 / L`; the recentered barrier subtracts its value and
//! linearization at the setpoint so the setpoint costs nothing.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraVelocity, FovRect};
use crate::error::{Error, Result};
use crate::polygon::MomentState;

/// Guard on `L_j` before inversion.
pub const EPS_L: f64 = 1e-8;
/// Central-difference step for barrier gradients.
pub const GRADIENT_STEP: f64 = 1e-6;

/// Constraint shape shared by `L1` and `L2`.
pub fn margin_constraint(d: f64, margin: f64) -> f64 {
    if d.is_nan() || d <= 0.0 {
        0.0
    } else if d > margin {
        1.0
    } else {
        let r = d / (d - margin);
        1.0 - (-r * r).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityParams {
    pub gamma: f64,
    pub fov: FovRect,
}

impl VisibilityParams {
    pub fn new(gamma: f64, fov: FovRect) -> Result<Self> {
        if !(gamma > 0.0) || gamma >= fov.min_side() / 2.0 {
            return Err(Error::Config(format!(
                "gamma = {gamma} must be positive and below half the smaller FoV side ({})",
                fov.min_side() / 2.0
            )));
        }
        Ok(Self { gamma, fov })
    }

    pub fn from_intrinsics(gamma: f64, k: &CameraIntrinsics) -> Result<Self> {
        Self::new(gamma, k.normalized_fov())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaBounds {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub delta: f64,
}

impl AreaBounds {
    pub fn new(sigma_min: f64, sigma_max: f64, delta: f64) -> Result<Self> {
        let b = Self { sigma_min, sigma_max, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max) {
            return Err(Error::Config("area bounds need 0 < sigma_min < sigma_max".into()));
        }
        if !(self.delta > 0.0 && self.delta < (self.sigma_max - self.sigma_min) / 2.0) {
            return Err(Error::Config("area margin delta must lie in (0, (sigma_max - sigma_min)/2)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputLimits {
    pub nu_max: [f64; 3],
    pub omega_max: [f64; 3],
}

impl InputLimits {
    pub fn new(nu_max: [f64; 3], omega_max: [f64; 3]) -> Result<Self> {
        let l = Self { nu_max, omega_max };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|m| *m > 0.0 && m.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("input limits must be positive and finite".into()))
        }
    }

    /// Limits in velocity-vector order.
    pub fn as_array(&self) -> [f64; 6] {
        let (n, o) = (self.nu_max, self.omega_max);
        [n[0], n[1], n[2], o[0], o[1], o[2]]
    }

    /// Whether every component is strictly inside its limit with the `EPS_L` guard.
    pub fn contains(&self, nu: &CameraVelocity) -> bool {
        nu.0.iter().zip(self.as_array()).all(|(v, m)| v.abs() < m - EPS_L)
    }
}

pub fn constraint_l1(sbar_x: f64, sbar_y: f64, p: &VisibilityParams) -> f64 {
    margin_constraint(p.fov.signed_edge_distance(sbar_x, sbar_y), p.gamma)
}

pub fn constraint_l2(sigma_bar: f64, b: &AreaBounds) -> f64 {
    let sigma = sigma_bar.exp();
    margin_constraint((sigma - b.sigma_min).min(b.sigma_max - sigma), b.delta)
}

/// The two state constraints evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateConstraints {
    pub visibility: VisibilityParams,
    pub area: AreaBounds,
}

impl StateConstraints {
    /// `L_j(x)` for `j` in `{0, 1}`.
    pub fn value(&self, j: usize, x: &Vector4<f64>) -> f64 {
        match j {
            0 => constraint_l1(x[0], x[1], &self.visibility),
            _ => constraint_l2(x[2], &self.area),
        }
    }

    pub fn values(&self, x: &MomentState) -> [f64; 2] {
        let v = x.to_vector();
        [self.value(0, &v), self.value(1, &v)]
    }

    /// Whether both constraints clear the `EPS_L` guard.
    pub fn is_safe(&self, x: &MomentState) -> bool {
        self.values(x).iter().all(|l| *l > EPS_L)
    }

    /// Reciprocal barrier `b_j = 1 / L_j`.
    pub fn barrier(&self, j: usize, x: &Vector4<f64>) -> Result<f64> {
        let l = self.value(j, x);
        if l <= EPS_L {
            return Err(Error::BarrierBlowup { constraint: j + 1, value: l });
        }
        Ok(1.0 / l)
    }

    fn barrier_gradient(&self, j: usize, x: &Vector4<f64>) -> Result<Vector4<f64>> {
        let mut g = Vector4::zeros();
        for k in 0..4 {
            let mut up = *x;
            let mut down = *x;
            up[k] += GRADIENT_STEP;
            down[k] -= GRADIENT_STEP;
            g[k] = (self.barrier(j, &up)? - self.barrier(j, &down)?) / (2.0 * GRADIENT_STEP);
        }
        Ok(g)
    }
}

/// Setpoint data for the recentered barriers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecenteringAnchor {
    pub x_des: MomentState,
    pub b_des: [f64; 2],
    pub grad_b_des: [Vector4<f64>; 2],
}

impl RecenteringAnchor {
    pub fn new(constraints: &StateConstraints, x_des: MomentState) -> Result<Self> {
        let v = x_des.to_vector();
        let mut b_des = [0.0; 2];
        let mut grad_b_des = [Vector4::zeros(); 2];
        for j in 0..2 {
            b_des[j] = constraints.barrier(j, &v).map_err(|_| {
                Error::Config(format!("desired state violates constraint L{} (value {:e})", j + 1, constraints.value(j, &v)))
            })?;
            grad_b_des[j] = constraints.barrier_gradient(j, &v)?;
        }
        Ok(Self { x_des, b_des, grad_b_des })
    }
}

/// `r_j(x) = b_j(x) - b_j(x_des) - grad b_j(x_des)^T (x - x_des)`.
pub fn recentered_barrier(x: &MomentState, j: usize, constraints: &StateConstraints, anchor: &RecenteringAnchor) -> Result<f64> {
    let v = x.to_vector();
    let b = constraints.barrier(j, &v)?;
    Ok(b - anchor.b_des[j] - anchor.grad_b_des[j].dot(&(v - anchor.x_des.to_vector())))
}

/// Sum of both recentered barriers.
pub fn barrier_bx(x: &MomentState, constraints: &StateConstraints, anchor: &RecenteringAnchor) -> Result<f64> {
    Ok(recentered_barrier(x, 0, constraints, anchor)? + recentered_barrier(x, 1, constraints, anchor)?)
}

/// Input-saturation barrier, zero at rest and unbounded at the limits.
pub fn barrier_bnu(nu: &CameraVelocity, limits: &InputLimits) -> Result<f64> {
    let mut total = 0.0;
    for (axis, (v, m)) in nu.0.iter().zip(limits.as_array()).enumerate() {
        if !(v.abs() < m - EPS_L) {
            return Err(Error::InputAtLimit { axis, value: *v, limit: m });
        }
        total += -2.0 / m + 1.0 / (m - v) + 1.0 / (v + m);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constraints() -> StateConstraints {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap();
        StateConstraints {
            visibility: VisibilityParams::from_intrinsics(0.1, &k).unwrap(),
            area: AreaBounds::new(0.005, 0.3, 0.004).unwrap(),
        }
    }

    #[test]
    fn margin_shape_values() {
        let g = 0.1;
        assert_eq!(margin_constraint(2.0 * g, g), 1.0);
        assert_relative_eq!(margin_constraint(g / 2.0, g), 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        assert_eq!(margin_constraint(0.0, g), 0.0);
        assert_eq!(margin_constraint(-0.3, g), 0.0);
        assert!(margin_constraint(1e-4, g) < 2e-6);
        assert_eq!(margin_constraint(g, g), 1.0);
    }

    #[test]
    fn shape_is_continuous_at_the_margin() {
        let g = 0.1;
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let gap = 10f64.powi(-k);
            let jump = 1.0 - margin_constraint(g - gap * g, g);
            assert!(jump <= prev);
            prev = jump;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn l2_bounds() {
        let b = AreaBounds::new(0.01, 0.2, 0.004).unwrap();
        assert_eq!(constraint_l2(0.1f64.ln(), &b), 1.0);
        assert_relative_eq!(constraint_l2((0.01 + 0.002f64).ln(), &b), 1.0 - (-1.0f64).exp(), epsilon = 1e-9);
        assert_relative_eq!(constraint_l2((0.2 - 0.002f64).ln(), &b), 1.0 - (-1.0f64).exp(), epsilon = 1e-9);
        assert!(constraint_l2(0.01f64.ln(), &b) < 1e-12);
        assert_eq!(constraint_l2(0.5f64.ln(), &b), 0.0);
        assert!(AreaBounds::new(0.2, 0.1, 0.01).is_err());
        assert!(AreaBounds::new(0.1, 0.2, 0.06).is_err());
    }

    #[test]
    fn bnu_values() {
        let lim = InputLimits::new([1.0; 3], [1.0; 3]).unwrap();
        assert_eq!(barrier_bnu(&CameraVelocity::zero(), &lim).unwrap(), 0.0);
        let half = CameraVelocity::new(0.5, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(barrier_bnu(&half, &lim).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        let near = CameraVelocity::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0 - 1e-6);
        assert!(barrier_bnu(&near, &lim).unwrap() > 1e5);
        let at = CameraVelocity::new(0.0, -1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(barrier_bnu(&at, &lim), Err(Error::InputAtLimit { axis: 1, .. })));
    }

    #[test]
    fn recentered_barrier_vanishes_at_setpoint() {
        let c = constraints();
        // Setpoint inside the visibility margin so the gradient term is active.
        let x_des = MomentState::new(0.58, 0.1, 0.05f64.ln(), 0.2);
        let anchor = RecenteringAnchor::new(&c, x_des).unwrap();
        assert!(anchor.grad_b_des[0].norm() > 1.0);
        for j in 0..2 {
            assert_eq!(recentered_barrier(&x_des, j, &c, &anchor).unwrap(), 0.0);
        }
        let h = GRADIENT_STEP;
        for k in 0..4 {
            let mut up = x_des.to_vector();
            let mut down = up;
            up[k] += h;
            down[k] -= h;
            let g = (barrier_bx(&MomentState::from_vector(&up), &c, &anchor).unwrap()
                - barrier_bx(&MomentState::from_vector(&down), &c, &anchor).unwrap())
                / (2.0 * h);
            assert!(g.abs() < 1e-6, "component {k}: {g}");
        }
    }

    #[test]
    fn bx_grows_toward_the_boundary() {
        let c = constraints();
        let x_des = MomentState::new(0.0, 0.0, 0.05f64.ln(), 0.0);
        let anchor = RecenteringAnchor::new(&c, x_des).unwrap();
        assert_eq!(barrier_bx(&x_des, &c, &anchor).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in 1..=100 {
            let sx = 0.6399 * k as f64 / 100.0;
            let v = barrier_bx(&MomentState::new(sx, 0.0, x_des.sigma_bar, 0.0), &c, &anchor).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(prev > 1e3);
        assert!(matches!(
            barrier_bx(&MomentState::new(0.7, 0.0, x_des.sigma_bar, 0.0), &c, &anchor),
            Err(Error::BarrierBlowup { constraint: 1, .. })
        ));
    }

    #[test]
    fn unsafe_setpoint_is_rejected() {
        let c = constraints();
        assert!(RecenteringAnchor::new(&c, MomentState::new(0.0, 0.0, 0.9f64.ln(), 0.0)).is_err());
        assert!(VisibilityParams::new(0.5, c.visibility.fov).is_err());
    }
}
