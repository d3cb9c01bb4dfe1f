//! Pinhole camera model and image-point kinematics.
//!
//! Camera frame convention: `x` to the right, `y` down, `z` along the optical
//! axis. Normalized image coordinates are `x = X / Z`, `y = Y / Z`.
//!
//! The level-frame mapping composes an intrinsic roll (about `x`) followed by
//! a pitch (about the rotated `y`): `R = Rx(roll) * Ry(pitch)`, and maps body
//! velocities into the virtual level frame with `R^T`.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix2x6 = SMatrix<f64, 2, 6>;
pub type Matrix2x4 = SMatrix<f64, 2, 4>;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub c_u: f64,
    pub c_v: f64,
    pub width: f64,
    pub height: f64,
}

impl CameraIntrinsics {
    pub fn new(alpha_x: f64, alpha_y: f64, c_u: f64, c_v: f64, width: f64, height: f64) -> Result<Self> {
        let k = Self { alpha_x, alpha_y, c_u, c_v, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha_x, self.alpha_y, self.c_u, self.c_v, self.width, self.height].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidIntrinsics("non-finite parameter".into()));
        }
        if self.alpha_x <= 0.0 || self.alpha_y <= 0.0 {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if !(self.c_u > 0.0 && self.c_u < self.width) || !(self.c_v > 0.0 && self.c_v < self.height) {
            return Err(Error::InvalidIntrinsics("principal point must lie inside the image".into()));
        }
        Ok(())
    }

    /// Field of view as a rectangle on the normalized image plane.
    pub fn normalized_fov(&self) -> FovRect {
        FovRect {
            x_min: -self.c_u / self.alpha_x,
            x_max: (self.width - self.c_u) / self.alpha_x,
            y_min: -self.c_v / self.alpha_y,
            y_max: (self.height - self.c_v) / self.alpha_y,
        }
    }

    /// Half of the image width expressed in normalized units.
    pub fn normalized_half_width(&self) -> f64 {
        0.5 * self.width / self.alpha_x
    }

    pub fn contains_pixel(&self, p: PixelPoint) -> bool {
        p.u >= 0.0 && p.u <= self.width && p.v >= 0.0 && p.v <= self.height
    }
}

/// Axis-aligned rectangle on the normalized image plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovRect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl FovRect {
    /// Signed distance from `(x, y)` to the nearest rectangle edge; negative outside.
    pub fn signed_edge_distance(&self, x: f64, y: f64) -> f64 {
        (x - self.x_min).min(self.x_max - x).min(y - self.y_min).min(self.y_max - y)
    }

    pub fn min_side(&self) -> f64 {
        (self.x_max - self.x_min).min(self.y_max - self.y_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    pub x: f64,
    pub y: f64,
}

impl NormalizedPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Camera spatial velocity `[nu_x, nu_y, nu_z, omega_x, omega_y, omega_z]`
/// expressed in the camera frame (m/s, rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CameraVelocity(pub Vector6<f64>);

impl CameraVelocity {
    pub fn new(nu_x: f64, nu_y: f64, nu_z: f64, omega_x: f64, omega_y: f64, omega_z: f64) -> Self {
        Self(Vector6::new(nu_x, nu_y, nu_z, omega_x, omega_y, omega_z))
    }

    pub fn zero() -> Self {
        Self(Vector6::zeros())
    }

    pub fn linear(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn angular(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn from_parts(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self(Vector6::new(linear.x, linear.y, linear.z, angular.x, angular.y, angular.z))
    }

    pub fn as_vector(&self) -> &Vector6<f64> {
        &self.0
    }
}

/// Which of the six velocity components the platform can command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuationMask(pub [bool; 6]);

impl ActuationMask {
    pub fn new(enabled: [bool; 6]) -> Result<Self> {
        if !enabled.iter().any(|&e| e) {
            return Err(Error::EmptyMask);
        }
        Ok(Self(enabled))
    }

    pub fn full() -> Self {
        Self([true; 6])
    }

    /// Multirotor in velocity mode: `nu_x, nu_y, nu_z, omega_z`.
    pub fn uav() -> Self {
        Self([true, true, true, false, false, true])
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&e| e).count()
    }

    /// Indices of enabled components in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        (0..6).filter(|&i| self.0[i]).collect()
    }

    /// Masked subvector of a full velocity.
    pub fn select(&self, nu: &CameraVelocity) -> DVector<f64> {
        DVector::from_iterator(self.count(), self.indices().into_iter().map(|i| nu.0[i]))
    }

    /// Full velocity with disabled components set to zero.
    pub fn expand(&self, masked: &[f64]) -> CameraVelocity {
        let mut out = Vector6::zeros();
        for (slot, &i) in self.indices().iter().enumerate() {
            out[i] = masked[slot];
        }
        CameraVelocity(out)
    }
}

impl Default for ActuationMask {
    fn default() -> Self {
        Self::full()
    }
}

/// Single constant depth shared by every feature point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthModel {
    pub z: f64,
}

impl DepthModel {
    pub fn new(z: f64) -> Result<Self> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::InvalidDepth(z));
        }
        Ok(Self { z })
    }
}

pub fn pixel_to_normalized(p: PixelPoint, k: &CameraIntrinsics) -> NormalizedPoint {
    NormalizedPoint { x: (p.u - k.c_u) / k.alpha_x, y: (p.v - k.c_v) / k.alpha_y }
}

pub fn normalized_to_pixel(s: NormalizedPoint, k: &CameraIntrinsics) -> PixelPoint {
    PixelPoint { u: s.x * k.alpha_x + k.c_u, v: s.y * k.alpha_y + k.c_v }
}

/// Interaction matrix of a point feature at normalized position `s` and depth `z`.
pub fn interaction_matrix(s: NormalizedPoint, depth: DepthModel) -> Result<Matrix2x6> {
    if !(depth.z > 0.0) {
        return Err(Error::InvalidDepth(depth.z));
    }
    Ok(point_interaction(s.x, s.y, 1.0 / depth.z))
}

/// Unchecked variant used in inner loops; `inv_z` must be `1 / z` with `z > 0`.
#[inline]
pub(crate) fn point_interaction(x: f64, y: f64, inv_z: f64) -> Matrix2x6 {
    Matrix2x6::new(-inv_z, 0.0, x * inv_z, x * y, -(1.0 + x * x), y, 0.0, -inv_z, y * inv_z, 1.0 + y * y, -x * y, -x)
}

/// Splits `L` into the `(nu_x, nu_y, omega_x, omega_y)` block and the `(nu_z, omega_z)` block.
pub fn partition_columns(l: &Matrix2x6) -> (Matrix2x4, SMatrix<f64, 2, 2>) {
    let mut xy = Matrix2x4::zeros();
    let mut z = SMatrix::<f64, 2, 2>::zeros();
    for (dst, src) in [0usize, 1, 3, 4].iter().enumerate() {
        xy.set_column(dst, &l.column(*src));
    }
    z.set_column(0, &l.column(2));
    z.set_column(1, &l.column(5));
    (xy, z)
}

/// Inverse of [`partition_columns`].
pub fn reassemble_columns(xy: &Matrix2x4, z: &SMatrix<f64, 2, 2>) -> Matrix2x6 {
    let mut l = Matrix2x6::zeros();
    for (src, dst) in [0usize, 1, 3, 4].iter().enumerate() {
        l.set_column(*dst, &xy.column(src));
    }
    l.set_column(2, &z.column(0));
    l.set_column(5, &z.column(1));
    l
}

/// Removes the columns of disabled velocity components, keeping column order.
pub fn apply_actuation_mask(l: &DMatrix<f64>, mask: &ActuationMask) -> Result<DMatrix<f64>> {
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    if l.ncols() != 6 {
        return Err(Error::Config(format!("expected 6 columns, got {}", l.ncols())));
    }
    Ok(l.select_columns(mask.indices().iter()))
}

fn tilt_rotation(roll: f64, pitch: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), roll) * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
}

/// Expresses a body-frame velocity in the gravity-aligned virtual camera frame.
pub fn level_frame_velocity(body: &CameraVelocity, roll: f64, pitch: f64) -> Result<CameraVelocity> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if roll.abs() >= half_pi || !roll.is_finite() {
        return Err(Error::TiltOutOfRange(roll));
    }
    if pitch.abs() >= half_pi || !pitch.is_finite() {
        return Err(Error::TiltOutOfRange(pitch));
    }
    let r_t = tilt_rotation(roll, pitch).inverse();
    Ok(CameraVelocity::from_parts(r_t * body.linear(), r_t * body.angular()))
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rigid displacement produced by holding a body-frame twist for `dt` seconds.
///
/// Returns `(R, t)` such that the new frame pose is `old * (R, t)`.
pub fn integrate_twist(nu: &CameraVelocity, dt: f64) -> (Rotation3<f64>, Vector3<f64>) {
    let phi = nu.angular() * dt;
    let rho = nu.linear() * dt;
    let theta = phi.norm();
    let rot = Rotation3::new(phi);
    let v = if theta < 1e-9 {
        Matrix3::identity() + 0.5 * skew(&phi)
    } else {
        let k = skew(&phi);
        let t2 = theta * theta;
        Matrix3::identity() + (1.0 - theta.cos()) / t2 * k + (theta - theta.sin()) / (t2 * theta) * (k * k)
    };
    (rot, v * rho)
}

/// Camera pose in a z-up world frame; `rotation` maps camera to world axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl CameraPose {
    /// Downward-looking camera with zero roll and pitch. At zero yaw the
    /// camera `x` axis is world `x` and the optical axis is world `-z`.
    pub fn level(position: Vector3<f64>, yaw: f64) -> Self {
        let down = Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        Self { position, rotation: down * Rotation3::from_axis_angle(&Vector3::z_axis(), yaw) }
    }

    /// Yaw about the optical axis relative to the level orientation.
    pub fn yaw(&self) -> f64 {
        let down = Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        let local = down.inverse() * self.rotation;
        let m = local.matrix();
        m[(1, 0)].atan2(m[(0, 0)])
    }

    /// Point expressed in the camera frame.
    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (world - self.position)
    }

    /// Velocity of a moving world point, expressed in the (static) camera frame.
    pub fn velocity_to_camera(&self, world_velocity: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * world_velocity
    }

    /// Applies a body-frame twist held for `dt` seconds.
    pub fn integrate(&self, nu: &CameraVelocity, dt: f64) -> Self {
        let (dr, dp) = integrate_twist(nu, dt);
        Self { position: self.position + self.rotation * dp, rotation: self.rotation * dr }
    }
}

/// Normalized projection of a camera-frame point; `None` behind the camera.
pub fn project(p: &Vector3<f64>) -> Option<NormalizedPoint> {
    (p.z > 0.0).then(|| NormalizedPoint::new(p.x / p.z, p.y / p.z))
}

/// Image velocity of a point with camera-frame position `p` and velocity `v`.
pub fn projection_rate(p: &Vector3<f64>, v: &Vector3<f64>) -> (f64, f64) {
    let (x, y) = (p.x / p.z, p.y / p.z);
    ((v.x - x * v.z) / p.z, (v.y - y * v.z) / p.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vga() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap()
    }

    #[test]
    fn principal_point_maps_to_origin() {
        let k = vga();
        let s = pixel_to_normalized(PixelPoint { u: k.c_u, v: k.c_v }, &k);
        assert_eq!((s.x, s.y), (0.0, 0.0));
        let p = normalized_to_pixel(NormalizedPoint::new(0.0, 0.0), &k);
        assert_eq!((p.u, p.v), (k.c_u, k.c_v));
    }

    #[test]
    fn pixel_normalization_values() {
        let k = vga();
        let s = pixel_to_normalized(PixelPoint { u: 820.0, v: 240.0 }, &k);
        assert_eq!((s.x, s.y), (1.0, 0.0));
        assert_eq!(normalized_to_pixel(NormalizedPoint::new(1.0, 0.0), &k).u, 820.0);
    }

    #[test]
    fn pixel_round_trip() {
        let k = CameraIntrinsics::new(612.3, 598.1, 311.7, 247.2, 640.0, 480.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = PixelPoint { u: rng.random_range(-100.0..800.0), v: rng.random_range(-100.0..600.0) };
            let q = normalized_to_pixel(pixel_to_normalized(p, &k), &k);
            assert!((p.u - q.u).abs() < 1e-12 && (p.v - q.v).abs() < 1e-12);
            let s = NormalizedPoint::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let t = pixel_to_normalized(normalized_to_pixel(s, &k), &k);
            assert!((s.x - t.x).abs() < 1e-12 && (s.y - t.y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 320.0, 240.0, 640.0, 480.0).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 700.0, 240.0, 640.0, 480.0).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 320.0, 0.0, 640.0, 480.0).is_err());
    }

    #[test]
    fn interaction_matrix_entries() {
        let l = interaction_matrix(NormalizedPoint::new(0.0, 0.0), DepthModel { z: 1.0 }).unwrap();
        assert_eq!(l.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 0.0, 0.0, -1.0, 0.0]);
        assert_eq!(l.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, -1.0, 0.0, 1.0, 0.0, 0.0]);

        let l = interaction_matrix(NormalizedPoint::new(1.0, 1.0), DepthModel { z: 2.0 }).unwrap();
        assert_eq!(l.row(0).iter().copied().collect::<Vec<_>>(), vec![-0.5, 0.0, 0.5, 1.0, -2.0, 1.0]);

        assert!(interaction_matrix(NormalizedPoint::new(0.0, 0.0), DepthModel { z: 0.0 }).is_err());
        assert!(DepthModel::new(-1.0).is_err());
    }

    /// Reprojects a 3-D point after the camera moves with a constant twist.
    fn reprojected_flow(point: Vector3<f64>, nu: &CameraVelocity, dt: f64) -> (f64, f64) {
        let (rot, t) = integrate_twist(nu, dt);
        let p = rot.inverse() * (point - t);
        (p.x / p.z - point.x / point.z, p.y / p.z - point.y / point.z)
    }

    #[test]
    fn interaction_matrix_matches_reprojection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let z = rng.random_range(0.5..5.0);
            let s = NormalizedPoint::new(rng.random_range(-0.6..0.6), rng.random_range(-0.5..0.5));
            let point = Vector3::new(s.x * z, s.y * z, z);
            let mut v: Vector6<f64> = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
            v /= v.norm().max(1.0);
            let nu = CameraVelocity(v);
            let l = interaction_matrix(s, DepthModel { z }).unwrap();
            let pred = l * v;
            let err = |dt: f64| {
                let (dx, dy) = reprojected_flow(point, &nu, dt);
                ((dx - pred[0] * dt).powi(2) + (dy - pred[1] * dt).powi(2)).sqrt()
            };
            let (e1, e2) = (err(1e-3), err(5e-4));
            if e1 < 1e-13 {
                continue;
            }
            let order = (e1 / e2).log2();
            assert!(order >= 1.9, "order {order} at s = {s:?}, z = {z}");
        }
    }

    #[test]
    fn partition_and_reassemble() {
        let l = interaction_matrix(NormalizedPoint::new(0.0, 0.0), DepthModel { z: 1.0 }).unwrap();
        let (xy, z) = partition_columns(&l);
        assert_eq!(z, SMatrix::<f64, 2, 2>::zeros());
        assert_eq!(xy.column(2)[1], 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = Matrix2x6::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let (xy, z) = partition_columns(&m);
            assert_eq!(reassemble_columns(&xy, &z), m);
            let dm = DMatrix::from_column_slice(2, 6, m.as_slice());
            assert_eq!(apply_actuation_mask(&dm, &ActuationMask::full()).unwrap(), dm);
        }
    }

    #[test]
    fn masking_selects_columns() {
        let g = DMatrix::from_fn(4, 6, |r, c| (10 * r + c) as f64);
        let m = apply_actuation_mask(&g, &ActuationMask::uav()).unwrap();
        assert_eq!(m.ncols(), 4);
        for (dst, src) in [0usize, 1, 2, 5].iter().enumerate() {
            assert_eq!(m.column(dst), g.column(*src));
        }
        assert_eq!(ActuationMask::new([false; 6]), Err(Error::EmptyMask));
        assert!(apply_actuation_mask(&g, &ActuationMask([false; 6])).is_err());
    }

    #[test]
    fn masked_product_equals_zeroed_full_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let bits: [bool; 6] = std::array::from_fn(|_| rng.random_bool(0.6));
            let Ok(mask) = ActuationMask::new(bits) else { continue };
            let g = DMatrix::from_fn(4, 6, |_, _| rng.random_range(-3.0..3.0));
            let nu = CameraVelocity(Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let masked = apply_actuation_mask(&g, &mask).unwrap() * mask.select(&nu);
            let zeroed = mask.expand(mask.select(&nu).as_slice());
            let full = &g * DVector::from_column_slice(zeroed.0.as_slice());
            assert!((masked - full).norm() < 1e-12);
        }
    }

    #[test]
    fn level_frame_identity_and_limits() {
        let nu = CameraVelocity::new(0.1, -0.2, 0.3, 0.01, 0.02, -0.03);
        let out = level_frame_velocity(&nu, 0.0, 0.0).unwrap();
        assert_eq!(out, nu);
        assert!(level_frame_velocity(&nu, std::f64::consts::FRAC_PI_2, 0.0).is_err());
        assert!(level_frame_velocity(&nu, 0.0, -2.0).is_err());
    }

    #[test]
    fn level_frame_near_vertical_pitch() {
        let eps = 1e-3;
        let forward = CameraVelocity::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let out = level_frame_velocity(&forward, 0.0, std::f64::consts::FRAC_PI_2 - eps).unwrap();
        let lin = out.linear();
        assert!((lin - Vector3::z()).norm() <= eps * 1.0001);
    }

    #[test]
    fn level_frame_preserves_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let nu = CameraVelocity(Vector6::from_fn(|_, _| rng.random_range(-2.0..2.0)));
            let out = level_frame_velocity(&nu, rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)).unwrap();
            assert_relative_eq!(out.linear().norm(), nu.linear().norm(), epsilon = 1e-12);
            assert_relative_eq!(out.angular().norm(), nu.angular().norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn twist_integration_matches_small_steps() {
        let nu = CameraVelocity::new(0.3, -0.1, 0.2, 0.4, -0.2, 0.7);
        let (rot, t) = integrate_twist(&nu, 1.0);
        let mut r = Rotation3::identity();
        let mut p = Vector3::zeros();
        let steps = 20000;
        let dt = 1.0 / steps as f64;
        for _ in 0..steps {
            let (dr, dp) = integrate_twist(&nu, dt);
            p += r * dp;
            r *= dr;
        }
        assert!((p - t).norm() < 1e-9);
        assert!((r.matrix() - rot.matrix()).norm() < 1e-9);
    }
    #[test]
    fn level_pose_looks_down() {
        let pose = CameraPose::level(Vector3::new(1.0, 2.0, 3.0), 0.0);
        let p = pose.to_camera(&Vector3::new(1.0, 2.0, 0.0));
        assert!((p - Vector3::new(0.0, 0.0, 3.0)).norm() < 1e-12);
        let q = pose.to_camera(&Vector3::new(2.0, 2.0, 0.0));
        assert!((q.x - 1.0).abs() < 1e-12);
        for yaw in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            assert!((CameraPose::level(Vector3::zeros(), yaw).yaw() - yaw).abs() < 1e-12);
        }
    }

    #[test]
    fn pose_integration_moves_along_optical_axis() {
        let pose = CameraPose::level(Vector3::new(0.0, 0.0, 4.0), 0.4);
        let next = pose.integrate(&CameraVelocity::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0), 0.5);
        assert!((next.position - Vector3::new(0.0, 0.0, 3.5)).norm() < 1e-12);
        let spun = pose.integrate(&CameraVelocity::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.2), 1.0);
        assert!((spun.yaw() - 0.6).abs() < 1e-12);
    }
}
