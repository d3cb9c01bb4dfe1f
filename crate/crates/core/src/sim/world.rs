use nalgebra::{Vector3, Vector4};
use rand::Rng;

use super::config::SimMode;
use crate::camera::{normalized_to_pixel, CameraIntrinsics, CameraPose, CameraVelocity, DepthModel};
use crate::error::{Error, Result};
use crate::polygon::PolygonFeatures;
use crate::target::TargetModel;

/// Minimum camera height above the target plane, metres.
pub const MIN_HEIGHT: f64 = 0.1;

/// Uniform per-component draw in `[-bound, bound]`.
pub fn inject_disturbance<R: Rng>(rng: &mut R, bound: f64) -> Vector4<f64> {
    if bound > 0.0 {
        Vector4::from_fn(|_, _| rng.random_range(-bound..=bound))
    } else {
        Vector4::zeros()
    }
}

/// True projection of the target seen from `pose` at time `t`.
///
/// Fails with [`Error::TargetLost`] when a vertex falls behind the camera or
/// outside the pixel image. The returned depth is the mean optical-axis
/// distance of the vertices, which equals the height above the plane for a
/// level camera.
pub fn observe(
    target: &TargetModel,
    pose: &CameraPose,
    t: f64,
    intrinsics: &CameraIntrinsics,
    reference_pair: (usize, usize),
) -> Result<(PolygonFeatures, DepthModel)> {
    let (positions, _) = target.sample(t)?;
    let mut depth = 0.0;
    for (j, p) in positions.iter().enumerate() {
        let pc = pose.to_camera(p);
        if pc.z <= MIN_HEIGHT {
            return Err(Error::InvalidPose(format!("vertex {j} is {:.3} m from the camera at t = {t}", pc.z)));
        }
        depth += pc.z;
    }
    let vertices = target.project(t, pose)?;
    if let Some(j) = vertices.iter().position(|s| !intrinsics.contains_pixel(normalized_to_pixel(*s, intrinsics))) {
        return Err(Error::TargetLost { vertex: j, t });
    }
    let poly = PolygonFeatures::with_reference(vertices, reference_pair)?;
    Ok((poly, DepthModel::new(depth / positions.len() as f64)?))
}

/// Integrates the pose under `nu` for `dt`. UAV mode drops roll and pitch rates.
pub fn integrate_pose(pose: &CameraPose, nu: &CameraVelocity, dt: f64, mode: SimMode) -> CameraPose {
    let nu = match mode {
        SimMode::FreeCamera => *nu,
        SimMode::Uav => {
            let mut v = *nu;
            v.0[3] = 0.0;
            v.0[4] = 0.0;
            v
        }
    };
    pose.integrate(&nu, dt)
}

/// One world step: move the camera, advance the target to `t + dt` and
/// reproject it.
#[allow(clippy::too_many_arguments)]
pub fn step_world(
    pose: &CameraPose,
    target: &TargetModel,
    t: f64,
    nu: &CameraVelocity,
    dt: f64,
    mode: SimMode,
    intrinsics: &CameraIntrinsics,
    reference_pair: (usize, usize),
) -> Result<(CameraPose, PolygonFeatures, DepthModel)> {
    let next = integrate_pose(pose, nu, dt, mode);
    if !next.position.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidPose("non-finite position".into()));
    }
    let (poly, depth) = observe(target, &next, t + dt, intrinsics, reference_pair)?;
    Ok((next, poly, depth))
}

/// Level pose from a position array and yaw.
pub fn level_pose(position: [f64; 3], yaw: f64) -> CameraPose {
    CameraPose::level(Vector3::from(position), yaw)
}
