//! Ground-truth deformable targets and the camera-compensated flow estimator.
//!
//! A target is a planar polygon lying on the world plane `z = 0` whose
//! vertices move under a superposition of deformation modes. Positions are
//! composed as
//!
//! ```text
//! p(t) = c0 + drift(t) + R(spin(t)) * b(t) * (q(t) - c0)
//! ```
//!
//! with `c0` the base vertex mean, `b(t) = 1 + sum A sin(w t + phi)` from the
//! breathing modes and `q(t)` the base vertex displaced by traveling waves.
//! Velocities are the exact time derivatives of that expression.

use nalgebra::{DVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{project, projection_rate, CameraPose, CameraVelocity, Matrix2x6, NormalizedPoint};
use crate::error::{Error, Result};

/// World positions and velocities of the vertices.
pub type VertexKinematics = (Vec<Vector3<f64>>, Vec<Vector3<f64>>);

/// One deformation primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationMode {
    /// Constant world velocity in m/s; two components move in-plane, a third
    /// moves the target plane vertically.
    RigidDrift { velocity: Vec<f64> },
    /// In-plane rotation about the base centroid, rad/s.
    RigidSpin { rate: f64 },
    /// Scaling about the base centroid by `1 + amplitude sin(frequency t + phase)`;
    /// `frequency` in rad/s.
    Breathing {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Transverse wave travelling along `axis`; displacement is normal to the axis.
    TravelingWave {
        amplitude: f64,
        wavelength: f64,
        speed: f64,
        axis: [f64; 2],
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformableTarget {
    /// Planar vertices in metres.
    pub base_vertices: Vec<[f64; 2]>,
    #[serde(default)]
    pub modes: Vec<DeformationMode>,
    #[serde(default)]
    pub seed: u64,
    /// Replace every mode phase with a seeded uniform draw in `[0, 2 pi)`.
    #[serde(default)]
    pub randomize_phases: bool,
}

/// Target with resolved phases, ready for evaluation.
#[derive(Debug, Clone)]
pub struct TargetModel {
    base: Vec<Vector2<f64>>,
    center: Vector2<f64>,
    drift: Vector3<f64>,
    spin: f64,
    breathing: Vec<(f64, f64, f64)>,
    waves: Vec<Wave>,
}

#[derive(Debug, Clone)]
struct Wave {
    amplitude: f64,
    wavenumber: f64,
    omega: f64,
    axis: Vector2<f64>,
    normal: Vector2<f64>,
    phase: f64,
}

impl DeformableTarget {
    pub fn build(&self) -> Result<TargetModel> {
        if self.base_vertices.len() < 3 {
            return Err(Error::Config("target needs at least 3 base vertices".into()));
        }
        let base: Vec<Vector2<f64>> = self.base_vertices.iter().map(|v| Vector2::new(v[0], v[1])).collect();
        if base.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::Config("non-finite base vertex".into()));
        }
        let center = base.iter().sum::<Vector2<f64>>() / base.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut phase = |given: f64| {
            if self.randomize_phases {
                rng.random_range(0.0..std::f64::consts::TAU)
            } else {
                given
            }
        };
        let mut model =
            TargetModel { base, center, drift: Vector3::zeros(), spin: 0.0, breathing: Vec::new(), waves: Vec::new() };
        for mode in &self.modes {
            match mode {
                DeformationMode::RigidDrift { velocity } => {
                    let v = match velocity.as_slice() {
                        [x, y] => Vector3::new(*x, *y, 0.0),
                        [x, y, z] => Vector3::new(*x, *y, *z),
                        _ => return Err(Error::Config("drift velocity needs 2 or 3 components".into())),
                    };
                    model.drift += v;
                }
                DeformationMode::RigidSpin { rate } => model.spin += rate,
                DeformationMode::Breathing { amplitude, frequency, phase: p } => {
                    if amplitude.abs() >= 1.0 {
                        return Err(Error::Config("breathing amplitude must be below 1".into()));
                    }
                    model.breathing.push((*amplitude, *frequency, phase(*p)));
                }
                DeformationMode::TravelingWave { amplitude, wavelength, speed, axis, phase: p } => {
                    let axis = Vector2::new(axis[0], axis[1]);
                    if !(*wavelength > 0.0) || !(axis.norm() > 0.0) {
                        return Err(Error::Config("wave needs a positive wavelength and a non-zero axis".into()));
                    }
                    let axis = axis.normalize();
                    let wavenumber = std::f64::consts::TAU / wavelength;
                    model.waves.push(Wave {
                        amplitude: *amplitude,
                        wavenumber,
                        omega: wavenumber * speed,
                        axis,
                        normal: Vector2::new(-axis.y, axis.x),
                        phase: phase(*p),
                    });
                }
            }
        }
        Ok(model)
    }
}

/// Whether the closed polygon has no crossing non-adjacent edges.
pub fn is_simple(points: &[Vector2<f64>]) -> bool {
    let n = points.len();
    let cross = |o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>| (a - o).perp(&(b - o));
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (points[j], points[(j + 1) % n]);
            let d1 = cross(a, b, c);
            let d2 = cross(a, b, d);
            let d3 = cross(c, d, a);
            let d4 = cross(c, d, b);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return false;
            }
        }
    }
    true
}

fn shoelace(points: &[Vector2<f64>]) -> f64 {
    let n = points.len();
    0.5 * (0..n).map(|j| points[j].perp(&points[(j + 1) % n])).sum::<f64>().abs()
}

impl TargetModel {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    fn scale(&self, t: f64) -> (f64, f64) {
        self.breathing
            .iter()
            .fold((1.0, 0.0), |(b, db), &(a, w, phi)| (b + a * (w * t + phi).sin(), db + a * w * (w * t + phi).cos()))
    }

    /// World vertex positions and velocities at time `t`.
    pub fn sample(&self, t: f64) -> Result<VertexKinematics> {
        let (b, db) = self.scale(t);
        let theta = self.spin * t;
        let (c, s) = (theta.cos(), theta.sin());
        let rot = |v: Vector2<f64>| Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y);
        let drot = |v: Vector2<f64>| self.spin * Vector2::new(-s * v.x - c * v.y, c * v.x - s * v.y);
        let offset = self.drift * t;
        let mut positions = Vec::with_capacity(self.base.len());
        let mut velocities = Vec::with_capacity(self.base.len());
        let mut planar = Vec::with_capacity(self.base.len());
        for p0 in &self.base {
            let (mut q, mut dq) = (*p0, Vector2::zeros());
            for w in &self.waves {
                let arg = w.wavenumber * p0.dot(&w.axis) - w.omega * t + w.phase;
                q += w.amplitude * arg.sin() * w.normal;
                dq += -w.amplitude * w.omega * arg.cos() * w.normal;
            }
            let rel = q - self.center;
            let p = self.center + rot(b * rel);
            let v = drot(b * rel) + rot(db * rel + b * dq);
            planar.push(p);
            positions.push(Vector3::new(p.x + offset.x, p.y + offset.y, offset.z));
            velocities.push(Vector3::new(v.x + self.drift.x, v.y + self.drift.y, self.drift.z));
        }
        if !is_simple(&planar) || shoelace(&planar) <= 1e-9 {
            return Err(Error::DegenerateTarget { t });
        }
        Ok((positions, velocities))
    }

    /// Samples the target on a uniform grid over `[0, duration]`.
    pub fn validate(&self, duration: f64, samples: usize) -> Result<()> {
        let samples = samples.max(2);
        for k in 0..=samples {
            self.sample(duration * k as f64 / samples as f64)?;
        }
        Ok(())
    }

    /// Exact image-plane vertex velocity due to target motion only, stacked.
    pub fn true_flow(&self, t: f64, pose: &CameraPose) -> Result<DVector<f64>> {
        let (positions, velocities) = self.sample(t)?;
        let mut flow = DVector::zeros(2 * positions.len());
        for (j, (p, v)) in positions.iter().zip(&velocities).enumerate() {
            let pc = pose.to_camera(p);
            if pc.z <= 0.0 {
                return Err(Error::TargetLost { vertex: j, t });
            }
            let (fx, fy) = projection_rate(&pc, &pose.velocity_to_camera(v));
            flow[2 * j] = fx;
            flow[2 * j + 1] = fy;
        }
        Ok(flow)
    }

    /// Normalized projections of the vertices at time `t`.
    pub fn project(&self, t: f64, pose: &CameraPose) -> Result<Vec<NormalizedPoint>> {
        let (positions, _) = self.sample(t)?;
        positions.iter().enumerate().map(|(j, p)| project(&pose.to_camera(p)).ok_or(Error::TargetLost { vertex: j, t })).collect()
    }
}

/// Target-induced image motion, as used by the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEstimate {
    pub centroid_flow: Vector2<f64>,
    /// `centroid_flow` repeated for every vertex.
    pub per_vertex_flow: DVector<f64>,
}

impl FlowEstimate {
    pub fn zero(n: usize) -> Self {
        Self { centroid_flow: Vector2::zeros(), per_vertex_flow: DVector::zeros(2 * n) }
    }

    pub fn broadcast(centroid_flow: Vector2<f64>, n: usize) -> Self {
        let per_vertex_flow = DVector::from_fn(2 * n, |i, _| centroid_flow[i % 2]);
        Self { centroid_flow, per_vertex_flow }
    }
}

/// Centroid velocity with the camera-induced part removed:
/// finite difference of the centroid minus `L_hat * nu_hat`.
pub fn estimate_centroid_flow(
    prev: (Vector2<f64>, f64),
    curr: (Vector2<f64>, f64),
    l_hat: &Matrix2x6,
    nu_hat: &CameraVelocity,
    n_vertices: usize,
) -> Result<FlowEstimate> {
    let dt = curr.1 - prev.1;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("flow estimator needs a positive interval, got {dt}")));
    }
    let flow = (curr.0 - prev.0) / dt - l_hat * nu_hat.as_vector();
    Ok(FlowEstimate::broadcast(flow, n_vertices))
}

/// Holds the previous centroid sample, the centroid interaction matrix at that
/// sample and the velocity applied since then.
#[derive(Debug, Clone, Default)]
pub struct CentroidFlowEstimator {
    prev: Option<(Vector2<f64>, f64)>,
    pending: Option<(Matrix2x6, CameraVelocity)>,
}

impl CentroidFlowEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds the centroid measured at `t`; returns zero flow on the first call.
    pub fn update(&mut self, centroid: Vector2<f64>, t: f64, n_vertices: usize) -> Result<FlowEstimate> {
        let estimate = match (self.prev, self.pending) {
            (Some(prev), Some((l_hat, nu_hat))) => estimate_centroid_flow(prev, (centroid, t), &l_hat, &nu_hat, n_vertices)?,
            _ => FlowEstimate::zero(n_vertices),
        };
        self.prev = Some((centroid, t));
        self.pending = None;
        Ok(estimate)
    }

    /// Records the velocity applied from the latest sample, with the centroid
    /// interaction matrix evaluated there.
    pub fn record_command(&mut self, l_hat: Matrix2x6, nu_hat: CameraVelocity) {
        self.pending = Some((l_hat, nu_hat));
    }
}
