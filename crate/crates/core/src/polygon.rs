//! Moment-like state of a polygonal contour and its dynamics.
//!
//! The state is `[sbar_x, sbar_y, log(area), tan(angle)]`, where the centroid
//! is the plain vertex mean and the angle is measured from the centroid to the
//! midpoint of a fixed reference vertex pair. Vertex indices are cyclic:
//! vertex `N` wraps to `0`.

use nalgebra::{DMatrix, DVector, SMatrix, Vector2, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::camera::{point_interaction, CameraVelocity, DepthModel, NormalizedPoint};
use crate::error::{Error, Result};

pub type Matrix4x6 = SMatrix<f64, 4, 6>;

/// Polygons with area at or below this (normalized units squared) are rejected.
pub const EPS_AREA: f64 = 1e-9;
/// Reference-angle denominators at or below this magnitude are rejected.
pub const EPS_ANGLE: f64 = 1e-6;

/// Ordered image-plane vertices plus the reference pair that defines the angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonFeatures {
    vertices: Vec<NormalizedPoint>,
    reference_pair: (usize, usize),
}

impl PolygonFeatures {
    /// Builds a polygon using vertices 0 and 1 as the reference pair.
    pub fn new(vertices: Vec<NormalizedPoint>) -> Result<Self> {
        Self::with_reference(vertices, (0, 1))
    }

    pub fn with_reference(vertices: Vec<NormalizedPoint>, reference_pair: (usize, usize)) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("need at least 3 vertices, got {n}")));
        }
        let (a, b) = reference_pair;
        if a == b || a >= n || b >= n {
            return Err(Error::InvalidPolygon(format!("bad reference pair ({a}, {b}) for {n} vertices")));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let poly = Self { vertices, reference_pair };
        let sigma = poly.area();
        if !(sigma > EPS_AREA) {
            return Err(Error::DegenerateArea(sigma));
        }
        Ok(poly)
    }

    pub fn from_xy(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(points.iter().map(|&(x, y)| NormalizedPoint::new(x, y)).collect())
    }

    pub fn vertices(&self) -> &[NormalizedPoint] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn reference_pair(&self) -> (usize, usize) {
        self.reference_pair
    }

    /// Vertices stacked as `[x_0, y_0, x_1, y_1, ...]`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.len(), self.vertices.iter().flat_map(|p| [p.x, p.y]))
    }

    /// Rebuilds a polygon with the same reference pair from stacked coordinates.
    pub fn from_stacked(&self, stacked: &DVector<f64>) -> Result<Self> {
        let vertices = stacked.as_slice().chunks_exact(2).map(|c| NormalizedPoint::new(c[0], c[1])).collect();
        Self::with_reference(vertices, self.reference_pair)
    }

    /// Absolute shoelace area.
    pub fn area(&self) -> f64 {
        0.5 * signed_area_sum(self).abs()
    }

    /// Same vertices in reverse order; the reference pair follows its vertices.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        let vertices = self.vertices.iter().rev().copied().collect();
        let (a, b) = self.reference_pair;
        Self { vertices, reference_pair: (n - 1 - a, n - 1 - b) }
    }
}

/// `[sbar_x, sbar_y, sigma_bar, a_bar]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentState {
    pub sbar_x: f64,
    pub sbar_y: f64,
    pub sigma_bar: f64,
    pub a_bar: f64,
}

impl MomentState {
    pub fn new(sbar_x: f64, sbar_y: f64, sigma_bar: f64, a_bar: f64) -> Self {
        Self { sbar_x, sbar_y, sigma_bar, a_bar }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.sbar_x, self.sbar_y, self.sigma_bar, self.a_bar)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Area `exp(sigma_bar)`.
    pub fn area(&self) -> f64 {
        self.sigma_bar.exp()
    }

    /// Reference angle in radians.
    pub fn angle(&self) -> f64 {
        self.a_bar.atan()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Which formulas fill rows 3 and 4 of the dynamics matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    /// Exact chain rule through the vertex interaction matrices.
    #[default]
    ChainRule,
    /// Hand-expanded closed forms (area row with the factor 9), kept for comparison.
    ExpandedClosedForm,
}

pub fn centroid(poly: &PolygonFeatures) -> (f64, f64) {
    let n = poly.len() as f64;
    let (sx, sy) = poly.vertices.iter().fold((0.0, 0.0), |(ax, ay), p| (ax + p.x, ay + p.y));
    (sx / n, sy / n)
}

/// Per-edge determinants `x_j y_{j+1} - x_{j+1} y_j`.
fn edge_determinants(poly: &PolygonFeatures) -> impl Iterator<Item = f64> + '_ {
    let v = &poly.vertices;
    let n = v.len();
    (0..n).map(move |j| {
        let (a, b) = (v[j], v[(j + 1) % n]);
        a.x * b.y - b.x * a.y
    })
}

/// Shoelace sum of edge determinants: twice the signed area, positive for
/// counter-clockwise order in a y-up frame.
pub fn signed_area_sum(poly: &PolygonFeatures) -> f64 {
    edge_determinants(poly).sum()
}

fn angle_terms(poly: &PolygonFeatures, cx: f64, cy: f64) -> (f64, f64) {
    let (a, b) = poly.reference_pair;
    let (p, q) = (poly.vertices[a], poly.vertices[b]);
    (p.x + q.x - 2.0 * cx, p.y + q.y - 2.0 * cy)
}

pub fn extract_state(poly: &PolygonFeatures) -> Result<MomentState> {
    let (cx, cy) = centroid(poly);
    let sigma = poly.area();
    if !(sigma > EPS_AREA) {
        return Err(Error::DegenerateArea(sigma));
    }
    let (e1, e2) = angle_terms(poly, cx, cy);
    if !(e1.abs() > EPS_ANGLE) {
        return Err(Error::AngleSingularity(e1));
    }
    Ok(MomentState::new(cx, cy, sigma.ln(), e2 / e1))
}

/// `d sigma / d s_j` for every vertex.
pub fn area_gradient(poly: &PolygonFeatures) -> Result<Vec<Vector2<f64>>> {
    let sum = signed_area_sum(poly);
    if sum == 0.0 {
        return Err(Error::DegenerateArea(0.0));
    }
    let sign = sum.signum();
    let v = &poly.vertices;
    let n = v.len();
    Ok((0..n)
        .map(|j| {
            let next = v[(j + 1) % n];
            let prev = v[(j + n - 1) % n];
            0.5 * sign * Vector2::new(next.y - prev.y, prev.x - next.x)
        })
        .collect())
}

/// `d a_bar / d s_j` for every vertex, including the coupling through the centroid.
pub fn angle_gradient(poly: &PolygonFeatures) -> Result<Vec<Vector2<f64>>> {
    let (cx, cy) = centroid(poly);
    let (e1, e2) = angle_terms(poly, cx, cy);
    if !(e1.abs() > EPS_ANGLE) {
        return Err(Error::AngleSingularity(e1));
    }
    let a_bar = e2 / e1;
    let n = poly.len();
    let (ra, rb) = poly.reference_pair;
    Ok((0..n)
        .map(|j| {
            // dE1/dx_j and dE2/dy_j share the same coefficient; the cross terms vanish.
            let c = if j == ra || j == rb { 1.0 } else { 0.0 } - 2.0 / n as f64;
            Vector2::new(-c * a_bar / e1, c / e1)
        })
        .collect())
}

/// `4 x 2N` Jacobian of the state with respect to the stacked vertices.
pub fn state_jacobian(poly: &PolygonFeatures) -> Result<DMatrix<f64>> {
    let n = poly.len();
    let sigma = poly.area();
    if !(sigma > EPS_AREA) {
        return Err(Error::DegenerateArea(sigma));
    }
    let area = area_gradient(poly)?;
    let angle = angle_gradient(poly)?;
    let mut jac = DMatrix::zeros(4, 2 * n);
    let inv_n = 1.0 / n as f64;
    for j in 0..n {
        jac[(0, 2 * j)] = inv_n;
        jac[(1, 2 * j + 1)] = inv_n;
        jac[(2, 2 * j)] = area[j].x / sigma;
        jac[(2, 2 * j + 1)] = area[j].y / sigma;
        jac[(3, 2 * j)] = angle[j].x;
        jac[(3, 2 * j + 1)] = angle[j].y;
    }
    Ok(jac)
}

/// State rate caused by image-plane vertex motion, `grad_s(x) * flow`.
pub fn state_rate_from_flow(poly: &PolygonFeatures, flow: &DVector<f64>) -> Result<Vector4<f64>> {
    let n = poly.len();
    if flow.len() != 2 * n {
        return Err(Error::Config(format!("flow has length {}, expected {}", flow.len(), 2 * n)));
    }
    let sigma = poly.area();
    if !(sigma > EPS_AREA) {
        return Err(Error::DegenerateArea(sigma));
    }
    let area = area_gradient(poly)?;
    let angle = angle_gradient(poly)?;
    let mut rate = Vector4::zeros();
    for j in 0..n {
        let f = Vector2::new(flow[2 * j], flow[2 * j + 1]);
        rate[0] += f.x;
        rate[1] += f.y;
        rate[2] += area[j].dot(&f);
        rate[3] += angle[j].dot(&f);
    }
    rate[0] /= n as f64;
    rate[1] /= n as f64;
    rate[2] /= sigma;
    Ok(rate)
}

/// The `4 x 6` matrix `g` mapping camera velocity to state rate.
///
/// `x` is only read in [`DynamicsMode::ExpandedClosedForm`], where the angle row
/// uses its `a_bar`.
pub fn dynamics_matrix(poly: &PolygonFeatures, x: &MomentState, depth: DepthModel, mode: DynamicsMode) -> Result<Matrix4x6> {
    if !(depth.z > 0.0) {
        return Err(Error::InvalidDepth(depth.z));
    }
    let inv_z = 1.0 / depth.z;
    let n = poly.len();
    let sigma = poly.area();
    if !(sigma > EPS_AREA) {
        return Err(Error::DegenerateArea(sigma));
    }
    let mut g = Matrix4x6::zeros();
    let inv_n = 1.0 / n as f64;
    for p in &poly.vertices {
        let l = point_interaction(p.x, p.y, inv_z);
        for c in 0..6 {
            g[(0, c)] += l[(0, c)] * inv_n;
            g[(1, c)] += l[(1, c)] * inv_n;
        }
    }
    match mode {
        DynamicsMode::ChainRule => {
            let area = area_gradient(poly)?;
            let angle = angle_gradient(poly)?;
            for (j, p) in poly.vertices.iter().enumerate() {
                let l = point_interaction(p.x, p.y, inv_z);
                let (da, dang) = (area[j] / sigma, angle[j]);
                for c in 0..6 {
                    g[(2, c)] += da.x * l[(0, c)] + da.y * l[(1, c)];
                    g[(3, c)] += dang.x * l[(0, c)] + dang.y * l[(1, c)];
                }
            }
        }
        DynamicsMode::ExpandedClosedForm => {
            let v = &poly.vertices;
            let (mut sum_y, mut sum_x) = (0.0, 0.0);
            for (j, d) in edge_determinants(poly).enumerate() {
                let next = v[(j + 1) % n];
                sum_y += (v[j].y + next.y) * d;
                sum_x += (v[j].x + next.x) * d;
            }
            g[(2, 2)] = 2.0 * inv_z;
            g[(2, 3)] = 9.0 * sum_y;
            g[(2, 4)] = -9.0 * sum_x;

            let (cx, _) = centroid(poly);
            let (ra, rb) = poly.reference_pair;
            let (p1, p2) = (v[ra], v[rb]);
            let denom = p1.x + p2.x - 2.0 * cx;
            if !(denom.abs() > EPS_ANGLE) {
                return Err(Error::AngleSingularity(denom));
            }
            let mean = |f: &dyn Fn(&NormalizedPoint) -> f64| v.iter().map(f).sum::<f64>() * 2.0 * inv_n;
            let yy = p1.y * p1.y + p2.y * p2.y - mean(&|p| p.y * p.y);
            let xy = p1.x * p1.y + p2.x * p2.y - mean(&|p| p.x * p.y);
            let xx = p1.x * p1.x + p2.x * p2.x - mean(&|p| p.x * p.x);
            let a = x.a_bar;
            g[(3, 3)] = yy / denom - a * xy / denom;
            g[(3, 4)] = a * xx / denom - xy / denom;
            g[(3, 5)] = -a * a - 1.0;
        }
    }
    Ok(g)
}

/// One explicit Euler step of the coupled vertex/state model.
///
/// `target_flow` is the stacked image-plane vertex velocity caused by the
/// target itself, held constant over the step.
pub fn propagate_discrete(
    poly: &PolygonFeatures,
    x: &MomentState,
    nu: &CameraVelocity,
    target_flow: &DVector<f64>,
    depth: DepthModel,
    dt: f64,
) -> Result<(PolygonFeatures, MomentState)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let n = poly.len();
    if target_flow.len() != 2 * n {
        return Err(Error::Config(format!("flow has length {}, expected {}", target_flow.len(), 2 * n)));
    }
    let g = dynamics_matrix(poly, x, depth, DynamicsMode::ChainRule)?;
    let coupled = state_rate_from_flow(poly, target_flow)?;
    let inv_z = 1.0 / depth.z;
    let v: &Vector6<f64> = nu.as_vector();
    let vertices = poly
        .vertices
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let rate = point_interaction(p.x, p.y, inv_z) * v;
            NormalizedPoint::new(p.x + (rate[0] + target_flow[2 * j]) * dt, p.y + (rate[1] + target_flow[2 * j + 1]) * dt)
        })
        .collect();
    let next_poly =
        PolygonFeatures::with_reference(vertices, poly.reference_pair).map_err(|e| Error::StepDegeneracy(Box::new(e)))?;
    let next_x = MomentState::from_vector(&(x.to_vector() + (g * v + coupled) * dt));
    if !next_x.is_finite() {
        return Err(Error::StepDegeneracy(Box::new(Error::InvalidPolygon("non-finite state".into()))));
    }
    Ok((next_poly, next_x))
}
