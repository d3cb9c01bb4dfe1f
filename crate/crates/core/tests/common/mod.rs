#![allow(dead_code)]

use contour_nmpc::camera::NormalizedPoint;
use contour_nmpc::polygon::{centroid, PolygonFeatures};
use rand::Rng;

/// Random simple star-shaped polygon with `n` vertices and a well-conditioned
/// reference angle (|E1| >= 0.05).
pub fn random_polygon<R: Rng>(rng: &mut R, n: usize) -> PolygonFeatures {
    loop {
        let cx = rng.random_range(-0.2..0.2);
        let cy = rng.random_range(-0.2..0.2);
        let scale = rng.random_range(0.1..0.3);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let gaps_ok = angles.windows(2).all(|w| w[1] - w[0] > 0.05) && (angles[0] + std::f64::consts::TAU - angles[n - 1]) > 0.05;
        if !gaps_ok {
            continue;
        }
        let pts: Vec<NormalizedPoint> = angles
            .iter()
            .map(|&t| {
                let r = scale * rng.random_range(0.5..1.0);
                NormalizedPoint::new(cx + r * t.cos(), cy + r * t.sin())
            })
            .collect();
        let Ok(poly) = PolygonFeatures::new(pts) else { continue };
        if poly.area() < 1e-3 {
            continue;
        }
        let (mx, _) = centroid(&poly);
        let v = poly.vertices();
        if (v[0].x + v[1].x - 2.0 * mx).abs() < 0.05 {
            continue;
        }
        return poly;
    }
}

/// Relative error in the Euclidean norm, floored to avoid dividing by zero.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

pub fn vga() -> contour_nmpc::camera::CameraIntrinsics {
    contour_nmpc::camera::CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap()
}

/// Reference controller tuning on a VGA camera.
pub fn reference_ocp(mask: contour_nmpc::camera::ActuationMask) -> contour_nmpc::nmpc::OcpConfig {
    use contour_nmpc::barrier::{AreaBounds, InputLimits};
    use contour_nmpc::nmpc::{OcpSettings, SolverParams, Weights};
    let q = [50.0, 50.0, 10.0, 10.0];
    OcpSettings {
        horizon: 10,
        dt: 0.1,
        weights: Weights { q, r: [0.1; 6], p: q.map(|v| 10.0 * v) },
        gamma: 0.1,
        area: AreaBounds { sigma_min: 0.01, sigma_max: 0.6, delta: 0.01 },
        limits: InputLimits { nu_max: [1.0; 3], omega_max: [1.0; 3] },
        solver: SolverParams::default(),
        local_gain: 3.0,
        a_bar_bound: 2.0,
    }
    .build(&vga(), mask)
    .unwrap()
}

/// Regular polygon, counter-clockwise, first vertex at angle `phase`.
pub fn regular_polygon(n: usize, center: (f64, f64), radius: f64, phase: f64) -> PolygonFeatures {
    let pts = (0..n)
        .map(|j| {
            let t = phase + std::f64::consts::TAU * j as f64 / n as f64;
            NormalizedPoint::new(center.0 + radius * t.cos(), center.1 + radius * t.sin())
        })
        .collect();
    PolygonFeatures::new(pts).unwrap()
}
