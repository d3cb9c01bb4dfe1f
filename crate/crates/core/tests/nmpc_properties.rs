//! Cost, rollout, solver, local controller and diagnostics checks.

mod common;

use approx::assert_relative_eq;
use common::{random_polygon, reference_ocp, regular_polygon};
use contour_nmpc::camera::{ActuationMask, CameraVelocity, DepthModel, NormalizedPoint};
use contour_nmpc::nmpc::*;
use contour_nmpc::polygon::{centroid, extract_state, propagate_discrete, MomentState, PolygonFeatures};
use contour_nmpc::Error;
use nalgebra::{DVector, Vector4, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEPTH: DepthModel = DepthModel { z: 2.0 };

fn goal() -> PolygonFeatures {
    regular_polygon(6, (0.0, 0.0), 0.25, 0.1)
}

fn x_goal() -> MomentState {
    extract_state(&goal()).unwrap()
}

fn shifted(poly: &PolygonFeatures, dx: f64, dy: f64) -> PolygonFeatures {
    PolygonFeatures::new(poly.vertices().iter().map(|p| NormalizedPoint::new(p.x + dx, p.y + dy)).collect()).unwrap()
}

#[test]
fn stage_cost_values() {
    let mut cfg = reference_ocp(ActuationMask::full());
    let anchor = cfg.anchor(x_goal()).unwrap();
    assert_eq!(stage_cost(&x_goal(), &CameraVelocity::zero(), &cfg, &anchor).unwrap(), 0.0);
    cfg.weights.q = [2.0, 1.0, 1.0, 1.0];
    assert_eq!(quadratic_stage_cost(&Vector4::new(1.0, 0.0, 0.0, 0.0), &CameraVelocity::zero(), &cfg), 2.0);
}

#[test]
fn stage_cost_quadratic_lower_bound() {
    let cfg = reference_ocp(ActuationMask::full());
    let anchor = cfg.anchor(x_goal()).unwrap();
    let coeff = cfg.weights.q.iter().chain(&cfg.weights.r).copied().fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..10_000 {
        let err = Vector4::from_fn(|i, _| rng.random_range(-0.4..0.4) * if i == 2 { 2.0 } else { 1.0 });
        let x = MomentState::from_vector(&(x_goal().to_vector() + err));
        let nu = CameraVelocity(Vector6::from_fn(|_, _| rng.random_range(-0.95..0.95)));
        let Ok(f) = stage_cost(&x, &nu, &cfg, &anchor) else { continue };
        assert!(f >= coeff * (err.norm_squared() + nu.0.norm_squared()) - 1e-12);
    }
}

#[test]
fn terminal_cost_values() {
    let mut cfg = reference_ocp(ActuationMask::full());
    assert_eq!(terminal_cost(&Vector4::zeros(), &cfg), 0.0);
    let p_max = 500.0;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let e = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        assert!(terminal_cost(&e, &cfg) <= p_max * e.norm_squared() + 1e-12);
    }
    cfg.weights.p = [1.0; 4];
    assert_eq!(terminal_cost(&Vector4::repeat(1.0), &cfg), 4.0);
}

#[test]
fn rollout_matches_manual_propagation() {
    let cfg = reference_ocp(ActuationMask::uav());
    let poly = shifted(&goal(), 0.1, -0.05);
    let x = extract_state(&poly).unwrap();
    let flow = DVector::from_fn(12, |i, _| if i % 2 == 0 { 0.02 } else { -0.01 });

    let zero = HorizonControls::zeros(10, 4);
    let (_, still) = rollout(&poly, &x, &zero, &DVector::zeros(12), DEPTH, &cfg).unwrap();
    assert!(still.iter().all(|s| *s == x));

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let u = HorizonControls::from_vector(DVector::from_fn(40, |_, _| rng.random_range(-0.3..0.3)), 4).unwrap();
    let (polys, states) = rollout(&poly, &x, &u, &flow, DEPTH, &cfg).unwrap();
    let (mut p, mut s) = (poly.clone(), x);
    for i in 0..10 {
        (p, s) = propagate_discrete(&p, &s, &u.velocity(i, &cfg.mask), &flow, DEPTH, cfg.dt).unwrap();
        assert_eq!(polys[i + 1], p);
        assert_eq!(states[i + 1], s);
    }

    let one = HorizonControls::from_vector(DVector::from_row_slice(u.step(0)), 4).unwrap();
    let (_, single) = rollout(&poly, &x, &one, &flow, DEPTH, &cfg).unwrap();
    assert_eq!(single[1], states[1]);
}

#[test]
fn total_cost_structure() {
    let mut cfg = reference_ocp(ActuationMask::full());
    let anchor = cfg.anchor(x_goal()).unwrap();
    let flow = DVector::zeros(12);
    let at_goal = goal();
    let problem = OcpProblem { cfg: &cfg, anchor: &anchor, polygon: &at_goal, state: x_goal(), flow: &flow, depth: DEPTH };
    assert_eq!(problem.total_cost(&HorizonControls::zeros(10, 6)), 0.0);

    // Additivity with a zero terminal weight.
    cfg.weights.p = [0.0; 4];
    let poly = shifted(&goal(), 0.15, 0.05);
    let x = extract_state(&poly).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let u = HorizonControls::from_vector(DVector::from_fn(60, |_, _| rng.random_range(-0.2..0.2)), 6).unwrap();
    let problem = OcpProblem { cfg: &cfg, anchor: &anchor, polygon: &poly, state: x, flow: &flow, depth: DEPTH };
    let (_, states) = rollout(&poly, &x, &u, &flow, DEPTH, &cfg).unwrap();
    let summed: f64 = (0..10).map(|i| stage_cost(&states[i], &u.velocity(i, &cfg.mask), &cfg, &anchor).unwrap()).sum();
    assert_relative_eq!(problem.total_cost(&u), summed, max_relative = 1e-14);
}

#[test]
fn beneficial_first_control_lowers_the_cost() {
    let cfg = reference_ocp(ActuationMask::uav());
    let anchor = cfg.anchor(x_goal()).unwrap();
    let flow = DVector::zeros(12);
    let poly = shifted(&goal(), 0.2, 0.0);
    let x = extract_state(&poly).unwrap();
    let problem = OcpProblem { cfg: &cfg, anchor: &anchor, polygon: &poly, state: x, flow: &flow, depth: DEPTH };
    let idle = HorizonControls::zeros(10, 4);
    let mut push = idle.clone();
    // Centroid to the right of the goal: moving the camera right (+nu_x) shifts the image left.
    push.set_step(0, &[0.5, 0.0, 0.0, 0.0]);
    assert!(problem.total_cost(&push) < problem.total_cost(&idle));
}

#[test]
fn zero_error_fixed_point() {
    let cfg = reference_ocp(ActuationMask::full());
    let anchor = cfg.anchor(x_goal()).unwrap();
    let flow = DVector::zeros(12);
    let poly = goal();
    let problem = OcpProblem { cfg: &cfg, anchor: &anchor, polygon: &poly, state: x_goal(), flow: &flow, depth: DEPTH };
    let sol = solve_ocp(&problem, None).unwrap();
    assert!(sol.controls.max_abs() <= 1e-6);
    assert!(sol.cost <= 1e-9);
}

#[test]
fn infeasible_start_is_reported() {
    let cfg = reference_ocp(ActuationMask::full());
    let anchor = cfg.anchor(x_goal()).unwrap();
    let flow = DVector::zeros(12);
    let poly = shifted(&goal(), 0.7, 0.0);
    let problem = OcpProblem {
        cfg: &cfg,
        anchor: &anchor,
        polygon: &poly,
        state: extract_state(&poly).unwrap(),
        flow: &flow,
        depth: DEPTH,
    };
    assert_eq!(solve_ocp(&problem, None).unwrap_err(), Error::InfeasibleStart);
}

#[test]
fn first_control_moves_centroid_toward_goal() {
    let cfg = reference_ocp(ActuationMask::full());
    let anchor = cfg.anchor(x_goal()).unwrap();
    let flow = DVector::zeros(12);
    for (dx, dy) in [(0.2, 0.0), (-0.15, 0.1), (0.05, -0.2)] {
        let poly = shifted(&goal(), dx, dy);
        let x = extract_state(&poly).unwrap();
        let problem = OcpProblem { cfg: &cfg, anchor: &anchor, polygon: &poly, state: x, flow: &flow, depth: DEPTH };
        let sol = solve_ocp(&problem, None).unwrap();
        let step = sol.prediction.states[1].to_vector() - x.to_vector();
        let err = x.to_vector() - x_goal().to_vector();
        assert!(step[0] * err[0] + step[1] * err[1] < 0.0);
    }
}

#[test]
fn solver_never_worse_than_warm_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for trial in 0..100 {
        let mask = if trial % 2 == 0 { ActuationMask::full() } else { ActuationMask::uav() };
        let mut cfg = reference_ocp(mask);
        cfg.solver.max_iterations = 15;
        let anchor = cfg.anchor(x_goal()).unwrap();
        let poly = shifted(&goal(), rng.random_range(-0.2..0.2), rng.random_range(-0.15..0.15));
        let x = extract_state(&poly).unwrap();
        let flow = DVector::from_fn(12, |i, _| if i % 2 == 0 { 0.01 } else { -0.02 });
        let m = cfg.inputs();
        let warm = HorizonControls::from_vector(DVector::from_fn(10 * m, |_, _| rng.random_range(-0.3..0.3)), m).unwrap();
        let problem = OcpProblem { cfg: &cfg, anchor: &anchor, polygon: &poly, state: x, flow: &flow, depth: DEPTH };
        let warm_cost = problem.total_cost(&warm);
        let sol = solve_ocp(&problem, Some(&warm)).unwrap();
        assert!(sol.cost <= warm_cost, "trial {trial}: {} > {warm_cost}", sol.cost);
        assert_relative_eq!(problem.total_cost(&sol.controls), sol.cost, max_relative = 1e-12);
        for s in &sol.prediction.states {
            assert!(cfg.constraints.is_safe(s));
        }
    }
}

#[test]
fn local_controller_properties() {
    let cfg = reference_ocp(ActuationMask::uav());
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let poly = random_polygon(&mut rng, 7);
    let x = extract_state(&poly).unwrap();
    assert!(local_controller(&Vector4::zeros(), &poly, &x, DEPTH, &cfg).unwrap().iter().all(|v| *v == 0.0));
    let l_h = local_gain_bound(&poly, &x, DEPTH, &cfg).unwrap();
    assert!(l_h > 0.0);
    for _ in 0..500 {
        let err = Vector4::from_fn(|_, _| rng.random_range(-0.2..0.2));
        let h = local_controller(&err, &poly, &x, DEPTH, &cfg).unwrap();
        let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= l_h * err.norm() * (1.0 + 1e-9));
    }
}

#[test]
fn local_controller_reduces_small_errors() {
    for mask in [ActuationMask::full(), ActuationMask::uav()] {
        let cfg = reference_ocp(mask);
        let target = x_goal();
        let poly = shifted(&goal(), 0.02, -0.01);
        let x = extract_state(&poly).unwrap();
        let err = x.to_vector() - target.to_vector();
        let h = local_controller(&err, &poly, &x, DEPTH, &cfg).unwrap();
        let (_, next) = propagate_discrete(&poly, &x, &cfg.mask.expand(&h), &DVector::zeros(12), DEPTH, cfg.dt).unwrap();
        assert!((next.to_vector() - target.to_vector()).norm() < err.norm());
    }
}

/// Closed loop with the prediction model as the plant.
#[test]
fn receding_horizon_on_the_nominal_model() {
    let cfg = reference_ocp(ActuationMask::uav());
    let mut ctl = NmpcController::new(cfg.clone(), x_goal()).unwrap();
    assert!(ctl.warm_start(DEPTH).is_none());
    let flow = DVector::zeros(12);
    let mut poly = shifted(&goal(), 0.2, -0.1);
    let mut x = extract_state(&poly).unwrap();
    let mut costs = Vec::new();
    let mut errors = Vec::new();
    for k in 0..40 {
        let out = ctl.step(&poly, &x, &flow, DEPTH).unwrap();
        assert!(!out.recovery);
        let sol = out.solution.unwrap();
        if k == 0 {
            let warm = ctl.warm_start(DEPTH).unwrap();
            for i in 0..9 {
                assert_eq!(warm.step(i), sol.controls.step(i + 1));
            }
        }
        costs.push(sol.cost);
        errors.push((x.to_vector() - x_goal().to_vector()).norm());
        (poly, x) = propagate_discrete(&poly, &x, &out.applied, &flow, DEPTH, cfg.dt).unwrap();
    }
    for w in costs.windows(2).skip(5) {
        assert!(w[1] <= w[0] + 1e-6, "cost rose from {} to {}", w[0], w[1]);
    }
    assert!(errors[39] < 1e-3 * errors[0]);
}

#[test]
fn lipschitz_formula_values() {
    assert_relative_eq!(lipschitz_lf(1.0, 0.5, 10.0, 0.1), (2.0f64 * 4.0804).sqrt(), epsilon = 1e-12);
    assert_relative_eq!(lipschitz_lf(1.0, 0.5, 10.0, 1e-12), 8f64.sqrt(), epsilon = 1e-9);
    let mut prev = 0.0;
    for k in 0..20 {
        let v = lipschitz_lf(0.1 * k as f64, 0.5, 2.0, 0.1);
        assert!(v >= prev);
        prev = v;
    }
    assert_eq!(lipschitz_stage_cost(&[1.0; 4], &[1.0; 4]), 4.0);
    assert_eq!(lipschitz_stage_cost(&[1.0; 4], &[3.0, 1.0, 2.0, 1.0]), 12.0);
}

#[test]
fn bound_formulas() {
    assert_eq!(prediction_error_bound(1, 0.3, 1.7), 0.3);
    assert_relative_eq!(prediction_error_bound(3, 0.1, 2.0), 0.7, epsilon = 1e-15);
    assert_relative_eq!(prediction_error_bound(4, 0.1, 1.0), 0.4, epsilon = 1e-15);

    // Hand table for n = 5, L_f = 1.2, L_E = 2, gap 0.5:
    // m:    0        1        2        3        4
    // pow:  2.0736   1.728    1.44     1.2      1
    // sum:  1        2.2      3.64     5.368    7.4416
    let b = disturbance_feasibility_bound(1.0, 0.5, 2.0, 1.2, 5).unwrap();
    let expected = [
        0.5 / (2.0 * 2.0736 * 1.0),
        0.5 / (2.0 * 1.728 * 2.2),
        0.5 / (2.0 * 1.44 * 3.64),
        0.5 / (2.0 * 1.2 * 5.368),
        0.5 / (2.0 * 1.0 * 7.4416),
    ];
    for (got, want) in b.per_m.iter().zip(expected) {
        assert_relative_eq!(*got, want, max_relative = 1e-12);
    }
    assert_eq!(b.min, b.per_m.iter().copied().fold(f64::INFINITY, f64::min));
    let wider = disturbance_feasibility_bound(1.5, 0.5, 2.0, 1.2, 5).unwrap();
    assert_relative_eq!(wider.min, 2.0 * b.min, max_relative = 1e-12);
    let flat = disturbance_feasibility_bound(1.0, 0.5, 2.0, 1.0, 5).unwrap();
    assert_relative_eq!(flat.per_m[2], 0.5 / (2.0 * 3.0), max_relative = 1e-12);
    assert!(disturbance_feasibility_bound(0.5, 0.5, 2.0, 1.2, 5).is_err());

    assert_eq!(cost_difference_constant(4, 5, 2.0, 1.3, 10.0), 2.0);
    assert_relative_eq!(cost_difference_constant(3, 5, 2.0, 1.3, 10.0), 2.0 * 1.3 + 10.0, epsilon = 1e-12);
}

#[test]
fn diagnostics_bundle_is_consistent() {
    let cfg = reference_ocp(ActuationMask::uav());
    let anchor = cfg.anchor(x_goal()).unwrap();
    let d = Diagnostics::compute(&cfg, &anchor, &shifted(&goal(), 0.1, 0.0), DEPTH).unwrap();
    for v in [d.lf_formula, d.lf_empirical, d.l_cost, d.l_cost_input_empirical, d.l_e, d.l_h, d.f_lower, d.eps0, d.xi_max] {
        assert!(v > 0.0 && v.is_finite());
    }
    assert_relative_eq!(d.a_eps, 500.0 * d.eps0 * d.eps0, max_relative = 1e-12);
    assert_eq!(d.a_eps_f, d.a_eps / 2.0);
    assert_eq!(d.l_zm[9], d.l_e);
    assert!(d.xi_max_formula < d.xi_max, "closed-form L_f is the more conservative one");
    let (bound, _) = cost_difference_bound(3, 0.0, &d, &[0.1, 0.2]);
    assert!(bound <= 0.0);
    assert!(d.in_terminal_set(&Vector4::zeros(), &cfg));
}

/// Disturbed rollouts stay within the prediction-error bound built from the
/// sampled Lipschitz constant.
#[test]
fn prediction_error_bound_holds_empirically() {
    let cfg = reference_ocp(ActuationMask::uav());
    let base = goal();
    let lf = empirical_lipschitz_lf(&base, &cfg, DEPTH, 400, 7).unwrap();
    let flow = DVector::zeros(12);
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let xi_size: f64 = 2e-3;
    for _ in 0..100 {
        let u: Vec<CameraVelocity> =
            (0..10).map(|_| cfg.mask.expand(&[0, 1, 2, 3].map(|_| rng.random_range(-0.2..0.2)))).collect();
        let x0 = extract_state(&base).unwrap();
        let (mut pn, mut xn) = (base.clone(), x0);
        let (mut pd, mut xd) = (base.clone(), x0);
        let mut xi_max: f64 = 0.0;
        let mut errs = Vec::new();
        for nu in &u {
            (pn, xn) = propagate_discrete(&pn, &xn, nu, &flow, DEPTH, cfg.dt).unwrap();
            let (p1, x1) = propagate_discrete(&pd, &xd, nu, &flow, DEPTH, cfg.dt).unwrap();
            let (cx, cy) = centroid(&p1);
            let (sx, sy, sc, rot): (f64, f64, f64, f64) = (
                rng.random_range(-xi_size..xi_size),
                rng.random_range(-xi_size..xi_size),
                1.0 + rng.random_range(-xi_size..xi_size),
                rng.random_range(-xi_size..xi_size),
            );
            let (c, s) = (rot.cos(), rot.sin());
            let moved: Vec<NormalizedPoint> = p1
                .vertices()
                .iter()
                .map(|p| {
                    let (dx, dy) = (sc * (p.x - cx), sc * (p.y - cy));
                    NormalizedPoint::new(cx + sx + c * dx - s * dy, cy + sy + s * dx + c * dy)
                })
                .collect();
            pd = PolygonFeatures::new(moved).unwrap();
            let kick = extract_state(&pd).unwrap().to_vector() - extract_state(&p1).unwrap().to_vector();
            xi_max = xi_max.max(kick.norm());
            xd = MomentState::from_vector(&(x1.to_vector() + kick));
            errs.push((xd.to_vector() - xn.to_vector()).norm());
        }
        for (i, e) in errs.iter().enumerate() {
            assert!(*e <= prediction_error_bound(i + 1, xi_max, lf) * (1.0 + 1e-9), "step {}: {e} vs bound", i + 1);
        }
    }
}
