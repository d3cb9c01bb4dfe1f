use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cost::{OcpProblem, Prediction};
use super::HorizonControls;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Gradient below tolerance or no further measurable decrease.
    Converged,
    MaxIterations,
    /// The line search failed before any step was accepted.
    NoDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSolution {
    pub controls: HorizonControls,
    pub prediction: Prediction,
    pub cost: f64,
    /// Cost of the initial guess actually used; `+inf` if the supplied warm start was infeasible.
    pub warm_start_cost: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub gradient_norm: f64,
}

impl OcpSolution {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

fn gradient(problem: &OcpProblem, base: &Prediction, u: &HorizonControls) -> DVector<f64> {
    let h = problem.cfg.solver.fd_step;
    let m = u.inputs();
    let f0 = base.cost();
    let mut probe = u.clone();
    let mut g = DVector::zeros(u.as_vector().len());
    for k in 0..g.len() {
        let from = k / m;
        let original = u.as_vector()[k];
        probe.values_mut()[k] = original + h;
        let up = problem.cost_from(base, from, &probe);
        probe.values_mut()[k] = original - h;
        let down = problem.cost_from(base, from, &probe);
        probe.values_mut()[k] = original;
        g[k] = match (up.is_finite(), down.is_finite()) {
            (true, true) => (up - down) / (2.0 * h),
            (true, false) => (up - f0) / h,
            (false, true) => (f0 - down) / h,
            (false, false) => 0.0,
        };
    }
    g
}

/// Quasi-Newton (BFGS) descent with Armijo backtracking and finite-difference
/// gradients. Every accepted iterate has a finite cost, so every predicted
/// state stays inside the barrier-safe set.
pub fn solve_ocp(problem: &OcpProblem, warm_start: Option<&HorizonControls>) -> Result<OcpSolution> {
    let cfg = problem.cfg;
    if !cfg.constraints.is_safe(&problem.state) {
        return Err(Error::InfeasibleStart);
    }
    let zeros = HorizonControls::zeros(cfg.horizon, cfg.inputs());
    let (mut u, mut base, warm_start_cost) = match warm_start {
        Some(w) if w.horizon() != cfg.horizon || w.inputs() != cfg.inputs() => {
            return Err(Error::Config("warm start has the wrong shape".into()))
        }
        Some(w) => match problem.evaluate(w) {
            Ok(p) => {
                let c = p.cost();
                (w.clone(), p, c)
            }
            Err(_) => (zeros.clone(), problem.evaluate(&zeros)?, f64::INFINITY),
        },
        None => {
            let p = problem.evaluate(&zeros)?;
            let c = p.cost();
            (zeros.clone(), p, c)
        }
    };

    let s = &cfg.solver;
    let dim = u.as_vector().len();
    let min_limit = cfg.mask.indices().into_iter().map(|i| cfg.limits.as_array()[i]).fold(f64::INFINITY, f64::min);
    let mut inv_hessian = DMatrix::<f64>::identity(dim, dim);
    let mut fresh_hessian = true;
    let mut g = gradient(problem, &base, &u);
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < s.max_iterations {
        if g.amax() <= s.gradient_tolerance {
            status = SolveStatus::Converged;
            break;
        }
        let mut direction = -(&inv_hessian * &g);
        let mut slope = g.dot(&direction);
        if !(slope < 0.0) {
            inv_hessian.fill_with_identity();
            fresh_hessian = true;
            direction = -g.clone();
            slope = -g.norm_squared();
        }
        let mut alpha = if fresh_hessian { (0.25 * min_limit / direction.amax()).min(1.0) } else { 1.0 };
        let f0 = base.cost();
        let mut accepted = None;
        for _ in 0..s.max_backtracks {
            let trial = HorizonControls::from_vector(u.as_vector() + alpha * &direction, u.inputs())?;
            if let Ok(p) = problem.evaluate(&trial) {
                if p.cost() <= f0 + s.armijo_c1 * alpha * slope {
                    accepted = Some((trial, p));
                    break;
                }
            }
            alpha *= s.backtrack;
        }
        let Some((next_u, next_base)) = accepted else {
            if !fresh_hessian {
                inv_hessian.fill_with_identity();
                fresh_hessian = true;
                continue;
            }
            status = if iterations == 0 { SolveStatus::NoDescent } else { SolveStatus::Converged };
            break;
        };
        iterations += 1;
        let decrease = f0 - next_base.cost();
        let next_g = gradient(problem, &next_base, &next_u);
        let step = next_u.as_vector() - u.as_vector();
        let dg = &next_g - &g;
        let sy = step.dot(&dg);
        if sy > 1e-12 * step.norm() * dg.norm() {
            if fresh_hessian {
                inv_hessian *= sy / dg.norm_squared();
            }
            let rho = 1.0 / sy;
            let hy = &inv_hessian * &dg;
            let yhy = dg.dot(&hy);
            // H+ = H - rho (H y s^T + s y^T H) + (rho^2 y^T H y + rho) s s^T
            inv_hessian -= rho * (&hy * step.transpose() + &step * hy.transpose());
            inv_hessian += (rho * rho * yhy + rho) * (&step * step.transpose());
            fresh_hessian = false;
        }
        u = next_u;
        base = next_base;
        g = next_g;
        if decrease <= 1e-15 * base.cost().abs().max(1e-300) {
            status = SolveStatus::Converged;
            break;
        }
    }

    let cost = base.cost();
    Ok(OcpSolution { controls: u, prediction: base, cost, warm_start_cost, iterations, status, gradient_norm: g.amax() })
}
