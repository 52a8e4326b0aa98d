//! Derivative-free Nelder–Mead simplex minimization.
//!
//! Coefficients are the standard ones: reflection 1, expansion 2,
//! contraction 1/2, shrink 1/2.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Stop when the simplex values span at most this much.
    pub f_tol: f64,
    /// Stop when every vertex lies within this distance of the best one.
    pub x_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 1000, initial_step: 1.0, f_tol: 1e-12, x_tol: 1e-10 }
    }
}

impl NelderMeadConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.max_evals == 0 {
            v.push("optimizer.max_evals must be >= 1".into());
        }
        if !(self.initial_step > 0.0) {
            v.push(format!("optimizer.initial_step must be > 0 (got {})", self.initial_step));
        }
        if !(self.f_tol >= 0.0) {
            v.push(format!("optimizer.f_tol must be >= 0 (got {})", self.f_tol));
        }
        if !(self.x_tol >= 0.0) {
            v.push(format!("optimizer.x_tol must be >= 0 (got {})", self.x_tol));
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    /// Objective value of every evaluation, in order.
    pub trace: Vec<f64>,
    /// Stopped on a tolerance rather than the evaluation budget.
    pub converged: bool,
}

const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Minimize `f` from `x0`. Returns the best point seen, also when the budget
/// runs out.
pub fn nelder_mead_minimize<F>(mut f: F, x0: &[f64], config: &NelderMeadConfig) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let m = x0.len();
    let mut trace = Vec::with_capacity(config.max_evals);
    let mut eval = |x: &[f64], trace: &mut Vec<f64>| {
        let v = f(x);
        trace.push(v);
        // NaN would poison the ordering
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let f0 = eval(x0, &mut trace);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..m {
        if trace.len() >= config.max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += config.initial_step;
        let fx = eval(&x, &mut trace);
        simplex.push((x, fx));
    }

    let mut converged = false;
    while simplex.len() == m + 1 && trace.len() < config.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[m].1);
        let spread = worst - best;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= config.f_tol || size <= config.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; m];
        for (x, _) in &simplex[..m] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / m as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[m].0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(ALPHA);
        let fr = eval(&xr, &mut trace);
        if fr < simplex[0].1 {
            if trace.len() >= config.max_evals {
                simplex[m] = (xr, fr);
                break;
            }
            let xe = along(GAMMA);
            let fe = eval(&xe, &mut trace);
            simplex[m] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[m - 1].1 {
            simplex[m] = (xr, fr);
        } else {
            if trace.len() >= config.max_evals {
                break;
            }
            // outside contraction when the reflection beat the worst vertex
            let (xc, fc, accept) = if fr < worst {
                let xc = along(ALPHA * RHO);
                let fc = eval(&xc, &mut trace);
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-RHO);
                let fc = eval(&xc, &mut trace);
                (xc, fc, fc < worst)
            };
            if accept {
                simplex[m] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if trace.len() >= config.max_evals {
                        break;
                    }
                    let x: Vec<f64> = x0.iter().zip(&vertex.0).map(|(b, v)| b + SIGMA * (v - b)).collect();
                    let fx = eval(&x, &mut trace);
                    *vertex = (x, fx);
                }
            }
        }
    }

    let (x_best, f_best) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex holds x0");
    NelderMeadResult { x_best, f_best, trace, converged }
}
