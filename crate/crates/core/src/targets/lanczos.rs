//! Lanczos ground-state solver for real symmetric operators given only as a
//! matrix-vector product, with full reorthogonalization and Ritz-vector
//! restarts.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy)]
pub struct LanczosConfig {
    /// Krylov vectors kept before restarting from the current Ritz vector.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Required `‖Hv − Ev‖₂`.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self { krylov_dim: 160, max_restarts: 40, residual_tol: 1e-10, seed: 0x1a2c_705 }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lowest eigenpair of the operator `apply` (writes `H x` into its second
/// argument) on `dim`-dimensional real vectors.
pub fn ground_state<F>(dim: usize, apply: F, cfg: &LanczosConfig) -> Result<GroundState>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut rng = stream_rng(cfg.seed, 0);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let m_max = cfg.krylov_dim.min(dim).max(1);
    let mut total = 0;
    let mut last_residual = f64::INFINITY;
    let mut hv = vec![0.0; dim];

    for _ in 0..=cfg.max_restarts {
        let s = norm(&start);
        start.iter_mut().for_each(|x| *x /= s);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();

        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut hv);
            total += 1;
            let mut w = hv.clone();
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            axpy(&mut w, -a, &basis[j]);
            if j > 0 {
                axpy(&mut w, -beta[j - 1], &basis[j - 1]);
            }
            // full reorthogonalization, two passes
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    axpy(&mut w, -c, v);
                }
            }
            let b = norm(&w);
            let m = alpha.len();
            let coeffs = tridiagonal_ground(&alpha, &beta);
            let estimate = b * coeffs[m - 1].abs();
            let exhausted = b < 1e-12 || m >= m_max;
            if estimate < cfg.residual_tol * 0.1 || exhausted {
                let mut y = vec![0.0; dim];
                for (c, v) in coeffs.iter().zip(&basis) {
                    axpy(&mut y, *c, v);
                }
                let ny = norm(&y);
                y.iter_mut().for_each(|x| *x /= ny);
                apply(&y, &mut hv);
                total += 1;
                let energy = dot(&y, &hv);
                axpy(&mut hv, -energy, &y);
                let residual = norm(&hv);
                last_residual = residual;
                if residual < cfg.residual_tol {
                    return Ok(GroundState { energy, vector: y, residual, iterations: total });
                }
                start = y;
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            basis.push(w);
        }
    }
    Err(Error::Numerical(format!(
        "Lanczos did not converge after {total} operator applications (residual {last_residual:e})"
    )))
}

/// Eigenvector for the lowest eigenvalue of the symmetric tridiagonal matrix with diagonal `alpha`
/// and off-diagonal `beta` (`beta.len() >= alpha.len() - 1`).
fn tridiagonal_ground(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    eig.eigenvectors.column(idx).iter().copied().collect()
}
