//! Haar-measure moment identities and their Monte-Carlo check.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::haar_unitary;
use crate::error::{arg, Result};
use crate::qstate::C64;
use crate::rng::{split_seed, stream_rng, Rng};

type M = DMatrix<C64>;

fn tr(m: &M) -> C64 {
    m.trace()
}

/// `E[tr(U†AUB)] = tr A tr B / d`.
pub fn first_moment(a: &M, b: &M) -> C64 {
    tr(a) * tr(b) / a.nrows() as f64
}

/// `E[tr(U†AUBU†CUD)]`.
pub fn second_moment_product(a: &M, b: &M, c: &M, d: &M) -> C64 {
    let n = a.nrows() as f64;
    let (ta, tb, tc, td) = (tr(a), tr(b), tr(c), tr(d));
    let (tac, tbd) = (tr(&(a * c)), tr(&(b * d)));
    (ta * tc * tbd + tac * tb * td) / (n * n - 1.0) - (tac * tbd + ta * tb * tc * td) / (n * (n * n - 1.0))
}

/// `E[tr(UAU†B) tr(UCU†D)]`.
pub fn second_moment_trace_pair(a: &M, b: &M, c: &M, d: &M) -> C64 {
    let n = a.nrows() as f64;
    let (ta, tb, tc, td) = (tr(a), tr(b), tr(c), tr(d));
    let (tac, tbd) = (tr(&(a * c)), tr(&(b * d)));
    (ta * tb * tc * td + tac * tbd) / (n * n - 1.0) - (tac * tb * td + ta * tc * tbd) / (n * (n * n - 1.0))
}

/// Random positive operator `GG†` with complex Gaussian `G`.
pub fn random_positive(d: usize, rng: &mut Rng) -> M {
    let g = M::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    &g * g.adjoint()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub identity: String,
    pub d: usize,
    pub samples: usize,
    pub estimate: f64,
    pub exact: f64,
    pub rel_error: f64,
}

/// Monte-Carlo estimates of the three identities at dimension `d`, with
/// operators `A, B, C, D` drawn once from [`random_positive`].
pub fn haar_moment_check(d: usize, samples: usize, seed: u64) -> Result<Vec<MomentCheck>> {
    if d < 2 || samples == 0 {
        return arg(format!("haar check needs d >= 2 and samples >= 1 (got d={d}, samples={samples})"));
    }
    let mut op_rng = stream_rng(seed, 0);
    let [a, b, c, dd] = std::array::from_fn(|_| random_positive(d, &mut op_rng));
    let exact = [first_moment(&a, &b), second_moment_product(&a, &b, &c, &dd), second_moment_trace_pair(&a, &b, &c, &dd)];
    let draw_seed = split_seed(seed, 1);
    let sums = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<[C64; 3]> {
            let u = haar_unitary(d, &mut stream_rng(draw_seed, i))?;
            let ud = u.adjoint();
            let uau = &ud * &a * &u;
            let ucu = &ud * &c * &u;
            let s1 = tr(&(&uau * &b));
            let s2 = tr(&(&uau * &b * &ucu * &dd));
            let s3 = tr(&(&u * &a * &ud * &b)) * tr(&(&u * &c * &ud * &dd));
            Ok([s1, s2, s3])
        })
        .try_reduce(|| [C64::new(0.0, 0.0); 3], |x, y| Ok([x[0] + y[0], x[1] + y[1], x[2] + y[2]]))?;
    let names = ["tr(U'AUB)", "tr(U'AUBU'CUD)", "tr(UAU'B)tr(UCU'D)"];
    Ok(names
        .iter()
        .zip(sums.iter().zip(&exact))
        .map(|(name, (s, e))| {
            let est = s / samples as f64;
            MomentCheck {
                identity: name.to_string(),
                d,
                samples,
                estimate: est.re,
                exact: e.re,
                rel_error: (est - e).norm() / e.norm(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold_for_identity_operators() {
        // A = B = C = D = I: every trace product is fixed by unitarity
        for d in [2, 3, 4] {
            let i = M::identity(d, d);
            let n = d as f64;
            assert!((first_moment(&i, &i) - C64::new(n, 0.0)).norm() < 1e-12);
            assert!((second_moment_product(&i, &i, &i, &i) - C64::new(n, 0.0)).norm() < 1e-12);
            assert!((second_moment_trace_pair(&i, &i, &i, &i) - C64::new(n * n, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn small_run_is_close() {
        for c in haar_moment_check(2, 20_000, 3).unwrap() {
            assert!(c.rel_error < 0.05, "{c:?}");
        }
    }
}
