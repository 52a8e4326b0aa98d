//! Global-circuit baseline and gradient-variance experiments.
//!
//! Variance samples replace the two halves of a layer around one central
//! `RZ` rotation with independent Haar unitaries. Gradients are reported for
//! the Pauli-generator parameterization `exp(−iθZ)`, i.e. twice the
//! derivative with respect to the `RZ` angle, so that `tr[H²] = 2`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_hea, haar_column, haar_unitary, random_params, rz, Gate, GateKind, ParamCircuit};
use crate::error::{arg, Error, Result};
use crate::qstate::{fidelity_pure, schmidt_decomposition, zero_state, StateVector, C64};
use crate::rng::{split_seed, stream_rng, Rng};
use crate::scattering::{descend, shift_gradient, width_schedule, ParamInit, TrainConfig};
use crate::targets::{gaussian_state, ghz, haar_random_state, heisenberg_ground};

/// Largest register count for dense global Haar sampling.
pub const MAX_DENSE_GLOBAL_REGISTERS: usize = 12;

/// Outcome of training one global circuit on the full-state cost.
#[derive(Debug, Clone)]
pub struct GlobalResult {
    pub circuit: ParamCircuit,
    pub params: Vec<f64>,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub fidelity: f64,
    pub state: StateVector,
    pub wall_seconds: f64,
}

/// Train a single width-`n` HEA on `C_n = 2 − 2|⟨ψ(θ)|φ⟩|²` with the same
/// optimizer and stopping rule as the layer trainer.
pub fn train_global_qnn(target: &StateVector, config: &TrainConfig) -> Result<GlobalResult> {
    config.validate()?;
    let start = std::time::Instant::now();
    let n = target.n();
    let circuit = build_hea(n, config.depth)?;
    let mut rng = stream_rng(config.seed, 0);
    let params = match config.init {
        ParamInit::Uniform => random_params(circuit.n_params(), &mut rng),
        ParamInit::Zero => vec![0.0; circuit.n_params()],
    };
    let res = descend(n, &zero_state(n)?, target, circuit, params, config)?;
    let fidelity = fidelity_pure(&res.state, target)?;
    Ok(GlobalResult {
        circuit: res.circuit,
        params: res.params,
        trace: res.trace,
        converged: res.converged,
        fidelity,
        state: res.state,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Which learning step a variance point probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSelector {
    First,
    /// Step `⌊n/2⌋`.
    Middle,
    Last,
    /// Whole-register circuit instead of a scattering layer.
    Global,
}

impl StepSelector {
    pub fn name(self) -> &'static str {
        match self {
            StepSelector::First => "first",
            StepSelector::Middle => "middle",
            StepSelector::Last => "last",
            StepSelector::Global => "global",
        }
    }
}

/// Target family whose size varies across a variance sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TargetFamily {
    Ghz,
    HeisenbergXxx,
    HeisenbergXxz { delta: f64 },
    Gaussian { sigma: f64 },
    HaarRandom { seed: u64 },
}

impl TargetFamily {
    pub fn name(&self) -> &'static str {
        match self {
            TargetFamily::Ghz => "ghz",
            TargetFamily::HeisenbergXxx => "heisenberg_xxx",
            TargetFamily::HeisenbergXxz { .. } => "heisenberg_xxz",
            TargetFamily::Gaussian { .. } => "gaussian",
            TargetFamily::HaarRandom { .. } => "haar_random",
        }
    }

    pub fn instantiate(&self, n: usize) -> Result<StateVector> {
        match self {
            TargetFamily::Ghz => ghz(n),
            TargetFamily::HeisenbergXxx => Ok(heisenberg_ground(n, 1.0)?.0),
            TargetFamily::HeisenbergXxz { delta } => Ok(heisenberg_ground(n, *delta)?.0),
            TargetFamily::Gaussian { sigma } => gaussian_state(n, ((1usize << n) - 1) as f64 / 2.0, *sigma),
            TargetFamily::HaarRandom { seed } => haar_random_state(n, *seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceExperimentConfig {
    #[serde(flatten)]
    pub family: TargetFamily,
    pub n_values: Vec<usize>,
    pub steps: Vec<StepSelector>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_w_max")]
    pub w_max: usize,
}

fn default_samples() -> usize {
    500
}

fn default_w_max() -> usize {
    2
}

impl VarianceExperimentConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.samples < 2 {
            v.push(format!("variance.samples must be >= 2 (got {})", self.samples));
        }
        if self.n_values.is_empty() {
            v.push("variance.n_values must be nonempty".into());
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2 || n > crate::targets::MAX_TARGET_REGISTERS) {
            v.push(format!("variance.n_values entry {n} outside 2..={}", crate::targets::MAX_TARGET_REGISTERS));
        }
        if self.steps.is_empty() {
            v.push("variance.steps must be nonempty".into());
        }
        if self.w_max == 0 {
            v.push("variance.w_max must be >= 1".into());
        }
        v
    }
}

/// Aggregated gradient statistics for one `(n, step)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub family: String,
    pub n: usize,
    pub step: StepSelector,
    /// Layer index probed (`n` for the global circuit).
    pub k: usize,
    /// Register count the sampled unitaries act on.
    pub width: usize,
    pub samples: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of the mean.
    pub stderr: f64,
}

/// Sample mean, unbiased variance and standard error of the mean.
pub fn sample_stats(xs: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var, (var / m).sqrt())
}

/// A state on all `n` registers whose first `k − 1` registers carry the
/// target's reduced state `ρ_{k−1}`, purified on registers `k..k+w−1`, with
/// every later register in `|0⟩`.
pub fn purification_carrier(target: &StateVector, k: usize, w: usize) -> Result<StateVector> {
    let n = target.n();
    if k == 0 || w == 0 || k + w - 1 > n {
        return arg(format!("layer {k} of width {w} does not fit in {n} registers"));
    }
    if k == 1 {
        return zero_state(n);
    }
    let sd = schmidt_decomposition(target, k - 1, 1e-12)?;
    let r = sd.coefficients.len();
    if r > 1 << w {
        return Err(Error::Capacity(format!(
            "rank {r} at cut {} needs more than {w} purifying registers",
            k - 1
        )));
    }
    let tail = n - (k - 1) - w;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    for (i, lam) in sd.coefficients.iter().enumerate() {
        for p in 0..sd.prefix.nrows() {
            let idx = (p << (n - k + 1)) | (i << tail);
            amps[idx] = sd.prefix[(p, i)] * *lam;
        }
    }
    StateVector::normalized(amps)
}

/// Layer `U₊ · RZ(θ) · U₋` with Haar `U±` on `w` registers; the rotation sits
/// on the layer's first register.
fn haar_sandwich(w: usize, k: usize, rng: &mut Rng) -> Result<ParamCircuit> {
    let d = 1usize << w;
    let targets: Vec<usize> = (1..=w).collect();
    let minus = haar_unitary(d, rng)?;
    let plus = haar_unitary(d, rng)?;
    ParamCircuit::new(
        w,
        k,
        vec![
            Gate::fixed(targets.clone(), &minus),
            Gate::rotation(GateKind::RZ, 1, 0),
            Gate::fixed(targets, &plus),
        ],
    )
}

/// `∂_θ C_k` for one Haar draw of the step-`k` layer of width `w`, starting
/// from an exact purification of `ρ_{k−1}`.
pub fn sample_gradient_qssm(target: &StateVector, k: usize, w: usize, rng: &mut Rng) -> Result<f64> {
    let carrier = purification_carrier(target, k, w)?;
    let layer = haar_sandwich(w, k, rng)?;
    let theta = rng_angle(rng);
    let (_, grad) = shift_gradient(k, &carrier, &layer, &[theta], target)?;
    Ok(2.0 * grad[0])
}

fn rng_angle(rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    rng.random_range(0.0..std::f64::consts::TAU)
}

/// `∂_θ C_n` for a global `U₊ · RZ(θ) · U₋` with Haar `U±` on all `n`
/// registers.
///
/// Only `U₋|0⟩` and `U₊†|φ⟩` enter the cost, and each is an independent
/// Haar-random vector, so the draw samples those two columns directly.
pub fn sample_gradient_global(target: &StateVector, rng: &mut Rng) -> Result<f64> {
    let n = target.n();
    let d = 1usize << n;
    let a = haar_column(d, rng);
    let b = haar_column(d, rng);
    let theta = rng_angle(rng);
    let overlap = |t: f64| {
        let [[p0, _], [_, p1]] = rz(t);
        // RZ on register 1, the most significant bit
        let half = d / 2;
        let s: C64 = b[..half].iter().zip(&a[..half]).map(|(x, y)| x.conj() * y).sum::<C64>() * p0
            + b[half..].iter().zip(&a[half..]).map(|(x, y)| x.conj() * y).sum::<C64>() * p1;
        s.norm_sqr()
    };
    // C = 2 − 2 f(θ), dC/dθ_RZ = −(f(θ+π/2) − f(θ−π/2))
    let d_rz = -(overlap(theta + FRAC_PI_2) - overlap(theta - FRAC_PI_2));
    Ok(2.0 * d_rz)
}

/// Dense counterpart of [`sample_gradient_global`] that draws both full
/// Haar unitaries.
pub fn sample_gradient_global_dense(target: &StateVector, rng: &mut Rng) -> Result<f64> {
    let n = target.n();
    if n > MAX_DENSE_GLOBAL_REGISTERS {
        return Err(Error::Capacity(format!(
            "dense global Haar sampling is limited to {MAX_DENSE_GLOBAL_REGISTERS} registers"
        )));
    }
    let layer = haar_sandwich(n, 1, rng)?;
    let theta = rng_angle(rng);
    let (_, grad) = shift_gradient(n, &zero_state(n)?, &layer, &[theta], target)?;
    Ok(2.0 * grad[0])
}

/// Closed-form last-step variance `(8/9)(c₁⁴ + c₂⁴ + 10c₁²c₂²)`, `c₂ = 1 − c₁`.
pub fn prop_s1_closed_form(c1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c1) {
        return arg(format!("c1 must lie in [0, 1], got {c1}"));
    }
    let c2 = 1.0 - c1;
    Ok(8.0 / 9.0 * (c1.powi(4) + c2.powi(4) + 10.0 * c1 * c1 * c2 * c2))
}

/// Squared Schmidt coefficients `(c₁, c₂)` of the last cut.
pub fn last_cut_weights(target: &StateVector) -> Result<(f64, f64)> {
    let sv = crate::qstate::schmidt_coefficients(target, target.n() - 1)?;
    let c1 = sv[0] * sv[0];
    let c2 = sv.get(1).map_or(0.0, |s| s * s);
    Ok((c1, c2))
}

/// Layer index and width probed by `step` for an `n`-register target.
pub fn step_geometry(n: usize, step: StepSelector, w_max: usize) -> Result<(usize, usize)> {
    Ok(match step {
        StepSelector::First => (1, width_schedule(n, 1, w_max)?),
        StepSelector::Middle => {
            let k = (n / 2).max(1);
            (k, width_schedule(n, k, w_max)?)
        }
        StepSelector::Last => (n, 1),
        StepSelector::Global => (n, n),
    })
}

/// `samples` gradient draws for one `(target, step)`; draw `i` uses stream
/// `i` of `seed`, so the result does not depend on thread count.
pub fn sample_gradients(target: &StateVector, step: StepSelector, w_max: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let n = target.n();
    let (k, w) = step_geometry(n, step, w_max)?;
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            match step {
                StepSelector::Global => sample_gradient_global(target, &mut rng),
                _ => sample_gradient_qssm(target, k, w, &mut rng),
            }
        })
        .collect()
}

/// Run the sweep over `n_values × steps`.
///
/// Point `j` (in `n`-major order) draws from seed `split_seed(seed, j)`.
pub fn run_variance_experiment(config: &VarianceExperimentConfig) -> Result<Vec<VariancePoint>> {
    let v = config.violations();
    if !v.is_empty() {
        return arg(v.join("; "));
    }
    let mut points = Vec::new();
    let mut j = 0u64;
    for &n in &config.n_values {
        let target = config.family.instantiate(n)?;
        for &step in &config.steps {
            let (k, width) = step_geometry(n, step, config.w_max)?;
            let xs = sample_gradients(&target, step, config.w_max, config.samples, split_seed(config.seed, j))?;
            j += 1;
            let (mean, variance, stderr) = sample_stats(&xs);
            points.push(VariancePoint {
                family: config.family.name().to_string(),
                n,
                step,
                k,
                width,
                samples: config.samples,
                mean,
                variance,
                stderr,
            });
        }
    }
    Ok(points)
}

/// Least-squares slope of `log₂(variance)` against `n`.
pub fn log2_slope(points: &[(usize, f64)]) -> f64 {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
