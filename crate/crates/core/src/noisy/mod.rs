//! Noisy layer-by-layer training.
//!
//! States are density matrices evolved with depolarizing and thermal
//! relaxation noise after every gate. The three terms of the layer cost are
//! swap-test estimates from a finite number of shots, each layer is
//! optimized from several random starts with Nelder–Mead, and the start with
//! the lowest final estimated cost is kept.

mod channels;
mod nelder_mead;

pub use channels::{
    apply_circuit_dm, apply_gate_dm, depolarize, thermal_relax, NoiseModel, MAX_NOISY_REGISTERS,
};
pub use nelder_mead::{nelder_mead_minimize, NelderMeadConfig, NelderMeadResult};

use std::time::Instant;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{apply_circuit, build_hea, random_params, ParamCircuit};
use crate::error::{arg, Error, Result};
use crate::qstate::{fidelity_pure, partial_trace_keep_prefix, zero_state, DensityMatrix, StateVector};
use crate::rng::{split_seed, stream_rng, Rng};
use crate::scattering::{width_schedule, ScatteringModel, TrainedLayer};

/// Shot budget for every overlap estimate. `shots = 0` evaluates overlaps
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShotEstimator {
    pub shots: u64,
    pub seed: u64,
}

impl Default for ShotEstimator {
    fn default() -> Self {
        Self { shots: 8192, seed: 0 }
    }
}

impl ShotEstimator {
    pub fn exact() -> Self {
        Self { shots: 0, seed: 0 }
    }

    /// Swap-test estimate of `tr[ρσ]` drawing shots from `rng`.
    pub fn overlap(&self, rho: &DensityMatrix, sigma: &DensityMatrix, rng: &mut Rng) -> Result<f64> {
        swap_test_overlap(rho, sigma, self.shots, rng)
    }
}

/// Estimate `q = tr[ρσ]` from `shots` swap tests, each accepting with
/// probability `(1 + q)/2`: returns `2B/shots − 1` for `B ~ Binomial`. With
/// `shots = 0` returns `q`.
pub fn swap_test_overlap(rho: &DensityMatrix, sigma: &DensityMatrix, shots: u64, rng: &mut Rng) -> Result<f64> {
    let q = rho.overlap(sigma)?;
    if shots == 0 {
        return Ok(q);
    }
    let accept = ((1.0 + q) / 2.0).clamp(0.0, 1.0);
    let b = Binomial::new(shots, accept).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(2.0 * b.sample(rng) as f64 / shots as f64 - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisyTrainConfig {
    pub depth: usize,
    pub w_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub optimizer: NelderMeadConfig,
}

impl Default for NoisyTrainConfig {
    fn default() -> Self {
        Self { depth: 1, w_max: 2, restarts: 20, seed: 0, optimizer: NelderMeadConfig::default() }
    }
}

impl NoisyTrainConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.w_max == 0 {
            v.push("noisy.w_max must be >= 1".into());
        }
        if self.restarts == 0 {
            v.push("noisy.restarts must be >= 1".into());
        }
        v.extend(self.optimizer.violations());
        v
    }
}

/// One objective evaluation during noisy training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyTracePoint {
    pub iteration: usize,
    pub cost: f64,
    pub restart: usize,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct NoisyRun {
    /// Trained circuits with the noiseless reconstruction and its fidelity.
    pub model: ScatteringModel,
    /// `⟨φ|ρ|φ⟩` of the noisy final state.
    pub noisy_fidelity: f64,
    /// Winning restart per layer.
    pub chosen_restarts: Vec<usize>,
    /// Fresh cost estimate of each winning restart.
    pub final_costs: Vec<f64>,
    /// Every evaluation of every restart of every layer.
    pub traces: Vec<NoisyTracePoint>,
}

/// Shot-estimated `tr σ² + tr ρ² − 2 tr σρ` on the first `k` registers.
pub fn estimate_cost(
    sigma: &DensityMatrix,
    rho_k: &DensityMatrix,
    k: usize,
    est: &ShotEstimator,
    rng: &mut Rng,
) -> Result<f64> {
    let s = sigma.partial_trace_keep_prefix(k)?;
    let ss = est.overlap(&s, &s, rng)?;
    let rr = est.overlap(rho_k, rho_k, rng)?;
    let sr = est.overlap(&s, rho_k, rng)?;
    Ok(ss + rr - 2.0 * sr)
}

struct RestartOutcome {
    params: Vec<f64>,
    final_cost: f64,
    trace: Vec<f64>,
    converged: bool,
}

/// Train every layer on noisy hardware semantics and report the noiseless
/// fidelity of the trained circuit.
pub fn train_qssm_noisy(
    target: &StateVector,
    config: &NoisyTrainConfig,
    noise: &NoiseModel,
    est: &ShotEstimator,
) -> Result<NoisyRun> {
    let mut v = config.violations();
    v.extend(noise.violations());
    if !v.is_empty() {
        return arg(v.join("; "));
    }
    let n = target.n();
    if n > MAX_NOISY_REGISTERS {
        return Err(Error::Capacity(format!(
            "noisy training is limited to {MAX_NOISY_REGISTERS} registers, got {n}"
        )));
    }
    let start = Instant::now();
    let mut rho = DensityMatrix::from_pure(&zero_state(n)?)?;
    let mut widths = Vec::with_capacity(n);
    let mut layers = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(n);
    let mut final_costs = Vec::with_capacity(n);
    let mut traces = Vec::new();

    for k in 1..=n {
        let w = width_schedule(n, k, config.w_max)?;
        let circuit = build_hea(w, config.depth)?.at_offset(k)?;
        let rho_k = partial_trace_keep_prefix(target, k)?;
        let layer_seed = split_seed(config.seed, k as u64);
        let shot_seed = split_seed(est.seed, k as u64);

        let outcomes: Vec<RestartOutcome> = (0..config.restarts)
            .into_par_iter()
            .map(|r| train_restart(&rho, &rho_k, k, &circuit, config, noise, est, layer_seed, shot_seed, r as u64))
            .collect::<Result<_>>()?;

        // argmin, ties to the lowest restart index
        let (best, _) = outcomes
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, o)| if o.final_cost < acc.1 { (i, o.final_cost) } else { acc });
        for (r, o) in outcomes.iter().enumerate() {
            traces.extend(o.trace.iter().enumerate().map(|(i, &c)| NoisyTracePoint { iteration: i, cost: c, restart: r, k }));
        }
        let win = &outcomes[best];
        rho = apply_circuit_dm(&rho, &circuit, &win.params, noise)?;
        widths.push(w);
        chosen.push(best);
        final_costs.push(win.final_cost);
        layers.push(TrainedLayer {
            k,
            width: w,
            circuit,
            params: win.params.clone(),
            trace: win.trace.clone(),
            converged: win.converged,
        });
    }

    let mut psi = zero_state(n)?;
    for layer in &layers {
        psi = apply_circuit(&psi, &layer.circuit, &layer.params)?;
    }
    let fidelity = fidelity_pure(&psi, target)?;
    let noisy_fidelity = rho.fidelity_with_pure(target)?;
    Ok(NoisyRun {
        model: ScatteringModel {
            n,
            widths,
            layers,
            final_state: psi,
            fidelity,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
        noisy_fidelity,
        chosen_restarts: chosen,
        final_costs,
        traces,
    })
}

#[allow(clippy::too_many_arguments)]
fn train_restart(
    rho_prev: &DensityMatrix,
    rho_k: &DensityMatrix,
    k: usize,
    circuit: &ParamCircuit,
    config: &NoisyTrainConfig,
    noise: &NoiseModel,
    est: &ShotEstimator,
    layer_seed: u64,
    shot_seed: u64,
    restart: u64,
) -> Result<RestartOutcome> {
    let x0 = random_params(circuit.n_params(), &mut stream_rng(layer_seed, restart));
    let mut shots = stream_rng(shot_seed, restart);
    let mut failure = None;
    let mut objective = |x: &[f64]| -> f64 {
        let r = apply_circuit_dm(rho_prev, circuit, x, noise)
            .and_then(|sigma| estimate_cost(&sigma, rho_k, k, est, &mut shots));
        r.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    };
    let res = nelder_mead_minimize(&mut objective, &x0, &config.optimizer);
    // re-estimate, since the minimum over noisy estimates is biased low
    let final_cost = objective(&res.x_best);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RestartOutcome { params: res.x_best, final_cost, trace: res.trace, converged: res.converged })
}
