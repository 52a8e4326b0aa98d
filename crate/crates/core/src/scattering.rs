//! Sequential scattering training.
//!
//! Layer `k` is a hardware-efficient circuit on registers `k..k+w_k-1`. It is
//! trained so that the first `k` registers of the running state reproduce the
//! target's reduced state `ρ_k`, minimizing `C_k = ‖σ_k − ρ_k‖₂²`. Registers
//! below `k` are never touched by layer `k`, so prefixes learnt earlier stay
//! put.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_hea, parameter_shift_pair, random_params, ParamCircuit};
use crate::error::{arg, Error, Result};
use crate::qstate::{
    fidelity_pure, hs_cost, overlap_reduced_raw, rank_sequence, zero_state, StateJson, StateVector, C64,
};
use crate::rng::{stream_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum WidthMode {
    Schedule,
    RankBased { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamInit {
    /// Uniform on `[0, 2π)`.
    Uniform,
    /// All zeros; the HEA is then the identity.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub depth: usize,
    pub w_max: usize,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once successive costs differ by at most this much.
    pub cost_tol: f64,
    pub seed: u64,
    pub gradient: GradientMode,
    pub width_mode: WidthMode,
    pub init: ParamInit,
    /// Step for the finite-difference gradient mode.
    pub fd_step: f64,
    /// Return the lowest-cost visited parameters rather than the last ones.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            depth: 20,
            w_max: usize::MAX,
            learning_rate: 0.1,
            max_iters: 200,
            cost_tol: 1e-3,
            seed: 0,
            gradient: GradientMode::Analytic,
            width_mode: WidthMode::Schedule,
            init: ParamInit::Uniform,
            fd_step: 1e-5,
            keep_best: true,
        }
    }
}

impl TrainConfig {
    /// Every violated field, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.learning_rate > 0.0) {
            v.push(format!("learning_rate must be > 0 (got {})", self.learning_rate));
        }
        if !(self.cost_tol >= 0.0) {
            v.push(format!("cost_tol must be >= 0 (got {})", self.cost_tol));
        }
        if self.max_iters == 0 {
            v.push("max_iters must be >= 1".into());
        }
        if self.w_max == 0 {
            v.push("w_max must be >= 1".into());
        }
        if !(self.fd_step > 0.0) {
            v.push(format!("fd_step must be > 0 (got {})", self.fd_step));
        }
        if let WidthMode::RankBased { tol } = self.width_mode {
            if !(tol > 0.0) {
                v.push(format!("width_mode.tol must be > 0 (got {tol})"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            arg(v.join("; "))
        }
    }
}

/// Width of layer `k`: grows as `k + 1` up to the middle register, then
/// shrinks as `n − k + 1`, capped at `w_max`.
pub fn width_schedule(n: usize, k: usize, w_max: usize) -> Result<usize> {
    if k == 0 || k > n {
        return arg(format!("layer index {k} outside 1..={n}"));
    }
    if w_max == 0 {
        return arg("w_max must be at least 1");
    }
    let w = if k <= n / 2 { k + 1 } else { n - k + 1 };
    Ok(w.min(w_max))
}

/// Widths sized to the target's Schmidt ranks: `min(schedule, ⌈log₂ r_k⌉ + 1)`.
pub fn rank_based_widths(target: &StateVector, tol: f64) -> Result<Vec<usize>> {
    let ranks = rank_sequence(target, tol)?;
    let n = target.n();
    ranks
        .ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let k = i + 1;
            let needed = ceil_log2(r) + 1;
            Ok(width_schedule(n, k, usize::MAX)?.min(needed).max(1))
        })
        .collect()
}

fn ceil_log2(r: usize) -> usize {
    if r <= 1 {
        0
    } else {
        (usize::BITS - (r - 1).leading_zeros()) as usize
    }
}

fn check_shapes(k: usize, psi_prev: &StateVector, layer: &ParamCircuit, params: &[f64], target: &StateVector) -> Result<()> {
    if psi_prev.n() != target.n() {
        return arg(format!("state has {} registers, target {}", psi_prev.n(), target.n()));
    }
    if k == 0 || k > target.n() {
        return arg(format!("prefix length {k} outside 1..={}", target.n()));
    }
    layer.check_fits(target.n())?;
    layer.check_params(params)
}

fn check_layer(k: usize, psi_prev: &StateVector, layer: &ParamCircuit, params: &[f64], target: &StateVector) -> Result<()> {
    if layer.offset() != k {
        return arg(format!("layer {k} is placed at offset {}", layer.offset()));
    }
    check_shapes(k, psi_prev, layer, params, target)
}

/// Cost of the k-prefix reductions after `layer`, wherever the layer sits.
pub(crate) fn prefix_cost(k: usize, psi_prev: &StateVector, layer: &ParamCircuit, params: &[f64], target: &StateVector) -> Result<f64> {
    check_shapes(k, psi_prev, layer, params, target)?;
    let psi = crate::circuit::apply_circuit(psi_prev, layer, params)?;
    hs_cost(&psi, target, k)
}

/// `C_k` after applying `layer(params)` to `psi_prev`.
pub fn layer_cost(k: usize, psi_prev: &StateVector, layer: &ParamCircuit, params: &[f64], target: &StateVector) -> Result<f64> {
    check_layer(k, psi_prev, layer, params, target)?;
    let psi = crate::circuit::apply_circuit(psi_prev, layer, params)?;
    hs_cost(&psi, target, k)
}

/// States before each gate, so shifted evaluations can resume mid-circuit.
struct PrefixCache {
    n: usize,
    states: Vec<Vec<C64>>,
}

impl PrefixCache {
    fn build(psi_prev: &StateVector, layer: &ParamCircuit, params: &[f64]) -> Self {
        let n = psi_prev.n();
        let mut states = Vec::with_capacity(layer.gates().len() + 1);
        let mut cur = psi_prev.amplitudes().to_vec();
        states.push(cur.clone());
        for g in layer.gates() {
            layer.apply_gate(&mut cur, n, g, params);
            states.push(cur.clone());
        }
        Self { n, states }
    }

    fn output(&self) -> &[C64] {
        self.states.last().expect("at least the input state")
    }

    /// Output with `shifted` parameters that differ from the cached ones only
    /// in slots owned by gate `owner`.
    fn resume(&self, layer: &ParamCircuit, owner: usize, shifted: &[f64]) -> Vec<C64> {
        let mut amps = self.states[owner].clone();
        layer.apply_range(&mut amps, self.n, shifted, owner..layer.gates().len());
        amps
    }
}

/// `tr[Δ σ']` where `Δ = σ_k(θ*) − ρ_k` and `σ'` is the k-prefix reduction of
/// `shifted`.
fn delta_overlap(star: &[C64], target: &[C64], shifted: &[C64], n: usize, k: usize) -> f64 {
    overlap_reduced_raw(star, shifted, n, k) - overlap_reduced_raw(target, shifted, n, k)
}

/// Cost and parameter-shift gradient of the k-prefix cost for a layer at any
/// offset.
pub(crate) fn shift_gradient(
    k: usize,
    psi_prev: &StateVector,
    layer: &ParamCircuit,
    params: &[f64],
    target: &StateVector,
) -> Result<(f64, Vec<f64>)> {
    check_shapes(k, psi_prev, layer, params, target)?;
    let owners: Vec<usize> = (0..layer.n_params())
        .map(|s| layer.slot_owner(s).expect("validated slot layout"))
        .collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..layer.n_params())
        .map(|s| parameter_shift_pair(layer, params, s))
        .collect::<Result<_>>()?;
    let n = psi_prev.n();
    let cache = PrefixCache::build(psi_prev, layer, params);
    let star = cache.output();
    let tgt = target.amplitudes();
    let cost = overlap_reduced_raw(star, star, n, k) + overlap_reduced_raw(tgt, tgt, n, k)
        - 2.0 * overlap_reduced_raw(star, tgt, n, k);
    let grad = pairs
        .par_iter()
        .zip(owners.par_iter())
        .map(|((plus, minus), &owner)| {
            let up = cache.resume(layer, owner, plus);
            let down = cache.resume(layer, owner, minus);
            delta_overlap(star, tgt, &up, n, k) - delta_overlap(star, tgt, &down, n, k)
        })
        .collect();
    Ok((cost, grad))
}

/// Exact gradient of `C_k` by the parameter-shift rule:
/// `∂_μ C_k = ⟨Δ ⊗ I⟩_{θ_μ+π/2} − ⟨Δ ⊗ I⟩_{θ_μ−π/2}` with `Δ = σ_k(θ*) − ρ_k`
/// frozen at the current parameters and the identity on every register past
/// `k`.
pub fn analytic_gradient(
    k: usize,
    psi_prev: &StateVector,
    layer: &ParamCircuit,
    params: &[f64],
    target: &StateVector,
) -> Result<Vec<f64>> {
    check_layer(k, psi_prev, layer, params, target)?;
    Ok(shift_gradient(k, psi_prev, layer, params, target)?.1)
}

/// Shifted expectations of `Δ ⊗ Γ` with `Γ = I/2^{w−1}` the maximally mixed
/// state on the layer's registers past `k`.
///
/// This is the normalized-observable form of the gradient; it equals
/// [`analytic_gradient`] divided by `2^{w−1}`.
pub fn mixed_observable_gradient(
    k: usize,
    psi_prev: &StateVector,
    layer: &ParamCircuit,
    params: &[f64],
    target: &StateVector,
) -> Result<Vec<f64>> {
    let scale = (1u64 << (layer.width() - 1)) as f64;
    Ok(analytic_gradient(k, psi_prev, layer, params, target)?
        .into_iter()
        .map(|g| g / scale)
        .collect())
}

/// Central differences `(C(θ + h e_μ) − C(θ − h e_μ)) / 2h`.
pub fn finite_difference_gradient(
    k: usize,
    psi_prev: &StateVector,
    layer: &ParamCircuit,
    params: &[f64],
    target: &StateVector,
    h: f64,
) -> Result<Vec<f64>> {
    check_layer(k, psi_prev, layer, params, target)?;
    fd_gradient(k, psi_prev, layer, params, target, h)
}

pub(crate) fn fd_gradient(
    k: usize,
    psi_prev: &StateVector,
    layer: &ParamCircuit,
    params: &[f64],
    target: &StateVector,
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return arg(format!("finite-difference step must be positive, got {h}"));
    }
    check_shapes(k, psi_prev, layer, params, target)?;
    (0..layer.n_params())
        .into_par_iter()
        .map(|mu| {
            let mut p = params.to_vec();
            p[mu] = params[mu] + h;
            let up = prefix_cost(k, psi_prev, layer, &p, target)?;
            p[mu] = params[mu] - h;
            let down = prefix_cost(k, psi_prev, layer, &p, target)?;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// First and second moment estimates carried between ADAM steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One bias-corrected ADAM update of `params` in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if grad.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return arg("ADAM parameter, gradient and moment lengths differ");
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Result of training one scattering layer.
#[derive(Debug, Clone)]
pub struct LayerResult {
    pub circuit: ParamCircuit,
    pub params: Vec<f64>,
    /// Cost at every evaluated parameter point, the last one being `params`.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub state: StateVector,
}

/// Costs at or below this are treated as exactly aligned.
const ZERO_COST: f64 = 1e-12;

/// Gradient-descent loop shared by the layer trainer and the global baseline.
///
/// The trace holds the cost at each visited point. Training stops when two
/// successive costs differ by at most `cost_tol`, when the cost is already
/// zero, or after `max_iters` cost evaluations.
pub(crate) fn descend(
    k: usize,
    psi_prev: &StateVector,
    target: &StateVector,
    circuit: ParamCircuit,
    mut params: Vec<f64>,
    config: &TrainConfig,
) -> Result<LayerResult> {
    let adam = AdamConfig::with_learning_rate(config.learning_rate);
    let mut moments = AdamState::new(params.len());
    let mut trace: Vec<f64> = Vec::with_capacity(config.max_iters);
    let mut converged = false;
    let mut best = (f64::INFINITY, params.clone());
    loop {
        let (cost, grad) = match config.gradient {
            GradientMode::Analytic => shift_gradient(k, psi_prev, &circuit, &params, target)?,
            GradientMode::FiniteDifference => (
                prefix_cost(k, psi_prev, &circuit, &params, target)?,
                fd_gradient(k, psi_prev, &circuit, &params, target, config.fd_step)?,
            ),
        };
        if !cost.is_finite() {
            return Err(Error::Numerical(format!("layer {k} cost became {cost}")));
        }
        let prev = trace.last().copied();
        trace.push(cost);
        if cost < best.0 {
            best = (cost, params.clone());
        }
        if cost <= ZERO_COST || prev.is_some_and(|p| (cost - p).abs() <= config.cost_tol) {
            converged = true;
            break;
        }
        if trace.len() >= config.max_iters {
            break;
        }
        adam_step(&mut params, &grad, &mut moments, &adam)?;
    }
    if config.keep_best {
        params = best.1;
    }
    let state = crate::circuit::apply_circuit(psi_prev, &circuit, &params)?;
    Ok(LayerResult { circuit, params, trace, converged, state })
}

/// Train layer `k` of width `width` on top of `psi_prev`.
pub fn train_layer(
    k: usize,
    width: usize,
    psi_prev: &StateVector,
    target: &StateVector,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<LayerResult> {
    config.validate()?;
    let circuit = build_hea(width, config.depth)?.at_offset(k)?;
    circuit.check_fits(target.n())?;
    let params = match config.init {
        ParamInit::Uniform => random_params(circuit.n_params(), rng),
        ParamInit::Zero => vec![0.0; circuit.n_params()],
    };
    descend(k, psi_prev, target, circuit, params, config)
}

/// One trained layer as stored in a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedLayer {
    pub k: usize,
    pub width: usize,
    pub circuit: ParamCircuit,
    pub params: Vec<f64>,
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// The trained sequence `U_n ⋯ U_1` and its reconstruction of the target.
#[derive(Debug, Clone)]
pub struct ScatteringModel {
    pub n: usize,
    pub widths: Vec<usize>,
    pub layers: Vec<TrainedLayer>,
    pub final_state: StateVector,
    pub fidelity: f64,
    pub wall_seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    n: usize,
    widths: Vec<usize>,
    layers: Vec<TrainedLayer>,
    final_state: StateJson,
    fidelity: f64,
    wall_seconds: f64,
}

impl ScatteringModel {
    /// `U_n ⋯ U_1 |0⟩^⊗n` from the stored circuits and parameters.
    pub fn reconstruct(&self) -> Result<StateVector> {
        reconstruct_layers(self.n, &self.layers)
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.trace.len()).collect()
    }

    pub fn to_json(&self) -> String {
        let js = ModelJson {
            n: self.n,
            widths: self.widths.clone(),
            layers: self.layers.clone(),
            final_state: StateJson::from(&self.final_state),
            fidelity: self.fidelity,
            wall_seconds: self.wall_seconds,
        };
        serde_json::to_string_pretty(&js).expect("model serializes")
    }

    /// Reload a model; the stored final state must match the reconstruction.
    pub fn from_json(text: &str) -> Result<Self> {
        let js: ModelJson = serde_json::from_str(text)?;
        let final_state = StateVector::try_from(js.final_state)?;
        let model = Self {
            n: js.n,
            widths: js.widths,
            layers: js.layers,
            final_state,
            fidelity: js.fidelity,
            wall_seconds: js.wall_seconds,
        };
        let rebuilt = model.reconstruct()?;
        if fidelity_pure(&rebuilt, &model.final_state)? < 1.0 - 1e-9 {
            return Err(Error::Numerical("stored final state does not match the stored layers".into()));
        }
        Ok(model)
    }
}

pub(crate) fn reconstruct_layers(n: usize, layers: &[TrainedLayer]) -> Result<StateVector> {
    let mut psi = zero_state(n)?;
    for layer in layers {
        psi = crate::circuit::apply_circuit(&psi, &layer.circuit, &layer.params)?;
    }
    Ok(psi)
}

/// Layer widths for `target` under `config`.
pub fn layer_widths(target: &StateVector, config: &TrainConfig) -> Result<Vec<usize>> {
    let n = target.n();
    match config.width_mode {
        WidthMode::Schedule => (1..=n).map(|k| width_schedule(n, k, config.w_max)).collect(),
        WidthMode::RankBased { tol } => Ok(rank_based_widths(target, tol)?
            .into_iter()
            .map(|w| w.min(config.w_max))
            .collect()),
    }
}

/// Train layers `k = 1..n` in order and assemble the model.
pub fn run_qssm(target: &StateVector, config: &TrainConfig) -> Result<ScatteringModel> {
    config.validate()?;
    let start = Instant::now();
    let n = target.n();
    let widths = layer_widths(target, config)?;
    let mut psi = zero_state(n)?;
    let mut layers = Vec::with_capacity(n);
    for (i, &w) in widths.iter().enumerate() {
        let k = i + 1;
        let mut rng = stream_rng(config.seed, k as u64);
        let res = train_layer(k, w, &psi, target, config, &mut rng)?;
        psi = res.state;
        layers.push(TrainedLayer {
            k,
            width: w,
            circuit: res.circuit,
            params: res.params,
            trace: res.trace,
            converged: res.converged,
        });
    }
    let fidelity = fidelity_pure(&psi, target)?;
    Ok(ScatteringModel { n, widths, layers, final_state: psi, fidelity, wall_seconds: start.elapsed().as_secs_f64() })
}
