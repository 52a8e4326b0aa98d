//! Target-state families and file ingestion.

pub mod lanczos;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::qstate::{check_registers, parse_f64, StateJson, StateVector, C64};
use crate::rng::stream_rng;

pub use lanczos::{GroundState, LanczosConfig};

/// Largest register count accepted from generators and files.
pub const MAX_TARGET_REGISTERS: usize = 14;

/// Which target to learn, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TargetSpec {
    Ghz { n: usize },
    HeisenbergXxx { n: usize },
    HeisenbergXxz { n: usize, delta: f64 },
    Gaussian {
        n: usize,
        /// Defaults to the center `(2^n − 1)/2`.
        #[serde(default)]
        mu: Option<f64>,
        sigma: f64,
    },
    HaarRandom { n: usize, seed: u64 },
    File {
        path: String,
        #[serde(default)]
        n: Option<usize>,
    },
}

impl TargetSpec {
    pub fn family(&self) -> &'static str {
        match self {
            TargetSpec::Ghz { .. } => "ghz",
            TargetSpec::HeisenbergXxx { .. } => "heisenberg_xxx",
            TargetSpec::HeisenbergXxz { .. } => "heisenberg_xxz",
            TargetSpec::Gaussian { .. } => "gaussian",
            TargetSpec::HaarRandom { .. } => "haar_random",
            TargetSpec::File { .. } => "file",
        }
    }

    /// Every violated field as `target.<field>: reason`.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check_n = |n: usize, min: usize| {
            if n < min || n > MAX_TARGET_REGISTERS {
                v.push(format!("target.n must be in {min}..={MAX_TARGET_REGISTERS} (got {n})"));
            }
        };
        match self {
            TargetSpec::Ghz { n } | TargetSpec::HeisenbergXxx { n } => check_n(*n, 2),
            TargetSpec::HeisenbergXxz { n, delta } => {
                check_n(*n, 2);
                if !delta.is_finite() {
                    v.push(format!("target.delta must be finite (got {delta})"));
                }
            }
            TargetSpec::Gaussian { n, mu, sigma } => {
                check_n(*n, 1);
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    v.push(format!("target.sigma must be > 0 (got {sigma})"));
                }
                if mu.is_some_and(|m| !m.is_finite()) {
                    v.push("target.mu must be finite".into());
                }
            }
            TargetSpec::HaarRandom { n, .. } => check_n(*n, 1),
            TargetSpec::File { path, n } => {
                if let Some(n) = n {
                    check_n(*n, 1);
                }
                if !Path::new(path).exists() {
                    v.push(format!("target.path `{path}` does not exist"));
                }
            }
        }
        v
    }

    pub fn build(&self) -> Result<StateVector> {
        match self {
            TargetSpec::Ghz { n } => ghz(*n),
            TargetSpec::HeisenbergXxx { n } => Ok(heisenberg_ground(*n, 1.0)?.0),
            TargetSpec::HeisenbergXxz { n, delta } => Ok(heisenberg_ground(*n, *delta)?.0),
            TargetSpec::Gaussian { n, mu, sigma } => {
                let mu = mu.unwrap_or(((1usize << n) - 1) as f64 / 2.0);
                gaussian_state(*n, mu, *sigma)
            }
            TargetSpec::HaarRandom { n, seed } => haar_random_state(*n, *seed),
            TargetSpec::File { path, n } => Ok(load_target(Path::new(path), *n)?.state),
        }
    }
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz(n: usize) -> Result<StateVector> {
    if n < 2 {
        return arg(format!("GHZ needs at least 2 registers, got {n}"));
    }
    check_registers(n, MAX_TARGET_REGISTERS, "target")?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    amps[0] = C64::new(h, 0.0);
    amps[(1 << n) - 1] = C64::new(h, 0.0);
    StateVector::from_amplitudes(amps)
}

/// `H x` for the open chain `Σ_i X_iX_{i+1} + Y_iY_{i+1} + Δ Z_iZ_{i+1}`.
///
/// Per bond, aligned spins pick up `+Δ`; anti-aligned spins pick up `−Δ`
/// and are exchanged with weight 2.
pub fn heisenberg_apply(n: usize, delta: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (s, &xs) in x.iter().enumerate() {
        if xs == 0.0 {
            continue;
        }
        for i in 0..n - 1 {
            let mask = 0b11usize << i;
            let pair = (s >> i) & 0b11;
            if pair == 0b00 || pair == 0b11 {
                y[s] += delta * xs;
            } else {
                y[s] -= delta * xs;
                y[s ^ mask] += 2.0 * xs;
            }
        }
    }
}

/// Ground state of the open Heisenberg chain with anisotropy `delta`
/// (`delta = 1` is XXX) and its energy.
///
/// The returned vector is real with its first nonzero amplitude positive.
pub fn heisenberg_ground(n: usize, delta: f64) -> Result<(StateVector, f64)> {
    if n < 2 || n > MAX_TARGET_REGISTERS {
        return arg(format!("Heisenberg chain length must be in 2..={MAX_TARGET_REGISTERS}, got {n}"));
    }
    if !delta.is_finite() {
        return arg("anisotropy must be finite");
    }
    let dim = 1usize << n;
    let gs = lanczos::ground_state(dim, |x, y| heisenberg_apply(n, delta, x, y), &LanczosConfig::default())?;
    if gs.residual >= 1e-8 {
        return Err(Error::Numerical(format!("ground-state residual {:e} too large", gs.residual)));
    }
    let mut v = gs.vector;
    let sign = v.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
    v.iter_mut().for_each(|x| *x *= sign);
    let state = StateVector::normalized(v.into_iter().map(|x| C64::new(x, 0.0)).collect())?;
    Ok((state, gs.energy))
}

/// Square-root-of-density encoding of a Gaussian over basis indices, so that
/// measurement probabilities are the discretized normal pmf.
pub fn gaussian_state(n: usize, mu: f64, sigma: f64) -> Result<StateVector> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return arg(format!("sigma must be positive, got {sigma}"));
    }
    check_registers(n, MAX_TARGET_REGISTERS, "target")?;
    let amps = (0..1usize << n)
        .map(|x| {
            let z = (x as f64 - mu) / sigma;
            C64::new((-z * z / 4.0).exp(), 0.0)
        })
        .collect();
    StateVector::normalized(amps)
}

/// Normalized complex Gaussian vector, deterministic per seed.
pub fn haar_random_state(n: usize, seed: u64) -> Result<StateVector> {
    check_registers(n, MAX_TARGET_REGISTERS, "target")?;
    let mut rng = stream_rng(seed, 0);
    StateVector::normalized(crate::circuit::haar_column(1 << n, &mut rng))
}

/// A file-loaded target and what was done to it.
#[derive(Debug, Clone)]
pub struct LoadedTarget {
    pub state: StateVector,
    pub padded: bool,
    pub normalized: bool,
}

/// Load a target from a state file or a raw real vector.
///
/// Accepted forms: the state JSON object `{"n", "re", "im"}`; a JSON array of
/// reals; CSV with one `re,im` pair per line; one real per line. Raw data is
/// zero-padded to `2^n` entries (`n` defaults to the smallest that fits) and
/// normalized.
pub fn load_target(path: &Path, n: Option<usize>) -> Result<LoadedTarget> {
    let text = std::fs::read_to_string(path)?;
    let values = parse_values(&text)?;
    encode_values(values, n)
}

fn parse_values(text: &str) -> Result<Vec<C64>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let js: StateJson = serde_json::from_str(text)?;
        if js.re.len() != js.im.len() {
            return arg("`re` and `im` have different lengths");
        }
        return Ok(js.re.iter().zip(&js.im).map(|(&r, &i)| C64::new(r, i)).collect());
    }
    if trimmed.starts_with('[') {
        let raw: Vec<f64> = serde_json::from_str(text)?;
        return Ok(raw.into_iter().map(|x| C64::new(x, 0.0)).collect());
    }
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let complex = lines.first().is_some_and(|(_, l)| l.contains(','));
    lines
        .into_iter()
        .map(|(no, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            match (complex, fields.as_slice()) {
                (true, [re, im]) => Ok(C64::new(parse_f64(re, no)?, parse_f64(im, no)?)),
                (false, [re]) => Ok(C64::new(parse_f64(re, no)?, 0.0)),
                _ => Err(Error::Parse {
                    line: no,
                    msg: format!("expected {}, found `{l}`", if complex { "`re,im`" } else { "one real" }),
                }),
            }
        })
        .collect()
}

fn encode_values(mut values: Vec<C64>, n: Option<usize>) -> Result<LoadedTarget> {
    if values.is_empty() {
        return Err(Error::Encoding("file holds no amplitudes".into()));
    }
    let max = 1usize << MAX_TARGET_REGISTERS;
    if values.len() > max {
        return arg(format!("{} amplitudes exceed the limit of {max}", values.len()));
    }
    let n = match n {
        Some(n) => n,
        None => (values.len().next_power_of_two().trailing_zeros() as usize).max(1),
    };
    check_registers(n, MAX_TARGET_REGISTERS, "target")?;
    if values.len() > 1 << n {
        return arg(format!("{} amplitudes do not fit in {n} registers", values.len()));
    }
    if values.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        return Err(Error::Encoding("all-zero vector has no amplitude encoding".into()));
    }
    let padded = values.len() < 1 << n;
    values.resize(1 << n, C64::new(0.0, 0.0));
    let norm = values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let normalized = (norm - 1.0).abs() > 1e-12;
    let state = StateVector::normalized(values)?;
    Ok(LoadedTarget { state, padded, normalized })
}
