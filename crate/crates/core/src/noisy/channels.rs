//! Gate application and noise channels on dense density matrices.
//!
//! A row-major `ρ` on `n` registers is handled as an amplitude buffer on
//! `2n` bits: the row index occupies the high `n` bits and the column index
//! the low `n` bits. `UρU†` is then `U` on the row bits followed by `conj(U)`
//! on the column bits, so the statevector kernels apply unchanged.

use serde::{Deserialize, Serialize};

use crate::circuit::{apply_1q, apply_cnot, apply_cz, apply_dense, Gate, GateKind, Mat2, ParamCircuit};
use crate::error::{arg, Error, Result};
use crate::qstate::{DensityMatrix, C64};

/// Largest register count for noisy density-matrix evolution.
pub const MAX_NOISY_REGISTERS: usize = 6;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Depolarizing and thermal-relaxation noise applied after every gate.
///
/// Times are in microseconds except `gate_time_ns`. A missing (or infinite)
/// `t1_us` disables amplitude damping; a missing `t2_us` means no dephasing
/// beyond what amplitude damping implies (`T2 = 2·T1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub p_depol_1q: f64,
    pub p_depol_2q: f64,
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
    pub gate_time_ns: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { p_depol_1q: 1e-3, p_depol_2q: 1e-3, t1_us: Some(1000.0), t2_us: Some(100.0), gate_time_ns: 1.0 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { p_depol_1q: 0.0, p_depol_2q: 0.0, t1_us: None, t2_us: None, gate_time_ns: 1.0 }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, p) in [("noise.p_depol_1q", self.p_depol_1q), ("noise.p_depol_2q", self.p_depol_2q)] {
            if !(0.0..=1.0).contains(&p) {
                v.push(format!("{name} must lie in [0, 1] (got {p})"));
            }
        }
        for (name, t) in [("noise.t1_us", self.t1_us), ("noise.t2_us", self.t2_us)] {
            if let Some(t) = t {
                if !(t > 0.0) {
                    v.push(format!("{name} must be > 0 (got {t})"));
                }
            }
        }
        if let (Some(t1), Some(t2)) = (self.t1_us, self.t2_us) {
            if t2 > 2.0 * t1 {
                v.push(format!("noise.t2_us must be <= 2 * t1_us (got T1={t1}, T2={t2})"));
            }
        }
        if !(self.gate_time_ns > 0.0) || !self.gate_time_ns.is_finite() {
            v.push(format!("noise.gate_time_ns must be a finite value > 0 (got {})", self.gate_time_ns));
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

    /// `(γ, p_z)`: amplitude-damping probability and the extra phase-flip
    /// probability so that coherences decay as `exp(−t/T2)` overall.
    pub fn relaxation(&self) -> (f64, f64) {
        let t = self.gate_time_ns * 1e-3;
        let inv_t1 = self.t1_us.map_or(0.0, |t1| 1.0 / t1);
        let gamma = 1.0 - (-t * inv_t1).exp();
        let inv_t2 = self.t2_us.map_or(inv_t1 / 2.0, |t2| 1.0 / t2);
        let inv_tphi = (inv_t2 - inv_t1 / 2.0).max(0.0);
        let pz = (1.0 - (-t * inv_tphi).exp()) / 2.0;
        (gamma, pz)
    }

    fn is_noiseless(&self) -> bool {
        let (g, pz) = self.relaxation();
        self.p_depol_1q == 0.0 && self.p_depol_2q == 0.0 && g == 0.0 && pz == 0.0
    }
}

fn conj2(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]]
}

fn check_noisy(rho: &DensityMatrix) -> Result<()> {
    if rho.n() > MAX_NOISY_REGISTERS {
        return Err(Error::Capacity(format!(
            "noisy simulation is limited to {MAX_NOISY_REGISTERS} registers, got {}",
            rho.n()
        )));
    }
    Ok(())
}

/// `(row bit, column bit)` of global register `g` (1-based, `q_1` most significant).
fn bits(n: usize, g: usize) -> (usize, usize) {
    (2 * n - g, n - g)
}

/// Conjugate `ρ` by a gate of `circuit` (acting from register `offset`), with
/// no noise.
fn conjugate(data: &mut [C64], n: usize, offset: usize, gate: &Gate, params: &[f64]) {
    let globals: Vec<usize> = gate.targets.iter().map(|&t| offset + t - 1).collect();
    match gate.kind {
        GateKind::CNOT => {
            let (rc, cc) = bits(n, globals[0]);
            let (rt, ct) = bits(n, globals[1]);
            apply_cnot(data, rc, rt);
            apply_cnot(data, cc, ct);
        }
        GateKind::CZ => {
            let (ra, ca) = bits(n, globals[0]);
            let (rb, cb) = bits(n, globals[1]);
            apply_cz(data, ra, rb);
            apply_cz(data, ca, cb);
        }
        GateKind::FixedUnitary => {
            let m = gate.fixed_matrix.as_ref().expect("validated");
            let conj: Vec<C64> = m.iter().map(|z| z.conj()).collect();
            let rows: Vec<usize> = globals.iter().map(|&g| bits(n, g).0).collect();
            let cols: Vec<usize> = globals.iter().map(|&g| bits(n, g).1).collect();
            apply_dense(data, &rows, m);
            apply_dense(data, &cols, &conj);
        }
        _ => {
            let m = gate.single_matrix(params).expect("single-register gate");
            let (r, c) = bits(n, globals[0]);
            apply_1q(data, r, &m);
            apply_1q(data, c, &conj2(&m));
        }
    }
}

/// `ρ ← (1 − p)ρ + p · I/d_S ⊗ tr_S ρ` on the global registers `subset`.
pub fn depolarize(rho: &mut DensityMatrix, subset: &[usize], p: f64) -> Result<()> {
    let n = rho.n();
    if subset.iter().any(|&g| g == 0 || g > n) {
        return arg(format!("registers {subset:?} outside 1..={n}"));
    }
    if p == 0.0 {
        return Ok(());
    }
    let dim = rho.dim();
    let smask: usize = subset.iter().map(|&g| 1usize << (n - g)).sum();
    let ds = 1usize << subset.len();
    let data = rho.entries_mut();
    // tr_S ρ, indexed by (i, j) with S bits cleared
    let mut reduced = vec![ZERO; dim * dim];
    for i in (0..dim).filter(|i| i & smask == 0) {
        for j in (0..dim).filter(|j| j & smask == 0) {
            let mut s = ZERO;
            let mut sub = smask;
            loop {
                s += data[(i | sub) * dim + (j | sub)];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & smask;
            }
            reduced[i * dim + j] = s;
        }
    }
    let scale = 1.0 / ds as f64;
    for i in 0..dim {
        for j in 0..dim {
            let mixed = if i & smask == j & smask {
                reduced[(i & !smask) * dim + (j & !smask)] * scale
            } else {
                ZERO
            };
            let e = &mut data[i * dim + j];
            *e = *e * (1.0 - p) + mixed * p;
        }
    }
    Ok(())
}

/// Amplitude damping with probability `gamma` followed by a phase flip with
/// probability `pz`, on global register `g`.
pub fn thermal_relax(rho: &mut DensityMatrix, g: usize, gamma: f64, pz: f64) -> Result<()> {
    let n = rho.n();
    if g == 0 || g > n {
        return arg(format!("register {g} outside 1..={n}"));
    }
    if gamma == 0.0 && pz == 0.0 {
        return Ok(());
    }
    let dim = rho.dim();
    let b = 1usize << (n - g);
    let keep = (1.0 - gamma).sqrt();
    let coh = keep * (1.0 - 2.0 * pz);
    let data = rho.entries_mut();
    // Kraus {[[1,0],[0,√(1−γ)]], [[0,√γ],[0,0]]}, then (1−p_z)ρ + p_z ZρZ:
    // |1⟩⟨1| feeds |0⟩⟨0| with weight γ, coherences shrink by √(1−γ)(1−2p_z).
    for i in (0..dim).filter(|i| i & b == 0) {
        for j in (0..dim).filter(|j| j & b == 0) {
            let (i1, j1) = (i | b, j | b);
            let e11 = data[i1 * dim + j1];
            data[i * dim + j] += e11 * gamma;
            data[i1 * dim + j1] = e11 * (1.0 - gamma);
            data[i * dim + j1] *= coh;
            data[i1 * dim + j] *= coh;
        }
    }
    Ok(())
}

/// Apply one gate of `circuit` to `ρ`, then depolarizing noise on the gate's
/// registers, then thermal relaxation on each of them.
pub fn apply_gate_dm(
    rho: &mut DensityMatrix,
    circuit: &ParamCircuit,
    gate: &Gate,
    params: &[f64],
    noise: &NoiseModel,
) -> Result<()> {
    check_noisy(rho)?;
    let n = rho.n();
    let offset = circuit.offset();
    conjugate(rho.entries_mut(), n, offset, gate, params);
    if noise.is_noiseless() {
        return Ok(());
    }
    let globals: Vec<usize> = gate.targets.iter().map(|&t| offset + t - 1).collect();
    let p = if globals.len() == 1 { noise.p_depol_1q } else { noise.p_depol_2q };
    depolarize(rho, &globals, p)?;
    let (gamma, pz) = noise.relaxation();
    for &g in &globals {
        thermal_relax(rho, g, gamma, pz)?;
    }
    Ok(())
}

/// Evolve `ρ` through every gate of `circuit(params)` with noise after each gate.
pub fn apply_circuit_dm(
    rho: &DensityMatrix,
    circuit: &ParamCircuit,
    params: &[f64],
    noise: &NoiseModel,
) -> Result<DensityMatrix> {
    circuit.check_params(params)?;
    circuit.check_fits(rho.n())?;
    let mut out = rho.clone();
    for g in circuit.gates() {
        apply_gate_dm(&mut out, circuit, g, params, noise)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{apply_circuit, build_hea, random_params};
    use crate::qstate::{basis_state, purity};
    use crate::rng::stream_rng;
    use crate::targets::haar_random_state;

    fn max_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn noiseless_matches_statevector_path() {
        let psi = haar_random_state(4, 3).unwrap();
        let c = build_hea(3, 2).unwrap().at_offset(2).unwrap();
        let params = random_params(c.n_params(), &mut stream_rng(1, 0));
        let out = apply_circuit_dm(&DensityMatrix::from_pure(&psi).unwrap(), &c, &params, &NoiseModel::noiseless())
            .unwrap();
        let expect = DensityMatrix::from_pure(&apply_circuit(&psi, &c, &params).unwrap()).unwrap();
        assert!(max_diff(&out, &expect) < 1e-12);
    }

    #[test]
    fn full_depolarizing_mixes_one_register() {
        let mut rho = DensityMatrix::from_pure(&haar_random_state(1, 8).unwrap()).unwrap();
        depolarize(&mut rho, &[1], 1.0).unwrap();
        assert!(max_diff(&rho, &DensityMatrix::maximally_mixed(1).unwrap()) < 1e-15);
    }

    #[test]
    fn depolarizing_matches_pauli_twirl() {
        let psi = haar_random_state(3, 2).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let mut rho = rho0.clone();
        depolarize(&mut rho, &[3], 0.3).unwrap();
        // (1 − p)ρ + p/4 Σ_P PρP on register 3 (the least significant bit)
        let paulis: [Mat2; 4] = [
            [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(1.0, 0.0)]],
            [[ZERO, C64::new(1.0, 0.0)], [C64::new(1.0, 0.0), ZERO]],
            [[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), ZERO]],
            [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(-1.0, 0.0)]],
        ];
        let mut expect: Vec<C64> = rho0.entries().iter().map(|z| z * 0.7).collect();
        for p in &paulis {
            let mut d = rho0.entries().to_vec();
            apply_1q(&mut d, 3, p);
            apply_1q(&mut d, 0, &conj2(p));
            for (e, x) in expect.iter_mut().zip(d) {
                *e += x * (0.3 / 4.0);
            }
        }
        let diff = rho.entries().iter().zip(&expect).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn x_with_noise_on_ground_state() {
        let c = ParamCircuit::new(1, 1, vec![Gate::u3(1, 0)]).unwrap();
        let params = [std::f64::consts::PI, 0.0, std::f64::consts::PI];
        let rho = DensityMatrix::from_pure(&basis_state(1, 0).unwrap()).unwrap();
        let noise = NoiseModel { p_depol_1q: 1e-3, ..NoiseModel::default() };
        let out = apply_circuit_dm(&rho, &c, &params, &noise).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-12);
        assert!(purity(&out) < 1.0);
        // depolarizing leaves ⟨1|ρ|1⟩ = 1 − p/2, then damping moves γ of it down
        let (gamma, _) = noise.relaxation();
        assert!((out.get(1, 1).re - (1.0 - 5e-4) * (1.0 - gamma)).abs() < 1e-12);
    }

    #[test]
    fn relaxation_rates() {
        let noise = NoiseModel::default();
        let (gamma, pz) = noise.relaxation();
        let t = 1e-3;
        assert!((gamma - (1.0 - (-t / 1000.0f64).exp())).abs() < 1e-18);
        // total coherence decay is exp(−t/T2)
        let coh = (1.0 - gamma).sqrt() * (1.0 - 2.0 * pz);
        assert!((coh - (-t / 100.0f64).exp()).abs() < 1e-15);
        assert_eq!(NoiseModel::noiseless().relaxation(), (0.0, 0.0));
    }

    #[test]
    fn channels_preserve_trace_and_positivity() {
        let noise = NoiseModel { p_depol_1q: 0.2, p_depol_2q: 0.3, t1_us: Some(0.01), t2_us: Some(0.015), gate_time_ns: 5.0 };
        assert!(noise.validate().is_ok());
        for seed in 0..5 {
            let psi = haar_random_state(3, seed).unwrap();
            let c = build_hea(3, 2).unwrap();
            let params = random_params(c.n_params(), &mut stream_rng(seed, 1));
            let out = apply_circuit_dm(&DensityMatrix::from_pure(&psi).unwrap(), &c, &params, &noise).unwrap();
            assert!((out.trace().re - 1.0).abs() < 1e-12);
            out.validate().unwrap();
        }
    }

    #[test]
    fn invalid_noise_lists_every_field() {
        let bad = NoiseModel { p_depol_1q: -0.1, p_depol_2q: 2.0, t1_us: Some(10.0), t2_us: Some(30.0), gate_time_ns: 0.0 };
        assert_eq!(bad.violations().len(), 4);
        assert!(NoiseModel::default().validate().is_ok());
    }

    #[test]
    fn capacity_is_enforced() {
        let rho = DensityMatrix::maximally_mixed(7).unwrap();
        let c = build_hea(1, 0).unwrap();
        let err = apply_circuit_dm(&rho, &c, &[0.0; 3], &NoiseModel::noiseless()).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }
}
