//! Parameterized gates, the hardware-efficient layer ansatz and the
//! state-vector kernels that apply them.
//!
//! Gate targets are 1-based register indices local to the circuit; a circuit
//! placed at `offset` maps local register `t` to global register
//! `offset + t - 1`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::qstate::{StateVector, C64};
use crate::rng::Rng;

pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    U3,
    CNOT,
    CZ,
    FixedUnitary,
}

impl GateKind {
    pub fn param_count(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::U3 => 3,
            GateKind::CNOT | GateKind::CZ | GateKind::FixedUnitary => 0,
        }
    }

    /// Every parameter enters as `exp(-iθΩ/2)` with `Ω² = I`.
    pub fn is_shiftable(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::U3)
    }
}

impl std::fmt::Display for GateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    /// 1-based, local to the circuit. For CNOT the first entry is the control.
    pub targets: Vec<usize>,
    pub param_slots: Vec<usize>,
    /// Row-major `2^m x 2^m` matrix over `targets` (first target most significant).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_matrix: Option<Vec<C64>>,
}

impl Gate {
    pub fn rotation(kind: GateKind, target: usize, slot: usize) -> Self {
        debug_assert_eq!(kind.param_count(), 1);
        Self { kind, targets: vec![target], param_slots: vec![slot], fixed_matrix: None }
    }

    pub fn u3(target: usize, first_slot: usize) -> Self {
        Self {
            kind: GateKind::U3,
            targets: vec![target],
            param_slots: vec![first_slot, first_slot + 1, first_slot + 2],
            fixed_matrix: None,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::CNOT, targets: vec![control, target], param_slots: vec![], fixed_matrix: None }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Self { kind: GateKind::CZ, targets: vec![a, b], param_slots: vec![], fixed_matrix: None }
    }

    pub fn fixed(targets: Vec<usize>, matrix: &DMatrix<C64>) -> Self {
        let data = (0..matrix.nrows())
            .flat_map(|r| (0..matrix.ncols()).map(move |c| matrix[(r, c)]))
            .collect();
        Self { kind: GateKind::FixedUnitary, targets, param_slots: vec![], fixed_matrix: Some(data) }
    }

    /// 2x2 matrix of a single-register parameterized gate.
    pub fn single_matrix(&self, params: &[f64]) -> Option<Mat2> {
        let p = |i: usize| params[self.param_slots[i]];
        match self.kind {
            GateKind::RX => Some(rx(p(0))),
            GateKind::RY => Some(ry(p(0))),
            GateKind::RZ => Some(rz(p(0))),
            GateKind::U3 => Some(u3_matrix(p(0), p(1), p(2))),
            _ => None,
        }
    }

    fn validate(&self, width: usize) -> Result<()> {
        let arity = match self.kind {
            GateKind::CNOT | GateKind::CZ => Some(2),
            GateKind::FixedUnitary => None,
            _ => Some(1),
        };
        if let Some(a) = arity {
            if self.targets.len() != a {
                return arg(format!("{} expects {a} targets, got {}", self.kind, self.targets.len()));
            }
        }
        if self.targets.is_empty() {
            return arg("gate without targets");
        }
        for (i, &t) in self.targets.iter().enumerate() {
            if t == 0 || t > width {
                return arg(format!("target {t} outside 1..={width}"));
            }
            if self.targets[..i].contains(&t) {
                return arg(format!("repeated target {t}"));
            }
        }
        if self.param_slots.len() != self.kind.param_count() {
            return arg(format!(
                "{} expects {} parameter slots, got {}",
                self.kind,
                self.kind.param_count(),
                self.param_slots.len()
            ));
        }
        match (&self.fixed_matrix, self.kind) {
            (Some(m), GateKind::FixedUnitary) => {
                let d = 1usize << self.targets.len();
                if m.len() != d * d {
                    return arg(format!("fixed matrix has {} entries, expected {}", m.len(), d * d));
                }
            }
            (None, GateKind::FixedUnitary) => return arg("FixedUnitary without a matrix"),
            (Some(_), _) => return arg(format!("{} cannot carry a fixed matrix", self.kind)),
            (None, _) => {}
        }
        Ok(())
    }
}

/// Ordered gate list acting on registers `offset..offset + width - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr")]
pub struct ParamCircuit {
    width: usize,
    offset: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

#[derive(Deserialize)]
struct CircuitRepr {
    width: usize,
    offset: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl TryFrom<CircuitRepr> for ParamCircuit {
    type Error = Error;

    fn try_from(r: CircuitRepr) -> Result<Self> {
        let c = ParamCircuit::new(r.width, r.offset, r.gates)?;
        if c.n_params != r.n_params {
            return arg(format!("n_params {} disagrees with gate slots {}", r.n_params, c.n_params));
        }
        Ok(c)
    }
}

impl ParamCircuit {
    /// Validate gates and the slot layout: every slot in `0..n_params` is used
    /// by exactly one gate.
    pub fn new(width: usize, offset: usize, gates: Vec<Gate>) -> Result<Self> {
        if width == 0 {
            return arg("circuit width must be at least 1");
        }
        if offset == 0 {
            return arg("offset is a 1-based register index");
        }
        for g in &gates {
            g.validate(width)?;
        }
        let n_params: usize = gates.iter().map(|g| g.param_slots.len()).sum();
        let mut seen = vec![false; n_params];
        for s in gates.iter().flat_map(|g| &g.param_slots) {
            if *s >= n_params || seen[*s] {
                return arg(format!("parameter slot {s} is out of range or used twice"));
            }
            seen[*s] = true;
        }
        Ok(Self { width, offset, gates, n_params })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Same circuit placed at another register offset.
    pub fn at_offset(mut self, offset: usize) -> Result<Self> {
        if offset == 0 {
            return arg("offset is a 1-based register index");
        }
        self.offset = offset;
        Ok(self)
    }

    /// Index of the gate that owns `slot`.
    pub fn slot_owner(&self, slot: usize) -> Option<usize> {
        self.gates.iter().position(|g| g.param_slots.contains(&slot))
    }

    /// Circuit and parameters implementing the inverse unitary.
    ///
    /// Rotations invert by negating the angle. `U3(θ, φ, λ)` inverts to
    /// `U3(-θ, -λ, -φ)`, so its outer slots trade places.
    pub fn inverse(&self, params: &[f64]) -> Result<(ParamCircuit, Vec<f64>)> {
        self.check_params(params)?;
        let mut gates = Vec::with_capacity(self.gates.len());
        let mut inv = vec![0.0; self.n_params];
        for g in self.gates.iter().rev() {
            let mut g = g.clone();
            match g.kind {
                GateKind::RX | GateKind::RY | GateKind::RZ => {
                    inv[g.param_slots[0]] = -params[g.param_slots[0]];
                }
                GateKind::U3 => {
                    let s = g.param_slots.clone();
                    inv[s[0]] = -params[s[0]];
                    inv[s[1]] = -params[s[2]];
                    inv[s[2]] = -params[s[1]];
                }
                GateKind::CNOT | GateKind::CZ => {}
                GateKind::FixedUnitary => {
                    let m = g.fixed_matrix.as_ref().expect("validated");
                    let d = 1usize << g.targets.len();
                    let mut adj = vec![ZERO; d * d];
                    for r in 0..d {
                        for c in 0..d {
                            adj[c * d + r] = m[r * d + c].conj();
                        }
                    }
                    g.fixed_matrix = Some(adj);
                }
            }
            gates.push(g);
        }
        Ok((ParamCircuit { width: self.width, offset: self.offset, gates, n_params: self.n_params }, inv))
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return arg(format!("expected {} parameters, got {}", self.n_params, params.len()));
        }
        Ok(())
    }

    pub(crate) fn check_fits(&self, n: usize) -> Result<()> {
        if self.offset + self.width - 1 > n {
            return arg(format!(
                "circuit on registers {}..={} does not fit in {n} registers",
                self.offset,
                self.offset + self.width - 1
            ));
        }
        Ok(())
    }

    /// Bit position (from the least significant end) of local register `t`.
    #[inline]
    fn bit(&self, n: usize, t: usize) -> usize {
        n - (self.offset + t - 1)
    }

    /// Apply gates `range` in place on an `n`-register amplitude buffer.
    pub(crate) fn apply_range(
        &self,
        amps: &mut [C64],
        n: usize,
        params: &[f64],
        range: std::ops::Range<usize>,
    ) {
        for g in &self.gates[range] {
            self.apply_gate(amps, n, g, params);
        }
    }

    pub(crate) fn apply_gate(&self, amps: &mut [C64], n: usize, g: &Gate, params: &[f64]) {
        match g.kind {
            GateKind::CNOT => apply_cnot(amps, self.bit(n, g.targets[0]), self.bit(n, g.targets[1])),
            GateKind::CZ => apply_cz(amps, self.bit(n, g.targets[0]), self.bit(n, g.targets[1])),
            GateKind::FixedUnitary => {
                let bits: Vec<usize> = g.targets.iter().map(|&t| self.bit(n, t)).collect();
                apply_dense(amps, &bits, g.fixed_matrix.as_ref().expect("validated"));
            }
            _ => {
                let m = g.single_matrix(params).expect("single-register gate");
                apply_1q(amps, self.bit(n, g.targets[0]), &m);
            }
        }
    }
}

/// Apply `circuit(params)` to `state`.
pub fn apply_circuit(state: &StateVector, circuit: &ParamCircuit, params: &[f64]) -> Result<StateVector> {
    circuit.check_params(params)?;
    circuit.check_fits(state.n())?;
    let mut out = state.clone();
    circuit.apply_range(out.amplitudes_mut(), state.n(), params, 0..circuit.gates.len());
    Ok(out)
}

pub fn rx(t: f64) -> Mat2 {
    let (s, c) = (t / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

pub fn ry(t: f64) -> Mat2 {
    let (s, c) = (t / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
}

pub fn rz(t: f64) -> Mat2 {
    [[C64::from_polar(1.0, -t / 2.0), ZERO], [ZERO, C64::from_polar(1.0, t / 2.0)]]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, o) in row.iter_mut().enumerate() {
            *o = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `RZ(φ) · RX(−π/2) · RZ(θ) · RX(π/2) · RZ(λ)`.
pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let m = mat2_mul(&rz(phi), &rx(-FRAC_PI_2));
    let m = mat2_mul(&m, &rz(theta));
    let m = mat2_mul(&m, &rx(FRAC_PI_2));
    mat2_mul(&m, &rz(lambda))
}

/// Hardware-efficient ansatz of width `w` and depth `d`.
///
/// An initial U3 column, then `d` blocks of
/// `[CNOT(1,2), CNOT(3,4), ..; CNOT(2,3), CNOT(4,5), ..; U3 column]`.
/// Parameters are laid out U3 by U3 in gate order, `3·w·(d+1)` in total.
/// The circuit is placed at offset 1.
pub fn build_hea(w: usize, d: usize) -> Result<ParamCircuit> {
    if w == 0 {
        return arg("HEA width must be at least 1");
    }
    let mut gates = Vec::with_capacity(w * (d + 1) + d * w.saturating_sub(1));
    let mut slot = 0;
    let mut column = |gates: &mut Vec<Gate>| {
        for r in 1..=w {
            gates.push(Gate::u3(r, slot));
            slot += 3;
        }
    };
    column(&mut gates);
    for _ in 0..d {
        for start in [1, 2] {
            let mut c = start;
            while c < w {
                gates.push(Gate::cnot(c, c + 1));
                c += 2;
            }
        }
        column(&mut gates);
    }
    ParamCircuit::new(w, 1, gates)
}

/// Haar-distributed `d x d` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` folded back into `Q`.
pub fn haar_unitary(d: usize, rng: &mut Rng) -> Result<DMatrix<C64>> {
    if d < 2 {
        return arg(format!("Haar dimension must be at least 2, got {d}"));
    }
    let z = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// Haar-random unit vector in dimension `d`, distributed as one column of a
/// Haar unitary.
pub fn haar_column(d: usize, rng: &mut Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= norm;
    }
    v
}

/// Copies of `params` with `slot` shifted by `+π/2` and `−π/2`.
pub fn parameter_shift_pair(circuit: &ParamCircuit, params: &[f64], slot: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    circuit.check_params(params)?;
    let owner = circuit
        .slot_owner(slot)
        .ok_or_else(|| Error::Argument(format!("slot {slot} outside 0..{}", circuit.n_params)))?;
    let kind = circuit.gates[owner].kind;
    if !kind.is_shiftable() {
        return Err(Error::UnsupportedGate(kind.to_string()));
    }
    let mut plus = params.to_vec();
    let mut minus = params.to_vec();
    plus[slot] += FRAC_PI_2;
    minus[slot] -= FRAC_PI_2;
    Ok((plus, minus))
}

/// Uniform `[0, 2π)` initial parameters.
pub fn random_params(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
}

pub(crate) fn apply_1q(amps: &mut [C64], bit: usize, m: &Mat2) {
    let stride = 1usize << bit;
    let [[a, b], [c, d]] = *m;
    for base in (0..amps.len()).step_by(stride << 1) {
        for i in base..base + stride {
            let x0 = amps[i];
            let x1 = amps[i + stride];
            amps[i] = a * x0 + b * x1;
            amps[i + stride] = c * x0 + d * x1;
        }
    }
}

pub(crate) fn apply_cnot(amps: &mut [C64], control: usize, target: usize) {
    let cmask = 1usize << control;
    let tmask = 1usize << target;
    for i in 0..amps.len() {
        if i & cmask != 0 && i & tmask == 0 {
            amps.swap(i, i | tmask);
        }
    }
}

pub(crate) fn apply_cz(amps: &mut [C64], a: usize, b: usize) {
    let mask = (1usize << a) | (1usize << b);
    for (i, x) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *x = -*x;
        }
    }
}

/// Dense `2^m x 2^m` matrix on the given bit positions; `bits[0]` is the most
/// significant bit of the local index.
pub(crate) fn apply_dense(amps: &mut [C64], bits: &[usize], m: &[C64]) {
    let k = bits.len();
    let d = 1usize << k;
    let offsets: Vec<usize> = (0..d)
        .map(|local| {
            (0..k)
                .filter(|j| local >> (k - 1 - j) & 1 == 1)
                .map(|j| 1usize << bits[j])
                .sum()
        })
        .collect();
    let mask: usize = bits.iter().map(|b| 1usize << b).sum();
    let mut buf = vec![ZERO; d];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (x, off) in buf.iter_mut().zip(&offsets) {
            *x = amps[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let row = &m[r * d..(r + 1) * d];
            amps[base + off] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{basis_state, zero_state};
    use crate::rng::stream_rng;

    fn unitarity_error(m: &Mat2) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let s = m[i][0] * m[j][0].conj() + m[i][1] * m[j][1].conj();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - C64::new(want, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn u3_examples() {
        let id = u3_matrix(0.0, 0.0, 0.0);
        assert!(((id[0][0] + id[1][1]).norm() - 2.0).abs() < 1e-12);
        let flip = u3_matrix(std::f64::consts::PI, 0.0, 0.0);
        assert!((flip[1][0].norm() - 1.0).abs() < 1e-12);
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            let p = random_params(3, &mut rng);
            assert!(unitarity_error(&u3_matrix(p[0], p[1], p[2])) < 1e-12);
        }
    }

    #[test]
    fn hea_parameter_counts() {
        let c = build_hea(4, 1).unwrap();
        assert_eq!(c.n_params(), 24);
        let c = build_hea(1, 3).unwrap();
        assert_eq!(c.n_params(), 12);
        assert!(c.gates().iter().all(|g| g.kind == GateKind::U3));
        let c = build_hea(2, 0).unwrap();
        assert_eq!(c.n_params(), 6);
        assert_eq!(c.gates().len(), 2);
        assert!(build_hea(0, 2).is_err());
    }

    #[test]
    fn hea_block_order() {
        let c = build_hea(5, 1).unwrap();
        let kinds: Vec<(GateKind, Vec<usize>)> = c.gates()[5..].iter().map(|g| (g.kind, g.targets.clone())).collect();
        assert_eq!(kinds[0], (GateKind::CNOT, vec![1, 2]));
        assert_eq!(kinds[1], (GateKind::CNOT, vec![3, 4]));
        assert_eq!(kinds[2], (GateKind::CNOT, vec![2, 3]));
        assert_eq!(kinds[3], (GateKind::CNOT, vec![4, 5]));
        assert!(kinds[4..].iter().all(|(k, _)| *k == GateKind::U3));
    }

    #[test]
    fn apply_examples() {
        let psi = basis_state(3, 5).unwrap();
        let empty = ParamCircuit::new(3, 1, vec![]).unwrap();
        assert_eq!(apply_circuit(&psi, &empty, &[]).unwrap(), psi);

        let cx = ParamCircuit::new(2, 1, vec![Gate::cnot(1, 2)]).unwrap();
        let out = apply_circuit(&basis_state(2, 0b10).unwrap(), &cx, &[]).unwrap();
        assert_eq!(out, basis_state(2, 0b11).unwrap());

        // same gate placed on registers 2..3 of a 3-register state
        let cx = cx.at_offset(2).unwrap();
        let out = apply_circuit(&basis_state(3, 0b010).unwrap(), &cx, &[]).unwrap();
        assert_eq!(out, basis_state(3, 0b011).unwrap());
    }

    #[test]
    fn apply_errors() {
        let c = build_hea(2, 1).unwrap();
        let psi = zero_state(3).unwrap();
        assert!(apply_circuit(&psi, &c, &[0.0; 3]).is_err());
        let c = c.at_offset(3).unwrap();
        assert!(apply_circuit(&psi, &c, &[0.0; 12]).is_err());
    }

    #[test]
    fn rotation_circuit_undone_by_negated_reverse() {
        let gates = vec![
            Gate::rotation(GateKind::RX, 1, 0),
            Gate::cnot(1, 2),
            Gate::rotation(GateKind::RY, 2, 1),
            Gate::cz(2, 3),
            Gate::rotation(GateKind::RZ, 3, 2),
            Gate::cnot(3, 1),
        ];
        let c = ParamCircuit::new(3, 1, gates.clone()).unwrap();
        let mut rng = stream_rng(5, 0);
        let p = random_params(3, &mut rng);
        let rev = ParamCircuit::new(3, 1, gates.into_iter().rev().collect()).unwrap();
        let neg: Vec<f64> = p.iter().map(|x| -x).collect();
        let psi = crate::qstate::StateVector::normalized(crate::circuit::haar_column(8, &mut rng)).unwrap();
        let back = apply_circuit(&apply_circuit(&psi, &c, &p).unwrap(), &rev, &neg).unwrap();
        for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn hea_inverse_round_trip() {
        let c = build_hea(4, 3).unwrap();
        let mut rng = stream_rng(6, 0);
        let p = random_params(c.n_params(), &mut rng);
        let (inv, ip) = c.inverse(&p).unwrap();
        let psi = crate::qstate::StateVector::normalized(haar_column(16, &mut rng)).unwrap();
        let back = apply_circuit(&apply_circuit(&psi, &c, &p).unwrap(), &inv, &ip).unwrap();
        for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = stream_rng(1, 0);
        for d in [2, 4, 8] {
            let u = haar_unitary(d, &mut rng).unwrap();
            let err = (&u * u.adjoint() - DMatrix::<C64>::identity(d, d)).norm();
            assert!(err < 1e-10);
        }
        assert!(haar_unitary(1, &mut rng).is_err());
    }

    #[test]
    fn shift_pair_examples() {
        let c = ParamCircuit::new(1, 1, vec![Gate::rotation(GateKind::RZ, 1, 0)]).unwrap();
        let (p, m) = parameter_shift_pair(&c, &[0.0], 0).unwrap();
        assert_eq!(p, vec![FRAC_PI_2]);
        assert_eq!(m, vec![-FRAC_PI_2]);
        let (p, _) = parameter_shift_pair(&c, &[0.3], 0).unwrap();
        let (_, back) = parameter_shift_pair(&c, &p, 0).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-15);
        assert!(parameter_shift_pair(&c, &[0.0], 1).is_err());
    }

    #[test]
    fn circuit_json_round_trip() {
        let c = build_hea(3, 2).unwrap().at_offset(2).unwrap();
        let js = serde_json::to_string(&c).unwrap();
        let back: ParamCircuit = serde_json::from_str(&js).unwrap();
        assert_eq!(back, c);
        let bad = js.replace("\"n_params\":27", "\"n_params\":26");
        assert!(serde_json::from_str::<ParamCircuit>(&bad).is_err());
    }

    #[test]
    fn invalid_gates_rejected() {
        assert!(ParamCircuit::new(2, 1, vec![Gate::cnot(1, 1)]).is_err());
        assert!(ParamCircuit::new(2, 1, vec![Gate::cnot(1, 3)]).is_err());
        assert!(ParamCircuit::new(2, 1, vec![Gate::u3(1, 0), Gate::u3(2, 2)]).is_err());
        let mut g = Gate::rotation(GateKind::RX, 1, 0);
        g.param_slots.clear();
        assert!(ParamCircuit::new(1, 1, vec![g]).is_err());
    }
}
