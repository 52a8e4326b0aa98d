//! Pure states, density matrices and the reduced-state quantities used as
//! training costs.
//!
//! Register `q_1` is the most significant bit of a basis index and `q_n` the
//! least significant. Reshaping a state into a `2^k x 2^(n-k)` matrix with
//! row index equal to the top `k` bits therefore separates the prefix
//! `q_1..q_k` from the suffix; every partial trace in the crate is built on
//! that reshaping.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

pub type C64 = Complex64;

/// Largest register count a [`StateVector`] may hold.
pub const MAX_STATE_REGISTERS: usize = 26;
/// Largest register count a dense [`DensityMatrix`] may hold.
pub const MAX_DENSITY_REGISTERS: usize = 12;

pub(crate) const NORM_TOL: f64 = 1e-9;

pub(crate) fn check_registers(n: usize, cap: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::Capacity(format!("{what} needs at least one register")));
    }
    if n > cap {
        return Err(Error::Capacity(format!(
            "{what} with {n} registers exceeds the limit of {cap}"
        )));
    }
    Ok(())
}

/// Normalized pure state on `n` registers.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Validate length `2^n` and unit norm.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return arg(format!("amplitude count {len} is not 2^n with n >= 1"));
        }
        let n = len.trailing_zeros() as usize;
        check_registers(n, MAX_STATE_REGISTERS, "state")?;
        let norm = norm_sqr(&amps).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return arg(format!("state norm {norm} differs from 1"));
        }
        Ok(Self { n, amps })
    }

    /// Rescale to unit norm; fails on the zero vector.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let norm = norm_sqr(&amps).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Encoding("cannot normalize a zero or non-finite vector".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::from_amplitudes(amps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        same_registers(self, other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor product `self ⊗ other`; `self` occupies the leading registers.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n + other.n;
        check_registers(n, MAX_STATE_REGISTERS, "state")?;
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(Self { n, amps })
    }

    /// Probability of each computational basis outcome.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// One `re,im` pair per line, index ascending.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.amps.len() * 48);
        for a in &self.amps {
            out.push_str(&format!("{:e},{:e}\n", a.re, a.im));
        }
        out
    }

    /// Parse the `re,im` CSV form. Blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut amps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (re, im) = match (parts.next(), parts.next(), parts.next()) {
                (Some(re), Some(im), None) => (re, im),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected `re,im`, found `{line}`"),
                    })
                }
            };
            let re = parse_f64(re, i + 1)?;
            let im = parse_f64(im, i + 1)?;
            amps.push(C64::new(re, im));
        }
        Self::from_amplitudes(amps)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&StateJson::from(self)).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let js: StateJson = serde_json::from_str(text)?;
        js.try_into()
    }
}

/// JSON mirror of a [`StateVector`]: `{"n": .., "re": [..], "im": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateJson {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&StateVector> for StateJson {
    fn from(s: &StateVector) -> Self {
        Self {
            n: s.n,
            re: s.amps.iter().map(|a| a.re).collect(),
            im: s.amps.iter().map(|a| a.im).collect(),
        }
    }
}

impl TryFrom<StateJson> for StateVector {
    type Error = Error;

    fn try_from(js: StateJson) -> Result<Self> {
        if js.re.len() != js.im.len() {
            return arg("`re` and `im` have different lengths");
        }
        if js.n >= usize::BITS as usize || js.re.len() != 1usize << js.n {
            return arg(format!("n = {} does not match {} amplitudes", js.n, js.re.len()));
        }
        let amps = js.re.iter().zip(&js.im).map(|(&r, &i)| C64::new(r, i)).collect();
        StateVector::from_amplitudes(amps)
    }
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("`{}`: {e}", s.trim()),
    })
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

fn same_registers(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.n != b.n {
        return arg(format!("register counts differ: {} vs {}", a.n, b.n));
    }
    Ok(())
}

fn check_prefix(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return arg(format!("prefix length {k} outside 1..={n}"));
    }
    Ok(())
}

/// Dense density matrix on `m` registers, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// Build from a row-major `dim x dim` buffer and check the density-matrix
    /// invariants (Hermitian, unit trace, PSD).
    pub fn from_entries(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() || data.len() != dim * dim {
            return arg(format!("{} entries do not form a 2^m x 2^m matrix", data.len()));
        }
        let n = dim.trailing_zeros() as usize;
        check_registers(n, MAX_DENSITY_REGISTERS, "density matrix")?;
        let rho = Self { n, data };
        rho.validate()?;
        Ok(rho)
    }


    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        check_registers(psi.n, MAX_DENSITY_REGISTERS, "density matrix")?;
        let a = &psi.amps;
        let dim = a.len();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = a[i] * a[j].conj();
            }
        }
        Ok(Self { n: psi.n, data })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_registers(n, MAX_DENSITY_REGISTERS, "density matrix")?;
        let dim = 1 << n;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> C64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    /// `max |A - A†|` over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let d = (self.data[i * dim + j] - self.data[j * dim + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = self.dim();
        DMatrix::from_row_slice(dim, dim, &self.data)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_matrix();
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Check Hermiticity, unit trace and positivity at the crate tolerances.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-9 {
            return Err(Error::Numerical(format!("matrix not Hermitian (error {herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::Numerical(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues()[0];
        if min < -1e-8 {
            return Err(Error::Numerical(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `tr[ρσ]`.
    pub fn overlap(&self, other: &DensityMatrix) -> Result<f64> {
        if self.n != other.n {
            return arg(format!("dimensions differ: {} vs {}", self.dim(), other.dim()));
        }
        let dim = self.dim();
        let mut acc = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                acc += (self.data[i * dim + j] * other.data[j * dim + i]).re;
            }
        }
        Ok(acc)
    }

    /// Reduced state of the first `k` registers.
    pub fn partial_trace_keep_prefix(&self, k: usize) -> Result<DensityMatrix> {
        check_prefix(self.n, k)?;
        let dim = self.dim();
        let keep = 1 << k;
        let drop = 1 << (self.n - k);
        let mut out = vec![C64::new(0.0, 0.0); keep * keep];
        for a in 0..keep {
            for b in 0..keep {
                let mut s = C64::new(0.0, 0.0);
                for e in 0..drop {
                    s += self.data[(a * drop + e) * dim + b * drop + e];
                }
                out[a * keep + b] = s;
            }
        }
        Ok(DensityMatrix { n: k, data: out })
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> Result<f64> {
        if self.n != psi.n {
            return arg("register counts differ");
        }
        let dim = self.dim();
        let a = &psi.amps;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..dim {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..dim {
                row += self.data[i * dim + j] * a[j];
            }
            acc += a[i].conj() * row;
        }
        Ok(acc.re)
    }
}

/// Numerical Schmidt ranks of every prefix cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSequence {
    pub ranks: Vec<usize>,
    pub tolerance: f64,
}

/// `|0⟩^⊗n`.
pub fn zero_state(n: usize) -> Result<StateVector> {
    check_registers(n, MAX_STATE_REGISTERS, "state")?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    amps[0] = C64::new(1.0, 0.0);
    Ok(StateVector { n, amps })
}

/// Computational basis state `|index⟩`.
pub fn basis_state(n: usize, index: usize) -> Result<StateVector> {
    check_registers(n, MAX_STATE_REGISTERS, "state")?;
    if index >= 1 << n {
        return arg(format!("basis index {index} out of range for {n} registers"));
    }
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    amps[index] = C64::new(1.0, 0.0);
    Ok(StateVector { n, amps })
}

/// The `2^k x 2^(n-k)` reshaping with prefix bits as the row index.
pub fn reshape_prefix(psi: &StateVector, k: usize) -> Result<DMatrix<C64>> {
    check_prefix(psi.n, k)?;
    Ok(DMatrix::from_row_slice(1 << k, 1 << (psi.n - k), &psi.amps))
}

/// Reduced state `tr_{q_{k+1}..q_n} |ψ⟩⟨ψ|`, computed as `M M†`.
pub fn partial_trace_keep_prefix(psi: &StateVector, k: usize) -> Result<DensityMatrix> {
    check_prefix(psi.n, k)?;
    check_registers(k, MAX_DENSITY_REGISTERS, "density matrix")?;
    let rows = 1 << k;
    let cols = 1 << (psi.n - k);
    let a = &psi.amps;
    let mut data = vec![C64::new(0.0, 0.0); rows * rows];
    for i in 0..rows {
        let ri = &a[i * cols..(i + 1) * cols];
        for j in i..rows {
            let rj = &a[j * cols..(j + 1) * cols];
            let s: C64 = ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum();
            data[i * rows + j] = s;
            data[j * rows + i] = s.conj();
        }
    }
    Ok(DensityMatrix { n: k, data })
}

/// Gram matrix `M M†` of the row blocks of a row-major `rows x cols` buffer.
fn row_gram(a: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0); rows * rows];
    for i in 0..rows {
        let ri = &a[i * cols..(i + 1) * cols];
        for j in i..rows {
            let rj = &a[j * cols..(j + 1) * cols];
            let s: C64 = ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum();
            g[i * rows + j] = s;
            g[j * rows + i] = s.conj();
        }
    }
    g
}

/// `Φ†Ψ` as a `cols x cols` buffer: entry `(c, d) = Σ_r conj(Φ[r,c]) Ψ[r,d]`.
fn cross_col_gram(phi: &[C64], psi: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0); cols * cols];
    for r in 0..rows {
        let fr = &phi[r * cols..(r + 1) * cols];
        let pr = &psi[r * cols..(r + 1) * cols];
        for (c, f) in fr.iter().enumerate() {
            let fc = f.conj();
            let out = &mut g[c * cols..(c + 1) * cols];
            for (o, p) in out.iter_mut().zip(pr) {
                *o += fc * p;
            }
        }
    }
    g
}

/// `tr[ρ_k σ_k]` for the k-prefix reductions of two pure states, without
/// forming any matrix larger than `2^min(k, n-k)` on a side.
pub fn overlap_reduced(psi: &StateVector, phi: &StateVector, k: usize) -> Result<f64> {
    same_registers(psi, phi)?;
    check_prefix(psi.n, k)?;
    Ok(overlap_reduced_raw(&psi.amps, &phi.amps, psi.n, k))
}

pub(crate) fn overlap_reduced_raw(psi: &[C64], phi: &[C64], n: usize, k: usize) -> f64 {
    let rows = 1 << k;
    let cols = 1 << (n - k);
    if k == n {
        let ip: C64 = phi.iter().zip(psi).map(|(f, p)| f.conj() * p).sum();
        return ip.norm_sqr();
    }
    if rows <= cols {
        let a = row_gram(psi, rows, cols);
        let b = if std::ptr::eq(psi, phi) { a.clone() } else { row_gram(phi, rows, cols) };
        // tr(AB) = Σ A_ij conj(B_ij) for Hermitian B
        a.iter().zip(&b).map(|(x, y)| (x * y.conj()).re).sum()
    } else {
        norm_sqr(&cross_col_gram(phi, psi, rows, cols))
    }
}

/// `‖σ_k − ρ_k‖₂²` expanded as `tr[σ²] + tr[ρ²] − 2 tr[σρ]`.
pub fn hs_cost(psi: &StateVector, phi: &StateVector, k: usize) -> Result<f64> {
    same_registers(psi, phi)?;
    check_prefix(psi.n, k)?;
    let n = psi.n;
    Ok(overlap_reduced_raw(&psi.amps, &psi.amps, n, k) + overlap_reduced_raw(&phi.amps, &phi.amps, n, k)
        - 2.0 * overlap_reduced_raw(&psi.amps, &phi.amps, n, k))
}

/// `|⟨ψ|φ⟩|²`.
pub fn fidelity_pure(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr())
}

/// `tr[ρ²]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.data.iter().map(|x| x.norm_sqr()).sum()
}

/// Singular values of the k-prefix reshaping, descending.
pub fn schmidt_coefficients(psi: &StateVector, k: usize) -> Result<Vec<f64>> {
    let m = reshape_prefix(psi, k)?;
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Schmidt decomposition across the k-prefix cut.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Coefficients `λ_i`, descending, truncated at the numerical rank.
    pub coefficients: Vec<f64>,
    /// Prefix vectors `|u_i⟩` as columns (`2^k` rows).
    pub prefix: DMatrix<C64>,
    /// Suffix vectors `|v_i⟩` as columns (`2^(n-k)` rows).
    pub suffix: DMatrix<C64>,
}

/// `ψ = Σ λ_i |u_i⟩|v_i⟩`, keeping terms with `λ_i > tol · λ_max`.
pub fn schmidt_decomposition(psi: &StateVector, k: usize, tol: f64) -> Result<SchmidtDecomposition> {
    if k == psi.n {
        let u = DMatrix::from_column_slice(psi.dim(), 1, &psi.amps);
        return Ok(SchmidtDecomposition {
            coefficients: vec![1.0],
            prefix: u,
            suffix: DMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
        });
    }
    let m = reshape_prefix(psi, k)?;
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > tol * smax)
        .collect();
    let coefficients = kept.iter().map(|&i| svd.singular_values[i]).collect();
    let prefix = DMatrix::from_fn(u.nrows(), kept.len(), |r, c| u[(r, kept[c])]);
    // M = U Σ V_t, so row i of V_t holds the suffix vector v_i
    let suffix = DMatrix::from_fn(vt.ncols(), kept.len(), |r, c| vt[(kept[c], r)]);
    Ok(SchmidtDecomposition { coefficients, prefix, suffix })
}

/// Numerical rank of every prefix cut, `r_k = #{σ_i > tol · σ_max}`.
pub fn rank_sequence(psi: &StateVector, tol: f64) -> Result<RankSequence> {
    if !(tol > 0.0) {
        return arg(format!("rank tolerance must be positive, got {tol}"));
    }
    let n = psi.n;
    let mut ranks = Vec::with_capacity(n);
    for k in 1..n {
        let sv = schmidt_coefficients(psi, k)?;
        let smax = sv[0];
        ranks.push(sv.iter().filter(|&&s| s > tol * smax).count());
    }
    // the full pure state has rank one
    ranks.push(1);
    Ok(RankSequence { ranks, tolerance: tol })
}

/// Zero-pad `data` to `2^n` entries and normalize.
pub fn amplitude_encode(data: &[f64], n: usize) -> Result<StateVector> {
    check_registers(n, MAX_STATE_REGISTERS, "state")?;
    if data.is_empty() {
        return arg("cannot encode an empty vector");
    }
    if data.len() > 1 << n {
        return arg(format!("{} values do not fit in {} registers", data.len(), n));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Encoding("data contains non-finite values".into()));
    }
    if data.iter().all(|&x| x == 0.0) {
        return Err(Error::Encoding("all-zero vector has no amplitude encoding".into()));
    }
    let mut amps: Vec<C64> = data.iter().map(|&x| C64::new(x, 0.0)).collect();
    amps.resize(1 << n, C64::new(0.0, 0.0));
    StateVector::normalized(amps)
}
