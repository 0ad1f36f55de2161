//! Truncated rotational bases and exact operator matrices.
//!
//! Every interaction in this crate is linearly polarized along z, so m (and
//! k for symmetric tops) are conserved and all dense work happens inside a
//! single (m, k) block: states {|j,k,m⟩ : max(|k|,|m|) ≤ j ≤ j_cap}, indexed
//! by ascending j. Matrices are real symmetric with the standard
//! spherical-harmonic phase conventions; the complex plane only enters
//! through state coefficients.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, RotorError};
use crate::units::MoleculeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RotorKind {
    Linear,
    SymmetricTop,
}

impl std::fmt::Display for RotorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RotorKind::Linear => write!(f, "linear"),
            RotorKind::SymmetricTop => write!(f, "symmetric-top"),
        }
    }
}

/// Quantum numbers of one basis ket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub j: u32,
    pub k: i32,
    pub m: i32,
}

impl std::fmt::Display for BasisState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.k {
            0 => write!(f, "|{},{}>", self.j, self.m),
            _ => write!(f, "|{},{},{}>", self.j, self.k, self.m),
        }
    }
}

/// One (m, k) block of the rotational Hilbert space, truncated at `j_cap`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RotorBasis {
    kind: RotorKind,
    j_cap: u32,
    m_fixed: i32,
    k_fixed: i32,
}

impl RotorBasis {
    /// Generic constructor mirroring the per-kind ones; `k_fixed` must be
    /// absent or zero for linear molecules.
    pub fn build(kind: RotorKind, j_cap: u32, m_fixed: i32, k_fixed: Option<i32>) -> Result<Self> {
        match kind {
            RotorKind::Linear => {
                if let Some(k) = k_fixed {
                    if k != 0 {
                        return Err(RotorError::InvalidInput(format!(
                            "linear molecules carry no body-frame projection, got k={k}"
                        )));
                    }
                }
                Self::linear(j_cap, m_fixed)
            }
            RotorKind::SymmetricTop => Self::symmetric_top(j_cap, k_fixed.unwrap_or(0), m_fixed),
        }
    }

    pub fn linear(j_cap: u32, m_fixed: i32) -> Result<Self> {
        if m_fixed.unsigned_abs() > j_cap {
            return Err(RotorError::InvalidInput(format!(
                "need j_cap >= |m|, got j_cap={j_cap}, m={m_fixed}"
            )));
        }
        Ok(Self {
            kind: RotorKind::Linear,
            j_cap,
            m_fixed,
            k_fixed: 0,
        })
    }

    pub fn symmetric_top(j_cap: u32, k_fixed: i32, m_fixed: i32) -> Result<Self> {
        if m_fixed.unsigned_abs() > j_cap || k_fixed.unsigned_abs() > j_cap {
            return Err(RotorError::InvalidInput(format!(
                "need j_cap >= max(|k|,|m|), got j_cap={j_cap}, k={k_fixed}, m={m_fixed}"
            )));
        }
        Ok(Self {
            kind: RotorKind::SymmetricTop,
            j_cap,
            m_fixed,
            k_fixed,
        })
    }

    pub fn kind(&self) -> RotorKind {
        self.kind
    }

    pub fn j_cap(&self) -> u32 {
        self.j_cap
    }

    pub fn m_fixed(&self) -> i32 {
        self.m_fixed
    }

    pub fn k_fixed(&self) -> i32 {
        self.k_fixed
    }

    /// Lowest j present in the block: max(|k|, |m|).
    pub fn j_min(&self) -> u32 {
        self.m_fixed.unsigned_abs().max(self.k_fixed.unsigned_abs())
    }

    pub fn dim(&self) -> usize {
        (self.j_cap - self.j_min() + 1) as usize
    }

    /// Ket at a given index (indices run over ascending j).
    pub fn state(&self, idx: usize) -> BasisState {
        debug_assert!(idx < self.dim());
        BasisState {
            j: self.j_min() + idx as u32,
            k: self.k_fixed,
            m: self.m_fixed,
        }
    }

    pub fn index_of(&self, j: u32) -> Option<usize> {
        if j < self.j_min() || j > self.j_cap {
            None
        } else {
            Some((j - self.j_min()) as usize)
        }
    }

    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dim()).map(|i| self.state(i))
    }

    /// Same block with a larger truncation.
    pub fn enlarged(&self, extra: u32) -> Self {
        Self {
            j_cap: self.j_cap + extra,
            ..self.clone()
        }
    }
}

/// Real symmetric matrix of an observable or Hamiltonian term on a
/// [`RotorBasis`], with its half-bandwidth recorded for fast banded kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    basis: RotorBasis,
    entries: Array2<f64>,
    bandwidth: usize,
}

impl OperatorMatrix {
    pub(crate) fn from_parts(basis: RotorBasis, entries: Array2<f64>) -> Self {
        let n = entries.nrows();
        debug_assert_eq!(n, basis.dim());
        debug_assert_eq!(n, entries.ncols());
        let mut bandwidth = 0usize;
        for i in 0..n {
            for j in 0..n {
                if entries[[i, j]] != 0.0 {
                    bandwidth = bandwidth.max(i.abs_diff(j));
                }
            }
        }
        Self {
            basis,
            entries,
            bandwidth,
        }
    }

    pub fn basis(&self) -> &RotorBasis {
        &self.basis
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest |i-j| with a structurally nonzero entry.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Max row sum of absolute values (induced ∞-norm).
    pub fn row_norm(&self) -> f64 {
        let n = self.dim();
        let mut best = 0.0_f64;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.entries[[i, j]].abs();
            }
            best = best.max(s);
        }
        best
    }

    /// ⟨c|M|c⟩ for a coefficient vector on the same basis. The result of a
    /// real symmetric quadratic form is real; the imaginary part cancels.
    pub fn expectation(&self, coeff: &[Complex64]) -> Result<f64> {
        let n = self.dim();
        if coeff.len() != n {
            return Err(RotorError::BasisMismatch(format!(
                "coefficient vector has length {}, operator dimension is {}",
                coeff.len(),
                n
            )));
        }
        let m = self.entries.as_slice().expect("standard layout");
        let bw = self.bandwidth;
        let mut acc = 0.0_f64;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(n - 1);
            let ci = coeff[i];
            let mut row = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                row += m[i * n + j] * coeff[j];
            }
            // Re(conj(c_i)·row)
            acc += ci.re * row.re + ci.im * row.im;
        }
        Ok(acc)
    }

    /// y += scale · M · x over the stored band.
    pub(crate) fn accumulate_action(&self, scale: f64, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        let m = self.entries.as_slice().expect("standard layout");
        let bw = self.bandwidth;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(n - 1);
            let mut row = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                row += m[i * n + j] * x[j];
            }
            y[i] += scale * row;
        }
    }
}

/// ⟨j+1,k,m|cosθ|j,k,m⟩ with the Condon-Shortley phase convention.
fn cos_offdiag(kind: RotorKind, j: u32, k: i32, m: i32) -> f64 {
    let jj = j as f64;
    let jp = jj + 1.0;
    let mm = m as f64;
    match kind {
        RotorKind::Linear => ((jp * jp - mm * mm) / ((2.0 * jj + 1.0) * (2.0 * jj + 3.0))).sqrt(),
        RotorKind::SymmetricTop => {
            let kk = k as f64;
            ((jp * jp - kk * kk) * (jp * jp - mm * mm)).sqrt()
                / (jp * ((2.0 * jj + 1.0) * (2.0 * jj + 3.0)).sqrt())
        }
    }
}

/// ⟨j,k,m|cosθ|j,k,m⟩: zero for linear molecules, k·m/(j(j+1)) otherwise.
fn cos_diag(kind: RotorKind, j: u32, k: i32, m: i32) -> f64 {
    match kind {
        RotorKind::Linear => 0.0,
        RotorKind::SymmetricTop => {
            if j == 0 {
                0.0
            } else {
                let jj = j as f64;
                (k as f64) * (m as f64) / (jj * (jj + 1.0))
            }
        }
    }
}

/// Matrix of cosθ on the block. Nonzero only for Δj ∈ {0, ±1}; the diagonal
/// is nonzero only for symmetric tops with k·m ≠ 0.
pub fn cos_theta_matrix(basis: &RotorBasis) -> OperatorMatrix {
    let n = basis.dim();
    let mut entries = Array2::zeros((n, n));
    for idx in 0..n {
        let s = basis.state(idx);
        entries[[idx, idx]] = cos_diag(basis.kind(), s.j, s.k, s.m);
        if idx + 1 < n {
            let x = cos_offdiag(basis.kind(), s.j, s.k, s.m);
            entries[[idx + 1, idx]] = x;
            entries[[idx, idx + 1]] = x;
        }
    }
    OperatorMatrix::from_parts(basis.clone(), entries)
}

/// Matrix of cos²θ on the block, built as the restriction of C'·C' where C'
/// is the cosθ matrix on the block enlarged by one j. The restriction is
/// exact because cosθ only reaches intermediate states with j ≤ j_cap + 1.
pub fn cos_squared_matrix(basis: &RotorBasis) -> OperatorMatrix {
    let n = basis.dim();
    let enlarged = cos_theta_matrix(&basis.enlarged(1));
    let c = enlarged.entries();
    let big = enlarged.dim();
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for t in 0..big {
                s += c[[i, t]] * c[[t, j]];
            }
            entries[[i, j]] = s;
        }
    }
    OperatorMatrix::from_parts(basis.clone(), entries)
}

/// Field-free Hamiltonian: B·j(j+1) for linear molecules, plus (A−B)·k² for
/// symmetric tops.
pub fn free_hamiltonian(basis: &RotorBasis, params: &MoleculeParams) -> Result<OperatorMatrix> {
    if params.kind != basis.kind() {
        return Err(RotorError::BasisMismatch(format!(
            "molecule '{}' is {}, basis is {}",
            params.name,
            params.kind,
            basis.kind()
        )));
    }
    let n = basis.dim();
    let mut entries = Array2::zeros((n, n));
    for idx in 0..n {
        let s = basis.state(idx);
        let jj = s.j as f64;
        let mut e = params.b * jj * (jj + 1.0);
        if basis.kind() == RotorKind::SymmetricTop {
            let a = params.a.ok_or_else(|| {
                RotorError::InvalidInput(format!(
                    "molecule '{}' lacks the axial constant A",
                    params.name
                ))
            })?;
            let kk = s.k as f64;
            e += (a - params.b) * kk * kk;
        }
        entries[[idx, idx]] = e;
    }
    Ok(OperatorMatrix::from_parts(basis.clone(), entries))
}
