//! Normal-mode circuit Hamiltonians in a truncated oscillator basis.
//!
//! ```text
//! H = c0·I + Σ_i a_i (n_i² + θ_i²) + Σ_j [amp_j Π_i exp(i b_ij θ_i) + h.c.]
//! ```
//!
//! Energies are in GHz with h = 1. The quadratic part is taken as its exact
//! projection onto the retained oscillator levels, a_i (2k + 1); the
//! exponentials are built from the truncated phase operator.
//!
//! Small problems are assembled densely. Large ones are never materialised:
//! [`KronOperator`] applies each term factor by factor and the lowest levels
//! come from a block Davidson iteration.

mod davidson;
mod spectroscopy;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use davidson::{davidson_lowest, DavidsonOptions};
pub use spectroscopy::{
    anticrossing_gap, combined_t1, purcell_t1, synthetic_anticrossing_sweep, synthetic_two_mode, AntiCrossing,
    DEFAULT_GAP_RESOLUTION_GHZ,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("invalid Hamiltonian specification: {0}")]
    InvalidSpec(String),
    #[error("Hilbert space dimension {dimension} exceeds the dense limit {limit}")]
    DimensionOverflow { dimension: usize, limit: usize },
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no anti-crossing detected (g <= {g_upper_bound_ghz:e} GHz)")]
    NoAntiCrossing { g_upper_bound_ghz: f64 },
}

/// Largest dimension [`assemble`] will build as a dense matrix.
pub const DENSE_ASSEMBLY_LIMIT: usize = 50_000;
/// Above this dimension [`eigensolve_lowest`] switches to Davidson.
pub const DENSE_SOLVE_LIMIT: usize = 1_000;
/// Dimension increment per mode used for the convergence check.
pub const ESCALATION_STEP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Coefficient of n² and θ² (GHz).
    #[serde(rename = "a")]
    pub coefficient: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub re: f64,
    pub im: f64,
    /// Phase weight per mode.
    #[serde(rename = "b")]
    pub weights: Vec<f64>,
}

impl ExpTerm {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalModeHamiltonian {
    /// Constant energy offset (GHz).
    #[serde(rename = "c0")]
    pub offset: f64,
    pub modes: Vec<Mode>,
    pub terms: Vec<ExpTerm>,
}

impl NormalModeHamiltonian {
    pub fn from_json(text: &str) -> Result<Self, HamiltonianError> {
        let h: Self = serde_json::from_str(text).map_err(|e| HamiltonianError::InvalidSpec(e.to_string()))?;
        h.validate()?;
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        if self.modes.is_empty() {
            return Err(HamiltonianError::InvalidSpec("no modes".into()));
        }
        if !self.offset.is_finite() {
            return Err(HamiltonianError::InvalidSpec("c0 is not finite".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if m.dim < 1 {
                return Err(HamiltonianError::InvalidSpec(format!("mode {i} has dim 0")));
            }
            if !m.coefficient.is_finite() {
                return Err(HamiltonianError::InvalidSpec(format!("mode {i} coefficient is not finite")));
            }
        }
        for (j, t) in self.terms.iter().enumerate() {
            if t.weights.len() != self.modes.len() {
                return Err(HamiltonianError::InvalidSpec(format!(
                    "term {j} has {} phase weights for {} modes",
                    t.weights.len(),
                    self.modes.len()
                )));
            }
            if !(t.re.is_finite() && t.im.is_finite() && t.weights.iter().all(|b| b.is_finite())) {
                return Err(HamiltonianError::InvalidSpec(format!("term {j} is not finite")));
            }
        }
        self.checked_dimension().map(|_| ())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.dim).collect()
    }

    fn checked_dimension(&self) -> Result<usize, HamiltonianError> {
        self.modes
            .iter()
            .try_fold(1usize, |acc, m| acc.checked_mul(m.dim))
            .ok_or_else(|| HamiltonianError::InvalidSpec("dimension overflows usize".into()))
    }

    pub fn dimension(&self) -> usize {
        self.modes.iter().map(|m| m.dim).product()
    }

    /// Same coefficients with every truncation raised by `step`.
    pub fn escalated(&self, step: usize) -> Self {
        let mut h = self.clone();
        for m in &mut h.modes {
            m.dim += step;
        }
        h
    }

    /// Reorders modes (and the matching phase weights); `order[k]` is the
    /// old index of new mode `k`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut h = self.clone();
        h.modes = order.iter().map(|&i| self.modes[i]).collect();
        for (t, src) in h.terms.iter_mut().zip(&self.terms) {
            t.weights = order.iter().map(|&i| src.weights[i]).collect();
        }
        h
    }
}

/// Phase and charge operators of one truncated oscillator,
/// θ = (a + a†)/√2 and n = (a − a†)/(i√2).
pub fn build_mode_ops(dim: usize) -> Result<(DMatrix<f64>, DMatrix<Complex64>), HamiltonianError> {
    if dim < 2 {
        return Err(HamiltonianError::InvalidInput(format!("mode dimension {dim} < 2")));
    }
    let mut theta = DMatrix::zeros(dim, dim);
    let mut n = DMatrix::zeros(dim, dim);
    for k in 1..dim {
        let s = (k as f64 / 2.0).sqrt();
        theta[(k - 1, k)] = s;
        theta[(k, k - 1)] = s;
        n[(k - 1, k)] = Complex64::new(0.0, -s);
        n[(k, k - 1)] = Complex64::new(0.0, s);
    }
    Ok((theta, n))
}

/// exp(i·b·θ) for a truncated phase operator, via its eigendecomposition.
pub fn phase_exponential(dim: usize, weight: f64) -> DMatrix<Complex64> {
    if dim == 1 || weight == 0.0 {
        // θ restricted to the ground state is zero.
        return DMatrix::identity(dim, dim);
    }
    let (theta, _) = build_mode_ops(dim).expect("dim >= 2");
    let eig = SymmetricEigen::new(theta);
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, weight * l)));
    &v * phases * v.transpose()
}

fn quadratic_diagonal(h: &NormalModeHamiltonian) -> Vec<f64> {
    let dims = h.dims();
    let n = h.dimension();
    let mut diag = vec![h.offset; n];
    let mut inner = n;
    for (m, &d) in h.modes.iter().zip(&dims) {
        inner /= d;
        for (idx, e) in diag.iter_mut().enumerate() {
            let k = (idx / inner) % d;
            *e += m.coefficient * (2 * k + 1) as f64;
        }
    }
    diag
}

/// Dense Hermitian matrix of `h`.
pub fn assemble(h: &NormalModeHamiltonian) -> Result<DMatrix<Complex64>, HamiltonianError> {
    h.validate()?;
    let n = h.dimension();
    if n > DENSE_ASSEMBLY_LIMIT {
        return Err(HamiltonianError::DimensionOverflow { dimension: n, limit: DENSE_ASSEMBLY_LIMIT });
    }
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    for t in &h.terms {
        let mut k = DMatrix::<Complex64>::identity(1, 1);
        for (m, &b) in h.modes.iter().zip(&t.weights) {
            k = k.kronecker(&phase_exponential(m.dim, b));
        }
        a += k * t.amplitude();
    }
    let diag = quadratic_diagonal(h);
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = a[(i, j)] + a[(j, i)].conj();
        }
        out[(j, j)] = Complex64::new(out[(j, j)].re + diag[j], 0.0);
    }
    Ok(out)
}

/// max |H − H†|.
pub fn hermiticity_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut r: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

struct KronTerm {
    amplitude: Complex64,
    /// `None` is an identity factor.
    factors: Vec<Option<DMatrix<Complex64>>>,
}

/// Matrix-free form of a [`NormalModeHamiltonian`].
pub struct KronOperator {
    dims: Vec<usize>,
    diag_quadratic: Vec<f64>,
    terms: Vec<KronTerm>,
}

impl KronOperator {
    pub fn new(h: &NormalModeHamiltonian) -> Result<Self, HamiltonianError> {
        h.validate()?;
        let mut terms = Vec::with_capacity(2 * h.terms.len());
        for t in &h.terms {
            let factors: Vec<Option<DMatrix<Complex64>>> = h
                .modes
                .iter()
                .zip(&t.weights)
                .map(|(m, &b)| (b != 0.0 && m.dim > 1).then(|| phase_exponential(m.dim, b)))
                .collect();
            let adjoint = factors.iter().map(|f| f.as_ref().map(|e| e.adjoint())).collect();
            terms.push(KronTerm { amplitude: t.amplitude(), factors });
            terms.push(KronTerm { amplitude: t.amplitude().conj(), factors: adjoint });
        }
        Ok(Self { dims: h.dims(), diag_quadratic: quadratic_diagonal(h), terms })
    }

    pub fn dimension(&self) -> usize {
        self.diag_quadratic.len()
    }

    /// Diagonal of the full operator (real, since it is Hermitian).
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.dimension();
        let mut diag = self.diag_quadratic.clone();
        for t in &self.terms {
            let mut inner = n;
            let mut along: Vec<Complex64> = vec![t.amplitude; n];
            for (f, &d) in t.factors.iter().zip(&self.dims) {
                inner /= d;
                if let Some(e) = f {
                    for (idx, v) in along.iter_mut().enumerate() {
                        let k = (idx / inner) % d;
                        *v *= e[(k, k)];
                    }
                }
            }
            for (d, v) in diag.iter_mut().zip(&along) {
                *d += v.re;
            }
        }
        diag
    }

    /// y = H x.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.dimension();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.diag_quadratic) {
            *yi = xi * d;
        }
        let mut a = vec![Complex64::default(); n];
        let mut b = vec![Complex64::default(); n];
        for t in &self.terms {
            a.copy_from_slice(x);
            let mut outer = 1;
            let mut inner = n;
            for (f, &d) in t.factors.iter().zip(&self.dims) {
                inner /= d;
                if let Some(e) = f {
                    apply_factor(e, outer, d, inner, &a, &mut b);
                    std::mem::swap(&mut a, &mut b);
                }
                outer *= d;
            }
            for (yi, ai) in y.iter_mut().zip(&a) {
                *yi += t.amplitude * ai;
            }
        }
    }
}

fn apply_factor(e: &DMatrix<Complex64>, outer: usize, d: usize, inner: usize, x: &[Complex64], y: &mut [Complex64]) {
    for o in 0..outer {
        for r in 0..d {
            let row = &mut y[(o * d + r) * inner..][..inner];
            row.fill(Complex64::default());
            for c in 0..d {
                let w = e[(r, c)];
                if w == Complex64::default() {
                    continue;
                }
                let src = &x[(o * d + c) * inner..][..inner];
                for (dst, s) in row.iter_mut().zip(src) {
                    *dst += w * s;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Lowest eigenvalues, ascending (GHz).
    pub eigenvalues: Vec<f64>,
    pub dims: Vec<usize>,
    /// Max change of the reported levels when every dim grows by
    /// [`ESCALATION_STEP`] (GHz); absent when escalation was not requested.
    pub convergence_delta: Option<f64>,
    pub escalated_dims: Option<Vec<usize>>,
    pub escalated_eigenvalues: Option<Vec<f64>>,
}

/// All eigenvalues of a dense Hermitian matrix, ascending.
pub fn eigvals_dense(m: &DMatrix<Complex64>) -> Result<Vec<f64>, HamiltonianError> {
    if !m.is_square() {
        return Err(HamiltonianError::InvalidInput("matrix is not square".into()));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(HamiltonianError::Eigensolver("non-finite matrix entry".into()));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| HamiltonianError::Eigensolver("dense Hermitian solver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Lowest `k` levels of `h`, dense below [`DENSE_SOLVE_LIMIT`] and
/// Davidson above it.
pub fn lowest_levels(h: &NormalModeHamiltonian, k: usize) -> Result<Vec<f64>, HamiltonianError> {
    h.validate()?;
    let n = h.dimension();
    if k == 0 || k > n {
        return Err(HamiltonianError::InvalidInput(format!("k = {k} outside 1..={n}")));
    }
    if n <= DENSE_SOLVE_LIMIT {
        let mut v = eigvals_dense(&assemble(h)?)?;
        v.truncate(k);
        return Ok(v);
    }
    let op = KronOperator::new(h)?;
    let (vals, _) = davidson_lowest(&op, k, DavidsonOptions::default())?;
    Ok(vals)
}

pub fn eigensolve_lowest(h: &NormalModeHamiltonian, k: usize, escalate: bool) -> Result<SpectrumResult, HamiltonianError> {
    let eigenvalues = lowest_levels(h, k)?;
    let mut out = SpectrumResult {
        eigenvalues,
        dims: h.dims(),
        convergence_delta: None,
        escalated_dims: None,
        escalated_eigenvalues: None,
    };
    if escalate {
        let bigger = h.escalated(ESCALATION_STEP);
        let e2 = lowest_levels(&bigger, k)?;
        let delta = out.eigenvalues.iter().zip(&e2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.convergence_delta = Some(delta);
        out.escalated_dims = Some(bigger.dims());
        out.escalated_eigenvalues = Some(e2);
    }
    Ok(out)
}

/// Lowest `k` levels for several Hamiltonians at once.
pub fn lowest_levels_many(hs: &[NormalModeHamiltonian], k: usize) -> Result<Vec<Vec<f64>>, HamiltonianError> {
    hs.par_iter().map(|h| lowest_levels(h, k)).collect()
}

pub const SPECTRUM_CSV_HEADER: [&str; 2] = ["index", "energy_ghz"];

pub fn write_spectrum_csv<W: Write>(eigenvalues: &[f64], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPECTRUM_CSV_HEADER)?;
    for (i, e) in eigenvalues.iter().enumerate() {
        w.write_record([i.to_string(), format!("{e:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}
