//! Block Davidson iteration for the lowest levels of a Hermitian operator,
//! with the diagonal as preconditioner.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{HamiltonianError, KronOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavidsonOptions {
    /// Residual norm accepted as converged, relative to max |diagonal|.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Extra search directions carried beyond the requested count.
    pub extra: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-11, max_iter: 500, extra: 6 }
    }
}

type Vector = Vec<Complex64>;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalises `t` against both sets (two Gram-Schmidt passes).
/// Returns false when nothing new is left.
fn orthonormalise(t: &mut [Complex64], basis: &[Vector], more: &[Vector]) -> bool {
    let start = norm(t);
    if start == 0.0 || !start.is_finite() {
        return false;
    }
    for _ in 0..2 {
        for v in basis.iter().chain(more) {
            let c = dot(v, t);
            for (ti, vi) in t.iter_mut().zip(v) {
                *ti -= c * vi;
            }
        }
    }
    let n = norm(t);
    if n < 1e-8 * start {
        return false;
    }
    for x in t.iter_mut() {
        *x /= n;
    }
    true
}

fn combine(basis: &[Vector], coeffs: impl Iterator<Item = Complex64>) -> Vector {
    let mut out = vec![Complex64::default(); basis[0].len()];
    for (v, c) in basis.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

/// Lowest `k` eigenpairs of `op`, eigenvalues ascending.
pub fn davidson_lowest(
    op: &KronOperator,
    k: usize,
    opts: DavidsonOptions,
) -> Result<(Vec<f64>, Vec<Vector>), HamiltonianError> {
    let n = op.dimension();
    if k == 0 || k > n {
        return Err(HamiltonianError::InvalidInput(format!("k = {k} outside 1..={n}")));
    }
    let diag = op.diagonal();
    let scale = diag.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let tol = opts.rel_tol * scale;
    let block = (k + opts.extra).min(n);
    let max_basis = (4 * block).max(block + 24).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut basis: Vec<Vector> = Vec::with_capacity(max_basis);
    let mut images: Vec<Vector> = Vec::with_capacity(max_basis);
    let mut pending: Vec<Vector> = order[..block]
        .iter()
        .map(|&i| {
            let mut v = vec![Complex64::default(); n];
            v[i] = Complex64::new(1.0, 0.0);
            v
        })
        .collect();

    for _ in 0..opts.max_iter {
        let new_images: Vec<Vector> = pending
            .par_iter()
            .map(|v| {
                let mut w = vec![Complex64::default(); n];
                op.apply(v, &mut w);
                w
            })
            .collect();
        basis.append(&mut pending);
        images.extend(new_images);

        let m = basis.len();
        let mut t = DMatrix::<Complex64>::zeros(m, m);
        for j in 0..m {
            for i in 0..=j {
                let z = dot(&basis[i], &images[j]);
                t[(i, j)] = z;
                t[(j, i)] = z.conj();
            }
            t[(j, j)].im = 0.0;
        }
        let eig = SymmetricEigen::try_new(t, f64::EPSILON, 100_000)
            .ok_or_else(|| HamiltonianError::Eigensolver("projected problem did not converge".into()))?;
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut converged = m >= k;
        let mut corrections = Vec::new();
        for (rank, &c) in idx[..block.min(m)].iter().enumerate() {
            let theta = eig.eigenvalues[c];
            let y = eig.eigenvectors.column(c);
            let x = combine(&basis, y.iter().copied());
            let hx = combine(&images, y.iter().copied());
            let r: Vector = hx.iter().zip(&x).map(|(h, v)| h - v * theta).collect();
            let rn = norm(&r);
            if rn <= tol {
                continue;
            }
            if rank < k {
                converged = false;
            }
            let floor = 1e-8 * scale;
            let t: Vector = r
                .iter()
                .zip(&diag)
                .map(|(ri, d)| {
                    let den = theta - d;
                    ri / if den.abs() < floor { floor.copysign(den) } else { den }
                })
                .collect();
            corrections.push(t);
        }
        if converged {
            let vals = idx[..k].iter().map(|&c| eig.eigenvalues[c]).collect();
            let vecs = idx[..k]
                .iter()
                .map(|&c| combine(&basis, eig.eigenvectors.column(c).iter().copied()))
                .collect();
            return Ok((vals, vecs));
        }

        if m + corrections.len() > max_basis {
            let keep = block.min(m);
            let cols: Vec<usize> = idx[..keep].to_vec();
            let new_basis: Vec<Vector> = cols
                .iter()
                .map(|&c| combine(&basis, eig.eigenvectors.column(c).iter().copied()))
                .collect();
            // Re-orthonormalise the collapsed space; drift accumulates otherwise.
            basis.clear();
            images.clear();
            for mut v in new_basis {
                if orthonormalise(&mut v, &basis, &[]) {
                    let mut w = vec![Complex64::default(); n];
                    op.apply(&v, &mut w);
                    basis.push(v);
                    images.push(w);
                }
            }
        }

        let mut accepted: Vec<Vector> = Vec::new();
        for mut t in corrections {
            if orthonormalise(&mut t, &basis, &accepted) {
                accepted.push(t);
            }
        }
        if accepted.is_empty() {
            return Err(HamiltonianError::Eigensolver("Davidson stagnated: no new search directions".into()));
        }
        pending = accepted;
    }
    Err(HamiltonianError::Eigensolver(format!("Davidson did not converge in {} iterations", opts.max_iter)))
}
