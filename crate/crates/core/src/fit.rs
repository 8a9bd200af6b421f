//! Small dense Levenberg–Marquardt solver shared by the s-curve and S21
//! fits.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("width unidentifiable: all sample probabilities are equal")]
    WidthUnidentifiable,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("insufficient span: trace covers {span_linewidths:.3} linewidths, need at least {required}")]
    InsufficientSpan { span_linewidths: f64, required: f64 },
    #[error("singular normal equations; parameters are not jointly identifiable")]
    Singular,
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when every parameter changes by less than this (relative).
    pub x_tol: f64,
    /// Stop when the sum of squares improves by less than this (relative).
    pub f_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            x_tol: 1e-13,
            f_tol: 1e-16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// Sum of squared residuals at the solution.
    pub ssr: f64,
    /// (JᵀJ)⁻¹ at the solution; multiply by the residual variance for the
    /// parameter covariance.
    pub jtj_inverse: DMatrix<f64>,
    pub n_residuals: usize,
    pub iterations: usize,
}

impl LmSolution {
    /// Parameter covariance with the residual variance estimated from the
    /// fit (ssr / (n - p)).
    pub fn covariance(&self) -> DMatrix<f64> {
        let dof = self.n_residuals.saturating_sub(self.params.len()).max(1);
        &self.jtj_inverse * (self.ssr / dof as f64)
    }

    pub fn std_errors(&self) -> Vec<f64> {
        let c = self.covariance();
        (0..self.params.len()).map(|i| c[(i, i)].max(0.0).sqrt()).collect()
    }
}

/// Minimizes Σ r_i(p)² with `residuals(p, out)` filling `out`.
///
/// The Jacobian is formed by central differences with steps relative to
/// max(|p|, 1), so parameters should be scaled to order one. `admissible` rejects
/// trial points outside the parameter domain.
pub fn levenberg_marquardt<R, A>(
    residuals: R,
    admissible: A,
    p0: &[f64],
    n_residuals: usize,
    opts: LmOptions,
) -> Result<LmSolution, FitError>
where
    R: Fn(&[f64], &mut [f64]),
    A: Fn(&[f64]) -> bool,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_residuals];
    residuals(&p, &mut r);
    let mut ssr = sum_sq(&r);
    if !ssr.is_finite() {
        return Err(FitError::NonConvergence { iterations: 0 });
    }
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n_residuals];

    for iter in 0..opts.max_iterations {
        let jac = jacobian(&residuals, &p, n_residuals);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&r);
        if jtr.amax() <= 1e-300 || ssr == 0.0 {
            return finish(p, ssr, &jtj, n_residuals, iter);
        }

        let mut improved = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                lambda *= 10.0;
                continue;
            };
            for i in 0..n {
                trial[i] = p[i] + step[i];
            }
            if !admissible(&trial) {
                lambda *= 10.0;
                continue;
            }
            residuals(&trial, &mut r_trial);
            let ssr_trial = sum_sq(&r_trial);
            if ssr_trial.is_finite() && ssr_trial <= ssr {
                let small_step = (0..n).all(|i| step[i].abs() <= opts.x_tol * (p[i].abs() + opts.x_tol));
                let small_gain = ssr - ssr_trial <= opts.f_tol * ssr;
                std::mem::swap(&mut p, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                ssr = ssr_trial;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if small_step || small_gain {
                    let jac = jacobian(&residuals, &p, n_residuals);
                    return finish(p, ssr, &(jac.transpose() * &jac), n_residuals, iter + 1);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            // No downhill step exists at any damping: a (numerical) minimum.
            return finish(p, ssr, &jtj, n_residuals, iter + 1);
        }
    }
    Err(FitError::NonConvergence {
        iterations: opts.max_iterations,
    })
}

fn finish(
    params: Vec<f64>,
    ssr: f64,
    jtj: &DMatrix<f64>,
    n_residuals: usize,
    iterations: usize,
) -> Result<LmSolution, FitError> {
    let jtj_inverse = jtj.clone().try_inverse().ok_or(FitError::Singular)?;
    Ok(LmSolution {
        params,
        ssr,
        jtj_inverse,
        n_residuals,
        iterations,
    })
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<R: Fn(&[f64], &mut [f64])>(residuals: &R, p: &[f64], m: usize) -> DMatrix<f64> {
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    for j in 0..n {
        let h = f64::EPSILON.cbrt() * p[j].abs().max(1.0);
        q[j] = p[j] + h;
        residuals(&q, &mut plus);
        q[j] = p[j] - h;
        residuals(&q, &mut minus);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}
