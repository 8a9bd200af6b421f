//! Closed-form QFP coupler and amplifier relations, s-curves and the
//! separation-fidelity budget.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{Matrix2, Vector2};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::fit::{levenberg_marquardt, FitError, LmOptions};
use crate::rng;
use crate::PHI0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QfpError {
    #[error("susceptibility pole at beta = -1 (got beta = {0})")]
    Pole(f64),
    #[error("{name} = {value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
}

/// cos(πx), exactly zero at half-integers and exactly ±1 at integers.
fn cos_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    let r = if r > 1.0 { 2.0 - r } else { r };
    (PI * (0.5 - r)).sin()
}

/// Screening parameter of the QFP at x-flux `phi_x_qfp` (Φ0).
pub fn beta_l(p: &DeviceParams, phi_x_qfp: f64) -> f64 {
    4.0 * PI * p.ic_x_qfp * p.l_qfp * cos_pi(phi_x_qfp) / PHI0
}

/// QFP susceptibility dI_p/dΦ_z in A/Wb.
pub fn susceptibility(p: &DeviceParams, beta: f64) -> Result<f64, QfpError> {
    let denom = 1.0 + beta;
    if denom == 0.0 || !denom.is_finite() && !beta.is_infinite() {
        return Err(QfpError::Pole(beta));
    }
    if beta.is_infinite() {
        return Ok(1.0 / p.l_qfp);
    }
    Ok(beta / (p.l_qfp * denom))
}

/// Qubit-resonator mutual inductance mediated by the QFP (H).
pub fn effective_mutual(p: &DeviceParams, chi: f64) -> f64 {
    p.m_qub_qfp * p.m_qfp_tres * chi
}

/// Flux difference the two qubit states couple into the QFP (Φ0).
pub fn qubit_flux_signal(p: &DeviceParams) -> f64 {
    2.0 * p.ip_qub * p.m_qub_qfp / PHI0
}

/// Probability of the QFP latching into its positive-current state.
pub fn scurve_prob(phi_z: f64, center: f64, w: f64) -> f64 {
    0.5 * (1.0 - ((phi_z - center) / w).tanh())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SCurveFit {
    pub center: f64,
    pub width: f64,
    pub center_sigma: f64,
    pub width_sigma: f64,
}

impl SCurveFit {
    /// Noise-free curve with the given center and width.
    pub fn ideal(center: f64, width: f64) -> Self {
        Self {
            center,
            width,
            center_sigma: 0.0,
            width_sigma: 0.0,
        }
    }

    pub fn prob(&self, phi_z: f64) -> f64 {
        scurve_prob(phi_z, self.center, self.width)
    }
}

/// One s-curve point: counts of positive latching at a z-flux (Φ0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScurveSample {
    pub phi_z: f64,
    pub successes: u64,
    pub trials: u64,
}

impl ScurveSample {
    pub fn fraction(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Binomial counts drawn from an s-curve at each z-flux of `sweep`, one
/// random stream per point.
pub fn sample_scurve(curve: &SCurveFit, sweep: &[f64], trials: u64, seed: u64) -> Result<Vec<ScurveSample>, QfpError> {
    if trials == 0 {
        return Err(QfpError::Domain { name: "trials", value: 0.0, domain: ">= 1" });
    }
    if !(curve.width > 0.0) {
        return Err(QfpError::Domain { name: "width", value: curve.width, domain: "> 0" });
    }
    sweep
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = curve.prob(x);
            let dist = Binomial::new(trials, p).map_err(|_| QfpError::Domain { name: "phi_z", value: x, domain: "finite" })?;
            let successes = dist.sample(&mut rng::stream(seed, &[i as u64]));
            Ok(ScurveSample { phi_z: x, successes, trials })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScurveFitOptions {
    /// Weight residuals by the binomial standard error instead of
    /// ordinary least squares.
    pub binomial_weights: bool,
}

pub fn fit_scurve(samples: &[ScurveSample]) -> Result<SCurveFit, FitError> {
    fit_scurve_with(samples, ScurveFitOptions::default())
}

pub fn fit_scurve_with(samples: &[ScurveSample], opts: ScurveFitOptions) -> Result<SCurveFit, FitError> {
    if samples.iter().any(|s| s.trials == 0 || s.successes > s.trials) {
        return Err(FitError::InsufficientData(
            "every point needs trials > 0 and successes <= trials".into(),
        ));
    }
    let mut pts: Vec<(f64, f64, u64)> = samples.iter().map(|s| (s.phi_z, s.fraction(), s.trials)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let distinct = 1 + pts.windows(2).filter(|w| w[1].0 != w[0].0).count();
    if distinct < 4 {
        return Err(FitError::InsufficientData(format!(
            "need at least 4 distinct flux points, got {distinct}"
        )));
    }
    let first = pts[0].1;
    if pts.iter().all(|p| p.1 == first) {
        return Err(FitError::WidthUnidentifiable);
    }

    let (c0, w0) = initial_guess(&pts);
    let weights: Vec<f64> = pts
        .iter()
        .map(|&(_, f, n)| {
            if opts.binomial_weights {
                // floor the variance so saturated points keep finite weight
                let var = (f * (1.0 - f)).max(0.25 / n as f64) / n as f64;
                1.0 / var.sqrt()
            } else {
                1.0
            }
        })
        .collect();

    // Width is fitted in units of its starting guess to keep the two
    // parameters on comparable scales.
    let sol = levenberg_marquardt(
        |q, out| {
            let (c, w) = (c0 + q[0] * w0, q[1] * w0);
            for (o, (&(x, f, _), wt)) in out.iter_mut().zip(pts.iter().zip(&weights)) {
                *o = wt * (scurve_prob(x, c, w) - f);
            }
        },
        |q| q[1] > 0.0,
        &[0.0, 1.0],
        pts.len(),
        LmOptions::default(),
    )?;
    let width = sol.params[1] * w0;
    if !(width.is_finite() && width > 0.0) {
        return Err(FitError::NonConvergence { iterations: sol.iterations });
    }
    let center = c0 + sol.params[0] * w0;
    let (center_sigma, width_sigma) = binomial_sandwich(&pts, &weights, center, width)?;
    Ok(SCurveFit {
        center,
        width,
        center_sigma,
        width_sigma,
    })
}

/// Parameter standard errors from the sandwich covariance
/// (JᵀWJ)⁻¹ JᵀW Σ W J (JᵀWJ)⁻¹ with Σ the binomial variance of the fitted
/// curve. Pooling the residual variance instead would average the
/// noiseless saturated tails into the estimate and understate the noise
/// near the transition.
fn binomial_sandwich(pts: &[(f64, f64, u64)], weights: &[f64], c: f64, w: f64) -> Result<(f64, f64), FitError> {
    let mut a = Matrix2::<f64>::zeros();
    let mut b = Matrix2::<f64>::zeros();
    for (&(x, _, n), wt) in pts.iter().zip(weights) {
        let u = (x - c) / w;
        let sech2 = 1.0 / u.cosh().powi(2);
        let j = Vector2::new(0.5 * sech2 / w, 0.5 * sech2 * u / w);
        let p = scurve_prob(x, c, w);
        let var = p * (1.0 - p) / n as f64;
        let jjt = j * j.transpose();
        a += jjt * (wt * wt);
        b += jjt * (wt.powi(4) * var);
    }
    let ai = a.try_inverse().ok_or(FitError::Singular)?;
    let cov = ai * b * ai;
    Ok((cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].max(0.0).sqrt()))
}

/// Crossing of level `y` by the piecewise-linear interpolant of sorted
/// points, searching for the first crossing.
fn crossing(pts: &[(f64, f64, u64)], y: f64) -> Option<f64> {
    pts.windows(2).find_map(|w| {
        let (x0, y0, _) = w[0];
        let (x1, y1, _) = w[1];
        if (y0 - y) * (y1 - y) <= 0.0 && y0 != y1 {
            Some(x0 + (y - y0) / (y1 - y0) * (x1 - x0))
        } else {
            None
        }
    })
}

fn initial_guess(pts: &[(f64, f64, u64)]) -> (f64, f64) {
    let span = pts[pts.len() - 1].0 - pts[0].0;
    let center = crossing(pts, 0.5).unwrap_or_else(|| {
        pts.iter()
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
            .map(|p| p.0)
            .unwrap_or(0.0)
    });
    // P falls from 0.75 to 0.25 over 2 atanh(0.5) w = 1.0986 w.
    let width = match (crossing(pts, 0.75), crossing(pts, 0.25)) {
        (Some(a), Some(b)) if b != a => (b - a).abs() / (2.0 * 0.5f64.atanh()),
        _ => span / 10.0,
    };
    let min_step = pts
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    (center, width.max(min_step / 4.0))
}

/// Number of grid points used to locate the separation maximum.
pub const SEPARATION_GRID: usize = 10_000;
/// Grid half-width in units of the larger fitted width.
pub const SEPARATION_SPAN_WIDTHS: f64 = 10.0;
const CURVE_SAMPLES: usize = 501;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// |center_R − center_L| (Φ0).
    pub delta_phi_qub: f64,
    /// delta_phi_qub over the mean fitted width.
    pub ratio: f64,
    pub f_sep_max: f64,
    /// One-sigma uncertainty of `f_sep_max` by linear propagation of the fit
    /// uncertainties (treated as independent).
    pub f_sep_max_sigma: f64,
    /// QFP z-flux at which the separation peaks (Φ0).
    pub phi_z_at_max: f64,
    pub f_sep_curve: Vec<(f64, f64)>,
}

fn f_sep(l: &SCurveFit, r: &SCurveFit, x: f64) -> f64 {
    r.prob(x) - l.prob(x)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Location and value of max_x [P_R(x) − P_L(x)].
fn separation_max(l: &SCurveFit, r: &SCurveFit) -> (f64, f64) {
    let wmax = l.width.max(r.width);
    let lo = l.center.min(r.center) - SEPARATION_SPAN_WIDTHS * wmax;
    let hi = l.center.max(r.center) + SEPARATION_SPAN_WIDTHS * wmax;
    let step = (hi - lo) / (SEPARATION_GRID - 1) as f64;
    let (best, _) = (0..SEPARATION_GRID)
        .map(|i| (i, f_sep(l, r, lo + step * i as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = lo + step * (best + 1).min(SEPARATION_GRID - 1) as f64;
    let x = golden_max(|x| f_sep(l, r, x), a, b);
    let grid_best = lo + step * best as f64;
    let (x, v) = if f_sep(l, r, x) >= f_sep(l, r, grid_best) {
        (x, f_sep(l, r, x))
    } else {
        (grid_best, f_sep(l, r, grid_best))
    };
    (x, v.clamp(0.0, 1.0))
}

/// Separation fidelity F_sep(Φz) = P_R(Φz) − P_L(Φz) of two fitted s-curves.
pub fn separation_fidelity(fit_left: &SCurveFit, fit_right: &SCurveFit) -> SeparationReport {
    let (phi_z_at_max, f_sep_max) = separation_max(fit_left, fit_right);
    let delta = (fit_right.center - fit_left.center).abs();
    let ratio = delta / (0.5 * (fit_left.width + fit_right.width));

    let mut var = 0.0;
    for k in 0..4 {
        let sigma = [
            fit_left.center_sigma,
            fit_left.width_sigma,
            fit_right.center_sigma,
            fit_right.width_sigma,
        ][k];
        if sigma == 0.0 {
            continue;
        }
        let h = 1e-4 * fit_left.width.min(fit_right.width);
        let shifted = |s: f64| {
            let (mut l, mut r) = (*fit_left, *fit_right);
            match k {
                0 => l.center += s,
                1 => l.width += s,
                2 => r.center += s,
                _ => r.width += s,
            }
            separation_max(&l, &r).1
        };
        let deriv = (shifted(h) - shifted(-h)) / (2.0 * h);
        var += (deriv * sigma).powi(2);
    }

    let wmax = fit_left.width.max(fit_right.width);
    let lo = fit_left.center.min(fit_right.center) - SEPARATION_SPAN_WIDTHS * wmax;
    let hi = fit_left.center.max(fit_right.center) + SEPARATION_SPAN_WIDTHS * wmax;
    let f_sep_curve = (0..CURVE_SAMPLES)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (CURVE_SAMPLES - 1) as f64;
            (x, f_sep(fit_left, fit_right, x))
        })
        .collect();

    SeparationReport {
        delta_phi_qub: delta,
        ratio,
        f_sep_max,
        f_sep_max_sigma: var.sqrt(),
        phi_z_at_max,
        f_sep_curve,
    }
}

/// ΔΦ/w that yields midpoint separation fidelity `f_target`.
pub fn required_ratio(f_target: f64) -> Result<f64, QfpError> {
    if !(f_target > 0.0 && f_target < 1.0) {
        return Err(QfpError::Domain {
            name: "f_target",
            value: f_target,
            domain: "(0, 1)",
        });
    }
    Ok(2.0 * f_target.atanh())
}

/// Design changes that reach a target separation fidelity from a measured
/// separation report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpgradePath {
    pub required_ratio: f64,
    /// Mean QFP width needed at the present qubit signal (Φ0).
    pub width_needed: f64,
    /// Qubit-QFP mutual needed at the present width (H).
    pub mutual_needed: f64,
}

pub fn upgrade_path(p: &DeviceParams, report: &SeparationReport, f_target: f64) -> Result<UpgradePath, QfpError> {
    let required = required_ratio(f_target)?;
    Ok(UpgradePath {
        required_ratio: required,
        width_needed: report.delta_phi_qub / required,
        mutual_needed: p.m_qub_qfp * required / report.ratio,
    })
}

pub const SCURVE_CSV_HEADER: [&str; 3] = ["phi_z_mphi0", "successes", "trials"];

pub fn write_scurve_csv<W: Write>(samples: &[ScurveSample], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCURVE_CSV_HEADER)?;
    for s in samples {
        w.write_record([
            format!("{:.17e}", s.phi_z * 1e3),
            s.successes.to_string(),
            s.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scurve_csv<R: Read>(input: R) -> Result<Vec<ScurveSample>, crate::Error> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SCURVE_CSV_HEADER {
        return Err(FitError::InsufficientData(format!(
            "s-curve CSV header must be {}",
            SCURVE_CSV_HEADER.join(",")
        ))
        .into());
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<&str, crate::Error> {
            rec.get(i).ok_or_else(|| FitError::InsufficientData("short CSV row".into()).into())
        };
        let bad = |e: &dyn std::fmt::Display| -> crate::Error {
            FitError::InsufficientData(format!("bad s-curve CSV value: {e}")).into()
        };
        out.push(ScurveSample {
            phi_z: parse(0)?.trim().parse::<f64>().map_err(|e| bad(&e))? * 1e-3,
            successes: parse(1)?.trim().parse().map_err(|e| bad(&e))?,
            trials: parse(2)?.trim().parse().map_err(|e| bad(&e))?,
        });
    }
    Ok(out)
}
