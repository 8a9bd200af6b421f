//! Flux-tunable quarter-wave resonator: modulation curve, state-dependent
//! shift, S21 lineshape and its fit.
//!
//! The RF SQUID at the current antinode is modelled as a flux-dependent
//! lumped inductance terminating the line,
//!
//! ```text
//! φ* + β_rf sin φ* = 2πΦ,    L_s(Φ) = l_tres / (1 + β_rf cos φ*)
//! tan(π f / 2 f_bare) = z0 / (2π f L_s)
//! ```
//!
//! with `f_bare` calibrated once so that `f(0) = f_res_max`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::fit::{levenberg_marquardt, FitError, LmOptions};
use crate::rng;
use crate::PHI0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonatorError {
    #[error("multivalued regime: beta_rf = {beta_rf} >= 1")]
    MultivaluedRegime { beta_rf: f64 },
    #[error("flux {phi} is within 0.02 of a half flux quantum, outside the model's validity window")]
    OutsideValidityWindow { phi: f64 },
    #[error("root bracketing failed: {0}")]
    Bracketing(String),
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Line impedance used when building a model from device parameters (Ω).
pub const DEFAULT_Z0: f64 = 50.0;
/// Half-width of the excluded region around Φ0/2.
pub const VALIDITY_MARGIN: f64 = 0.02;
/// Finite-difference step for the flux sensitivity (Φ0).
pub const SENSITIVITY_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorModel {
    /// Unloaded quarter-wave frequency (Hz).
    pub f_bare: f64,
    pub z0: f64,
    pub ic_tres: f64,
    pub l_tres: f64,
    pub beta_rf: f64,
    pub q_total: f64,
    pub q_external: f64,
}

impl ResonatorModel {
    pub fn new(
        f_bare: f64,
        z0: f64,
        ic_tres: f64,
        l_tres: f64,
        q_total: f64,
        q_external: f64,
    ) -> Result<Self, ResonatorError> {
        for (name, value) in [
            ("f_bare", f_bare),
            ("z0", z0),
            ("ic_tres", ic_tres),
            ("l_tres", l_tres),
            ("q_total", q_total),
            ("q_external", q_external),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ResonatorError::InvalidParameter { name, value });
            }
        }
        let beta_rf = 2.0 * PI * l_tres * ic_tres / PHI0;
        if beta_rf >= 1.0 {
            return Err(ResonatorError::MultivaluedRegime { beta_rf });
        }
        Ok(Self {
            f_bare,
            z0,
            ic_tres,
            l_tres,
            beta_rf,
            q_total,
            q_external,
        })
    }

    /// Model whose sweet-spot frequency equals `p.f_res_max`.
    pub fn calibrated(p: &DeviceParams) -> Result<Self, ResonatorError> {
        Self::calibrated_with(p, DEFAULT_Z0)
    }

    pub fn calibrated_with(p: &DeviceParams, z0: f64) -> Result<Self, ResonatorError> {
        let probe = Self::new(p.f_res_max, z0, p.ic_tres, p.l_tres, p.q_total, p.q_external)?;
        let f0 = p.f_res_max;
        let l0 = probe.l_tres / (1.0 + probe.beta_rf);
        // x tan x = z0 / (4 f_bare L) with x = π f0 / (2 f_bare)
        let h = |fb: f64| {
            let x = PI * f0 / (2.0 * fb);
            x * x.tan() - z0 / (4.0 * fb * l0)
        };
        let lo = f0 * (1.0 + 1e-12);
        let mut hi = 2.0 * f0;
        while h(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e6 * f0 {
                return Err(ResonatorError::Bracketing(format!(
                    "no bare frequency reproduces f_res_max = {f0} Hz"
                )));
            }
        }
        let f_bare = bisect(h, lo, hi, 1e-15)?;
        Ok(Self { f_bare, ..probe })
    }

    pub fn linewidth(&self, f0: f64) -> f64 {
        f0 / self.q_total
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, rel_tol: f64) -> Result<f64, ResonatorError> {
    let (mut fa, fb) = (f(a), f(b));
    if !(fa * fb <= 0.0) {
        return Err(ResonatorError::Bracketing(format!(
            "no sign change on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= rel_tol * m.abs() || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Root φ* of φ + β_rf sin φ = 2πΦ.
pub fn squid_phase(m: &ResonatorModel, phi: f64) -> Result<f64, ResonatorError> {
    let beta = m.beta_rf;
    if beta >= 1.0 {
        return Err(ResonatorError::MultivaluedRegime { beta_rf: beta });
    }
    let target = 2.0 * PI * phi;
    if target == 0.0 {
        return Ok(0.0);
    }
    let g = |x: f64| x + beta * x.sin() - target;
    // The root lies within β of the target because |sin| ≤ 1.
    let (mut lo, mut hi) = (target - beta.abs(), target + beta.abs());
    let mut x = target - beta * target.sin();
    for _ in 0..100 {
        let gx = g(x);
        if gx.abs() < 1e-14 * target.abs().max(1.0) {
            break;
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - gx / (1.0 + beta * x.cos());
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(x)
}

/// Flux-dependent SQUID inductance terminating the line (H).
pub fn squid_inductance(m: &ResonatorModel, phi: f64) -> Result<f64, ResonatorError> {
    let ps = squid_phase(m, phi)?;
    Ok(m.l_tres / (1.0 + m.beta_rf * ps.cos()))
}

/// Reduces `phi` to [0, 0.5] using periodicity and evenness.
fn fold_flux(phi: f64) -> f64 {
    (phi - phi.round()).abs()
}

/// Lowest resonance of the loaded quarter-wave line at flux `phi` (Φ0).
pub fn resonant_freq(m: &ResonatorModel, phi: f64) -> Result<f64, ResonatorError> {
    if !phi.is_finite() {
        return Err(ResonatorError::InvalidParameter { name: "phi", value: phi });
    }
    let folded = fold_flux(phi);
    if 0.5 - folded <= VALIDITY_MARGIN {
        return Err(ResonatorError::OutsideValidityWindow { phi });
    }
    let ls = squid_inductance(m, folded)?;
    let c = m.z0 / (4.0 * m.f_bare * ls);
    // x tan x increases from 0 to ∞ on (0, π/2)
    let x = bisect(|x| x * x.tan() - c, 0.0, PI / 2.0 * (1.0 - 1e-15), 1e-16)?;
    Ok(2.0 * m.f_bare * x / PI)
}

/// df/dΦ at `phi`, in MHz per mΦ0.
pub fn flux_sensitivity(m: &ResonatorModel, phi: f64) -> Result<f64, ResonatorError> {
    let h = SENSITIVITY_STEP;
    let d = (resonant_freq(m, phi + h)? - resonant_freq(m, phi - h)?) / (2.0 * h);
    Ok(d * 1e-6 * 1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateShift {
    /// f(op + δ) − f(op − δ) (Hz).
    pub shift_hz: f64,
    /// f(op) / q_total (Hz).
    pub linewidth_hz: f64,
    pub shift_over_linewidth: f64,
}

/// Frequency difference between the two QFP states, which displace the
/// resonator flux by ±`delta_phi` about `op_point`.
pub fn state_shift(m: &ResonatorModel, op_point: f64, delta_phi: f64) -> Result<StateShift, ResonatorError> {
    let shift_hz = resonant_freq(m, op_point + delta_phi)? - resonant_freq(m, op_point - delta_phi)?;
    let linewidth_hz = m.linewidth(resonant_freq(m, op_point)?);
    Ok(StateShift {
        shift_hz,
        linewidth_hz,
        shift_over_linewidth: shift_hz.abs() / linewidth_hz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    /// Energy decay rate (rad/s).
    pub kappa: f64,
    /// 1/κ (s).
    pub ringup: f64,
}

pub fn decay_rate(f0: f64, q: f64) -> DecayRate {
    let kappa = 2.0 * PI * f0 / q;
    DecayRate { kappa, ringup: 1.0 / kappa }
}

/// Parameters of the asymmetric notch lineshape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S21Fit {
    pub f0: f64,
    pub q_total: f64,
    pub q_e_tilde: f64,
    /// Lineshape asymmetry angle (rad).
    pub phi_asym: f64,
    pub amplitude: f64,
    pub f0_sigma: f64,
    pub q_total_sigma: f64,
    pub q_e_tilde_sigma: f64,
    pub phi_asym_sigma: f64,
    pub amplitude_sigma: f64,
}

impl S21Fit {
    pub fn exact(f0: f64, q_total: f64, q_e_tilde: f64, phi_asym: f64, amplitude: f64) -> Self {
        Self {
            f0,
            q_total,
            q_e_tilde,
            phi_asym,
            amplitude,
            f0_sigma: 0.0,
            q_total_sigma: 0.0,
            q_e_tilde_sigma: 0.0,
            phi_asym_sigma: 0.0,
            amplitude_sigma: 0.0,
        }
    }

    pub fn q_external(&self) -> f64 {
        self.q_e_tilde / self.phi_asym.cos()
    }

    /// 1/Q_i = 1/Q − 1/Q_e. Negative values indicate an unphysical fit and
    /// are returned as is.
    pub fn inverse_q_internal(&self) -> f64 {
        1.0 / self.q_total - 1.0 / self.q_external()
    }

    fn params(&self) -> [f64; 5] {
        [self.f0, self.q_total, self.q_e_tilde, self.phi_asym, self.amplitude]
    }

    fn from_params(p: &[f64]) -> Self {
        Self::exact(p[0], p[1], p[2], p[3], p[4])
    }
}

/// |S21| of the asymmetric notch lineshape.
pub fn s21_model(f: f64, fit: &S21Fit) -> f64 {
    let num = Complex64::from_polar(fit.q_total / fit.q_e_tilde, fit.phi_asym);
    let den = Complex64::new(1.0, 2.0 * fit.q_total * (f - fit.f0) / fit.f0);
    fit.amplitude * (Complex64::new(1.0, 0.0) - num / den).norm()
}

#[derive(Debug, Clone, Copy)]
pub struct S21FitOptions {
    pub n_bootstrap: usize,
    pub seed: u64,
}

impl Default for S21FitOptions {
    fn default() -> Self {
        Self {
            n_bootstrap: 500,
            seed: 0,
        }
    }
}

pub const S21_MIN_POINTS: usize = 20;
pub const S21_MIN_SPAN_LINEWIDTHS: f64 = 3.0;

/// Report written next to a fit: the fit plus derived quality factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S21Report {
    #[serde(flatten)]
    pub fit: S21Fit,
    pub q_external: f64,
    pub inverse_q_internal: f64,
    pub internal_loss_negative: bool,
    pub n_bootstrap: usize,
    pub seed: u64,
}

impl S21Report {
    pub fn new(fit: S21Fit, opts: S21FitOptions) -> Self {
        let inv = fit.inverse_q_internal();
        Self {
            fit,
            q_external: fit.q_external(),
            inverse_q_internal: inv,
            internal_loss_negative: inv < 0.0,
            n_bootstrap: opts.n_bootstrap,
            seed: opts.seed,
        }
    }
}

fn guess(trace: &[(f64, f64)]) -> Result<S21Fit, FitError> {
    let n = trace.len();
    let edge = (n / 10).max(1);
    let amplitude = (trace[..edge].iter().chain(&trace[n - edge..]).map(|p| p.1).sum::<f64>()) / (2 * edge) as f64;
    let (imin, &(f_dip, y_min)) = trace
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("trace is non-empty");
    let depth = (y_min / amplitude).clamp(0.0, 0.999);
    // |S21|² is halfway between its floor and the baseline one half
    // linewidth from the dip.
    let half = amplitude * ((depth * depth + 1.0) / 2.0).sqrt();
    let left = trace[..=imin].windows(2).rev().find_map(|w| {
        (w[0].1 >= half && w[1].1 < half).then(|| w[0].0 + (half - w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0))
    });
    let right = trace[imin..].windows(2).find_map(|w| {
        (w[0].1 < half && w[1].1 >= half).then(|| w[0].0 + (half - w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0))
    });
    let (f_lo, f_hi) = (trace[0].0, trace[n - 1].0);
    let fwhm = match (left, right) {
        (Some(a), Some(b)) => b - a,
        (Some(a), None) => 2.0 * (f_dip - a),
        (None, Some(b)) => 2.0 * (b - f_dip),
        // both half points are outside the trace: the linewidth is at
        // least twice the larger dip-to-edge distance
        (None, None) => 2.0 * (f_dip - f_lo).max(f_hi - f_dip),
    };
    let span = (f_hi - f_lo) / fwhm;
    if !(span >= S21_MIN_SPAN_LINEWIDTHS) {
        return Err(FitError::InsufficientSpan {
            span_linewidths: span,
            required: S21_MIN_SPAN_LINEWIDTHS,
        });
    }
    let q = f_dip / fwhm;
    Ok(S21Fit::exact(f_dip, q, q / (1.0 - depth), 0.0, amplitude))
}

fn least_squares(trace: &[(f64, f64)], start: &S21Fit) -> Result<S21Fit, FitError> {
    // Scaled coordinates: f0 in linewidths, the rest relative to the start.
    let s = start.params();
    let lw = s[0] / s[1];
    let unscale = |q: &[f64]| [s[0] + q[0] * lw, s[1] * q[1], s[2] * q[2], q[3], s[4] * q[4]];
    let sol = levenberg_marquardt(
        |q, out| {
            let fit = S21Fit::from_params(&unscale(q));
            for (o, &(f, y)) in out.iter_mut().zip(trace) {
                *o = s21_model(f, &fit) - y;
            }
        },
        |q| q[1] > 0.0 && q[2] > 0.0 && q[4] > 0.0 && q[3].abs() < PI / 2.0,
        &[0.0, 1.0, 1.0, s[3], 1.0],
        trace.len(),
        LmOptions::default(),
    )?;
    Ok(S21Fit::from_params(&unscale(&sol.params)))
}

/// Fits the notch lineshape to a magnitude trace `(Hz, |S21|)` and estimates
/// uncertainties by residual bootstrap.
pub fn fit_s21(trace: &[(f64, f64)], opts: S21FitOptions) -> Result<S21Fit, FitError> {
    if trace.len() < S21_MIN_POINTS {
        return Err(FitError::InsufficientData(format!(
            "need at least {S21_MIN_POINTS} points, got {}",
            trace.len()
        )));
    }
    let mut trace = trace.to_vec();
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));
    if trace.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(FitError::InsufficientData("non-finite trace value".into()));
    }
    let start = guess(&trace)?;
    let best = least_squares(&trace, &start)?;
    let span = (trace[trace.len() - 1].0 - trace[0].0) / (best.f0 / best.q_total);
    if span < S21_MIN_SPAN_LINEWIDTHS {
        return Err(FitError::InsufficientSpan {
            span_linewidths: span,
            required: S21_MIN_SPAN_LINEWIDTHS,
        });
    }
    if opts.n_bootstrap < 2 {
        return Ok(best);
    }

    let model: Vec<f64> = trace.iter().map(|&(f, _)| s21_model(f, &best)).collect();
    let resid: Vec<f64> = trace.iter().zip(&model).map(|(p, m)| p.1 - m).collect();
    let refits: Vec<Option<[f64; 5]>> = (0..opts.n_bootstrap)
        .into_par_iter()
        .map(|b| {
            use rand::Rng;
            let mut rng = rng::stream(opts.seed, &[b as u64]);
            let resampled: Vec<(f64, f64)> = trace
                .iter()
                .zip(&model)
                .map(|(&(f, _), m)| (f, m + resid[rng.random_range(0..resid.len())]))
                .collect();
            least_squares(&resampled, &best).ok().map(|f| f.params())
        })
        .collect();
    let ok: Vec<[f64; 5]> = refits.into_iter().flatten().collect();
    if ok.len() < opts.n_bootstrap.div_ceil(2) {
        return Err(FitError::NonConvergence { iterations: 0 });
    }
    let mut sigma = [0.0; 5];
    for (k, s) in sigma.iter_mut().enumerate() {
        let mean = ok.iter().map(|p| p[k]).sum::<f64>() / ok.len() as f64;
        let var = ok.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64;
        *s = var.sqrt();
    }
    Ok(S21Fit {
        f0_sigma: sigma[0],
        q_total_sigma: sigma[1],
        q_e_tilde_sigma: sigma[2],
        phi_asym_sigma: sigma[3],
        amplitude_sigma: sigma[4],
        ..best
    })
}

/// Trace of `n` points spanning `span_linewidths` linewidths around f0,
/// with multiplicative Gaussian noise of relative size `rel_noise`.
pub fn synthetic_trace(truth: &S21Fit, n: usize, span_linewidths: f64, rel_noise: f64, seed: u64) -> Vec<(f64, f64)> {
    let lw = truth.f0 / truth.q_total;
    let mut rng = rng::stream(seed, &[]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let f = truth.f0 + (i as f64 / (n - 1) as f64 - 0.5) * span_linewidths * lw;
            (f, s21_model(f, truth) * (1.0 + rel_noise * normal.sample(&mut rng)))
        })
        .collect()
}

pub const S21_CSV_HEADER: [&str; 2] = ["freq_hz", "s21_mag"];

pub fn write_s21_csv<W: Write>(trace: &[(f64, f64)], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(S21_CSV_HEADER)?;
    for (f, y) in trace {
        w.write_record([format!("{f:.17e}"), format!("{y:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_s21_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>, crate::Error> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != S21_CSV_HEADER {
        return Err(FitError::InsufficientData("S21 CSV header must be freq_hz,s21_mag".into()).into());
    }
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let (f, y): (f64, f64) = rec?;
        out.push((f, y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model() -> ResonatorModel {
        ResonatorModel::calibrated(&DeviceParams::fabricated()).unwrap()
    }

    #[test]
    fn beta_rf_from_fabricated() {
        assert!((model().beta_rf - 0.7256021).abs() < 1e-6);
    }

    #[test]
    fn squid_phase_matches_bisection() {
        let m = model();
        assert_eq!(squid_phase(&m, 0.0).unwrap(), 0.0);
        let x = squid_phase(&m, 0.25).unwrap();
        assert!((x + m.beta_rf * x.sin() - PI / 2.0).abs() < 1e-12);
        // independent bisection oracle
        let (mut a, mut b) = (0.0f64, PI);
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if c + m.beta_rf * c.sin() < PI / 2.0 {
                a = c
            } else {
                b = c
            }
        }
        assert!((x - a).abs() < 1e-12);
        let strong = ResonatorModel { beta_rf: 1.2, ..m };
        assert!(matches!(squid_phase(&strong, 0.1), Err(ResonatorError::MultivaluedRegime { .. })));
    }

    #[test]
    fn calibrated_sweet_spot() {
        let m = model();
        let f0 = resonant_freq(&m, 0.0).unwrap();
        assert!((f0 - 6.46e9).abs() < 1e-3, "{f0}");
        assert!((m.f_bare - 6.868140943e9).abs() < 1e3, "{}", m.f_bare);
    }

    #[test]
    fn tuning_range_and_window() {
        let m = model();
        let range = resonant_freq(&m, 0.0).unwrap() - resonant_freq(&m, 0.48).unwrap();
        assert!((range - 1.2086e9).abs() < 1e6, "{range}");
        assert!(matches!(resonant_freq(&m, 0.49), Err(ResonatorError::OutsideValidityWindow { .. })));
        assert!(matches!(resonant_freq(&m, -1.505), Err(ResonatorError::OutsideValidityWindow { .. })));
    }

    #[test]
    fn sensitivity_and_shift() {
        let m = model();
        assert_eq!(flux_sensitivity(&m, 0.0).unwrap(), 0.0);
        let s = flux_sensitivity(&m, 0.25).unwrap();
        assert!((s + 0.8600).abs() < 1e-3, "{s}");
        let sh = state_shift(&m, 0.25, 0.05).unwrap();
        assert!((sh.shift_hz + 89.11e6).abs() < 0.05e6, "{sh:?}");
        assert!(sh.shift_over_linewidth > 9.0 && sh.shift_over_linewidth < 11.0);
        assert_eq!(state_shift(&m, 0.25, 0.0).unwrap().shift_hz, 0.0);
        let small = state_shift(&m, 0.25, 1e-3).unwrap().shift_hz;
        let lin = 2.0 * 1e-3 * s * 1e6 * 1e3;
        assert!((small - lin).abs() < 0.01 * lin.abs());
    }

    #[test]
    fn s21_values() {
        let fit = S21Fit::exact(6.46e9, 720.0, 760.0, 0.0, 1.0);
        assert!((s21_model(6.46e9, &fit) - 0.05263157894736842).abs() < 1e-15);
        assert!((s21_model(1e15, &fit) - 1.0).abs() < 1e-6);
        let a = S21Fit { amplitude: 0.3, ..fit };
        assert!((s21_model(6.46e9, &a) - 0.3 * (1.0 - 720.0 / 760.0)).abs() < 1e-15);
    }

    #[test]
    fn decay_values() {
        let d = decay_rate(6.46e9, 720.0);
        assert!((d.ringup - 17.7386e-9).abs() < 1e-4 * 17.7e-9);
        assert_eq!(decay_rate(6.46e9, f64::INFINITY).ringup, f64::INFINITY);
        assert!((decay_rate(6.46e9, 360.0).ringup * 2.0 - d.ringup).abs() < 1e-22);
    }

    #[test]
    fn noiseless_s21_round_trip() {
        let truth = S21Fit::exact(6.3e9, 720.0, 760.0, 0.15, 0.8);
        let fit = fit_s21(&synthetic_trace(&truth, 201, 10.0, 0.0, 0), S21FitOptions { n_bootstrap: 0, seed: 0 }).unwrap();
        for (g, w) in fit.params().iter().zip(truth.params()) {
            assert!((g - w).abs() <= 1e-8 * w.abs(), "{g} vs {w}");
        }
    }

    #[test]
    fn short_span_is_rejected() {
        let truth = S21Fit::exact(6.3e9, 720.0, 760.0, 0.0, 1.0);
        let err = fit_s21(&synthetic_trace(&truth, 50, 0.5, 0.0, 0), S21FitOptions::default()).unwrap_err();
        assert!(matches!(err, FitError::InsufficientSpan { .. }), "{err}");
        assert!(matches!(
            fit_s21(&synthetic_trace(&truth, 10, 10.0, 0.0, 0), S21FitOptions::default()),
            Err(FitError::InsufficientData(_))
        ));
    }

    #[test]
    fn recovery_improves_with_lower_noise() {
        let truth = S21Fit::exact(6.46e9, 720.0, 760.0, 0.05, 1.0);
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&noise| {
                let fit = fit_s21(&synthetic_trace(&truth, 201, 10.0, noise, 4), S21FitOptions { n_bootstrap: 0, seed: 0 }).unwrap();
                (fit.q_total / 720.0 - 1.0).abs() + (fit.q_e_tilde / 760.0 - 1.0).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let truth = S21Fit::exact(6.46e9, 720.0, 760.0, 0.0, 1.0);
        let trace = synthetic_trace(&truth, 101, 10.0, 1e-2, 2);
        let opts = S21FitOptions { n_bootstrap: 40, seed: 11 };
        assert_eq!(fit_s21(&trace, opts).unwrap(), fit_s21(&trace, opts).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let trace = vec![(6.4e9, 0.9), (6.5e9, 0.1)];
        let mut buf = Vec::new();
        write_s21_csv(&trace, &mut buf).unwrap();
        assert_eq!(read_s21_csv(&buf[..]).unwrap(), trace);
    }

    proptest! {
        #[test]
        fn frequency_even_and_periodic(k in -2000i64..2000, n in -3i64..3) {
            // dyadic fluxes keep φ + n exactly representable
            let phi = k as f64 / 4096.0;
            let m = model();
            if let Ok(f) = resonant_freq(&m, phi) {
                prop_assert_eq!(f, resonant_freq(&m, phi + n as f64).unwrap());
                prop_assert_eq!(f, resonant_freq(&m, -phi).unwrap());
                prop_assert!(f <= resonant_freq(&m, 0.0).unwrap());
            }
        }

        #[test]
        fn frequency_decreasing_on_half_period(a in 0.0f64..0.48, b in 0.0f64..0.48) {
            let m = model();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(resonant_freq(&m, lo).unwrap() > resonant_freq(&m, hi).unwrap());
        }

        #[test]
        fn sensitivity_is_odd(phi in 0.001f64..0.47) {
            let m = model();
            prop_assert_eq!(flux_sensitivity(&m, -phi).unwrap(), -flux_sensitivity(&m, phi).unwrap());
        }
    }
}
