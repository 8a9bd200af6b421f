//! Single-shot dispersive readout: ringup response, integrated signal,
//! histogram analysis and fidelity.
//!
//! The QFP latches one of two flux offsets into the tunable resonator, which
//! moves it to `f_left` or `f_right`. The probe tone sits in the L-state dip.
//! After switch-on the transmitted level relaxes from its idle value to the
//! state's steady-state |S21| with time constant 2/κ:
//!
//! ```text
//! μ_s(t) = s_s + (s_idle − s_s) e^{−t/τ},   τ = 2/κ
//! V_s(T) = scale · ∫₀^T μ_s dt + N(0, σ_rate² T)
//! ```
//!
//! `scale` makes the noiseless L/R separation at T = 1 µs equal to 1.
//! State-preparation and QFP latching errors flip the actual state of a
//! shot while its label stays as prepared.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::qfp::{separation_fidelity, SCurveFit};
use crate::resonator::{decay_rate, resonant_freq, s21_model, ResonatorError, ResonatorModel, S21Fit};
use crate::rng;
use crate::schedule::QubitState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("no shots prepared in state {0}")]
    MissingState(QubitState),
    #[error("{count} shots prepared in state {state}, need at least {min}")]
    TooFewShots { state: QubitState, count: usize, min: usize },
    #[error("histograms form a single peak (separation {separation_sigmas:.3} sigma)")]
    SinglePeak { separation_sigmas: f64 },
    #[error("robust Gaussian fit for state {0} did not converge")]
    FitNonConvergence(QubitState),
    #[error("overlap {target} is unattainable (largest reachable {max})")]
    Unattainable { target: f64, max: f64 },
    #[error(transparent)]
    Resonator(#[from] ResonatorError),
}

pub const MIN_INTEGRATION_TIME: f64 = 2e-9;
pub const MIN_SHOTS_PER_STATE: usize = 1000;
/// Half-width of the window used by the robust peak fit (σ).
pub const FIT_WINDOW_SIGMAS: f64 = 4.0;
/// Integration time at which the noiseless separation is normalised to 1 (s).
pub const NORMALIZATION_TIME: f64 = 1e-6;
/// Resonator flux with the QFP unlatched (Φ0).
pub const DEFAULT_OPERATING_FLUX: f64 = 0.25;
/// Flux the latched QFP adds to the resonator, per state (Φ0).
pub const DEFAULT_STATE_FLUX: f64 = 0.05;
/// State-preparation error per prepared state.
pub const DEFAULT_PREP_ERROR: f64 = 0.00425;
/// Overlap error and integration time the noise is calibrated to.
pub const CALIBRATION_OVERLAP: f64 = 0.0043;
pub const CALIBRATION_TIME: f64 = 80e-9;
/// Smallest separation/σ at one integration time calibrate_noise will
/// accept; targets needing less are unattainable.
pub const MIN_SEPARATION_SIGMAS: f64 = 1e-6;
/// Histograms closer than this (pooled σ) are treated as one peak.
pub const SINGLE_PEAK_SIGMAS: f64 = 2.0;

/// Reference s-curves of the latching stage (centres ±, widths in Φ0).
pub const REFERENCE_SCURVE_CENTER: f64 = 5.36e-3;
pub const REFERENCE_SCURVE_WIDTHS: (f64, f64) = (1.38e-3, 1.42e-3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub f_drive: f64,
    /// Resonator frequency with the QFP unlatched (Hz).
    pub f_idle: f64,
    pub f_left: f64,
    pub f_right: f64,
    pub q_total: f64,
    pub q_external: f64,
    /// Resonator energy decay rate (rad/s).
    pub kappa: f64,
    /// Probability a prepared state is actually the other one.
    pub prep_error: f64,
    /// Probability the QFP latches the wrong way, per state.
    pub latch_error: f64,
    /// White-noise amplitude of the integrated signal (units/√s).
    pub noise_sigma_rate: f64,
}

impl ReadoutModel {
    /// Noise-free model of the device's resonator at the default operating
    /// point, probe parked in the L-state dip.
    pub fn from_device(p: &DeviceParams, prep_error: f64, latch_error: f64) -> Result<Self, ReadoutError> {
        let res = ResonatorModel::calibrated(p)?;
        let f_idle = resonant_freq(&res, DEFAULT_OPERATING_FLUX)?;
        let f_left = resonant_freq(&res, DEFAULT_OPERATING_FLUX - DEFAULT_STATE_FLUX)?;
        let f_right = resonant_freq(&res, DEFAULT_OPERATING_FLUX + DEFAULT_STATE_FLUX)?;
        let m = Self {
            f_drive: f_left,
            f_idle,
            f_left,
            f_right,
            q_total: p.q_total,
            q_external: p.q_external,
            kappa: decay_rate(f_left, p.q_total).kappa,
            prep_error,
            latch_error,
            noise_sigma_rate: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    /// Device model with the default preparation error, latching error from
    /// the reference s-curves and noise calibrated to
    /// [`CALIBRATION_OVERLAP`] at [`CALIBRATION_TIME`].
    pub fn calibrated(p: &DeviceParams) -> Result<Self, ReadoutError> {
        let m = Self::from_device(p, DEFAULT_PREP_ERROR, reference_latch_error())?;
        let rate = calibrate_noise(CALIBRATION_OVERLAP, CALIBRATION_TIME, &m)?;
        Ok(m.with_noise(rate))
    }

    pub fn with_noise(mut self, noise_sigma_rate: f64) -> Self {
        self.noise_sigma_rate = noise_sigma_rate;
        self
    }

    pub fn with_errors(mut self, prep_error: f64, latch_error: f64) -> Self {
        self.prep_error = prep_error;
        self.latch_error = latch_error;
        self
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        for (name, value) in [
            ("f_drive", self.f_drive),
            ("f_idle", self.f_idle),
            ("f_left", self.f_left),
            ("f_right", self.f_right),
            ("q_total", self.q_total),
            ("q_external", self.q_external),
            ("kappa", self.kappa),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ReadoutError::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("prep_error", self.prep_error), ("latch_error", self.latch_error)] {
            if !(0.0..=0.5).contains(&value) {
                return Err(ReadoutError::InvalidParameter { name, value });
            }
        }
        if !(self.noise_sigma_rate.is_finite() && self.noise_sigma_rate >= 0.0) {
            return Err(ReadoutError::InvalidParameter { name: "noise_sigma_rate", value: self.noise_sigma_rate });
        }
        if self.level(QubitState::L) == self.level(QubitState::R) {
            return Err(ReadoutError::InvalidParameter { name: "f_right", value: self.f_right });
        }
        Ok(())
    }

    fn transmission(&self, f_resonator: f64) -> f64 {
        s21_model(self.f_drive, &S21Fit::exact(f_resonator, self.q_total, self.q_external, 0.0, 1.0))
    }

    /// Steady-state transmission with the resonator in `state`.
    pub fn level(&self, state: QubitState) -> f64 {
        self.transmission(match state {
            QubitState::L => self.f_left,
            QubitState::R => self.f_right,
        })
    }

    pub fn idle_level(&self) -> f64 {
        self.transmission(self.f_idle)
    }

    /// Amplitude relaxation time 2/κ (s).
    pub fn ringup_time(&self) -> f64 {
        2.0 / self.kappa
    }

    /// ∫₀^T (1 − e^{−t/τ}) dt.
    fn settled_time(&self, t: f64) -> f64 {
        let tau = self.ringup_time();
        t + tau * (-t / tau).exp_m1()
    }

    pub fn signal_scale(&self) -> f64 {
        1.0 / ((self.level(QubitState::R) - self.level(QubitState::L)).abs() * self.settled_time(NORMALIZATION_TIME))
    }

    /// Noiseless integrated signal of a shot whose actual state is `state`.
    pub fn mean_signal(&self, state: QubitState, t_int: f64) -> f64 {
        let s = self.level(state);
        let tau = self.ringup_time();
        self.signal_scale() * (s * t_int - (self.idle_level() - s) * tau * (-t_int / tau).exp_m1())
    }

    /// Probability a shot ends up in the other state (either error, not
    /// both).
    pub fn flip_probability(&self) -> f64 {
        let (e, l) = (self.prep_error, self.latch_error);
        e + l - 2.0 * e * l
    }

    /// Noise-only Gaussian of each state at `t_int`.
    pub fn predicted_fit(&self, state: QubitState, t_int: f64) -> GaussianFit {
        GaussianFit {
            mean: self.mean_signal(state, t_int),
            sigma: self.noise_sigma_rate * t_int.sqrt(),
            weight: 1.0,
        }
    }

    pub fn predicted_overlap(&self, t_int: f64) -> f64 {
        overlap_error(&self.predicted_fit(QubitState::L, t_int), &self.predicted_fit(QubitState::R, t_int))
    }
}

/// Wrong-latch probability per state implied by the reference s-curves.
pub fn reference_latch_error() -> f64 {
    let (wl, wr) = REFERENCE_SCURVE_WIDTHS;
    let report = separation_fidelity(
        &SCurveFit::ideal(-REFERENCE_SCURVE_CENTER, wl),
        &SCurveFit::ideal(REFERENCE_SCURVE_CENTER, wr),
    );
    (1.0 - report.f_sep_max) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub prepared: QubitState,
    pub integrated_signal: f64,
    pub t_int_s: f64,
}

fn check_time(t_int: f64) -> Result<(), ReadoutError> {
    if t_int.is_finite() && t_int >= MIN_INTEGRATION_TIME {
        Ok(())
    } else {
        Err(ReadoutError::InvalidParameter { name: "t_int", value: t_int })
    }
}

pub fn simulate_shot<R: Rng>(
    state: QubitState,
    t_int: f64,
    model: &ReadoutModel,
    rng: &mut R,
) -> Result<ShotRecord, ReadoutError> {
    check_time(t_int)?;
    let flip = rng.random::<f64>() < model.flip_probability();
    let z: f64 = rng.sample(StandardNormal);
    let actual = if flip { state.other() } else { state };
    Ok(ShotRecord {
        prepared: state,
        integrated_signal: model.mean_signal(actual, t_int) + z * model.noise_sigma_rate * t_int.sqrt(),
        t_int_s: t_int,
    })
}

/// `n_shots` shots alternating L, R. Shot `i` draws from the stream
/// (seed; t_int bits, i), so a time point reproduces on its own.
pub fn ensemble(model: &ReadoutModel, t_int: f64, n_shots: usize, seed: u64) -> Result<Vec<ShotRecord>, ReadoutError> {
    model.validate()?;
    check_time(t_int)?;
    (0..n_shots)
        .into_par_iter()
        .map(|i| {
            let state = if i % 2 == 0 { QubitState::L } else { QubitState::R };
            let mut r = rng::stream(seed, &[t_int.to_bits(), i as u64]);
            simulate_shot(state, t_int, model, &mut r)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
    /// Fraction of the state's shots inside the fitted peak.
    pub weight: f64,
}

impl GaussianFit {
    /// P(X > x).
    pub fn tail_above(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            return if x < self.mean {
                1.0
            } else if x > self.mean {
                0.0
            } else {
                0.5
            };
        }
        0.5 * erfc((x - self.mean) / (self.sigma * std::f64::consts::SQRT_2))
    }

    /// P(X < x).
    pub fn tail_below(&self, x: f64) -> f64 {
        GaussianFit { mean: -self.mean, ..*self }.tail_above(-x)
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Variance of a unit Gaussian truncated to ±a.
fn truncated_variance(a: f64) -> f64 {
    let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - 2.0 * a * phi / erf(a / std::f64::consts::SQRT_2)
}

/// Gaussian fit of the dominant peak: iterated ±4σ clipping with a
/// truncation correction, started from median and MAD. Stops when the
/// window no longer changes.
fn robust_gaussian(values: &[f64]) -> Option<GaussianFit> {
    let mut x: Vec<f64> = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let median = |s: &[f64]| {
        let m = s.len();
        if m % 2 == 1 {
            s[m / 2]
        } else {
            0.5 * (s[m / 2 - 1] + s[m / 2])
        }
    };
    let med = median(&x);
    let mut dev: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut mu = med;
    let mut sigma = 1.482_602_218_505_602 * median(&dev);
    let correction = truncated_variance(FIT_WINDOW_SIGMAS);
    let mut window = (usize::MAX, usize::MAX);
    for _ in 0..200 {
        let lo = x.partition_point(|&v| v < mu - FIT_WINDOW_SIGMAS * sigma);
        let hi = x.partition_point(|&v| v <= mu + FIT_WINDOW_SIGMAS * sigma);
        if (lo, hi) == window {
            return Some(GaussianFit { mean: mu, sigma, weight: (hi - lo) as f64 / n as f64 });
        }
        if hi <= lo {
            return None;
        }
        window = (lo, hi);
        let s = &x[lo..hi];
        let m = s.len() as f64;
        // Deviations from the median keep a constant peak exact.
        let shift = s.iter().map(|v| v - med).sum::<f64>() / m;
        mu = med + shift;
        let var = s.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m;
        sigma = (var / correction).sqrt();
    }
    None
}

/// Point between the means where the two fitted densities are equal.
pub fn intersection_threshold(a: &GaussianFit, b: &GaussianFit) -> f64 {
    let (lo, hi) = if a.mean <= b.mean { (a, b) } else { (b, a) };
    let mid = 0.5 * (lo.mean + hi.mean);
    if lo.sigma == hi.sigma || lo.sigma == 0.0 || hi.sigma == 0.0 {
        return mid;
    }
    let (va, vb) = (lo.sigma * lo.sigma, hi.sigma * hi.sigma);
    let qa = 1.0 / va - 1.0 / vb;
    let qb = -2.0 * (lo.mean / va - hi.mean / vb);
    let qc = lo.mean * lo.mean / va - hi.mean * hi.mean / vb + 2.0 * (lo.sigma / hi.sigma).ln();
    let disc = qb * qb - 4.0 * qa * qc;
    let inside = |x: f64| x.is_finite() && x >= lo.mean && x <= hi.mean;
    if disc >= 0.0 {
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        for root in [q / qa, qc / q] {
            if inside(root) {
                return root;
            }
        }
    }
    // No crossing between the means: one density dominates, so the error
    // sum is minimised at an end of the interval.
    let err = |t: f64| lo.tail_above(t) + hi.tail_below(t);
    if err(lo.mean) <= err(hi.mean) {
        lo.mean
    } else {
        hi.mean
    }
}

/// Misclassification probability of the two Gaussians (sum of both
/// conditional errors) at the intersection threshold.
pub fn overlap_error(a: &GaussianFit, b: &GaussianFit) -> f64 {
    let t = intersection_threshold(a, b);
    let (lo, hi) = if a.mean <= b.mean { (a, b) } else { (b, a) };
    lo.tail_above(t) + hi.tail_below(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramAnalysis {
    pub fit_l: GaussianFit,
    pub fit_r: GaussianFit,
    pub threshold: f64,
    pub fidelity: f64,
    pub p_l_given_r: f64,
    pub p_r_given_l: f64,
    /// Conditional errors implied by the fitted peaks and their weights.
    pub predicted_p_l_given_r: f64,
    pub predicted_p_r_given_l: f64,
    pub overlap_error: f64,
    /// |mean separation| over the pooled σ, √((σ_L² + σ_R²)/2).
    pub sigma_separation: f64,
    pub n_l: usize,
    pub n_r: usize,
}

pub fn analyze_histograms(shots: &[ShotRecord]) -> Result<HistogramAnalysis, ReadoutError> {
    let values = |s: QubitState| -> Vec<f64> {
        shots.iter().filter(|r| r.prepared == s).map(|r| r.integrated_signal).collect()
    };
    let (xl, xr) = (values(QubitState::L), values(QubitState::R));
    for (state, xs) in [(QubitState::L, &xl), (QubitState::R, &xr)] {
        if xs.is_empty() {
            return Err(ReadoutError::MissingState(state));
        }
        if xs.len() < MIN_SHOTS_PER_STATE {
            return Err(ReadoutError::TooFewShots { state, count: xs.len(), min: MIN_SHOTS_PER_STATE });
        }
        if let Some(&v) = xs.iter().find(|v| !v.is_finite()) {
            return Err(ReadoutError::InvalidParameter { name: "integrated_signal", value: v });
        }
    }
    let fit_l = robust_gaussian(&xl).ok_or(ReadoutError::FitNonConvergence(QubitState::L))?;
    let fit_r = robust_gaussian(&xr).ok_or(ReadoutError::FitNonConvergence(QubitState::R))?;

    let pooled = ((fit_l.sigma.powi(2) + fit_r.sigma.powi(2)) / 2.0).sqrt();
    let separation = (fit_r.mean - fit_l.mean).abs();
    let sigma_separation = if pooled > 0.0 { separation / pooled } else { f64::INFINITY };
    if separation == 0.0 || sigma_separation < SINGLE_PEAK_SIGMAS {
        return Err(ReadoutError::SinglePeak { separation_sigmas: if separation == 0.0 { 0.0 } else { sigma_separation } });
    }

    let threshold = intersection_threshold(&fit_l, &fit_r);
    let r_above = fit_r.mean > fit_l.mean;
    let reads_r = |v: f64| if r_above { v > threshold } else { v < threshold };
    let frac = |xs: &[f64], want_r: bool| xs.iter().filter(|&&v| reads_r(v) == want_r).count() as f64 / xs.len() as f64;
    let p_r_given_l = frac(&xl, true);
    let p_l_given_r = frac(&xr, false);

    // P(read other | prepared) for a mixture of the own and the other peak.
    let reads_r_prob = |g: &GaussianFit| if r_above { g.tail_above(threshold) } else { g.tail_below(threshold) };
    let reads_l_prob = |g: &GaussianFit| if r_above { g.tail_below(threshold) } else { g.tail_above(threshold) };
    let predicted_p_r_given_l = fit_l.weight * reads_r_prob(&fit_l) + (1.0 - fit_l.weight) * reads_r_prob(&fit_r);
    let predicted_p_l_given_r = fit_r.weight * reads_l_prob(&fit_r) + (1.0 - fit_r.weight) * reads_l_prob(&fit_l);

    Ok(HistogramAnalysis {
        fit_l,
        fit_r,
        threshold,
        fidelity: 1.0 - (p_l_given_r + p_r_given_l),
        p_l_given_r,
        p_r_given_l,
        predicted_p_l_given_r,
        predicted_p_r_given_l,
        overlap_error: overlap_error(&fit_l, &fit_r),
        sigma_separation,
        n_l: xl.len(),
        n_r: xr.len(),
    })
}

/// Noise rate at which the model's predicted overlap at `t_int` equals
/// `target_overlap`.
pub fn calibrate_noise(target_overlap: f64, t_int: f64, model: &ReadoutModel) -> Result<f64, ReadoutError> {
    if !(target_overlap > 0.0 && target_overlap < 1.0) {
        return Err(ReadoutError::InvalidParameter { name: "target_overlap", value: target_overlap });
    }
    check_time(t_int)?;
    model.validate()?;
    let sep = (model.mean_signal(QubitState::R, t_int) - model.mean_signal(QubitState::L, t_int)).abs();
    let at = |rate: f64| model.with_noise(rate).predicted_overlap(t_int);
    let rate_for = |sigmas: f64| sep / (sigmas * t_int.sqrt());
    let (mut lo, mut hi) = (rate_for(1e3).ln(), rate_for(MIN_SEPARATION_SIGMAS).ln());
    let max = at(hi.exp());
    if target_overlap >= max {
        return Err(ReadoutError::Unattainable { target: target_overlap, max });
    }
    let min = at(lo.exp());
    if target_overlap <= min {
        return Err(ReadoutError::Unattainable { target: target_overlap, max: min });
    }
    while hi - lo > 1e-15 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if at(mid.exp()) < target_overlap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub t_int_s: f64,
    pub fidelity: f64,
    pub overlap_error: f64,
    pub analysis: HistogramAnalysis,
}

pub fn fidelity_vs_time(
    model: &ReadoutModel,
    times: &[f64],
    n_shots: usize,
    seed: u64,
) -> Result<Vec<FidelityPoint>, ReadoutError> {
    times
        .iter()
        .map(|&t| {
            let a = analyze_histograms(&ensemble(model, t, n_shots, seed)?)?;
            Ok(FidelityPoint { t_int_s: t, fidelity: a.fidelity, overlap_error: a.overlap_error, analysis: a })
        })
        .collect()
}

pub const SHOT_CSV_HEADER: [&str; 3] = ["prepared", "integrated_signal", "t_int_s"];

pub fn write_shots_csv<W: Write>(shots: &[ShotRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SHOT_CSV_HEADER)?;
    for s in shots {
        w.write_record([s.prepared.to_string(), format!("{:.17e}", s.integrated_signal), format!("{:.17e}", s.t_int_s)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_shots_csv<R: Read>(input: R) -> Result<Vec<ShotRecord>, crate::Error> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let (prepared, integrated_signal, t_int_s): (String, f64, f64) = rec?;
        let prepared = prepared.parse().map_err(|e: String| {
            crate::Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?;
        check_time(t_int_s)?;
        out.push(ShotRecord { prepared, integrated_signal, t_int_s });
    }
    Ok(out)
}
