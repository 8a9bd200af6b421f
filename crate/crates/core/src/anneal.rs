//! Quasi-static anneal-and-latch simulator for the qubit and its QFP.
//!
//! Each loop is a reduced RF-SQUID with a compound (two-junction) x-loop:
//!
//! ```text
//! U(φ) = (Φ0/2π)²/(2L) (φ − 2πΦ_tot)² − (Φ0/2π) Ic [(1+d) cos(φ − πΦx) + (1−d) cos(φ + πΦx)]
//! ```
//!
//! which equals `−(Φ0/2π) Ic_eff(Φx) cos(φ − δ)` with
//! `Ic_eff = 2 Ic cos(πΦx) √(1 + d² tan²(πΦx))` and `δ = atan(d tan(πΦx))`.
//! The two loops share a mutual inductance, so the total flux of each
//! includes `M · I_other / Φ0`. At every time step the pair of phases is
//! moved to the nearest local minimum of the joint inductive energy,
//! continuing from the previous step; persistent currents follow as
//! `I = −(Φ0/2π)(φ − 2πΦ_tot)/L`.
//!
//! The qubit's loop inductance is an effective value chosen so that its
//! latched current at Φx = Φ0 equals `ip_qubit` (see
//! [`qubit_inductance`]).

use std::f64::consts::PI;
use std::io::Write;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::qfp::ScurveSample;
use crate::rng;
use crate::schedule::{eval_schedule, BiasSchedule, ControlLine, FluxBias};
use crate::{PHI0, PHI0_REDUCED};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnealError {
    #[error("time step {dt_s:e} s resolves the fastest ramp ({ramp_s:e} s) in only {steps:.1} steps; need at least {MIN_STEPS_PER_RAMP}")]
    UnresolvedRamp { ramp_s: f64, dt_s: f64, steps: f64 },
    #[error("equilibrium did not converge at step {step} (t = {time_s:e} s)")]
    NonConvergence { step: usize, time_s: f64 },
    #[error("qubit persistent current {ip:e} A cannot be reached with x-loop critical current {ic:e} A (need ip < 2 ic)")]
    Calibration { ip: f64, ic: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub const MIN_STEPS_PER_RAMP: f64 = 100.0;
/// Default integration step (s).
pub const DEFAULT_DT: f64 = 5e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Qubit,
    Qfp,
}

/// Effective qubit loop inductance that makes the latched persistent
/// current at Φx = Φ0 (zero tilt) equal to `p.ip_qub`.
///
/// At Φx = Φ0 the minima satisfy φ = 2b sin φ with b = 2πL·Ic/Φ0 and carry
/// |I| = 2 Ic sin φ, so the deep-well root is φ = π − asin(I / 2Ic).
pub fn qubit_inductance(p: &DeviceParams) -> Result<f64, AnnealError> {
    let ratio = p.ip_qub / (2.0 * p.ic_x_qub);
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(AnnealError::Calibration { ip: p.ip_qub, ic: p.ic_x_qub });
    }
    let phase = PI - ratio.asin();
    let two_b = phase / phase.sin();
    Ok(two_b * PHI0 / (2.0 * PI * 2.0 * p.ic_x_qub))
}

#[derive(Debug, Clone, Copy)]
struct Loop {
    l: f64,
    ic: f64,
    d: f64,
}

impl Loop {
    fn of(p: &DeviceParams, device: Device) -> Result<Self, AnnealError> {
        Ok(match device {
            Device::Qubit => Loop { l: qubit_inductance(p)?, ic: p.ic_x_qub, d: p.d_asym },
            Device::Qfp => Loop { l: p.l_qfp, ic: p.ic_x_qfp, d: 0.0 },
        })
    }

    /// Josephson energy over (Φ0/2π)², and its first two derivatives.
    fn josephson(&self, phase: f64, a: f64) -> (f64, f64, f64) {
        let j = self.ic / PHI0_REDUCED;
        let (s1, c1) = (phase - a).sin_cos();
        let (s2, c2) = (phase + a).sin_cos();
        let (w1, w2) = (1.0 + self.d, 1.0 - self.d);
        (-j * (w1 * c1 + w2 * c2), j * (w1 * s1 + w2 * s2), j * (w1 * c1 + w2 * c2))
    }
}

/// Reduced potential energy (J) of one loop at `phase` with every other
/// loop's coupled flux lumped into `external_flux` (Φ0).
pub fn potential(
    p: &DeviceParams,
    device: Device,
    phase: f64,
    bias: &FluxBias,
    external_flux: f64,
) -> Result<f64, AnnealError> {
    let lp = Loop::of(p, device)?;
    let (z, x) = match device {
        Device::Qubit => (bias.phi_z_qub + p.flux_offset_z, bias.phi_x_qub + p.flux_offset_x),
        Device::Qfp => (bias.phi_z_qfp, bias.phi_x_qfp),
    };
    let dphi = phase - 2.0 * PI * (z + external_flux);
    let (uj, _, _) = lp.josephson(phase, PI * x);
    Ok(PHI0_REDUCED * PHI0_REDUCED * (0.5 * dphi * dphi / lp.l + uj))
}

/// Phase and signed persistent current of both loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatchState {
    pub phase_qub: f64,
    pub phase_qfp: f64,
    pub ip_qub: f64,
    pub ip_qfp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealTrace {
    pub times: Vec<f64>,
    /// Requested biases (before calibration offsets).
    pub biases: Vec<FluxBias>,
    pub states: Vec<LatchState>,
}

/// Coupled two-loop energy in units of (Φ0/2π)², with the per-step bias
/// baked in.
struct Coupled {
    k: [[f64; 2]; 2],
    loops: [Loop; 2],
}

#[derive(Debug, Clone, Copy)]
struct Drive {
    /// 2π × z-flux of each loop, without the mutual contribution.
    center: [f64; 2],
    /// π × x-flux of each loop.
    a: [f64; 2],
}

impl Coupled {
    fn new(p: &DeviceParams) -> Result<Self, AnnealError> {
        let q = Loop::of(p, Device::Qubit)?;
        let f = Loop::of(p, Device::Qfp)?;
        let m = p.m_qub_qfp;
        let det = q.l * f.l - m * m;
        if !(det > 0.0) {
            return Err(AnnealError::InvalidInput(format!(
                "mutual inductance {m:e} H exceeds the geometric mean of the loop inductances"
            )));
        }
        // Φ − Φx = −L I with L = [[Lq, −M], [−M, Lf]]
        Ok(Self {
            k: [[f.l / det, m / det], [m / det, q.l / det]],
            loops: [q, f],
        })
    }

    fn drive(p: &DeviceParams, bias: &FluxBias, extra_qfp: f64) -> Drive {
        Drive {
            center: [
                2.0 * PI * (bias.phi_z_qub + p.flux_offset_z),
                2.0 * PI * (bias.phi_z_qfp + extra_qfp),
            ],
            a: [PI * (bias.phi_x_qub + p.flux_offset_x), PI * bias.phi_x_qfp],
        }
    }

    fn energy(&self, d: &Drive, phi: [f64; 2]) -> f64 {
        let x = [phi[0] - d.center[0], phi[1] - d.center[1]];
        let quad = 0.5 * (self.k[0][0] * x[0] * x[0] + 2.0 * self.k[0][1] * x[0] * x[1] + self.k[1][1] * x[1] * x[1]);
        quad + self.loops[0].josephson(phi[0], d.a[0]).0 + self.loops[1].josephson(phi[1], d.a[1]).0
    }

    fn grad_hess(&self, d: &Drive, phi: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let x = [phi[0] - d.center[0], phi[1] - d.center[1]];
        let (_, g0, h0) = self.loops[0].josephson(phi[0], d.a[0]);
        let (_, g1, h1) = self.loops[1].josephson(phi[1], d.a[1]);
        let g = [
            self.k[0][0] * x[0] + self.k[0][1] * x[1] + g0,
            self.k[1][0] * x[0] + self.k[1][1] * x[1] + g1,
        ];
        let h = [[self.k[0][0] + h0, self.k[0][1]], [self.k[1][0], self.k[1][1] + h1]];
        (g, h)
    }

    /// Gradient in each loop's own natural units (energy / E_L per radian).
    fn scaled(&self, g: [f64; 2]) -> [f64; 2] {
        [g[0] * self.loops[0].l, g[1] * self.loops[1].l]
    }

    fn currents(&self, d: &Drive, phi: [f64; 2]) -> [f64; 2] {
        let x = [phi[0] - d.center[0], phi[1] - d.center[1]];
        [
            -PHI0_REDUCED * (self.k[0][0] * x[0] + self.k[0][1] * x[1]),
            -PHI0_REDUCED * (self.k[1][0] * x[0] + self.k[1][1] * x[1]),
        ]
    }

    /// Local minimum reached by descent from `start`. Where the curvature
    /// is not positive the phases move along the softest direction, downhill
    /// or toward positive phase on an exact tie.
    fn minimize(&self, d: &Drive, start: [f64; 2]) -> Option<[f64; 2]> {
        const TOL: f64 = 1e-12;
        let mut phi = start;
        let mut e = self.energy(d, phi);
        for _ in 0..500 {
            let (g, h) = self.grad_hess(d, phi);
            let gs = self.scaled(g);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let pos_def = h[0][0] > 0.0 && det > 0.0;
            if pos_def && gs[0].abs().max(gs[1].abs()) < TOL {
                return Some(phi);
            }
            let step = if pos_def {
                let s = [
                    -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                    -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
                ];
                let n = s[0].hypot(s[1]);
                let cap = 0.5;
                if n > cap {
                    [s[0] * cap / n, s[1] * cap / n]
                } else {
                    s
                }
            } else {
                let v = softest_direction(h);
                let gv = g[0] * v[0] + g[1] * v[1];
                let sign = if gv != 0.0 { -gv.signum() } else { 1.0 };
                [0.1 * sign * v[0], 0.1 * sign * v[1]]
            };
            // Close to the minimum rounding hides the energy decrease; take
            // the Newton step unconditionally there.
            if pos_def && gs[0].abs().max(gs[1].abs()) < 1e-6 {
                phi = [phi[0] + step[0], phi[1] + step[1]];
                e = self.energy(d, phi);
                continue;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = [phi[0] + alpha * step[0], phi[1] + alpha * step[1]];
                let et = self.energy(d, trial);
                if et < e {
                    phi = trial;
                    e = et;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                return None;
            }
        }
        None
    }
}

/// Unit eigenvector of the smaller eigenvalue of a symmetric 2×2 matrix,
/// oriented so its larger component is positive.
fn softest_direction(h: [[f64; 2]; 2]) -> [f64; 2] {
    let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
    let lam = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let v = if b.abs() > 1e-300 {
        if (a - lam).abs() > (c - lam).abs() {
            [-b, a - lam]
        } else {
            [c - lam, -b]
        }
    } else if a <= c {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let n = v[0].hypot(v[1]);
    let v = [v[0] / n, v[1] / n];
    let big = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if big < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

fn time_grid(s: &BiasSchedule, dt: f64) -> Result<Vec<f64>, AnnealError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(AnnealError::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if let Some(ramp) = s.fastest_ramp() {
        let steps = ramp / dt;
        if steps < MIN_STEPS_PER_RAMP {
            return Err(AnnealError::UnresolvedRamp { ramp_s: ramp, dt_s: dt, steps });
        }
    }
    let (t0, t1) = s.time_span();
    let n = ((t1 - t0) / dt).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * dt).collect();
    if let Some(last) = times.last_mut() {
        *last = t1;
    }
    times.dedup();
    Ok(times)
}

struct Stepper<'a> {
    p: &'a DeviceParams,
    sys: Coupled,
}

impl Stepper<'_> {
    fn equilibrium(&self, bias: &FluxBias, extra_qfp: f64, start: [f64; 2], step: usize, t: f64) -> Result<LatchState, AnnealError> {
        let d = Coupled::drive(self.p, bias, extra_qfp);
        let phi = self
            .sys
            .minimize(&d, start)
            .ok_or(AnnealError::NonConvergence { step, time_s: t })?;
        let i = self.sys.currents(&d, phi);
        Ok(LatchState { phase_qub: phi[0], phase_qfp: phi[1], ip_qub: i[0], ip_qfp: i[1] })
    }

    fn initial_guess(&self, bias: &FluxBias, extra_qfp: f64) -> [f64; 2] {
        Coupled::drive(self.p, bias, extra_qfp).center
    }
}

/// Runs the quasi-static simulation of `s` with step `dt`.
pub fn simulate_anneal(p: &DeviceParams, s: &BiasSchedule, dt: f64) -> Result<AnnealTrace, AnnealError> {
    let times = time_grid(s, dt)?;
    let st = Stepper { p, sys: Coupled::new(p)? };
    let mut biases = Vec::with_capacity(times.len());
    let mut states: Vec<LatchState> = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let bias = eval_schedule(s, t);
        let start = match states.last() {
            Some(prev) => [prev.phase_qub, prev.phase_qfp],
            None => st.initial_guess(&bias, 0.0),
        };
        states.push(st.equilibrium(&bias, 0.0, start, k, t)?);
        biases.push(bias);
    }
    Ok(AnnealTrace { times, biases, states })
}

/// Headline numbers of a readout trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub max_abs_ip_qub: f64,
    pub max_abs_ip_qfp: f64,
    pub amplification: f64,
    pub final_ip_qub: f64,
    pub final_ip_qfp: f64,
}

impl AnnealTrace {
    pub fn summary(&self) -> TraceSummary {
        let max_q = self.states.iter().map(|s| s.ip_qub.abs()).fold(0.0, f64::max);
        let max_f = self.states.iter().map(|s| s.ip_qfp.abs()).fold(0.0, f64::max);
        let last = self.states.last().copied().unwrap_or(LatchState {
            phase_qub: 0.0,
            phase_qfp: 0.0,
            ip_qub: 0.0,
            ip_qfp: 0.0,
        });
        TraceSummary {
            max_abs_ip_qub: max_q,
            max_abs_ip_qfp: max_f,
            amplification: max_f / max_q,
            final_ip_qub: last.ip_qub,
            final_ip_qfp: last.ip_qfp,
        }
    }

    /// State at the last grid time not after `t`.
    pub fn at(&self, t: f64) -> LatchState {
        let k = self.times.partition_point(|&x| x <= t).saturating_sub(1);
        self.states[k]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_CSV_HEADER)?;
        for ((t, b), s) in self.times.iter().zip(&self.biases).zip(&self.states) {
            w.write_record(
                [*t, b.phi_x_qub, b.phi_z_qub, b.phi_x_qfp, b.phi_z_qfp, s.ip_qub * 1e9, s.ip_qfp * 1e9]
                    .map(|v| format!("{v:.17e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const TRACE_CSV_HEADER: [&str; 7] = ["t_s", "phi_x_qub", "phi_z_qub", "phi_x_qfp", "phi_z_qfp", "ip_qub_na", "ip_qfp_na"];

/// Lowest x-flux in (0.5, 1) at which the loop's potential becomes double
/// welled: the curvature at the barrier position goes negative.
pub fn double_well_onset(p: &DeviceParams, device: Device) -> Result<f64, AnnealError> {
    let lp = Loop::of(p, device)?;
    let curvature = |x: f64| {
        let a = PI * x;
        let delta = (lp.d * a.tan()).atan();
        // barrier sits at φ = δ when the parabola is centred there
        1.0 / lp.l + lp.josephson(delta, a).2
    };
    let (mut lo, mut hi) = (0.5 + 1e-12, 1.0);
    if curvature(hi) >= 0.0 {
        return Err(AnnealError::InvalidInput(format!("{device:?} never becomes bistable")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if curvature(mid) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Time at which the QFP x-bias reaches its final breakpoint: the latched
/// sign is read there.
fn read_time(s: &BiasSchedule) -> f64 {
    let pts = s.line(ControlLine::PhiXQfp).points();
    let end = s.time_span().1;
    pts.last().map_or(end, |p| p.0.min(end))
}

/// Synthetic s-curve: for each z-flux offset in `phi_z_sweep`, `n_shots`
/// anneals with a static Gaussian flux error of standard deviation
/// `sigma_phi` added to the QFP z-bias. Counts shots whose QFP latches with
/// positive persistent current.
///
/// Shots share the trace prefix during which the QFP Josephson term is
/// exactly switched off (|β_L| ≤ 1e-12): there the QFP carries no current,
/// so the qubit cannot see the per-shot flux.
pub fn run_scurve_experiment(
    p: &DeviceParams,
    s: &BiasSchedule,
    phi_z_sweep: &[f64],
    n_shots: u64,
    sigma_phi: f64,
    seed: u64,
    dt: f64,
) -> Result<Vec<ScurveSample>, AnnealError> {
    if !(sigma_phi >= 0.0 && sigma_phi.is_finite()) {
        return Err(AnnealError::InvalidInput(format!("sigma_phi must be >= 0, got {sigma_phi}")));
    }
    if n_shots == 0 {
        return Err(AnnealError::InvalidInput("n_shots must be positive".into()));
    }
    let times = time_grid(s, dt)?;
    let t_read = read_time(s);
    let last = times.partition_point(|&t| t <= t_read).saturating_sub(1);
    let st = Stepper { p, sys: Coupled::new(p)? };
    let biases: Vec<FluxBias> = times[..=last].iter().map(|&t| eval_schedule(s, t)).collect();

    let beta_off = |b: &FluxBias| crate::qfp::beta_l(p, b.phi_x_qfp).abs() <= 1e-12;
    let fork = biases.iter().take_while(|b| beta_off(b)).count().saturating_sub(1);
    let mut prefix: Option<LatchState> = None;
    if biases.first().is_some_and(beta_off) {
        for (k, b) in biases[..=fork].iter().enumerate() {
            let start = prefix.map_or_else(|| st.initial_guess(b, 0.0), |x| [x.phase_qub, x.phase_qfp]);
            prefix = Some(st.equilibrium(b, 0.0, start, k, times[k])?);
        }
    }

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let run_shot = |extra: f64| -> Result<bool, AnnealError> {
        let (mut state, first) = match prefix {
            Some(x) => (x, fork),
            None => {
                let b = &biases[0];
                (st.equilibrium(b, extra, st.initial_guess(b, extra), 0, times[0])?, 0)
            }
        };
        for k in first..=last {
            state = st.equilibrium(&biases[k], extra, [state.phase_qub, state.phase_qfp], k, times[k])?;
        }
        Ok(state.ip_qfp > 0.0)
    };

    phi_z_sweep
        .iter()
        .enumerate()
        .map(|(i, &offset)| {
            let positives = (0..n_shots)
                .into_par_iter()
                .map(|shot| {
                    let noise = if sigma_phi > 0.0 {
                        sigma_phi * normal.sample(&mut rng::stream(seed, &[i as u64, shot]))
                    } else {
                        0.0
                    };
                    run_shot(offset + noise).map(u64::from)
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            Ok(ScurveSample { phi_z: offset, successes: positives, trials: n_shots })
        })
        .collect()
}

/// QFP z-flux (Φ0) at which the noiseless latch decision flips, located by
/// bisection between `lo` and `hi` (which must latch oppositely).
pub fn latch_threshold(p: &DeviceParams, s: &BiasSchedule, lo: f64, hi: f64, dt: f64, tol: f64) -> Result<f64, AnnealError> {
    let sign = |x: f64| -> Result<bool, AnnealError> {
        Ok(run_scurve_experiment(p, s, &[x], 1, 0.0, 0, dt)?[0].successes == 1)
    };
    let (mut a, mut b) = (lo, hi);
    let sa = sign(a)?;
    if sa == sign(b)? {
        return Err(AnnealError::InvalidInput(format!("no latch flip between {lo} and {hi}")));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if sign(m)? == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
