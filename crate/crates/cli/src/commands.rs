//! Subcommand bodies. Each one computes its artifacts in memory; placement
//! and the manifest are handled by the caller.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fluxchain_core::anneal::{
    double_well_onset, run_scurve_experiment, simulate_anneal, Device, DEFAULT_DT,
};
use fluxchain_core::device::{load_device, DeviceParams};
use fluxchain_core::hamiltonian::{
    anticrossing_gap, combined_t1, eigensolve_lowest, lowest_levels_many, purcell_t1,
    synthetic_anticrossing_sweep, write_spectrum_csv, HamiltonianError, NormalModeHamiltonian,
};
use fluxchain_core::qfp::{
    beta_l, effective_mutual, fit_scurve, qubit_flux_signal, read_scurve_csv, required_ratio,
    sample_scurve, separation_fidelity, susceptibility, upgrade_path, write_scurve_csv, SCurveFit,
};
use fluxchain_core::readout::{
    analyze_histograms, ensemble, fidelity_vs_time, read_shots_csv, reference_latch_error,
    write_shots_csv, ReadoutModel, CALIBRATION_TIME, REFERENCE_SCURVE_CENTER, REFERENCE_SCURVE_WIDTHS,
};
use fluxchain_core::resonator::{
    decay_rate, fit_s21, flux_sensitivity, read_s21_csv, resonant_freq, state_shift, synthetic_trace,
    write_s21_csv, ResonatorError, ResonatorModel, S21Fit, S21FitOptions, S21Report, VALIDITY_MARGIN,
};
use fluxchain_core::schedule::{BiasSchedule, QubitState};
use serde::Serialize;
use serde_json::json;

use crate::args::{AnnealCmd, Command, DeviceCmd, Global, HamCmd, MeasureCmd, ModelArgs, QfpCmd, ResCmd, Sweep};
use crate::output::Artifact;
use crate::CliError;

const MPHI0: f64 = 1e-3;

pub struct Output {
    /// "group-sub", used for directory-mode file names.
    pub stem: String,
    pub artifacts: Vec<Artifact>,
    /// Human-readable summary for the diagnostic stream.
    pub note: Option<String>,
    pub configs: BTreeMap<String, String>,
    /// Files read by the run; outputs may not overwrite them.
    pub inputs: Vec<PathBuf>,
}

struct Ctx<'a> {
    g: &'a Global,
    configs: BTreeMap<String, String>,
    inputs: Vec<PathBuf>,
}

fn resolved(path: &Path) -> String {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()).display().to_string()
}

impl Ctx<'_> {
    fn read(&mut self, role: &str, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.configs.insert(role.to_string(), resolved(path));
        self.inputs.push(path.to_path_buf());
        Ok(text)
    }

    fn device(&mut self) -> Result<DeviceParams, CliError> {
        match self.g.device.clone() {
            Some(path) => {
                let text = self.read("device", &path)?;
                Ok(load_device(&text).map_err(fluxchain_core::Error::from)?)
            }
            None => {
                self.configs.insert("device".into(), "builtin:fabricated".into());
                Ok(DeviceParams::fabricated())
            }
        }
    }

    fn sweep(&self, default: Sweep) -> Vec<f64> {
        self.g.sweep.unwrap_or(default).values()
    }

    fn shots(&self, default: u64) -> u64 {
        self.g.shots.unwrap_or(default)
    }
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(core_csv)?;
    for r in rows {
        w.write_record(&r).map_err(core_csv)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

fn core_csv(e: csv::Error) -> CliError {
    CliError::Domain(e.into())
}

fn buffer<F>(f: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(core_csv)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn domain<E: Into<fluxchain_core::Error>>(e: E) -> CliError {
    CliError::Domain(e.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

pub fn dispatch(g: &Global, command: &Command) -> Result<Output, CliError> {
    let mut ctx = Ctx { g, configs: BTreeMap::new(), inputs: Vec::new() };
    let (stem, artifacts, note) = match command {
        Command::Device(DeviceCmd::Validate) => ("device-validate", device_validate(&mut ctx)?, None),
        Command::Qfp(c) => match c {
            QfpCmd::Betasweep => ("qfp-betasweep", qfp_betasweep(&mut ctx)?, None),
            QfpCmd::Scurve { state, width, center } => {
                ("qfp-scurve", qfp_scurve(&mut ctx, *state, *width, *center)?, None)
            }
            QfpCmd::Fidelity { left, right, target } => {
                let (a, n) = qfp_fidelity(&mut ctx, left.as_deref(), right.as_deref(), *target)?;
                ("qfp-fidelity", a, Some(n))
            }
        },
        Command::Res(c) => match c {
            ResCmd::Modulation => ("res-modulation", res_modulation(&mut ctx)?, None),
            ResCmd::Fit { trace, bootstrap, points, noise } => {
                let (a, n) = res_fit(&mut ctx, trace.as_deref(), *bootstrap, *points, *noise)?;
                ("res-fit", a, Some(n))
            }
            ResCmd::Shift { op, step } => {
                let (a, n) = res_shift(&mut ctx, *op, *step)?;
                ("res-shift", a, Some(n))
            }
        },
        Command::Anneal(c) => match c {
            AnnealCmd::Trace { schedule, tilt, dt } => {
                let (a, n) = anneal_trace(&mut ctx, schedule.as_deref(), *tilt, *dt)?;
                ("anneal-trace", a, Some(n))
            }
            AnnealCmd::Scurve { state, tilt, sigma, dt } => {
                let (a, n) = anneal_scurve(&mut ctx, *state, *tilt, *sigma, *dt)?;
                ("anneal-scurve", a, Some(n))
            }
        },
        Command::Ham(c) => match c {
            HamCmd::Eig { k } => {
                let (a, n) = ham_eig(&mut ctx, *k)?;
                ("ham-eig", a, Some(n))
            }
            HamCmd::Anticross { g_mhz, pair, resolution_mhz } => {
                let (a, n) = ham_anticross(&mut ctx, *g_mhz, *pair, *resolution_mhz)?;
                ("ham-anticross", a, Some(n))
            }
            HamCmd::T1sweep { g_mhz } => ("ham-t1sweep", ham_t1sweep(&mut ctx, *g_mhz)?, None),
        },
        Command::Measure(c) => match c {
            MeasureCmd::Shots(m) => ("measure-shots", measure_shots(&mut ctx, m)?, None),
            MeasureCmd::Histogram { input, model } => {
                let (a, n) = measure_histogram(&mut ctx, input.as_deref(), model)?;
                ("measure-histogram", a, Some(n))
            }
            MeasureCmd::Sweep(m) => ("measure-sweep", measure_sweep(&mut ctx, m)?, None),
        },
    };
    Ok(Output { stem: stem.into(), artifacts, note, configs: ctx.configs, inputs: ctx.inputs })
}

fn device_validate(ctx: &mut Ctx) -> Result<Vec<Artifact>, CliError> {
    let p = ctx.device()?;
    let res = ResonatorModel::calibrated(&p).map_err(domain)?;
    let f_top = resonant_freq(&res, 0.0).map_err(domain)?;
    let f_edge = resonant_freq(&res, 0.5 - VALIDITY_MARGIN - 1e-9).map_err(domain)?;
    let report = json!({
        "params": p,
        "derived": {
            "beta_l_max": beta_l(&p, 0.0),
            "qubit_flux_signal_phi0": qubit_flux_signal(&p),
            "q_internal": p.q_internal(),
            "resonator": {
                "f_bare_hz": res.f_bare,
                "beta_rf": res.beta_rf,
                "f_max_hz": f_top,
                "f_window_edge_hz": f_edge,
                "tuning_range_hz": f_top - f_edge,
                "sensitivity_quarter_mhz_per_mphi0": flux_sensitivity(&res, 0.25).map_err(domain)?,
            },
            "decay_at_max": decay_rate(p.f_res_max, p.q_total),
            "double_well_onset_phi0": {
                "qubit": double_well_onset(&p, Device::Qubit).map_err(domain)?,
                "qfp": double_well_onset(&p, Device::Qfp).map_err(domain)?,
            },
        },
    });
    Ok(vec![Artifact::new("json", json_bytes(&report)?)])
}

fn qfp_betasweep(ctx: &mut Ctx) -> Result<Vec<Artifact>, CliError> {
    let p = ctx.device()?;
    let rows = ctx.sweep(Sweep::new(0.0, 1.0, 201)).into_iter().map(|x| {
        let b = beta_l(&p, x);
        // At the pole the susceptibility is undefined.
        let (chi, m) = match susceptibility(&p, b) {
            Ok(chi) => (chi, effective_mutual(&p, chi)),
            Err(_) => (f64::NAN, f64::NAN),
        };
        vec![num(x), num(b), num(chi), num(m)]
    });
    let bytes = csv_table(&["phi_x_phi0", "beta_l", "susceptibility_per_h", "m_eff_h"], rows)?;
    Ok(vec![Artifact::new("csv", bytes)])
}

fn qfp_scurve(ctx: &mut Ctx, state: QubitState, width: f64, center: Option<f64>) -> Result<Vec<Artifact>, CliError> {
    let p = ctx.device()?;
    let width = positive("--width", width)? * MPHI0;
    let half = qubit_flux_signal(&p) / 2.0;
    let center = match (center, state) {
        (Some(c), _) => c * MPHI0,
        (None, QubitState::L) => -half,
        (None, QubitState::R) => half,
    };
    let sweep: Vec<f64> = ctx.sweep(Sweep::new(-15.0, 15.0, 61)).into_iter().map(|x| x * MPHI0).collect();
    let samples = sample_scurve(&SCurveFit::ideal(center, width), &sweep, ctx.shots(1000), ctx.g.seed).map_err(domain)?;
    Ok(vec![Artifact::new("csv", buffer(|b| write_scurve_csv(&samples, b))?)])
}

fn qfp_fidelity(
    ctx: &mut Ctx,
    left: Option<&Path>,
    right: Option<&Path>,
    target: f64,
) -> Result<(Vec<Artifact>, String), CliError> {
    let p = ctx.device()?;
    let (fl, fr, source) = match (left, right) {
        (Some(l), Some(r)) => {
            let mut fit = |role: &str, path: &Path| -> Result<SCurveFit, CliError> {
                let text = ctx.read(role, path)?;
                let samples = read_scurve_csv(text.as_bytes()).map_err(CliError::Domain)?;
                fit_scurve(&samples).map_err(domain)
            };
            (fit("scurve_left", l)?, fit("scurve_right", r)?, "fitted")
        }
        _ => {
            let (wl, wr) = REFERENCE_SCURVE_WIDTHS;
            (
                SCurveFit::ideal(-REFERENCE_SCURVE_CENTER, wl),
                SCurveFit::ideal(REFERENCE_SCURVE_CENTER, wr),
                "reference",
            )
        }
    };
    let report = separation_fidelity(&fl, &fr);
    let upgrade = upgrade_path(&p, &report, target).map_err(domain)?;
    let note = format!("F_sep max = {:.5} at ratio {:.3}", report.f_sep_max, report.ratio);
    let out = json!({
        "source": source,
        "fit_left": fl,
        "fit_right": fr,
        "separation": report,
        "target": target,
        "required_ratio": required_ratio(target).map_err(domain)?,
        "upgrade": upgrade,
    });
    Ok((vec![Artifact::new("json", json_bytes(&out)?)], note))
}

fn res_modulation(ctx: &mut Ctx) -> Result<Vec<Artifact>, CliError> {
    let p = ctx.device()?;
    let m = ResonatorModel::calibrated(&p).map_err(domain)?;
    let mut rows = Vec::new();
    for phi in ctx.sweep(Sweep::new(-1.0, 1.0, 401)) {
        let point = resonant_freq(&m, phi).and_then(|f| Ok((f, flux_sensitivity(&m, phi)?)));
        match point {
            Ok((f, s)) => rows.push(vec![num(phi), num(f), num(s)]),
            Err(ResonatorError::OutsideValidityWindow { .. }) => {}
            Err(e) => return Err(domain(e)),
        }
    }
    let bytes = csv_table(&["phi_phi0", "f_hz", "sensitivity_mhz_per_mphi0"], rows)?;
    Ok(vec![Artifact::new("csv", bytes)])
}

fn res_fit(
    ctx: &mut Ctx,
    trace: Option<&Path>,
    bootstrap: usize,
    points: usize,
    noise: f64,
) -> Result<(Vec<Artifact>, String), CliError> {
    let opts = S21FitOptions { n_bootstrap: bootstrap, seed: ctx.g.seed };
    let mut artifacts = Vec::new();
    let data = match trace {
        Some(path) => {
            let text = ctx.read("trace", path)?;
            read_s21_csv(text.as_bytes()).map_err(CliError::Domain)?
        }
        None => {
            let p = ctx.device()?;
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(CliError::Usage(format!("--noise must be >= 0, got {noise}")));
            }
            let truth = S21Fit::exact(p.f_res_max, p.q_total, p.q_external, 0.0, 1.0);
            synthetic_trace(&truth, points, 10.0, noise, ctx.g.seed)
        }
    };
    let fit = fit_s21(&data, opts).map_err(domain)?;
    let report = S21Report::new(fit, opts);
    let note = format!(
        "f0 = {:.6} GHz, Q = {:.1} ± {:.1}, Qe = {:.1}",
        fit.f0 / 1e9,
        fit.q_total,
        fit.q_total_sigma,
        report.q_external
    );
    artifacts.push(Artifact::new("json", json_bytes(&report)?));
    if trace.is_none() {
        artifacts.push(Artifact::new("trace.csv", buffer(|b| write_s21_csv(&data, b))?));
    }
    Ok((artifacts, note))
}

fn res_shift(ctx: &mut Ctx, op: f64, step: f64) -> Result<(Vec<Artifact>, String), CliError> {
    let p = ctx.device()?;
    let m = ResonatorModel::calibrated(&p).map_err(domain)?;
    let shift = state_shift(&m, op, step / 2.0).map_err(domain)?;
    let f_op = resonant_freq(&m, op).map_err(domain)?;
    let note = format!(
        "shift {:.3} MHz = {:.2} linewidths",
        shift.shift_hz / 1e6,
        shift.shift_over_linewidth
    );
    let out = json!({
        "op_phi0": op,
        "step_phi0": step,
        "f_op_hz": f_op,
        "shift": shift,
        "decay_at_op": decay_rate(f_op, m.q_total),
        "decay_at_max": decay_rate(p.f_res_max, p.q_total),
    });
    Ok((vec![Artifact::new("json", json_bytes(&out)?)], note))
}

fn anneal_trace(
    ctx: &mut Ctx,
    schedule: Option<&Path>,
    tilt: f64,
    dt: Option<f64>,
) -> Result<(Vec<Artifact>, String), CliError> {
    let p = ctx.device()?;
    let s = match schedule {
        Some(path) => {
            let text = ctx.read("schedule", path)?;
            BiasSchedule::from_json(&text).map_err(domain)?
        }
        None => BiasSchedule::readout_sequence(tilt * MPHI0),
    };
    let trace = simulate_anneal(&p, &s, dt.unwrap_or(DEFAULT_DT)).map_err(domain)?;
    let summary = trace.summary();
    let note = format!(
        "QFP latched {} nA, amplification {:.2}",
        (summary.final_ip_qfp * 1e9).round(),
        summary.amplification
    );
    Ok((
        vec![
            Artifact::new("csv", buffer(|b| trace.write_csv(b))?),
            Artifact::new("summary.json", json_bytes(&summary)?),
        ],
        note,
    ))
}

fn anneal_scurve(
    ctx: &mut Ctx,
    state: QubitState,
    tilt: f64,
    sigma: f64,
    dt: Option<f64>,
) -> Result<(Vec<Artifact>, String), CliError> {
    let p = ctx.device()?;
    let s = BiasSchedule::prepared(state, tilt * MPHI0);
    let sweep: Vec<f64> = ctx.sweep(Sweep::new(-15.0, 15.0, 31)).into_iter().map(|x| x * MPHI0).collect();
    let samples = run_scurve_experiment(
        &p,
        &s,
        &sweep,
        ctx.shots(1000),
        sigma * MPHI0,
        ctx.g.seed,
        dt.unwrap_or(DEFAULT_DT),
    )
    .map_err(domain)?;
    // The counts are worth keeping even when the sweep misses the edge.
    let (fit_json, note) = match fit_scurve(&samples) {
        Ok(fit) => (
            json!({ "fit": fit }),
            format!(
                "center {:.4} ± {:.4} mΦ0, width {:.4} ± {:.4} mΦ0",
                fit.center / MPHI0,
                fit.center_sigma / MPHI0,
                fit.width / MPHI0,
                fit.width_sigma / MPHI0
            ),
        ),
        Err(e) => (json!({ "fit": null, "fit_error": e.to_string() }), format!("s-curve fit failed: {e}")),
    };
    Ok((
        vec![
            Artifact::new("csv", buffer(|b| write_scurve_csv(&samples, b))?),
            Artifact::new("fit.json", json_bytes(&fit_json)?),
        ],
        note,
    ))
}

fn hamiltonian(ctx: &mut Ctx, role: &str, path: &Path) -> Result<NormalModeHamiltonian, CliError> {
    let text = ctx.read(role, path)?;
    NormalModeHamiltonian::from_json(&text).map_err(domain)
}

fn ham_eig(ctx: &mut Ctx, k: usize) -> Result<(Vec<Artifact>, String), CliError> {
    let path = match ctx.g.coeffs.as_slice() {
        [one] => one.clone(),
        [] => return Err(CliError::Usage("ham eig needs --coeffs <path>".into())),
        _ => return Err(CliError::Usage("ham eig takes a single --coeffs".into())),
    };
    let h = hamiltonian(ctx, "coeffs", &path)?;
    let result = eigensolve_lowest(&h, k, ctx.g.escalate).map_err(domain)?;
    let note = match result.convergence_delta {
        Some(d) => format!("dimension {}, convergence delta {:.6} MHz", h.dimension(), d * 1e3),
        None => format!("dimension {}", h.dimension()),
    };
    Ok((
        vec![
            Artifact::new("csv", buffer(|b| write_spectrum_csv(&result.eigenvalues, b))?),
            Artifact::new("json", json_bytes(&result)?),
        ],
        note,
    ))
}

fn ham_anticross(ctx: &mut Ctx, g_mhz: f64, pair: usize, resolution_mhz: f64) -> Result<(Vec<Artifact>, String), CliError> {
    let coeffs = ctx.g.coeffs.clone();
    let (spectra, source) = if coeffs.is_empty() {
        let p = ctx.device()?;
        let detunings: Vec<f64> = ctx.sweep(Sweep::new(-500.0, 500.0, 201)).into_iter().map(|d| d * 1e-3).collect();
        let s = synthetic_anticrossing_sweep(p.f_res_max / 1e9, g_mhz * 1e-3, &detunings).map_err(domain)?;
        (s, "synthetic")
    } else {
        let hs = coeffs
            .iter()
            .enumerate()
            .map(|(i, path)| hamiltonian(ctx, &format!("coeffs_{i}"), path))
            .collect::<Result<Vec<_>, _>>()?;
        let coords = match ctx.g.sweep {
            Some(s) if s.n == hs.len() => s.values(),
            Some(s) => {
                return Err(CliError::Usage(format!("--sweep has {} points for {} coefficient files", s.n, hs.len())))
            }
            None => (0..hs.len()).map(|i| i as f64).collect(),
        };
        let levels = lowest_levels_many(&hs, pair + 2).map_err(domain)?;
        (coords.into_iter().zip(levels).collect(), "coefficients")
    };

    let width = spectra.iter().map(|(_, l)| l.len()).max().unwrap_or(0);
    let mut header = vec!["coordinate".to_string()];
    header.extend((0..width).map(|i| format!("level_{i}_ghz")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = spectra.iter().map(|(x, l)| std::iter::once(num(*x)).chain(l.iter().map(|v| num(*v))).collect());
    let table = csv_table(&header_refs, rows)?;

    let resolution = resolution_mhz * 1e-3;
    let (result, note) = match anticrossing_gap(&spectra, pair, resolution) {
        Ok(a) => (
            json!({ "source": source, "pair": pair, "resolution_ghz": resolution, "detected": true,
                    "coordinate_at_min": a.phi_min, "gap_ghz": a.gap, "g_ghz": a.g }),
            format!("g = {:.4} MHz", a.g * 1e3),
        ),
        Err(HamiltonianError::NoAntiCrossing { g_upper_bound_ghz }) => (
            json!({ "source": source, "pair": pair, "resolution_ghz": resolution, "detected": false,
                    "g_upper_bound_ghz": g_upper_bound_ghz }),
            format!("no anti-crossing detected (g < {:.4} MHz)", g_upper_bound_ghz * 1e3),
        ),
        Err(e) => return Err(domain(e)),
    };
    Ok((vec![Artifact::new("json", json_bytes(&result)?), Artifact::new("spectra.csv", table)], note))
}

fn ham_t1sweep(ctx: &mut Ctx, g_mhz: f64) -> Result<Vec<Artifact>, CliError> {
    let p = ctx.device()?;
    let kappa = decay_rate(p.f_res_max, p.q_total).kappa;
    let g = g_mhz * 1e6;
    let rows = ctx.sweep(Sweep::new(10.0, 1000.0, 100)).into_iter().map(|d| {
        let tp = purcell_t1(g, d * 1e6, kappa);
        vec![num(d * 1e6), num(tp), num(combined_t1(p.t1_avg, tp))]
    });
    let bytes = csv_table(&["detuning_hz", "t1_purcell_s", "t1_combined_s"], rows)?;
    Ok(vec![Artifact::new("csv", bytes)])
}

fn readout_model(ctx: &mut Ctx, m: &ModelArgs) -> Result<ReadoutModel, CliError> {
    let p = ctx.device()?;
    let base = ReadoutModel::calibrated(&p).map_err(domain)?;
    let model = base.with_errors(
        m.prep_error.unwrap_or(base.prep_error),
        m.latch_error.unwrap_or_else(reference_latch_error),
    );
    model.validate().map_err(domain)?;
    Ok(model)
}

fn shot_count(ctx: &Ctx) -> Result<usize, CliError> {
    usize::try_from(ctx.shots(100_000)).map_err(|_| CliError::Usage("--shots too large".into()))
}

fn measure_shots(ctx: &mut Ctx, m: &ModelArgs) -> Result<Vec<Artifact>, CliError> {
    let model = readout_model(ctx, m)?;
    let shots = ensemble(&model, ctx.g.tint.unwrap_or(CALIBRATION_TIME), shot_count(ctx)?, ctx.g.seed).map_err(domain)?;
    Ok(vec![Artifact::new("csv", buffer(|b| write_shots_csv(&shots, b))?)])
}

fn measure_histogram(ctx: &mut Ctx, input: Option<&Path>, m: &ModelArgs) -> Result<(Vec<Artifact>, String), CliError> {
    let (shots, model) = match input {
        Some(path) => {
            let text = ctx.read("shots", path)?;
            (read_shots_csv(text.as_bytes()).map_err(CliError::Domain)?, None)
        }
        None => {
            let model = readout_model(ctx, m)?;
            let t = ctx.g.tint.unwrap_or(CALIBRATION_TIME);
            (ensemble(&model, t, shot_count(ctx)?, ctx.g.seed).map_err(domain)?, Some(model))
        }
    };
    let a = analyze_histograms(&shots).map_err(domain)?;
    let note = format!(
        "fidelity {:.4}%, overlap {:.3e}, separation {:.3} sigma",
        a.fidelity * 100.0,
        a.overlap_error,
        a.sigma_separation
    );
    let out = json!({ "source": if model.is_some() { "simulated" } else { "file" }, "model": model, "analysis": a });
    Ok((vec![Artifact::new("json", json_bytes(&out)?)], note))
}

fn measure_sweep(ctx: &mut Ctx, m: &ModelArgs) -> Result<Vec<Artifact>, CliError> {
    let model = readout_model(ctx, m)?;
    let times = ctx.sweep(Sweep::new(50e-9, 1e-6, 39));
    let points = fidelity_vs_time(&model, &times, shot_count(ctx)?, ctx.g.seed).map_err(domain)?;
    let rows = points.iter().map(|pt| {
        let a = &pt.analysis;
        vec![
            num(pt.t_int_s),
            num(pt.fidelity),
            num(pt.overlap_error),
            num(a.p_l_given_r),
            num(a.p_r_given_l),
            num(a.sigma_separation),
        ]
    });
    let header = ["t_int_s", "fidelity", "overlap_error", "p_l_given_r", "p_r_given_l", "sigma_separation"];
    Ok(vec![Artifact::new("csv", csv_table(&header, rows)?)])
}
