//! End-to-end runs across modules, driven by the shipped configuration files.

use fluxchain_core::anneal::{run_scurve_experiment, simulate_anneal, DEFAULT_DT};
use fluxchain_core::device::{load_device, DeviceParams};
use fluxchain_core::hamiltonian::{assemble, hermiticity_residual, NormalModeHamiltonian};
use fluxchain_core::qfp::{fit_scurve, read_scurve_csv, separation_fidelity, write_scurve_csv};
use fluxchain_core::readout::{analyze_histograms, ensemble, read_shots_csv, write_shots_csv, ReadoutModel};
use fluxchain_core::resonator::{fit_s21, s21_model, ResonatorModel, S21Fit, S21FitOptions};
use fluxchain_core::schedule::{BiasSchedule, QubitState};

const DEVICE: &str = include_str!("../../../configs/device.json");
const DESIGN: &str = include_str!("../../../configs/device_design.json");
const SCHEDULE: &str = include_str!("../../../configs/readout_schedule.json");
const MODES: &str = include_str!("../../../configs/readout_circuit_modes.json");

#[test]
fn shipped_configs_load() {
    assert_eq!(load_device(DEVICE).unwrap(), DeviceParams::fabricated());
    assert_eq!(load_device(DESIGN).unwrap(), DeviceParams::designed());
    assert_eq!(BiasSchedule::from_json(SCHEDULE).unwrap(), BiasSchedule::readout_sequence(0.005));
    let h = NormalModeHamiltonian::from_json(MODES).unwrap();
    assert_eq!(h.dims(), vec![14, 7, 3, 4, 2]);
    assert_eq!(h.dimension(), 2352);
}

#[test]
fn circuit_modes_assemble_hermitian() {
    let h = NormalModeHamiltonian::from_json(MODES).unwrap();
    let m = assemble(&h).unwrap();
    assert_eq!(m.nrows(), 2352);
    assert!(hermiticity_residual(&m) < 1e-12);
}

#[test]
fn scheduled_anneal_latches_with_the_tilt() {
    let p = load_device(DEVICE).unwrap();
    let s = BiasSchedule::from_json(SCHEDULE).unwrap();
    let t = simulate_anneal(&p, &s, DEFAULT_DT).unwrap().summary();
    assert!(t.final_ip_qfp > 0.0);
    assert!(t.amplification > 5.0 && t.amplification < 15.0);
}

#[test]
fn scurves_through_csv_separate_the_states() {
    let p = DeviceParams::fabricated();
    let sweep: Vec<f64> = (0..15).map(|i| -0.014 + 0.002 * i as f64).collect();
    let mut fits = Vec::new();
    for state in [QubitState::L, QubitState::R] {
        let s = BiasSchedule::prepared(state, 0.005);
        let samples = run_scurve_experiment(&p, &s, &sweep, 200, 1.18e-3, 3, DEFAULT_DT).unwrap();
        let mut buf = Vec::new();
        write_scurve_csv(&samples, &mut buf).unwrap();
        let back = read_scurve_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), samples.len());
        fits.push(fit_scurve(&back).unwrap());
    }
    // The state's flux moves the QFP threshold by about the qubit signal.
    let shift = (fits[1].center - fits[0].center).abs();
    assert!(shift > 0.006 && shift < 0.016, "{shift}");
    let rep = separation_fidelity(&fits[0], &fits[1]);
    assert!(rep.f_sep_max > 0.99, "{rep:?}");
}

#[test]
fn s21_trace_from_device_fits_back() {
    let p = load_device(DEVICE).unwrap();
    let r = ResonatorModel::calibrated(&p).unwrap();
    let truth = S21Fit::exact(p.f_res_max, r.q_total, r.q_external, 0.0, 1.0);
    let lw = p.f_res_max / p.q_total;
    let trace: Vec<(f64, f64)> = (0..301)
        .map(|i| {
            let f = p.f_res_max + (i as f64 - 150.0) / 150.0 * 5.0 * lw;
            (f, s21_model(f, &truth))
        })
        .collect();
    let fit = fit_s21(&trace, S21FitOptions { n_bootstrap: 0, seed: 0 }).unwrap();
    assert!((fit.f0 / truth.f0 - 1.0).abs() < 1e-8);
    assert!((fit.q_total / truth.q_total - 1.0).abs() < 1e-8);
}

#[test]
fn calibrated_shots_survive_csv() {
    let m = ReadoutModel::calibrated(&load_device(DEVICE).unwrap()).unwrap();
    let shots = ensemble(&m, 80e-9, 4000, 12).unwrap();
    let mut buf = Vec::new();
    write_shots_csv(&shots, &mut buf).unwrap();
    let back = read_shots_csv(&buf[..]).unwrap();
    assert_eq!(back, shots);
    assert_eq!(analyze_histograms(&back).unwrap(), analyze_histograms(&shots).unwrap());
}
