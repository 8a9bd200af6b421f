//! Browser bindings for three interactive views: QFP s-curves with their
//! separation fidelity, resonator flux modulation, and qubit T1 against
//! qubit-resonator detuning.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic
//! so they can be tested natively.

use fluxchain_core::device::DeviceParams;
use fluxchain_core::hamiltonian::{combined_t1, purcell_t1};
use fluxchain_core::qfp::{separation_fidelity, SCurveFit};
use fluxchain_core::resonator::{decay_rate, flux_sensitivity, resonant_freq, ResonatorModel, ResonatorError};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MPHI0: f64 = 1e-3;
const MAX_POINTS: usize = 20_000;

fn check_points(n: usize) -> Result<(), String> {
    if (2..=MAX_POINTS).contains(&n) {
        Ok(())
    } else {
        Err(format!("point count must be between 2 and {MAX_POINTS}, got {n}"))
    }
}

fn positive(name: &str, v: f64) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ScurveView {
    phi_z_mphi0: Vec<f64>,
    p_left: Vec<f64>,
    p_right: Vec<f64>,
    f_sep: Vec<f64>,
    f_sep_max: f64,
    phi_z_at_max_mphi0: f64,
    ratio: f64,
}

/// S-curves centred at ∓`half_separation_mphi0` with the given widths (all
/// in mΦ0), sampled on `n` points.
pub fn scurves_json(half_separation_mphi0: f64, width_left_mphi0: f64, width_right_mphi0: f64, n: usize) -> Result<String, String> {
    check_points(n)?;
    if !half_separation_mphi0.is_finite() {
        return Err("separation must be finite".into());
    }
    let l = SCurveFit::ideal(-half_separation_mphi0 * MPHI0, positive("left width", width_left_mphi0)? * MPHI0);
    let r = SCurveFit::ideal(half_separation_mphi0 * MPHI0, positive("right width", width_right_mphi0)? * MPHI0);
    let rep = separation_fidelity(&l, &r);
    let span = half_separation_mphi0.abs() + 6.0 * width_left_mphi0.max(width_right_mphi0);
    let xs: Vec<f64> = (0..n).map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64).collect();
    let p_left: Vec<f64> = xs.iter().map(|x| l.prob(x * MPHI0)).collect();
    let p_right: Vec<f64> = xs.iter().map(|x| r.prob(x * MPHI0)).collect();
    let f_sep = p_left.iter().zip(&p_right).map(|(a, b)| b - a).collect();
    to_json(&ScurveView {
        phi_z_mphi0: xs,
        p_left,
        p_right,
        f_sep,
        f_sep_max: rep.f_sep_max,
        phi_z_at_max_mphi0: rep.phi_z_at_max / MPHI0,
        ratio: rep.ratio,
    })
}

#[derive(Serialize)]
struct ModulationView {
    phi_phi0: Vec<f64>,
    f_ghz: Vec<f64>,
    sensitivity_mhz_per_mphi0: Vec<f64>,
    beta_rf: f64,
}

/// Resonance over one flux period for a resonator calibrated to
/// `f_max_ghz`, skipping the excluded band around Φ0/2.
pub fn modulation_json(ic_tres_na: f64, l_tres_ph: f64, f_max_ghz: f64, n: usize) -> Result<String, String> {
    check_points(n)?;
    let p = DeviceParams {
        ic_tres: positive("junction current", ic_tres_na)? * 1e-9,
        l_tres: positive("loop inductance", l_tres_ph)? * 1e-12,
        f_res_max: positive("maximum frequency", f_max_ghz)? * 1e9,
        ..DeviceParams::fabricated()
    };
    let m = ResonatorModel::calibrated(&p).map_err(|e| e.to_string())?;
    let mut view = ModulationView { phi_phi0: Vec::new(), f_ghz: Vec::new(), sensitivity_mhz_per_mphi0: Vec::new(), beta_rf: m.beta_rf };
    for i in 0..n {
        let phi = -0.5 + i as f64 / (n - 1) as f64;
        match resonant_freq(&m, phi).and_then(|f| Ok((f, flux_sensitivity(&m, phi)?))) {
            Ok((f, s)) => {
                view.phi_phi0.push(phi);
                view.f_ghz.push(f / 1e9);
                view.sensitivity_mhz_per_mphi0.push(s);
            }
            Err(ResonatorError::OutsideValidityWindow { .. }) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    to_json(&view)
}

#[derive(Serialize)]
struct T1View {
    detuning_mhz: Vec<f64>,
    purcell_us: Vec<f64>,
    combined_us: Vec<f64>,
    t1_other_us: f64,
}

/// Purcell-limited and combined T1 for detunings from `min_mhz` to
/// `max_mhz`, logarithmically spaced.
pub fn t1_json(g_mhz: f64, q_total: f64, f_res_ghz: f64, t1_other_us: f64, min_mhz: f64, max_mhz: f64, n: usize) -> Result<String, String> {
    check_points(n)?;
    let kappa = decay_rate(positive("resonator frequency", f_res_ghz)? * 1e9, positive("Q", q_total)?).kappa;
    let (lo, hi) = (positive("minimum detuning", min_mhz)?, positive("maximum detuning", max_mhz)?);
    if hi <= lo {
        return Err("maximum detuning must exceed the minimum".into());
    }
    let t1 = positive("T1", t1_other_us)? * 1e-6;
    if !(g_mhz >= 0.0 && g_mhz.is_finite()) {
        return Err(format!("coupling must be >= 0, got {g_mhz}"));
    }
    let detuning_mhz: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
    let purcell: Vec<f64> = detuning_mhz.iter().map(|d| purcell_t1(g_mhz * 1e6, d * 1e6, kappa)).collect();
    to_json(&T1View {
        combined_us: purcell.iter().map(|tp| combined_t1(t1, *tp) * 1e6).collect(),
        purcell_us: purcell.iter().map(|tp| tp * 1e6).collect(),
        detuning_mhz,
        t1_other_us,
    })
}

#[wasm_bindgen]
pub fn scurves(half_separation_mphi0: f64, width_left_mphi0: f64, width_right_mphi0: f64, n: usize) -> Result<String, JsError> {
    scurves_json(half_separation_mphi0, width_left_mphi0, width_right_mphi0, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn modulation(ic_tres_na: f64, l_tres_ph: f64, f_max_ghz: f64, n: usize) -> Result<String, JsError> {
    modulation_json(ic_tres_na, l_tres_ph, f_max_ghz, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn t1_vs_detuning(
    g_mhz: f64,
    q_total: f64,
    f_res_ghz: f64,
    t1_other_us: f64,
    min_mhz: f64,
    max_mhz: f64,
    n: usize,
) -> Result<String, JsError> {
    t1_json(g_mhz, q_total, f_res_ghz, t1_other_us, min_mhz, max_mhz, n).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn scurve_view() {
        let v = parse(scurves_json(5.36, 1.38, 1.42, 401));
        assert_eq!(v["phi_z_mphi0"].as_array().unwrap().len(), 401);
        let f = v["f_sep_max"].as_f64().unwrap();
        assert!((f - 0.99906).abs() < 1e-4, "{f}");
        let sampled = v["f_sep"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).fold(0.0, f64::max);
        assert!(sampled <= f + 1e-12);
        assert!(scurves_json(5.0, 0.0, 1.0, 10).is_err());
        assert!(scurves_json(5.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn modulation_view() {
        let v = parse(modulation_json(1200.0, 199.0, 6.46, 101));
        let f: Vec<f64> = v["f_ghz"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let phi: Vec<f64> = v["phi_phi0"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        // The band within 0.02 of ±Φ0/2 is skipped.
        assert!(phi.iter().all(|p| p.abs() < 0.48 + 1e-12));
        assert!(phi.len() < 101);
        let top = f.iter().cloned().fold(0.0, f64::max);
        assert!((top - 6.46).abs() < 1e-9);
        assert!(modulation_json(-1.0, 199.0, 6.46, 10).is_err());
        // beta_rf ≥ 1 has no single-valued resonance.
        assert!(modulation_json(5000.0, 199.0, 6.46, 10).is_err());
    }

    #[test]
    fn t1_view() {
        let v = parse(t1_json(9.8, 720.0, 6.46, 1.77, 10.0, 1000.0, 50));
        let d: Vec<f64> = v["detuning_mhz"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let c: Vec<f64> = v["combined_us"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!((d[0] - 10.0).abs() < 1e-12 && (d[49] - 1000.0).abs() < 1e-9);
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
        assert!(c.iter().all(|&x| x < 1.77));
        assert!((c[49] - 1.753).abs() < 0.001, "{}", c[49]);
        assert!(t1_json(9.8, 720.0, 6.46, 1.77, 100.0, 10.0, 50).is_err());
    }
}
