//! Anti-crossing extraction, the synthetic qubit/resonator model and
//! Purcell-limited lifetimes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{eigvals_dense, HamiltonianError};

/// Smallest resolvable gap (GHz); a fitted gap below this is only an upper
/// bound.
pub const DEFAULT_GAP_RESOLUTION_GHZ: f64 = 18.8e-6;

/// Resonator levels kept in the synthetic model.
const SYNTHETIC_PHOTONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntiCrossing {
    /// Sweep coordinate at the minimum gap.
    pub phi_min: f64,
    pub gap: f64,
    pub g: f64,
}

/// Minimum of E[pair + 1] − E[pair] across a sweep.
///
/// The gap squared is locally quadratic in the sweep coordinate, so the
/// vertex of the parabola through the smallest sample and its neighbours
/// gives the refined minimum.
pub fn anticrossing_gap(
    spectra: &[(f64, Vec<f64>)],
    pair: usize,
    resolution: f64,
) -> Result<AntiCrossing, HamiltonianError> {
    if spectra.len() < 5 {
        return Err(HamiltonianError::InvalidInput(format!("{} sweep points, need at least 5", spectra.len())));
    }
    if !(resolution >= 0.0) {
        return Err(HamiltonianError::InvalidInput(format!("resolution {resolution}")));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(spectra.len());
    for (x, levels) in spectra {
        if levels.len() < pair + 2 {
            return Err(HamiltonianError::InvalidInput(format!(
                "{} levels at {x}, pair {pair} needs {}",
                levels.len(),
                pair + 2
            )));
        }
        let gap = levels[pair + 1] - levels[pair];
        if !(x.is_finite() && gap.is_finite()) {
            return Err(HamiltonianError::InvalidInput(format!("non-finite sample at {x}")));
        }
        pts.push((*x, gap.abs()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(HamiltonianError::InvalidInput("repeated sweep coordinate".into()));
    }

    let i = (0..pts.len()).min_by(|&a, &b| pts[a].1.total_cmp(&pts[b].1)).unwrap();
    if i == 0 || i == pts.len() - 1 {
        return Err(HamiltonianError::NoAntiCrossing { g_upper_bound_ghz: pts[i].1 / 2.0 });
    }
    let (x0, y0) = (pts[i - 1].0, pts[i - 1].1.powi(2));
    let (x1, y1) = (pts[i].0, pts[i].1.powi(2));
    let (x2, y2) = (pts[i + 1].0, pts[i + 1].1.powi(2));
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    let (phi_min, gap_sq) = if curv > 0.0 {
        let xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
        let xv = xv.clamp(x0, x2);
        let yv = y1 + d01 * (xv - x1) + curv * (xv - x0) * (xv - x1);
        (xv, yv.clamp(0.0, y1))
    } else {
        (x1, y1)
    };
    let gap = gap_sq.sqrt();
    if gap < resolution {
        return Err(HamiltonianError::NoAntiCrossing { g_upper_bound_ghz: resolution / 2.0 });
    }
    Ok(AntiCrossing { phi_min, gap, g: gap / 2.0 })
}

/// Two-level qubit coupled to a single resonator mode (GHz), exchange
/// coupling `g`. Level order of the basis: photon number major.
pub fn synthetic_two_mode(f_qubit: f64, f_resonator: f64, g: f64) -> DMatrix<Complex64> {
    let n = 2 * SYNTHETIC_PHOTONS;
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let idx = |photons: usize, excited: usize| 2 * photons + excited;
    for p in 0..SYNTHETIC_PHOTONS {
        for q in 0..2 {
            h[(idx(p, q), idx(p, q))] = Complex64::new(f_resonator * p as f64 + f_qubit * q as f64, 0.0);
        }
        if p + 1 < SYNTHETIC_PHOTONS {
            // a†σ⁻ : |p, e> → |p+1, g>
            let c = Complex64::new(g * ((p + 1) as f64).sqrt(), 0.0);
            h[(idx(p + 1, 0), idx(p, 1))] = c;
            h[(idx(p, 1), idx(p + 1, 0))] = c;
        }
    }
    h
}

/// Spectra of the synthetic model with the qubit swept through the
/// resonator; the sweep coordinate is the detuning (GHz).
pub fn synthetic_anticrossing_sweep(
    f_resonator: f64,
    g: f64,
    detunings: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>, HamiltonianError> {
    detunings
        .iter()
        .map(|&d| Ok((d, eigvals_dense(&synthetic_two_mode(f_resonator + d, f_resonator, g))?)))
        .collect()
}

/// Purcell-limited lifetime Δ²/(κ g²), with `g` and `delta` in Hz and
/// `kappa` in rad/s. Zero detuning gives zero lifetime.
pub fn purcell_t1(g: f64, delta: f64, kappa: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let wg = 2.0 * PI * g;
    let wd = 2.0 * PI * delta;
    wd * wd / (kappa * wg * wg)
}

pub fn combined_t1(t1_avg: f64, t1_purcell: f64) -> f64 {
    1.0 / (1.0 / t1_avg + 1.0 / t1_purcell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonator::decay_rate;
    use proptest::prelude::*;

    fn sweep(g: f64, n: usize) -> Vec<(f64, Vec<f64>)> {
        let dets: Vec<f64> = (0..n).map(|i| -0.5 + i as f64 / (n - 1) as f64).collect();
        synthetic_anticrossing_sweep(6.46, g, &dets).unwrap()
    }

    #[test]
    fn synthetic_splitting_is_closed_form() {
        for (d, levels) in sweep(9.8e-3, 11) {
            let split = levels[2] - levels[1];
            assert!((split - (d * d + 4.0 * 9.8e-3f64.powi(2)).sqrt()).abs() < 1e-12);
            assert!(levels[0].abs() < 1e-12);
        }
    }

    #[test]
    fn coupling_is_recovered() {
        for n in [21, 101, 201] {
            let a = anticrossing_gap(&sweep(9.8e-3, n), 1, DEFAULT_GAP_RESOLUTION_GHZ).unwrap();
            assert!((a.g - 9.8e-3).abs() < 1e-4, "{n}: {a:?}");
            assert!(a.phi_min.abs() < 1e-3);
        }
        // Off-grid minimum.
        let dets: Vec<f64> = (0..40).map(|i| -0.4837 + 0.0251 * i as f64).collect();
        let a = anticrossing_gap(&synthetic_anticrossing_sweep(6.46, 9.8e-3, &dets).unwrap(), 1, 18.8e-6).unwrap();
        assert!((a.g - 9.8e-3).abs() < 1e-4, "{a:?}");
    }

    #[test]
    fn uncoupled_levels_cross() {
        match anticrossing_gap(&sweep(0.0, 101), 1, DEFAULT_GAP_RESOLUTION_GHZ) {
            Err(HamiltonianError::NoAntiCrossing { g_upper_bound_ghz }) => {
                assert_eq!(g_upper_bound_ghz, DEFAULT_GAP_RESOLUTION_GHZ / 2.0)
            }
            other => panic!("{other:?}"),
        }
        // Same with a grid that straddles the crossing.
        let dets: Vec<f64> = (0..40).map(|i| -0.4837 + 0.0251 * i as f64).collect();
        let s = synthetic_anticrossing_sweep(6.46, 0.0, &dets).unwrap();
        assert!(matches!(anticrossing_gap(&s, 1, 18.8e-6), Err(HamiltonianError::NoAntiCrossing { .. })));
    }

    #[test]
    fn gap_below_resolution_is_a_bound() {
        let s = sweep(5e-6, 201);
        assert!(matches!(anticrossing_gap(&s, 1, 18.8e-6), Err(HamiltonianError::NoAntiCrossing { .. })));
        let a = anticrossing_gap(&s, 1, 1e-6).unwrap();
        assert!((a.g - 5e-6).abs() < 1e-9);
    }

    #[test]
    fn monotone_sweep_has_no_minimum() {
        let dets: Vec<f64> = (0..10).map(|i| 0.1 + 0.05 * i as f64).collect();
        let s = synthetic_anticrossing_sweep(6.46, 9.8e-3, &dets).unwrap();
        assert!(matches!(anticrossing_gap(&s, 1, 18.8e-6), Err(HamiltonianError::NoAntiCrossing { .. })));
        assert!(anticrossing_gap(&s[..4], 1, 18.8e-6).is_err());
        assert!(anticrossing_gap(&s, 7, 18.8e-6).is_err());
    }

    #[test]
    fn purcell_hand_values() {
        let kappa = decay_rate(6.46e9, 720.0).kappa;
        // (Δ/g)² / κ by hand.
        let by_hand = |d: f64| (d / 9.8e6f64).powi(2) / (2.0 * PI * 6.46e9 / 720.0);
        assert!((purcell_t1(9.8e6, 200e6, kappa) - by_hand(200e6)).abs() < 1e-18);
        assert!((purcell_t1(9.8e6, 200e6, kappa) - 7.39e-6).abs() < 0.01e-6);
        assert!((purcell_t1(9.8e6, 40e6, kappa) - 0.2955e-6).abs() < 0.001e-6);
        assert_eq!(purcell_t1(0.0, 40e6, kappa), f64::INFINITY);
        assert_eq!(purcell_t1(9.8e6, 0.0, kappa), 0.0);
        assert!((combined_t1(1.77e-6, purcell_t1(9.8e6, 200e6, kappa)) - 1.43e-6).abs() < 0.005e-6);
    }

    #[test]
    fn combined_limits() {
        assert_eq!(combined_t1(1.77e-6, f64::INFINITY), 1.77e-6);
        assert!((combined_t1(2e-6, 2e-6) - 1e-6).abs() < 1e-21);
    }

    proptest! {
        #[test]
        fn combined_is_below_both(a in 1e-9..1e-3f64, b in 1e-9..1e-3f64) {
            let c = combined_t1(a, b);
            prop_assert!(c <= a.min(b));
        }

        #[test]
        fn purcell_grows_with_detuning(g in 1e5..1e8f64, d in 1e6..1e9f64) {
            prop_assert!(purcell_t1(g, 2.0 * d, 5e7) > purcell_t1(g, d, 5e7));
            prop_assert_eq!(purcell_t1(g, d, 5e7), purcell_t1(g, -d, 5e7));
        }
    }
}
