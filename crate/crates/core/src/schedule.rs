//! Piecewise-linear flux waveforms for the five control lines.
//!
//! Schedule files are JSON lists of `{"line": name, "points": [[t_s, value], ...]}`
//! with line names `phi_z_qub`, `phi_x_qub`, `phi_z_qfp`, `phi_x_qfp` and
//! `phi_z_tres`. Lines left out of a file hold 0 Φ0 for the whole run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule parse error: {0}")]
    Parse(String),
    #[error("unknown control line {0:?}")]
    UnknownLine(String),
    #[error("control line {0} listed twice")]
    DuplicateLine(ControlLine),
    #[error("control line {0} has no breakpoints")]
    Empty(ControlLine),
    #[error("control line {line}: breakpoint times must be strictly increasing (index {index})")]
    NotIncreasing { line: ControlLine, index: usize },
    #[error("control line {0}: non-finite breakpoint")]
    NonFinite(ControlLine),
}

/// Qubit persistent-current state. R is the state a positive tilt
/// prepares; it pushes the QFP s-curve toward positive z-flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitState {
    L,
    R,
}

impl QubitState {
    pub fn other(self) -> Self {
        match self {
            QubitState::L => QubitState::R,
            QubitState::R => QubitState::L,
        }
    }
}

impl fmt::Display for QubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QubitState::L => "L",
            QubitState::R => "R",
        })
    }
}

impl FromStr for QubitState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "L" | "l" => Ok(QubitState::L),
            "R" | "r" => Ok(QubitState::R),
            other => Err(format!("qubit state must be L or R, got {other:?}")),
        }
    }
}

/// Applied fluxes on every control line at one instant (Φ0 units).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FluxBias {
    pub phi_z_qub: f64,
    pub phi_x_qub: f64,
    pub phi_z_qfp: f64,
    pub phi_x_qfp: f64,
    pub phi_z_tres: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlLine {
    PhiZQub,
    PhiXQub,
    PhiZQfp,
    PhiXQfp,
    PhiZTres,
}

impl ControlLine {
    pub const ALL: [ControlLine; 5] = [
        ControlLine::PhiZQub,
        ControlLine::PhiXQub,
        ControlLine::PhiZQfp,
        ControlLine::PhiXQfp,
        ControlLine::PhiZTres,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControlLine::PhiZQub => "phi_z_qub",
            ControlLine::PhiXQub => "phi_x_qub",
            ControlLine::PhiZQfp => "phi_z_qfp",
            ControlLine::PhiXQfp => "phi_x_qfp",
            ControlLine::PhiZTres => "phi_z_tres",
        }
    }

    fn slot(self, bias: &mut FluxBias) -> &mut f64 {
        match self {
            ControlLine::PhiZQub => &mut bias.phi_z_qub,
            ControlLine::PhiXQub => &mut bias.phi_x_qub,
            ControlLine::PhiZQfp => &mut bias.phi_z_qfp,
            ControlLine::PhiXQfp => &mut bias.phi_x_qfp,
            ControlLine::PhiZTres => &mut bias.phi_z_tres,
        }
    }
}

impl fmt::Display for ControlLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControlLine {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControlLine::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| ScheduleError::UnknownLine(s.to_string()))
    }
}

/// Breakpoints of one line; values are clamped outside the first and last
/// breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    points: Vec<(f64, f64)>,
}

impl Waveform {
    pub fn new(line: ControlLine, points: Vec<(f64, f64)>) -> Result<Self, ScheduleError> {
        if points.is_empty() {
            return Err(ScheduleError::Empty(line));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(ScheduleError::NonFinite(line));
        }
        if let Some(index) = points.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(ScheduleError::NotIncreasing { line, index: index + 1 });
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self { points: vec![(0.0, value)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        let (t0, v0) = pts[0];
        if t <= t0 {
            return v0;
        }
        let (tn, vn) = pts[pts.len() - 1];
        if t >= tn {
            return vn;
        }
        // first breakpoint strictly after t; guaranteed in 1..len
        let k = pts.partition_point(|&(tk, _)| tk <= t);
        let (ta, va) = pts[k - 1];
        let (tb, vb) = pts[k];
        let s = (t - ta) / (tb - ta);
        va + s * (vb - va)
    }

    /// Breakpoint time span; a single-point line spans nothing.
    fn span(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSchedule {
    lines: [Waveform; 5],
}

#[derive(Serialize, Deserialize)]
struct LineRecord {
    line: String,
    points: Vec<[f64; 2]>,
}

impl BiasSchedule {
    /// All lines held at zero.
    pub fn zero() -> Self {
        Self {
            lines: std::array::from_fn(|_| Waveform::constant(0.0)),
        }
    }

    pub fn with_line(mut self, line: ControlLine, waveform: Waveform) -> Self {
        self.lines[line as usize] = waveform;
        self
    }

    pub fn line(&self, line: ControlLine) -> &Waveform {
        &self.lines[line as usize]
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleError> {
        let records: Vec<LineRecord> =
            serde_json::from_str(text).map_err(|e| ScheduleError::Parse(e.to_string()))?;
        let mut seen = Vec::new();
        let mut schedule = Self::zero();
        for rec in records {
            let line: ControlLine = rec.line.parse()?;
            if seen.contains(&line) {
                return Err(ScheduleError::DuplicateLine(line));
            }
            seen.push(line);
            let pts = rec.points.into_iter().map(|[t, v]| (t, v)).collect();
            schedule.lines[line as usize] = Waveform::new(line, pts)?;
        }
        Ok(schedule)
    }

    pub fn to_json(&self) -> String {
        let records: Vec<LineRecord> = ControlLine::ALL
            .iter()
            .map(|&l| LineRecord {
                line: l.name().to_string(),
                points: self.line(l).points.iter().map(|&(t, v)| [t, v]).collect(),
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("numbers always serialize")
    }

    /// Time window covered by breakpoints on any line.
    pub fn time_span(&self) -> (f64, f64) {
        self.lines.iter().map(Waveform::span).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), (a, b)| (lo.min(a), hi.max(b)),
        )
    }

    /// Shortest interval between consecutive breakpoints whose values differ.
    pub fn fastest_ramp(&self) -> Option<f64> {
        self.lines
            .iter()
            .flat_map(|w| w.points.windows(2))
            .filter(|w| w[0].1 != w[1].1)
            .map(|w| w[1].0 - w[0].0)
            .min_by(f64::total_cmp)
    }

    /// Same schedule with one line's values negated.
    pub fn mirrored(&self, line: ControlLine) -> Self {
        let mut out = self.clone();
        for p in &mut out.lines[line as usize].points {
            p.1 = -p.1;
        }
        out
    }

    /// Reflection φ → −φ of the qubit loop: negates its z and x biases.
    /// With asymmetric x-loop junctions the x negation is part of the
    /// symmetry, so negating the tilt alone does not mirror the qubit.
    pub fn reflected_qubit(&self) -> Self {
        self.mirrored(ControlLine::PhiZQub).mirrored(ControlLine::PhiXQub)
    }

    /// Reflection of both the qubit and the QFP loops.
    pub fn reflected(&self) -> Self {
        self.reflected_qubit()
            .mirrored(ControlLine::PhiZQfp)
            .mirrored(ControlLine::PhiXQfp)
    }

    /// Same schedule with a constant added to one line.
    pub fn offset(&self, line: ControlLine, delta: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.lines[line as usize].points {
            p.1 += delta;
        }
        out
    }

    /// The readout sequence: tilt the qubit, anneal it, anneal the QFP, then
    /// reset the qubit while the QFP stays latched. Ramps are 1 µs long.
    pub fn readout_sequence(qubit_tilt: f64) -> Self {
        let us = 1e-6;
        let w = |line, pts: &[(f64, f64)]| {
            Waveform::new(line, pts.iter().map(|&(t, v)| (t * us, v)).collect())
                .expect("static breakpoints are ordered")
        };
        Self::zero()
            .with_line(ControlLine::PhiZQub, w(ControlLine::PhiZQub, &[(0.0, qubit_tilt)]))
            .with_line(
                ControlLine::PhiXQub,
                w(ControlLine::PhiXQub, &[(0.1, 0.0), (1.1, 1.0), (2.5, 1.0), (3.5, 0.0), (4.0, 0.0)]),
            )
            .with_line(
                ControlLine::PhiXQfp,
                w(ControlLine::PhiXQfp, &[(1.3, 0.5), (2.3, 1.0)]),
            )
            .with_line(ControlLine::PhiZTres, w(ControlLine::PhiZTres, &[(0.0, 0.25)]))
    }

    /// Readout sequence preparing `state`: R uses a positive tilt of
    /// `tilt` and L its qubit reflection.
    pub fn prepared(state: QubitState, tilt: f64) -> Self {
        let r = Self::readout_sequence(tilt.abs());
        match state {
            QubitState::R => r,
            QubitState::L => r.reflected_qubit(),
        }
    }

    /// Times at which the qubit anneal, QFP anneal and qubit reset finish
    /// in [`BiasSchedule::readout_sequence`].
    pub const READOUT_MILESTONES: [f64; 3] = [1.1e-6, 2.3e-6, 3.5e-6];
}

/// Evaluates every control line at time `t`.
pub fn eval_schedule(s: &BiasSchedule, t: f64) -> FluxBias {
    let mut bias = FluxBias::default();
    for line in ControlLine::ALL {
        *line.slot(&mut bias) = s.line(line).eval(t);
    }
    bias
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp() -> BiasSchedule {
        BiasSchedule::zero().with_line(
            ControlLine::PhiXQub,
            Waveform::new(ControlLine::PhiXQub, vec![(0.0, 0.0), (10e-6, 1.0)]).unwrap(),
        )
    }

    #[test]
    fn midpoint_and_clamping() {
        let s = ramp();
        assert_eq!(eval_schedule(&s, 5e-6).phi_x_qub, 0.5);
        assert_eq!(eval_schedule(&s, -1e-6).phi_x_qub, 0.0);
        assert_eq!(eval_schedule(&s, 20e-6).phi_x_qub, 1.0);
        assert_eq!(eval_schedule(&s, 5e-6).phi_z_qfp, 0.0);
    }

    #[test]
    fn readout_sequence_after_qubit_anneal() {
        let s = BiasSchedule::readout_sequence(1e-3);
        let b = eval_schedule(&s, 1.2e-6);
        assert_eq!(b.phi_x_qub, 1.0);
        assert_eq!(b.phi_x_qfp, 0.5);
        assert_eq!(b.phi_z_qub, 1e-3);
        assert_eq!(b.phi_z_tres, 0.25);
        let end = eval_schedule(&s, 4.0e-6);
        assert_eq!((end.phi_x_qub, end.phi_x_qfp), (0.0, 1.0));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let s = BiasSchedule::readout_sequence(-2e-3);
        assert_eq!(BiasSchedule::from_json(&s.to_json()).unwrap(), s);

        let bad = r#"[{"line":"phi_x_qfp","points":[[0,0],[0,1]]}]"#;
        assert_eq!(
            BiasSchedule::from_json(bad).unwrap_err(),
            ScheduleError::NotIncreasing { line: ControlLine::PhiXQfp, index: 1 }
        );
        let bad = r#"[{"line":"phi_y","points":[[0,0]]}]"#;
        assert!(matches!(BiasSchedule::from_json(bad), Err(ScheduleError::UnknownLine(_))));
        let bad = r#"[{"line":"phi_z_qub","points":[]}]"#;
        assert!(matches!(BiasSchedule::from_json(bad), Err(ScheduleError::Empty(_))));
        let partial = r#"[{"line":"phi_z_qfp","points":[[0,0.003]]}]"#;
        let s = BiasSchedule::from_json(partial).unwrap();
        assert_eq!(eval_schedule(&s, 1.0).phi_z_qfp, 0.003);
        assert_eq!(eval_schedule(&s, 1.0).phi_x_qfp, 0.0);
    }

    #[test]
    fn fastest_ramp_ignores_flat_segments() {
        let s = BiasSchedule::readout_sequence(0.0);
        let r = s.fastest_ramp().unwrap();
        assert!((r - 1e-6).abs() < 1e-15, "{r}");
    }

    proptest! {
        #[test]
        fn interpolation_is_exactly_linear_between_breakpoints(
            v0 in -2.0f64..2.0, v1 in -2.0f64..2.0, t1 in 1e-9f64..1e-3, frac in 0.0f64..1.0,
        ) {
            let w = Waveform::new(ControlLine::PhiZQfp, vec![(0.0, v0), (t1, v1)]).unwrap();
            let t = frac * t1;
            let expected = v0 + (t / t1) * (v1 - v0);
            prop_assert!((w.eval(t) - expected).abs() <= 4.0 * f64::EPSILON * (v0.abs() + v1.abs()));
        }
    }
}
