//! Device parameters and configuration files.
//!
//! The configuration is a JSON object with four sections. Keys match the
//! field names of [`DeviceParams`]; values are SI except fluxes, which are in
//! units of Φ0:
//!
//! ```json
//! {
//!   "qubit": { "ic_x_qub": 103e-9, "d_asym": 0.102, "ic_z_qub": 228e-9,
//!              "c_shunt_qub": 70e-15, "l_z_qub": 133e-12 },
//!   "qfp": { "ic_x_qfp": 990e-9, "l_qfp": 416e-12,
//!            "m_qub_qfp": 65e-12, "m_qfp_tres": 65e-12 },
//!   "resonator": { "ic_tres": 1200e-9, "l_tres": 199e-12, "q_total": 720 },
//!   "calibration": { "flux_offset_z": 0.0, "flux_offset_x": 0.0 }
//! }
//! ```
//!
//! Optional keys and their defaults: `qubit.ip_qub` (170 nA), `qubit.t1_avg`
//! (1.77 µs), `resonator.q_external` (760), `resonator.f_res_max` (6.46 GHz)
//! and both calibration offsets (0). The whole `calibration` section may be
//! omitted. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::PHI0;

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("configuration parse error: {0}")]
    Parse(String),
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("invalid {field}: {reason} (got {value:e})")]
    Invalid {
        field: &'static str,
        reason: &'static str,
        value: f64,
    },
}

/// Circuit constants of the qubit, QFP and tunable resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Qubit x-loop junction critical current (A).
    pub ic_x_qub: f64,
    /// Qubit x-loop junction asymmetry.
    pub d_asym: f64,
    /// Qubit z-loop junction critical current (A).
    pub ic_z_qub: f64,
    /// Qubit shunt capacitance (F).
    pub c_shunt_qub: f64,
    /// Qubit linear z-loop inductance (H).
    pub l_z_qub: f64,
    /// Qubit persistent current magnitude (A).
    pub ip_qub: f64,
    /// QFP x-loop junction critical current, per junction (A).
    pub ic_x_qfp: f64,
    /// QFP z-loop linear inductance (H).
    pub l_qfp: f64,
    /// Qubit-QFP mutual inductance (H).
    pub m_qub_qfp: f64,
    /// QFP-resonator mutual inductance (H).
    pub m_qfp_tres: f64,
    /// Resonator RF-SQUID junction critical current (A).
    pub ic_tres: f64,
    /// Resonator RF-SQUID loop inductance (H).
    pub l_tres: f64,
    pub q_total: f64,
    pub q_external: f64,
    /// Upper sweet-spot frequency of the tunable resonator (Hz).
    pub f_res_max: f64,
    /// Qubit lifetime from all channels other than the readout resonator (s).
    pub t1_avg: f64,
    /// Trapped-flux offset added to the qubit z bias (Φ0).
    pub flux_offset_z: f64,
    /// Trapped-flux offset added to the qubit x bias (Φ0).
    pub flux_offset_x: f64,
}

pub const DEFAULT_IP_QUB: f64 = 170e-9;
pub const DEFAULT_T1_AVG: f64 = 1.77e-6;
pub const DEFAULT_Q_EXTERNAL: f64 = 760.0;
pub const DEFAULT_F_RES_MAX: f64 = 6.46e9;

impl DeviceParams {
    /// Flux quantum used for all conversions.
    pub const PHI0: f64 = PHI0;

    /// The fabricated device: extracted values where they exist, design
    /// values otherwise.
    pub fn fabricated() -> Self {
        Self {
            ic_x_qub: 103e-9,
            d_asym: 0.102,
            ic_z_qub: 228e-9,
            c_shunt_qub: 70e-15,
            l_z_qub: 133e-12,
            ip_qub: DEFAULT_IP_QUB,
            ic_x_qfp: 990e-9,
            l_qfp: 416e-12,
            m_qub_qfp: 65e-12,
            m_qfp_tres: 65e-12,
            ic_tres: 1200e-9,
            l_tres: 199e-12,
            q_total: 720.0,
            q_external: DEFAULT_Q_EXTERNAL,
            f_res_max: DEFAULT_F_RES_MAX,
            t1_avg: DEFAULT_T1_AVG,
            flux_offset_z: 0.0,
            flux_offset_x: 0.0,
        }
    }

    /// The design targets (no fabrication offsets).
    pub fn designed() -> Self {
        Self {
            ic_x_qub: 90e-9,
            d_asym: 0.0,
            ic_z_qub: 194e-9,
            c_shunt_qub: 47e-15,
            q_total: 650.0,
            ..Self::fabricated()
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let positive = [
            ("ic_x_qub", self.ic_x_qub),
            ("ic_z_qub", self.ic_z_qub),
            ("c_shunt_qub", self.c_shunt_qub),
            ("l_z_qub", self.l_z_qub),
            ("ic_x_qfp", self.ic_x_qfp),
            ("l_qfp", self.l_qfp),
            ("m_qub_qfp", self.m_qub_qfp),
            ("m_qfp_tres", self.m_qfp_tres),
            ("ic_tres", self.ic_tres),
            ("l_tres", self.l_tres),
            ("q_total", self.q_total),
            ("q_external", self.q_external),
            ("f_res_max", self.f_res_max),
            ("t1_avg", self.t1_avg),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DeviceError::Invalid {
                    field,
                    reason: "must be finite and strictly positive",
                    value,
                });
            }
        }
        if !(self.ip_qub.is_finite() && self.ip_qub >= 0.0) {
            return Err(DeviceError::Invalid {
                field: "ip_qub",
                reason: "must be finite and nonnegative",
                value: self.ip_qub,
            });
        }
        if !(0.0..1.0).contains(&self.d_asym) {
            return Err(DeviceError::Invalid {
                field: "d_asym",
                reason: "must lie in [0, 1)",
                value: self.d_asym,
            });
        }
        if 1.0 / self.q_total - 1.0 / self.q_external < 0.0 {
            return Err(DeviceError::Invalid {
                field: "q_external",
                reason: "implies negative internal loss (q_external < q_total)",
                value: self.q_external,
            });
        }
        for (field, value) in [
            ("flux_offset_z", self.flux_offset_z),
            ("flux_offset_x", self.flux_offset_x),
        ] {
            if !value.is_finite() {
                return Err(DeviceError::Invalid {
                    field,
                    reason: "must be finite",
                    value,
                });
            }
        }
        Ok(())
    }

    /// Internal quality factor implied by the total and external ones.
    pub fn q_internal(&self) -> f64 {
        1.0 / (1.0 / self.q_total - 1.0 / self.q_external)
    }

    /// Serializes into the sectioned configuration schema.
    pub fn to_config_json(&self) -> String {
        let doc = serde_json::json!({
            "qubit": {
                "ic_x_qub": self.ic_x_qub,
                "d_asym": self.d_asym,
                "ic_z_qub": self.ic_z_qub,
                "c_shunt_qub": self.c_shunt_qub,
                "l_z_qub": self.l_z_qub,
                "ip_qub": self.ip_qub,
                "t1_avg": self.t1_avg,
            },
            "qfp": {
                "ic_x_qfp": self.ic_x_qfp,
                "l_qfp": self.l_qfp,
                "m_qub_qfp": self.m_qub_qfp,
                "m_qfp_tres": self.m_qfp_tres,
            },
            "resonator": {
                "ic_tres": self.ic_tres,
                "l_tres": self.l_tres,
                "q_total": self.q_total,
                "q_external": self.q_external,
                "f_res_max": self.f_res_max,
            },
            "calibration": {
                "flux_offset_z": self.flux_offset_z,
                "flux_offset_x": self.flux_offset_x,
            },
        });
        serde_json::to_string_pretty(&doc).expect("plain numbers always serialize")
    }
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::fabricated()
    }
}

const SECTIONS: [(&str, &[&str]); 4] = [
    (
        "qubit",
        &[
            "ic_x_qub",
            "d_asym",
            "ic_z_qub",
            "c_shunt_qub",
            "l_z_qub",
            "ip_qub",
            "t1_avg",
        ],
    ),
    ("qfp", &["ic_x_qfp", "l_qfp", "m_qub_qfp", "m_qfp_tres"]),
    (
        "resonator",
        &["ic_tres", "l_tres", "q_total", "q_external", "f_res_max"],
    ),
    ("calibration", &["flux_offset_z", "flux_offset_x"]),
];

struct Sections<'a> {
    doc: &'a Map<String, Value>,
}

impl Sections<'_> {
    fn get(&self, section: &str, key: &'static str) -> Result<Option<f64>, DeviceError> {
        let Some(sec) = self.doc.get(section) else {
            return Ok(None);
        };
        match sec.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| DeviceError::Parse(format!("{key} must be a number"))),
        }
    }

    fn required(&self, section: &str, key: &'static str) -> Result<f64, DeviceError> {
        self.get(section, key)?.ok_or(DeviceError::MissingField(key))
    }

    fn optional(&self, section: &str, key: &'static str, default: f64) -> Result<f64, DeviceError> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }
}

/// Parses and validates a device configuration.
pub fn load_device(config_text: &str) -> Result<DeviceParams, DeviceError> {
    let value: Value =
        serde_json::from_str(config_text).map_err(|e| DeviceError::Parse(e.to_string()))?;
    let doc = value
        .as_object()
        .ok_or_else(|| DeviceError::Parse("top level must be an object".into()))?;

    for (name, body) in doc {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            return Err(DeviceError::UnknownField(name.clone()));
        };
        let body = body
            .as_object()
            .ok_or_else(|| DeviceError::Parse(format!("section {name} must be an object")))?;
        if let Some(k) = body.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(DeviceError::UnknownField(format!("{name}.{k}")));
        }
    }

    let s = Sections { doc };
    let p = DeviceParams {
        ic_x_qub: s.required("qubit", "ic_x_qub")?,
        d_asym: s.required("qubit", "d_asym")?,
        ic_z_qub: s.required("qubit", "ic_z_qub")?,
        c_shunt_qub: s.required("qubit", "c_shunt_qub")?,
        l_z_qub: s.required("qubit", "l_z_qub")?,
        ip_qub: s.optional("qubit", "ip_qub", DEFAULT_IP_QUB)?,
        t1_avg: s.optional("qubit", "t1_avg", DEFAULT_T1_AVG)?,
        ic_x_qfp: s.required("qfp", "ic_x_qfp")?,
        l_qfp: s.required("qfp", "l_qfp")?,
        m_qub_qfp: s.required("qfp", "m_qub_qfp")?,
        m_qfp_tres: s.required("qfp", "m_qfp_tres")?,
        ic_tres: s.required("resonator", "ic_tres")?,
        l_tres: s.required("resonator", "l_tres")?,
        q_total: s.required("resonator", "q_total")?,
        q_external: s.optional("resonator", "q_external", DEFAULT_Q_EXTERNAL)?,
        f_res_max: s.optional("resonator", "f_res_max", DEFAULT_F_RES_MAX)?,
        flux_offset_z: s.optional("calibration", "flux_offset_z", 0.0)?,
        flux_offset_x: s.optional("calibration", "flux_offset_x", 0.0)?,
    };
    p.validate()?;
    Ok(p)
}
