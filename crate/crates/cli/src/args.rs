use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use fluxchain_core::schedule::QubitState;

/// Inclusive linear sweep written `start:stop:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Sweep {
    pub const fn new(start: f64, stop: f64, n: usize) -> Self {
        Self { start, stop, n }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| if i == self.n - 1 { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected start:stop:n, got {s:?}"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let (start, stop) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?;
        if n == 0 {
            return Err("sweep needs at least one point".into());
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(format!("non-finite sweep bounds in {s:?}"));
        }
        Ok(Self { start, stop, n })
    }
}

#[derive(Debug, Parser)]
#[command(name = "fluxchain", version, about = "Flux-qubit readout chain: sweeps, fits and simulations")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// Device configuration JSON (defaults to the built-in fabricated device).
    #[arg(long, global = true, value_name = "PATH")]
    pub device: Option<PathBuf>,
    /// Normal-mode coefficient JSON; repeat for a sweep of Hamiltonians.
    #[arg(long, global = true, value_name = "PATH")]
    pub coeffs: Vec<PathBuf>,
    /// Output file or directory (stdout when absent).
    #[arg(long, global = true, value_name = "PATH|DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_name = "N")]
    pub shots: Option<u64>,
    /// Integration time (s).
    #[arg(long, global = true, value_name = "SECONDS")]
    pub tint: Option<f64>,
    #[arg(long, global = true, value_name = "START:STOP:N", allow_hyphen_values = true)]
    pub sweep: Option<Sweep>,
    /// Repeat the eigensolve with larger truncations and report the change.
    #[arg(long, global = true)]
    pub escalate: bool,
    /// Recompute and compare against the manifest instead of writing.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Device parameters
    #[command(subcommand)]
    Device(DeviceCmd),
    /// QFP coupler and s-curves
    #[command(subcommand)]
    Qfp(QfpCmd),
    /// Tunable resonator
    #[command(subcommand)]
    Res(ResCmd),
    /// Annealing dynamics of the qubit and QFP
    #[command(subcommand)]
    Anneal(AnnealCmd),
    /// Circuit Hamiltonian spectra
    #[command(subcommand)]
    Ham(HamCmd),
    /// Single-shot readout histograms
    #[command(subcommand)]
    Measure(MeasureCmd),
}

#[derive(Debug, Subcommand, Clone)]
pub enum DeviceCmd {
    /// Check the device and report derived quantities
    Validate,
}

#[derive(Debug, Subcommand, Clone)]
pub enum QfpCmd {
    /// beta_L, susceptibility and effective mutual over the QFP x-flux (sweep in Φ0)
    Betasweep,
    /// Binomially sampled analytic s-curve (sweep in mΦ0)
    Scurve {
        #[arg(long, default_value = "L")]
        state: QubitState,
        /// Width (mΦ0).
        #[arg(long, default_value_t = 1.4)]
        width: f64,
        /// Center (mΦ0); defaults to half the qubit flux signal, signed by state.
        #[arg(long, allow_hyphen_values = true)]
        center: Option<f64>,
    },
    /// Separation fidelity of two s-curves
    Fidelity {
        /// L-state s-curve CSV
        #[arg(long, requires = "right")]
        left: Option<PathBuf>,
        /// R-state s-curve CSV
        #[arg(long, requires = "left")]
        right: Option<PathBuf>,
        #[arg(long, default_value_t = 0.99999)]
        target: f64,
    },
}

#[derive(Debug, Subcommand, Clone)]
pub enum ResCmd {
    /// Resonance and flux sensitivity over flux (sweep in Φ0)
    Modulation,
    /// Fit the asymmetric notch lineshape to a trace
    Fit {
        /// freq_hz,s21_mag CSV; a synthetic trace of the device is used when absent
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        bootstrap: usize,
        /// Points of the synthetic trace.
        #[arg(long, default_value_t = 401)]
        points: usize,
        /// Relative noise of the synthetic trace.
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
    /// Frequency shift between the two QFP states
    Shift {
        /// Operating flux (Φ0).
        #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
        op: f64,
        /// Full flux step between the states (Φ0).
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
}

#[derive(Debug, Subcommand, Clone)]
pub enum AnnealCmd {
    /// Persistent currents along a bias schedule
    Trace {
        /// Schedule JSON; the standard readout sequence is used when absent
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Initial qubit tilt of the standard sequence (mΦ0).
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        tilt: f64,
        /// Time step (s).
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Simulated s-curve of a prepared qubit state (sweep in mΦ0)
    Scurve {
        #[arg(long, default_value = "L")]
        state: QubitState,
        /// Preparation tilt (mΦ0).
        #[arg(long, default_value_t = 5.0)]
        tilt: f64,
        /// Standard deviation of the per-shot flux error (mΦ0).
        #[arg(long, default_value_t = 1.18)]
        sigma: f64,
        #[arg(long)]
        dt: Option<f64>,
    },
}

#[derive(Debug, Subcommand, Clone)]
pub enum HamCmd {
    /// Lowest levels of a normal-mode Hamiltonian
    Eig {
        #[arg(long, default_value_t = 14)]
        k: usize,
    },
    /// Minimum gap between two adjacent levels across a sweep
    Anticross {
        /// Coupling of the synthetic model (MHz); ignored with --coeffs.
        #[arg(long, default_value_t = 9.8)]
        g_mhz: f64,
        /// Lower level of the pair.
        #[arg(long, default_value_t = 1)]
        pair: usize,
        /// Smallest resolvable gap (MHz).
        #[arg(long, default_value_t = 0.0188)]
        resolution_mhz: f64,
    },
    /// Purcell and combined T1 over qubit-resonator detuning (sweep in MHz)
    T1sweep {
        #[arg(long, default_value_t = 9.8)]
        g_mhz: f64,
    },
}

#[derive(Debug, Subcommand, Clone)]
pub enum MeasureCmd {
    /// Simulated integrated signals of alternately prepared shots
    Shots(ModelArgs),
    /// Gaussian analysis of a shot ensemble
    Histogram {
        /// Shot CSV; shots are simulated when absent
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fidelity over integration time (sweep in s)
    Sweep(ModelArgs),
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Preparation error per state.
    #[arg(long)]
    pub prep_error: Option<f64>,
    /// Latching error per state.
    #[arg(long)]
    pub latch_error: Option<f64>,
}
