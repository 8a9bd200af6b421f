use thiserror::Error;

use crate::anneal::AnnealError;
use crate::device::DeviceError;
use crate::fit::FitError;
use crate::hamiltonian::HamiltonianError;
use crate::qfp::QfpError;
use crate::readout::ReadoutError;
use crate::resonator::ResonatorError;
use crate::schedule::ScheduleError;

/// Any domain error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Qfp(#[from] QfpError),
    #[error(transparent)]
    Resonator(#[from] ResonatorError),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
