//! Noise model, spectral synthesis, photon-counting simulation and fitting
//! for a waveguide difference-frequency converter.

pub mod cli;
pub mod config;
pub mod converter;
pub mod error;
pub mod estimator;
pub mod io;
pub mod photon;
pub mod pipeline;
pub mod report;
pub mod spectral;

pub use converter::{ConverterParams, Efficiency, PumpPower, WavelengthTriple};
pub use error::{Error, Result};
pub use estimator::{Estimate, FitResult, PowerSweep, SweepKind, SweepPoint};
pub use photon::{CountRecord, MeasurementChain, NormalizedRate};
pub use spectral::{SfgMode, SpectralScan};
