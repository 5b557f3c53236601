use std::path::PathBuf;

use thiserror::Error;

use crate::estimator::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain its quantity allows.
    #[error("{name} = {value}: {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("conversion parameter eta_n is zero, the efficiency curve has no maximum")]
    NoMaximum,

    #[error("grid step {step} nm is too coarse for a {fwhm} nm filter (need step <= fwhm/5)")]
    Resolution { step: f64, fwhm: f64 },

    #[error("observed width {observed} is not larger than filter width {filter}")]
    NonPhysicalWidth { observed: f64, filter: f64 },

    #[error("overlapping dips remove more than the full background at {wavelength_nm} nm (total depth {depth})")]
    ModelViolation { wavelength_nm: f64, depth: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("normal equations are rank deficient (rank {rank} of {n_params})")]
    RankDeficient { rank: usize, n_params: usize },

    #[error("fit did not converge after {iterations} iterations (best chi2 {chi2})", iterations = .best.n_iterations, chi2 = .best.chi2)]
    NonConvergence { best: Box<FitResult> },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Returns `Err(Domain)` unless `ok` holds.
pub(crate) fn ensure(ok: bool, name: &'static str, value: f64, constraint: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            constraint,
        })
    }
}
