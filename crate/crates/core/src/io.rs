//! File formats: CSV with a unit-bearing header row plus JSON sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{FitResult, PowerSweep, SweepKind, SweepPoint};
use crate::photon::CountRecord;
use crate::spectral::SpectralScan;

pub const SCAN_HEADER: [&str; 2] = ["wavelength_nm", "rate_hz"];
pub const EFFICIENCY_SWEEP_HEADER: [&str; 3] = ["pump_w", "efficiency", "sigma"];
pub const RATE_SWEEP_HEADER: [&str; 3] = ["pump_w", "rate_hz", "sigma_hz"];
pub const COUNTS_HEADER: [&str; 4] = ["pump_w", "counts", "duration_s", "seed"];

/// `foo/bar.csv` -> `foo/bar.json`
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: match e.kind() {
            csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
            _ => e.to_string(),
        },
    }
}

fn write_rows<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{other:?}")),
        })?;
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{other:?}")),
    };
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<R: DeserializeOwned>(path: &Path, headers: &[&[&str]]) -> Result<(usize, Vec<R>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{other:?}")),
        })?;
    let found = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let which = headers
        .iter()
        .position(|h| found.iter().eq(h.iter().copied()))
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "unexpected header `{}`, expected one of: {}",
                found.iter().collect::<Vec<_>>().join(","),
                headers.iter().map(|h| h.join(",")).collect::<Vec<_>>().join(" | ")
            ),
        })?;
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok((which, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Writes `rows` as CSV with a header taken from the struct field names.
pub fn write_table<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{other:?}")),
    })?;
    for row in rows {
        w.serialize(row).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{other:?}")),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_table`].
pub fn read_table<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{other:?}")),
    })?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| csv_error(path, e))
}

/// Sidecar for tables that are not scans or sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableMetadata {
    pub description: String,
    pub seed: u64,
}

/// Scan metadata kept beside the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanMetadata {
    pub filter_fwhm_nm: f64,
    pub step_nm: f64,
    pub integration_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn write_scan(path: &Path, scan: &SpectralScan, description: Option<&str>, seed: Option<u64>) -> Result<()> {
    write_rows(path, &SCAN_HEADER, scan.samples.iter().copied())?;
    write_json(
        &sidecar_path(path),
        &ScanMetadata {
            filter_fwhm_nm: scan.filter_fwhm,
            step_nm: scan.step,
            integration_time_s: scan.integration_time,
            description: description.map(str::to_owned),
            seed,
        },
    )
}

pub fn read_scan(path: &Path) -> Result<SpectralScan> {
    let (_, samples): (_, Vec<(f64, f64)>) = read_rows(path, &[&SCAN_HEADER])?;
    let meta: ScanMetadata = read_json(&sidecar_path(path))?;
    SpectralScan::new(samples, meta.filter_fwhm_nm, meta.step_nm, meta.integration_time_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMetadata {
    pub kind: SweepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn write_sweep(path: &Path, sweep: &PowerSweep, seed: Option<u64>) -> Result<()> {
    let header: &[&str] = if sweep.kind().is_efficiency() {
        &EFFICIENCY_SWEEP_HEADER
    } else {
        &RATE_SWEEP_HEADER
    };
    write_rows(path, header, sweep.points().iter().map(|p| (p.pump_w, p.value, p.sigma)))?;
    write_json(
        &sidecar_path(path),
        &SweepMetadata {
            kind: sweep.kind(),
            seed,
        },
    )
}

/// Reads a sweep. The kind comes from the JSON sidecar when present,
/// otherwise from `fallback`; the header units must agree with it.
pub fn read_sweep(path: &Path, fallback: Option<SweepKind>) -> Result<PowerSweep> {
    let (which, rows): (_, Vec<(f64, f64, f64)>) =
        read_rows(path, &[&EFFICIENCY_SWEEP_HEADER, &RATE_SWEEP_HEADER])?;
    let side = sidecar_path(path);
    let kind = if side.exists() {
        read_json::<SweepMetadata>(&side)?.kind
    } else {
        fallback.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("no sidecar {} and no sweep kind given", side.display()),
        })?
    };
    if kind.is_efficiency() != (which == 0) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header units do not match sweep kind {}", kind.as_str()),
        });
    }
    let points = rows
        .into_iter()
        .map(|(pump_w, value, sigma)| SweepPoint { pump_w, value, sigma })
        .collect();
    PowerSweep::new(kind, points).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub pump_w: f64,
    pub counts: u64,
    pub duration_s: f64,
    pub seed: u64,
}

impl CountRow {
    pub fn new(pump_w: f64, record: &CountRecord) -> Self {
        Self {
            pump_w,
            counts: record.counts,
            duration_s: record.duration,
            seed: record.seed,
        }
    }
}

pub fn write_counts(path: &Path, rows: &[CountRow]) -> Result<()> {
    write_rows(path, &COUNTS_HEADER, rows.iter().map(|r| (r.pump_w, r.counts, r.duration_s, r.seed)))
}

pub fn read_counts(path: &Path) -> Result<Vec<CountRow>> {
    let (_, rows): (_, Vec<(f64, u64, f64, u64)>) = read_rows(path, &[&COUNTS_HEADER])?;
    Ok(rows
        .into_iter()
        .map(|(pump_w, counts, duration_s, seed)| CountRow {
            pump_w,
            counts,
            duration_s,
            seed,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParameter {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

/// JSON form of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReport {
    pub kind: String,
    pub parameters: Vec<ReportParameter>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_reduced: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub inputs: Vec<InputDigest>,
}

impl FitReport {
    /// Digests are taken over file contents; only the file name is recorded
    /// so reports do not depend on the working directory.
    pub fn new(kind: &str, fit: &FitResult, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    file: p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: kind.to_string(),
            parameters: fit
                .names
                .iter()
                .enumerate()
                .map(|(i, n)| ReportParameter {
                    name: n.clone(),
                    value: fit.values[i],
                    sigma: fit.sigma(i),
                })
                .collect(),
            covariance: fit.covariance.clone(),
            chi2: fit.chi2,
            dof: fit.dof,
            chi2_reduced: fit.chi2_reduced,
            n_iterations: fit.n_iterations,
            converged: fit.converged,
            inputs,
        })
    }

    pub fn parameter(&self, name: &str) -> Option<&ReportParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Inverse of [`FitReport::new`], dropping the input digests.
    pub fn to_fit_result(&self) -> Result<FitResult> {
        let n = self.parameters.len();
        if self.covariance.len() != n || self.covariance.iter().any(|r| r.len() != n) {
            return Err(Error::InsufficientData(format!(
                "fit `{}`: covariance is not {n}x{n}",
                self.kind
            )));
        }
        Ok(FitResult {
            names: self.parameters.iter().map(|p| p.name.clone()).collect(),
            values: self.parameters.iter().map(|p| p.value).collect(),
            covariance: self.covariance.clone(),
            chi2: self.chi2,
            dof: self.dof,
            chi2_reduced: self.chi2_reduced,
            n_iterations: self.n_iterations,
            converged: self.converged,
        })
    }
}
