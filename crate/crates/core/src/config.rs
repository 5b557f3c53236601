//! Run configuration (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::converter::ConverterParams;
use crate::error::{ensure, Error, Result};
use crate::estimator::Estimate;
use crate::photon::MeasurementChain;
use crate::spectral::{Collection, FilterProfile, SfgMode, SpectrumGrid};

pub const SCHEMA_VERSION: u32 = 1;

/// The shipped preset with the measured device constants.
pub const DEVICE_DEFAULTS: &str = include_str!("../presets/device-defaults.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub pump_wavelength_nm: f64,
    pub converter: ConverterParams,
    pub modes: Vec<ModeConfig>,
    pub chains: Chains,
    pub sweep: SweepConfig,
    pub telecom_scan: ScanConfig,
    pub visible_scan: VisibleScanConfig,
    pub visible_noise: VisibleNoiseConfig,
    pub report: ReportConfig,
}

/// A mode entry; `lambda_vis_center` is derived from the pump when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub label: String,
    pub lambda_tele_center: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_vis_center: Option<f64>,
    pub fwhm_sfg: f64,
    pub fwhm_dip: f64,
    pub relative_strength: f64,
}

impl ModeConfig {
    pub fn to_mode(&self, lambda_pump: f64) -> Result<SfgMode> {
        let mut mode = SfgMode::new(
            self.label.clone(),
            lambda_pump,
            self.lambda_tele_center,
            self.fwhm_sfg,
            self.fwhm_dip,
            self.relative_strength,
        )?;
        if let Some(v) = self.lambda_vis_center {
            mode.lambda_vis_center = v;
            mode.validate(lambda_pump)?;
        }
        Ok(mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chains {
    pub telecom: MeasurementChain,
    pub visible: MeasurementChain,
}

/// Pump-power grid for sweeps, plus the noise put on synthetic efficiency
/// data: `sigma = efficiency_noise_rel * eta + efficiency_noise_floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start_w: f64,
    pub stop_w: f64,
    pub points: usize,
    pub efficiency_noise_rel: f64,
    pub efficiency_noise_floor: f64,
    /// Leading points used by the linear noise-coefficient fit.
    pub alpha_fit_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
    pub pump_w: f64,
    /// Bandwidth each sample integrates.
    pub bandwidth_hz: f64,
    /// Filter scanned across the model spectrum for the "measured" output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibleScanConfig {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
    pub pump_w: f64,
    pub bandwidth_hz: f64,
    pub collection: Collection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument: Option<FilterProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibleNoiseConfig {
    /// Noise coefficient seen by the visible measurement, Hz/(W cm).
    pub alpha_n: f64,
    /// Share of the band-pass output that belongs to the fundamental peak.
    pub in_band_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Bandwidths at which the per-bandwidth noise figure is quoted.
    pub bandwidths_hz: Vec<f64>,
    /// Visible-to-telecom detection bandwidth ratio used to compare the two
    /// noise coefficients.
    pub bandwidth_ratio: Estimate,
    /// Tension threshold, in combined standard deviations.
    pub tension_sigma: f64,
}

impl RunConfig {
    pub fn device_defaults() -> Self {
        Self::from_toml_str(DEVICE_DEFAULTS).expect("shipped preset is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let field = |name: &'static str| move |e: Error| Error::Config(format!("{name}: {e}"));
        ensure(self.pump_wavelength_nm > 0.0, "pump_wavelength_nm", self.pump_wavelength_nm, "must be > 0")
            .map_err(field("pump_wavelength_nm"))?;
        if self.modes.is_empty() {
            return Err(Error::Config("modes: at least one mode is required".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            m.to_mode(self.pump_wavelength_nm)
                .map_err(|e| Error::Config(format!("modes[{i}] ({}): {e}", m.label)))?;
        }
        self.chains.telecom.validate().map_err(field("chains.telecom"))?;
        self.chains.visible.validate().map_err(field("chains.visible"))?;

        let s = &self.sweep;
        ensure(s.start_w >= 0.0, "start_w", s.start_w, "must be >= 0").map_err(field("sweep"))?;
        ensure(s.stop_w >= s.start_w, "stop_w", s.stop_w, "must be >= start_w").map_err(field("sweep"))?;
        ensure(s.points >= 1, "points", s.points as f64, "must be >= 1").map_err(field("sweep"))?;
        ensure(s.efficiency_noise_rel >= 0.0, "efficiency_noise_rel", s.efficiency_noise_rel, "must be >= 0")
            .map_err(field("sweep"))?;
        ensure(
            s.efficiency_noise_floor > 0.0,
            "efficiency_noise_floor",
            s.efficiency_noise_floor,
            "must be > 0",
        )
        .map_err(field("sweep"))?;
        ensure(s.alpha_fit_points >= 1, "alpha_fit_points", s.alpha_fit_points as f64, "must be >= 1")
            .map_err(field("sweep"))?;

        self.telecom_grid().map_err(field("telecom_scan"))?;
        ensure(self.telecom_scan.pump_w >= 0.0, "pump_w", self.telecom_scan.pump_w, "must be >= 0")
            .map_err(field("telecom_scan"))?;
        if let Some(f) = &self.telecom_scan.filter {
            f.validate().map_err(field("telecom_scan.filter"))?;
        }
        self.visible_grid().map_err(field("visible_scan"))?;
        ensure(self.visible_scan.pump_w >= 0.0, "pump_w", self.visible_scan.pump_w, "must be >= 0")
            .map_err(field("visible_scan"))?;
        if let Some(f) = &self.visible_scan.instrument {
            f.validate().map_err(field("visible_scan.instrument"))?;
        }
        match &self.visible_scan.collection {
            Collection::SingleMode { higher_order } => {
                ensure((0.0..=1.0).contains(higher_order), "higher_order", *higher_order, "must lie in [0, 1]")
                    .map_err(field("visible_scan.collection"))?;
            }
            Collection::PerMode { factors } => {
                if factors.len() != self.modes.len() {
                    return Err(Error::Config(format!(
                        "visible_scan.collection: {} factors for {} modes",
                        factors.len(),
                        self.modes.len()
                    )));
                }
                for &f in factors {
                    ensure((0.0..=1.0).contains(&f), "collection factor", f, "must lie in [0, 1]")
                        .map_err(field("visible_scan.collection"))?;
                }
            }
            Collection::MultiMode => {}
        }
        self.visible_params().map_err(field("visible_noise"))?;
        let f = self.visible_noise.in_band_fraction;
        ensure(f > 0.0 && f <= 1.0, "in_band_fraction", f, "must lie in (0, 1]").map_err(field("visible_noise"))?;

        let r = &self.report;
        for &b in &r.bandwidths_hz {
            ensure(b > 0.0, "bandwidths_hz", b, "must be > 0").map_err(field("report"))?;
        }
        ensure(r.bandwidth_ratio.value > 0.0, "bandwidth_ratio", r.bandwidth_ratio.value, "must be > 0")
            .map_err(field("report"))?;
        ensure(r.bandwidth_ratio.sigma >= 0.0, "bandwidth_ratio.sigma", r.bandwidth_ratio.sigma, "must be >= 0")
            .map_err(field("report"))?;
        ensure(r.tension_sigma > 0.0, "tension_sigma", r.tension_sigma, "must be > 0").map_err(field("report"))
    }

    pub fn modes(&self) -> Result<Vec<SfgMode>> {
        self.modes.iter().map(|m| m.to_mode(self.pump_wavelength_nm)).collect()
    }

    /// `points` evenly spaced powers from `start_w` to `stop_w`; a single
    /// point sits at `start_w`.
    pub fn pump_grid(&self, points: Option<usize>) -> Vec<f64> {
        let n = points.unwrap_or(self.sweep.points).max(1);
        let (a, b) = (self.sweep.start_w, self.sweep.stop_w);
        if n == 1 {
            return vec![a];
        }
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn telecom_grid(&self) -> Result<SpectrumGrid> {
        let s = &self.telecom_scan;
        SpectrumGrid::uniform(s.start_nm, s.stop_nm, s.step_nm, s.bandwidth_hz)
    }

    pub fn visible_grid(&self) -> Result<SpectrumGrid> {
        let s = &self.visible_scan;
        SpectrumGrid::uniform(s.start_nm, s.stop_nm, s.step_nm, s.bandwidth_hz)
    }

    /// Converter parameters with the visible noise coefficient substituted.
    pub fn visible_params(&self) -> Result<ConverterParams> {
        self.converter
            .with_alpha_n(self.visible_noise.alpha_n, self.converter.bandwidth_ref_hz())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_parses_and_validates() {
        let cfg = RunConfig::device_defaults();
        assert_eq!(cfg.schema_version, SCHEMA_VERSION);
        assert_eq!(cfg.converter, ConverterParams::device_defaults());
        let modes = cfg.modes().unwrap();
        assert_eq!(modes.len(), 3);
        assert!((modes[0].lambda_vis_center - 579.9797652772).abs() < 1e-9);
        assert_eq!(cfg.chains.telecom, MeasurementChain::telecom_default());
        assert_eq!(cfg.chains.visible, MeasurementChain::visible_default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::device_defaults();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_named() {
        let text = DEVICE_DEFAULTS.replace("seed = ", "sede = 1\nseed = ");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("sede"), "{err}");
        let nested = DEVICE_DEFAULTS.replace("length_cm = ", "lenght_cm = 4.0\nlength_cm = ");
        let err = RunConfig::from_toml_str(&nested).unwrap_err().to_string();
        assert!(err.contains("lenght_cm"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let text = DEVICE_DEFAULTS.replace("detector_efficiency = 0.10", "detector_efficiency = 1.5");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("chains.telecom") && err.contains("detector_efficiency"), "{err}");
        let text = DEVICE_DEFAULTS.replace("schema_version = 1", "schema_version = 7");
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn pump_grid_endpoints() {
        let cfg = RunConfig::device_defaults();
        let g = cfg.pump_grid(Some(5));
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], cfg.sweep.start_w);
        assert!((g[4] - cfg.sweep.stop_w).abs() < 1e-15);
        assert_eq!(cfg.pump_grid(Some(1)), vec![cfg.sweep.start_w]);
    }
}
