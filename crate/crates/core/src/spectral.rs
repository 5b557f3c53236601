//! Telecom noise spectra with SFG dips, mirrored visible peaks, instrument
//! filter convolution and Gaussian line fitting.
//!
//! Rates in a model spectrum are photon rates within the grid's evaluation
//! bandwidth. The flat SPDC background is `alpha_N * P * L` rescaled from the
//! reference bandwidth of `alpha_N` to that evaluation bandwidth. Telecom and
//! visible scans built from the same grid bandwidth share units, so areas
//! (`sum rate * step`) can be compared directly between them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::converter::{self, ConverterParams, PumpPower};
use crate::error::{ensure, Error, Result};
use crate::estimator::{lsq_minimize, Estimate, LeastSquaresProblem, LsqOptions};

/// `4 ln 2`, converts FWHM to the Gaussian exponent.
const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

/// Area of a unit-peak Gaussian per unit FWHM, `sqrt(pi / (4 ln 2))`.
pub const GAUSSIAN_AREA_PER_FWHM: f64 = 1.064_467_019_431_226_3;

/// Speed of light, nm * Hz.
const C_NM_HZ: f64 = 299_792_458.0e9;

/// Unit-peak Gaussian.
pub fn gaussian(x: f64, center: f64, fwhm: f64) -> f64 {
    let u = (x - center) / fwhm;
    (-FOUR_LN2 * u * u).exp()
}

/// Wavelength width (nm) of a frequency bandwidth (Hz) at `lambda_nm`.
pub fn bandwidth_hz_to_nm(bandwidth_hz: f64, lambda_nm: f64) -> f64 {
    lambda_nm * lambda_nm * bandwidth_hz / C_NM_HZ
}

pub fn bandwidth_nm_to_hz(bandwidth_nm: f64, lambda_nm: f64) -> f64 {
    bandwidth_nm * C_NM_HZ / (lambda_nm * lambda_nm)
}

/// One phase-matched spatial mode of the waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfgMode {
    pub label: String,
    pub lambda_tele_center: f64,
    pub lambda_vis_center: f64,
    /// SFG acceptance linewidth, nm.
    pub fwhm_sfg: f64,
    /// Width of the telecom noise dip, nm.
    pub fwhm_dip: f64,
    /// Peak SFG efficiency relative to the fundamental mode.
    pub relative_strength: f64,
}

impl SfgMode {
    /// Derives the visible centre from energy conservation with the pump.
    pub fn new(
        label: impl Into<String>,
        lambda_pump: f64,
        lambda_tele_center: f64,
        fwhm_sfg: f64,
        fwhm_dip: f64,
        relative_strength: f64,
    ) -> Result<Self> {
        let mode = Self {
            label: label.into(),
            lambda_tele_center,
            lambda_vis_center: converter::sfg_partner_wavelength(lambda_pump, lambda_tele_center)?,
            fwhm_sfg,
            fwhm_dip,
            relative_strength,
        };
        mode.validate(lambda_pump)?;
        Ok(mode)
    }

    pub fn validate(&self, lambda_pump: f64) -> Result<()> {
        ensure(self.fwhm_sfg > 0.0, "fwhm_sfg", self.fwhm_sfg, "must be > 0")?;
        ensure(self.fwhm_dip > 0.0, "fwhm_dip", self.fwhm_dip, "must be > 0")?;
        ensure(
            (0.0..=1.0).contains(&self.relative_strength),
            "relative_strength",
            self.relative_strength,
            "must lie in [0, 1]",
        )?;
        let expected = converter::sfg_partner_wavelength(lambda_pump, self.lambda_tele_center)?;
        ensure(
            (self.lambda_vis_center - expected).abs() <= 0.05,
            "lambda_vis_center",
            self.lambda_vis_center,
            "must match energy conservation within 0.05 nm",
        )
    }

    /// Width of the visible peak: the dip width mapped through
    /// `d lambda_vis / d lambda_tele = (lambda_vis / lambda_tele)^2`.
    pub fn fwhm_vis(&self) -> f64 {
        let r = self.lambda_vis_center / self.lambda_tele_center;
        self.fwhm_dip * r * r
    }
}

/// TEM00/TEM01/TEM02 table for a 930 nm pump.
///
/// Centres and the TEM00 widths are measured values. The higher-order
/// strengths are calibration placeholders; override them in the config once
/// read off a measured SFG spectrum.
pub fn default_mode_table(lambda_pump: f64) -> Result<Vec<SfgMode>> {
    Ok(vec![
        SfgMode::new("TEM00", lambda_pump, 1541.0, 0.23, 0.50, 1.0)?,
        SfgMode::new("TEM01", lambda_pump, 1546.0, 0.23, 0.50, 0.35)?,
        SfgMode::new("TEM02", lambda_pump, 1554.6, 0.23, 0.50, 0.2)?,
    ])
}

/// Uniform wavelength grid with the bandwidth each sample integrates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    wavelengths: Vec<f64>,
    step: f64,
    bandwidth_hz: f64,
}

impl SpectrumGrid {
    /// Samples `start, start + step, ...` up to and including `stop`.
    pub fn uniform(start: f64, stop: f64, step: f64, bandwidth_hz: f64) -> Result<Self> {
        ensure(step > 0.0, "step", step, "must be > 0")?;
        ensure(stop >= start, "stop", stop, "must be >= start")?;
        ensure(bandwidth_hz > 0.0, "bandwidth_hz", bandwidth_hz, "must be > 0")?;
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(Self {
            wavelengths: (0..n).map(|i| start + i as f64 * step).collect(),
            step,
            bandwidth_hz,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    fn center(&self) -> f64 {
        let w = &self.wavelengths;
        0.5 * (w[0] + w[w.len() - 1])
    }
}

/// Sampled spectrum: `(wavelength nm, rate Hz)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralScan {
    pub samples: Vec<(f64, f64)>,
    /// Width (nm) of the instrument filter that produced the scan; for model
    /// spectra the evaluation bandwidth expressed in nm.
    pub filter_fwhm: f64,
    pub step: f64,
    /// Seconds per sample; zero for noiseless model spectra.
    pub integration_time: f64,
}

impl SpectralScan {
    pub fn new(samples: Vec<(f64, f64)>, filter_fwhm: f64, step: f64, integration_time: f64) -> Result<Self> {
        let scan = Self {
            samples,
            filter_fwhm,
            step,
            integration_time,
        };
        scan.validate()?;
        Ok(scan)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.step > 0.0, "step", self.step, "must be > 0")?;
        ensure(self.filter_fwhm >= 0.0, "filter_fwhm", self.filter_fwhm, "must be >= 0")?;
        ensure(
            self.integration_time >= 0.0,
            "integration_time",
            self.integration_time,
            "must be >= 0",
        )?;
        let mut prev = f64::NEG_INFINITY;
        for &(w, r) in &self.samples {
            ensure(w > prev, "wavelength", w, "must be strictly increasing")?;
            ensure(r >= 0.0 && r.is_finite(), "rate", r, "must be >= 0")?;
            prev = w;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    /// `sum rate * step`.
    pub fn area(&self) -> f64 {
        self.rates().sum::<f64>() * self.step
    }

    /// Sample with the smallest rate.
    pub fn minimum(&self) -> Option<(f64, f64)> {
        self.samples.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Multiplicative roll-off of the background below `edge_nm` (for example a
/// dichroic mirror edge). Off unless applied explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundTaper {
    pub edge_nm: f64,
    pub width_nm: f64,
    /// Transmission far below the edge.
    pub floor: f64,
}

impl BackgroundTaper {
    pub fn factor(&self, lambda_nm: f64) -> f64 {
        let s = 1.0 / (1.0 + (-(lambda_nm - self.edge_nm) / self.width_nm).exp());
        self.floor + (1.0 - self.floor) * s
    }
}

pub fn apply_taper(scan: &SpectralScan, taper: &BackgroundTaper) -> SpectralScan {
    SpectralScan {
        samples: scan.samples.iter().map(|&(w, r)| (w, r * taper.factor(w))).collect(),
        ..scan.clone()
    }
}

fn background(params: &ConverterParams, p: PumpPower, grid: &SpectrumGrid) -> f64 {
    converter::linear_noise_rate(params, p) * grid.bandwidth_hz / params.bandwidth_ref_hz()
}

fn check_grid(grid: &SpectrumGrid) -> Result<()> {
    if grid.wavelengths.is_empty() {
        return Err(Error::Grid("empty wavelength grid".into()));
    }
    Ok(())
}

/// Flat SPDC background with one Gaussian dip per mode. Each dip's
/// fractional depth is the converted-noise fraction scaled by the mode's
/// relative strength.
pub fn telecom_spectrum(
    params: &ConverterParams,
    modes: &[SfgMode],
    p: PumpPower,
    grid: &SpectrumGrid,
) -> Result<SpectralScan> {
    check_grid(grid)?;
    let b = background(params, p, grid);
    let depth = converter::dip_depth(params, p);
    let mut samples = Vec::with_capacity(grid.wavelengths.len());
    for &w in &grid.wavelengths {
        let removed: f64 = modes
            .iter()
            .map(|m| depth * m.relative_strength * gaussian(w, m.lambda_tele_center, m.fwhm_dip))
            .sum();
        if removed > 1.0 + 1e-12 {
            return Err(Error::ModelViolation {
                wavelength_nm: w,
                depth: removed,
            });
        }
        samples.push((w, (b * (1.0 - removed)).max(0.0)));
    }
    Ok(SpectralScan {
        samples,
        filter_fwhm: bandwidth_hz_to_nm(grid.bandwidth_hz, grid.center()),
        step: grid.step,
        integration_time: 0.0,
    })
}

/// Per-mode collection efficiency of the visible output coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Collection {
    /// Multi-mode fibre: every mode collected.
    MultiMode,
    /// Single-mode fibre: the first mode collected, the others at `higher_order`.
    SingleMode { higher_order: f64 },
    PerMode { factors: Vec<f64> },
}

impl Collection {
    pub fn factor(&self, index: usize) -> f64 {
        match self {
            Collection::MultiMode => 1.0,
            Collection::SingleMode { higher_order } => {
                if index == 0 {
                    1.0
                } else {
                    *higher_order
                }
            }
            Collection::PerMode { factors } => factors.get(index).copied().unwrap_or(0.0),
        }
    }
}

/// Area (rate * nm) of the telecom photon flux the dip of `mode` removes.
pub fn dip_area(params: &ConverterParams, mode: &SfgMode, p: PumpPower, bandwidth_hz: f64) -> f64 {
    let b = converter::linear_noise_rate(params, p) * bandwidth_hz / params.bandwidth_ref_hz();
    b * converter::dip_depth(params, p) * mode.relative_strength * mode.fwhm_dip * GAUSSIAN_AREA_PER_FWHM
}

/// Visible SFG noise peaks. Each peak carries the photon flux removed by the
/// matching telecom dip, scaled by the mode's collection efficiency.
pub fn visible_spectrum(
    params: &ConverterParams,
    modes: &[SfgMode],
    p: PumpPower,
    grid: &SpectrumGrid,
    collection: &Collection,
) -> Result<SpectralScan> {
    check_grid(grid)?;
    if let Collection::PerMode { factors } = collection {
        if factors.len() != modes.len() {
            return Err(Error::Grid(format!(
                "{} collection factors for {} modes",
                factors.len(),
                modes.len()
            )));
        }
    }
    let peaks: Vec<(f64, f64, f64)> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let area = dip_area(params, m, p, grid.bandwidth_hz) * collection.factor(i);
            let w = m.fwhm_vis();
            (m.lambda_vis_center, w, area / (w * GAUSSIAN_AREA_PER_FWHM))
        })
        .collect();
    let samples = grid
        .wavelengths
        .iter()
        .map(|&x| {
            let r: f64 = peaks.iter().map(|&(c, w, h)| h * gaussian(x, c, w)).sum();
            (x, r)
        })
        .collect();
    Ok(SpectralScan {
        samples,
        filter_fwhm: bandwidth_hz_to_nm(grid.bandwidth_hz, grid.center()),
        step: grid.step,
        integration_time: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    Gaussian,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterProfile {
    pub shape: FilterShape,
    pub fwhm: f64,
    pub center: f64,
    pub peak_transmission: f64,
}

impl FilterProfile {
    pub fn new(shape: FilterShape, fwhm: f64, center: f64, peak_transmission: f64) -> Result<Self> {
        let f = Self {
            shape,
            fwhm,
            center,
            peak_transmission,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.fwhm > 0.0, "filter fwhm", self.fwhm, "must be > 0")?;
        ensure(
            self.peak_transmission > 0.0 && self.peak_transmission <= 1.0,
            "peak_transmission",
            self.peak_transmission,
            "must lie in (0, 1]",
        )
    }

    /// Power transmission at `lambda_nm`.
    pub fn transmission(&self, lambda_nm: f64) -> f64 {
        let shape = match self.shape {
            FilterShape::Gaussian => gaussian(lambda_nm, self.center, self.fwhm),
            FilterShape::Rectangular => {
                if (lambda_nm - self.center).abs() <= 0.5 * self.fwhm {
                    1.0
                } else {
                    0.0
                }
            }
        };
        self.peak_transmission * shape
    }
}

/// Scans a filter across the spectrum: discrete convolution with the filter
/// kernel normalized to unit sum times the peak transmission. Gaussian
/// kernels are truncated at +-5 FWHM. Near the ends the kernel is
/// renormalized over the samples that exist.
pub fn convolve_with_filter(scan: &SpectralScan, filter: &FilterProfile) -> Result<SpectralScan> {
    filter.validate()?;
    if scan.step > filter.fwhm / 5.0 {
        return Err(Error::Resolution {
            step: scan.step,
            fwhm: filter.fwhm,
        });
    }
    let half_span = match filter.shape {
        FilterShape::Gaussian => 5.0 * filter.fwhm,
        FilterShape::Rectangular => 0.5 * filter.fwhm,
    };
    let k = (half_span / scan.step + 1e-9).floor() as isize;
    let kernel: Vec<f64> = (-k..=k)
        .map(|i| {
            let x = i as f64 * scan.step;
            match filter.shape {
                FilterShape::Gaussian => gaussian(x, 0.0, filter.fwhm),
                FilterShape::Rectangular => 1.0,
            }
        })
        .collect();
    let n = scan.samples.len() as isize;
    let samples = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                let idx = i + j as isize - k;
                if (0..n).contains(&idx) {
                    acc += w * scan.samples[idx as usize].1;
                    norm += w;
                }
            }
            (scan.samples[i as usize].0, filter.peak_transmission * acc / norm)
        })
        .collect();
    Ok(SpectralScan {
        samples,
        filter_fwhm: filter.fwhm,
        step: scan.step,
        integration_time: scan.integration_time,
    })
}

/// Observed width of a Gaussian line of width `intrinsic` seen through a
/// Gaussian filter of width `filter`.
pub fn quadrature_add(intrinsic: f64, filter: f64) -> f64 {
    intrinsic.hypot(filter)
}

/// Intrinsic Gaussian width, `sqrt(observed^2 - filter^2)`.
pub fn deconvolve_gaussian(observed_fwhm: f64, filter_fwhm: f64) -> Result<f64> {
    ensure(filter_fwhm >= 0.0, "filter fwhm", filter_fwhm, "must be >= 0")?;
    if observed_fwhm <= filter_fwhm {
        return Err(Error::NonPhysicalWidth {
            observed: observed_fwhm,
            filter: filter_fwhm,
        });
    }
    Ok(((observed_fwhm - filter_fwhm) * (observed_fwhm + filter_fwhm)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Dip,
    Peak,
}

impl FeatureKind {
    fn sign(self) -> f64 {
        match self {
            FeatureKind::Dip => -1.0,
            FeatureKind::Peak => 1.0,
        }
    }
}

/// Gaussian line on a constant baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFeature {
    pub center: Estimate,
    pub fwhm: Estimate,
    /// Magnitude, always >= 0; the direction is set by the feature kind.
    pub amplitude: Estimate,
    pub baseline: Estimate,
    pub chi2_reduced: f64,
    pub n_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum FeatureFit {
    Feature(GaussianFeature),
    /// Amplitude compatible with zero (below three sigma) or not identifiable.
    NoFeature { amplitude: f64, sigma: f64 },
}

impl FeatureFit {
    pub fn feature(&self) -> Option<&GaussianFeature> {
        match self {
            FeatureFit::Feature(f) => Some(f),
            FeatureFit::NoFeature { .. } => None,
        }
    }
}

/// Residuals of `baseline + sign * A * G(lambda; center, fwhm)`.
///
/// Internal parameters: `[center, ln fwhm, ln A, baseline]`.
#[derive(Debug, Clone)]
pub struct GaussianFeatureProblem {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub kind: FeatureKind,
}

impl GaussianFeatureProblem {
    fn model(&self, x: f64, p: &DVector<f64>) -> f64 {
        p[3] + self.kind.sign() * p[2].exp() * gaussian(x, p[0], p[1].exp())
    }
}

impl LeastSquaresProblem for GaussianFeatureProblem {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            (0..self.x.len()).map(|i| (self.y[i] - self.model(self.x[i], p)) / self.sigma[i]),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (c, w, a) = (p[0], p[1].exp(), p[2].exp());
        let s = self.kind.sign();
        let mut jac = DMatrix::zeros(self.x.len(), 4);
        for i in 0..self.x.len() {
            let u = self.x[i] - c;
            let g = gaussian(self.x[i], c, w);
            let sag = s * a * g;
            let inv = -1.0 / self.sigma[i];
            jac[(i, 0)] = inv * sag * 2.0 * FOUR_LN2 * u / (w * w);
            jac[(i, 1)] = inv * sag * 2.0 * FOUR_LN2 * u * u / (w * w);
            jac[(i, 2)] = inv * sag;
            jac[(i, 3)] = inv;
        }
        jac
    }

    fn parameter_names(&self, _n: usize) -> Vec<String> {
        vec!["center".into(), "ln_fwhm".into(), "ln_amplitude".into(), "baseline".into()]
    }
}

/// Least-squares Gaussian plus constant baseline over `window` (nm).
///
/// With a nonzero integration time the samples are weighted by Poisson
/// errors `sqrt(rate * t) / t`; otherwise the fit is unweighted and the
/// covariance is scaled by the reduced chi-square.
pub fn fit_gaussian_feature(scan: &SpectralScan, window: (f64, f64), kind: FeatureKind) -> Result<FeatureFit> {
    let (lo, hi) = window;
    let inside: Vec<(f64, f64)> = scan
        .samples
        .iter()
        .copied()
        .filter(|&(w, _)| w >= lo && w <= hi)
        .collect();
    if inside.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} samples in [{lo}, {hi}] nm, need at least 8",
            inside.len()
        )));
    }
    let x: Vec<f64> = inside.iter().map(|s| s.0).collect();
    let y: Vec<f64> = inside.iter().map(|s| s.1).collect();
    let t = scan.integration_time;
    let weighted = t > 0.0;
    let sigma: Vec<f64> = if weighted {
        y.iter().map(|&r| (r * t).max(1.0).sqrt() / t).collect()
    } else {
        vec![1.0; y.len()]
    };

    let n = y.len();
    let edge = (n / 8).max(2);
    let baseline0 = (y[..edge].iter().sum::<f64>() + y[n - edge..].iter().sum::<f64>()) / (2 * edge) as f64;
    let s = kind.sign();
    let (i_ext, &y_ext) = y
        .iter()
        .enumerate()
        .max_by(|a, b| (s * a.1).total_cmp(&(s * b.1)))
        .expect("window is not empty");
    let amp0 = s * (y_ext - baseline0);
    if amp0 <= 0.0 {
        return Ok(FeatureFit::NoFeature {
            amplitude: 0.0,
            sigma: f64::INFINITY,
        });
    }
    let above_half = y.iter().filter(|&&v| s * (v - baseline0) >= 0.5 * amp0).count();
    let step = (x[n - 1] - x[0]) / (n - 1) as f64;
    let fwhm0 = (above_half as f64 * step).max(2.0 * step);
    let initial = DVector::from_vec(vec![x[i_ext], fwhm0.ln(), amp0.ln(), baseline0]);

    let problem = GaussianFeatureProblem { x, y, sigma, kind };
    let raw = match lsq_minimize(&problem, initial, &LsqOptions::default()) {
        Ok(r) => r,
        Err(Error::RankDeficient { .. }) | Err(Error::NonConvergence { .. }) | Err(Error::FitFailure(_)) => {
            return Ok(FeatureFit::NoFeature {
                amplitude: amp0,
                sigma: f64::INFINITY,
            })
        }
        Err(e) => return Err(e),
    };
    let scale = if weighted { 1.0 } else { raw.chi2_reduced };
    let var = |i: usize| (raw.covariance[i][i] * scale).max(0.0);
    let (c, w, a, b) = (raw.values[0], raw.values[1].exp(), raw.values[2].exp(), raw.values[3]);
    let amplitude = Estimate {
        value: a,
        sigma: a * var(2).sqrt(),
    };
    if amplitude.value < 3.0 * amplitude.sigma || c < lo || c > hi {
        return Ok(FeatureFit::NoFeature {
            amplitude: amplitude.value,
            sigma: amplitude.sigma,
        });
    }
    Ok(FeatureFit::Feature(GaussianFeature {
        center: Estimate {
            value: c,
            sigma: var(0).sqrt(),
        },
        fwhm: Estimate {
            value: w,
            sigma: w * var(1).sqrt(),
        },
        amplitude,
        baseline: Estimate {
            value: b,
            sigma: var(3).sqrt(),
        },
        chi2_reduced: raw.chi2_reduced,
        n_iterations: raw.n_iterations,
    }))
}
