//! Detection-chain Monte Carlo and normalization back to the waveguide
//! output.
//!
//! Counting is Poisson throughout. SPAD dead time and afterpulsing are not
//! modelled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::spectral::{FilterProfile, SpectralScan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transmission {
    pub label: String,
    pub factor: f64,
}

/// Optical losses and detector between the waveguide output and the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementChain {
    pub transmissions: Vec<Transmission>,
    pub detector_efficiency: f64,
    /// Hz
    pub dark_rate: f64,
    /// s
    pub integration_time: f64,
}

impl MeasurementChain {
    pub fn new(
        transmissions: Vec<(&str, f64)>,
        detector_efficiency: f64,
        dark_rate: f64,
        integration_time: f64,
    ) -> Result<Self> {
        let chain = Self {
            transmissions: transmissions
                .into_iter()
                .map(|(label, factor)| Transmission {
                    label: label.to_string(),
                    factor,
                })
                .collect(),
            detector_efficiency,
            dark_rate,
            integration_time,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.transmissions {
            ensure(
                t.factor > 0.0 && t.factor <= 1.0,
                "transmission factor",
                t.factor,
                "must lie in (0, 1]",
            )?;
        }
        ensure(
            self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0,
            "detector_efficiency",
            self.detector_efficiency,
            "must lie in (0, 1]",
        )?;
        ensure(
            self.dark_rate >= 0.0 && self.dark_rate.is_finite(),
            "dark_rate",
            self.dark_rate,
            "must be >= 0",
        )?;
        ensure(
            self.integration_time > 0.0 && self.integration_time.is_finite(),
            "integration_time",
            self.integration_time,
            "must be > 0",
        )
    }

    /// Fibre coupling (75%), tunable grating filter (40%) and an InGaAs SPAD
    /// (10%, 340 Hz dark counts), 10 s per point.
    pub fn telecom_default() -> Self {
        Self::new(vec![("fiber_coupling", 0.75), ("tg_filter", 0.40)], 0.10, 340.0, 10.0)
            .expect("valid default chain")
    }

    /// Silicon SPAD (56%, 70 Hz dark counts) behind the band-pass filter.
    /// The optical transmission ahead of the detector is not specified; add
    /// it to the config when known.
    pub fn visible_default() -> Self {
        Self::new(vec![], 0.56, 70.0, 10.0).expect("valid default chain")
    }

    pub fn with_integration_time(mut self, seconds: f64) -> Result<Self> {
        self.integration_time = seconds;
        self.validate()?;
        Ok(self)
    }
}

/// Product of all transmission factors and the detector efficiency.
pub fn chain_transmission(chain: &MeasurementChain) -> f64 {
    chain.transmissions.iter().map(|t| t.factor).product::<f64>() * chain.detector_efficiency
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub counts: u64,
    /// s
    pub duration: f64,
    pub seed: u64,
}

/// Expected number of counts in one integration window.
pub fn mean_counts(true_rate: f64, chain: &MeasurementChain) -> f64 {
    (true_rate * chain_transmission(chain) + chain.dark_rate) * chain.integration_time
}

/// Poisson draw of detected counts; deterministic per seed.
pub fn simulate_counts(true_rate: f64, chain: &MeasurementChain, seed: u64) -> Result<CountRecord> {
    ensure(true_rate >= 0.0 && true_rate.is_finite(), "true_rate", true_rate, "must be >= 0")?;
    chain.validate()?;
    let mean = mean_counts(true_rate, chain);
    let counts = if mean > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poisson = Poisson::new(mean).expect("positive finite mean");
        poisson.sample(&mut rng) as u64
    } else {
        0
    };
    Ok(CountRecord {
        counts,
        duration: chain.integration_time,
        seed,
    })
}

/// Seed for point `index` of a sweep started from `seed`. Independent of the
/// order in which points are evaluated.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rate at the waveguide output with its Poisson 1-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRate {
    pub rate: f64,
    pub uncertainty: f64,
    /// Set when dark-count subtraction leaves a negative rate.
    pub negative: bool,
}

/// `((counts/t - dark) / T, sqrt(counts)/t/T)`.
pub fn normalize_to_waveguide(record: &CountRecord, chain: &MeasurementChain) -> Result<NormalizedRate> {
    let t = chain_transmission(chain);
    ensure(t > 0.0, "chain transmission", t, "must be > 0")?;
    let d = record.duration;
    ensure(d > 0.0, "duration", d, "must be > 0")?;
    let counts = record.counts as f64;
    let rate = (counts / d - chain.dark_rate) / t;
    Ok(NormalizedRate {
        rate,
        uncertainty: counts.sqrt() / d / t,
        negative: rate < 0.0,
    })
}

/// Keeps the share of the recorded rate attributed to the target peak.
pub fn visible_band_fraction_correction(raw_rate: f64, in_band_fraction: f64) -> Result<f64> {
    ensure(
        in_band_fraction > 0.0 && in_band_fraction <= 1.0,
        "in_band_fraction",
        in_band_fraction,
        "must lie in (0, 1]",
    )?;
    Ok(raw_rate * in_band_fraction)
}

/// Share of the flux transmitted by `passband` that lies inside `target`
/// (an interval in nm around the peak of interest).
pub fn in_band_fraction(scan: &SpectralScan, passband: &FilterProfile, target: (f64, f64)) -> Result<f64> {
    passband.validate()?;
    let mut total = 0.0;
    let mut inside = 0.0;
    for &(w, r) in &scan.samples {
        let v = r * passband.transmission(w);
        total += v;
        if w >= target.0 && w <= target.1 {
            inside += v;
        }
    }
    ensure(total > 0.0, "transmitted flux", total, "must be > 0")?;
    Ok(inside / total)
}
