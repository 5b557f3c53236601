//! Synthetic sweep generation: model -> detection chain -> normalized data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::converter::{self, ConverterParams, Efficiency, PumpPower};
use crate::error::{ensure, Result};
use crate::estimator::{PowerSweep, SweepKind, SweepPoint};
use crate::io::CountRow;
use crate::photon::{self, MeasurementChain};

/// Seed stream for one sweep kind; sweeps of different kinds drawn from the
/// same run seed are independent.
pub fn kind_seed(seed: u64, kind: SweepKind) -> u64 {
    let salt = match kind {
        SweepKind::EfficiencyInt => 1,
        SweepKind::EfficiencyExt => 2,
        SweepKind::NoiseTeleOnpeak => 3,
        SweepKind::NoiseTeleDetuned => 4,
        SweepKind::NoiseVis => 5,
    };
    photon::derive_seed(seed, 1 << 32 | salt)
}

/// Noise-free value of a sweep at pump power `p`. Visible rates use
/// `visible` (the visible noise coefficient), the others `params`.
pub fn model_value(kind: SweepKind, params: &ConverterParams, visible: &ConverterParams, p: PumpPower) -> f64 {
    match kind {
        SweepKind::EfficiencyInt => converter::dfg_efficiency(params, Efficiency::Internal, p),
        SweepKind::EfficiencyExt => converter::dfg_efficiency(params, Efficiency::External, p),
        SweepKind::NoiseTeleOnpeak => converter::telecom_noise_rate(params, p),
        SweepKind::NoiseTeleDetuned => converter::linear_noise_rate(params, p),
        SweepKind::NoiseVis => converter::visible_noise_rate(visible, p),
    }
}

/// Efficiency sweep with Gaussian noise of standard deviation
/// `noise_rel * eta + noise_floor`.
pub fn simulate_efficiency_sweep(
    kind: SweepKind,
    params: &ConverterParams,
    powers: &[f64],
    noise_rel: f64,
    noise_floor: f64,
    seed: u64,
) -> Result<PowerSweep> {
    ensure(kind.is_efficiency(), "sweep kind", f64::NAN, "must be an efficiency kind")?;
    ensure(noise_rel >= 0.0, "noise_rel", noise_rel, "must be >= 0")?;
    ensure(noise_floor > 0.0, "noise_floor", noise_floor, "must be > 0")?;
    let base = kind_seed(seed, kind);
    let points = powers
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let eta = model_value(kind, params, params, PumpPower::new(w)?);
            let sigma = noise_rel * eta + noise_floor;
            let mut rng = ChaCha8Rng::seed_from_u64(photon::derive_seed(base, i as u64));
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(SweepPoint {
                pump_w: w,
                value: eta + sigma * z,
                sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PowerSweep::new(kind, points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepSim {
    pub sweep: PowerSweep,
    pub counts: Vec<CountRow>,
}

/// Counts a noise sweep through `chain` and normalizes it back to the
/// waveguide output.
///
/// For the visible sweep the detector also sees the higher-order peaks, so
/// the recorded rate is `R_vis / in_band_fraction` and the normalized value
/// is corrected back by `in_band_fraction`. Sigmas are Poisson, with one
/// count as the floor so empty windows keep a usable weight.
pub fn simulate_noise_sweep(
    kind: SweepKind,
    params: &ConverterParams,
    visible: &ConverterParams,
    chain: &MeasurementChain,
    in_band_fraction: f64,
    powers: &[f64],
    seed: u64,
) -> Result<NoiseSweepSim> {
    ensure(!kind.is_efficiency(), "sweep kind", f64::NAN, "must be a noise kind")?;
    let fraction = if kind == SweepKind::NoiseVis { in_band_fraction } else { 1.0 };
    ensure(
        fraction > 0.0 && fraction <= 1.0,
        "in_band_fraction",
        fraction,
        "must lie in (0, 1]",
    )?;
    let t = photon::chain_transmission(chain);
    let base = kind_seed(seed, kind);
    let mut counts = Vec::with_capacity(powers.len());
    let mut points = Vec::with_capacity(powers.len());
    for (i, &w) in powers.iter().enumerate() {
        let rate = model_value(kind, params, visible, PumpPower::new(w)?) / fraction;
        let record = photon::simulate_counts(rate, chain, photon::derive_seed(base, i as u64))?;
        let norm = photon::normalize_to_waveguide(&record, chain)?;
        let sigma = (record.counts.max(1) as f64).sqrt() / record.duration / t;
        points.push(SweepPoint {
            pump_w: w,
            value: photon::visible_band_fraction_correction(norm.rate, fraction)?,
            sigma: sigma * fraction,
        });
        counts.push(CountRow::new(w, &record));
    }
    Ok(NoiseSweepSim {
        sweep: PowerSweep::new(kind, points)?,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powers() -> Vec<f64> {
        (0..12).map(|i| 0.04 * i as f64).collect()
    }

    #[test]
    fn efficiency_sweep_deterministic() {
        let p = ConverterParams::device_defaults();
        let a = simulate_efficiency_sweep(SweepKind::EfficiencyInt, &p, &powers(), 0.02, 1e-3, 5).unwrap();
        let b = simulate_efficiency_sweep(SweepKind::EfficiencyInt, &p, &powers(), 0.02, 1e-3, 5).unwrap();
        let c = simulate_efficiency_sweep(SweepKind::EfficiencyInt, &p, &powers(), 0.02, 1e-3, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(simulate_efficiency_sweep(SweepKind::NoiseVis, &p, &powers(), 0.02, 1e-3, 5).is_err());
    }

    #[test]
    fn int_and_ext_streams_independent() {
        let p = ConverterParams::device_defaults();
        let a = simulate_efficiency_sweep(SweepKind::EfficiencyInt, &p, &powers(), 0.02, 1e-3, 5).unwrap();
        let b = simulate_efficiency_sweep(SweepKind::EfficiencyExt, &p, &powers(), 0.02, 1e-3, 5).unwrap();
        let z = |s: &PowerSweep, eta_max: f64| {
            let pt = s.points()[5];
            (pt.value - eta_max * (4.0 * (0.63 * pt.pump_w).sqrt()).sin().powi(2)) / pt.sigma
        };
        let (za, zb) = (z(&a, 0.67), z(&b, 0.46));
        assert_ne!(za, zb);
    }

    #[test]
    fn dark_only_at_zero_pump() {
        let p = ConverterParams::device_defaults();
        let chain = MeasurementChain::visible_default();
        let sim = simulate_noise_sweep(SweepKind::NoiseVis, &p, &p, &chain, 0.77, &[0.0], 9).unwrap();
        let n = sim.counts[0].counts as f64;
        assert!((n - 700.0).abs() < 5.0 * 700f64.sqrt(), "{n}");
        assert!(sim.sweep.points()[0].value.abs() < 5.0 * sim.sweep.points()[0].sigma);
    }

    #[test]
    fn noise_sweep_tracks_model() {
        let p = ConverterParams::device_defaults();
        let chain = MeasurementChain::telecom_default();
        let sim = simulate_noise_sweep(SweepKind::NoiseTeleDetuned, &p, &p, &chain, 1.0, &powers(), 3).unwrap();
        for pt in sim.sweep.points() {
            let truth = 129e3 * 4.0 * pt.pump_w;
            assert!((pt.value - truth).abs() < 5.0 * pt.sigma, "{pt:?}");
        }
    }
}
