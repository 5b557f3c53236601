//! Closed-form models of DFG conversion efficiency and pump-induced noise.
//!
//! The efficiency follows `eta(P) = eta_max * sin^2(L * sqrt(eta_n * P))`.
//! Telecom SPDC noise is generated uniformly along the waveguide and part of
//! it is converted back to the visible by phase-matched SFG, so
//!
//! ```text
//! R_tele(P) = alpha_N * P * L * (1 - d(P))
//! R_vis(P)  = alpha_N * P * L * d(P)
//! d(P)      = (eta_max / 2) * (1 - sinc(2 L sqrt(eta_n P)))
//! ```
//!
//! Powers are coupled into the waveguide; rates are at the waveguide output.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Relative tolerance for energy conservation in [`WavelengthTriple::new`].
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-4;

/// Which saturation efficiency an efficiency curve refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Efficiency {
    /// Inside the waveguide (depletion of the input light).
    Internal,
    /// Including in/out coupling and propagation losses.
    External,
}

/// Device ledger of a DFG converter.
///
/// `alpha_n` is only meaningful together with the bandwidth it was measured
/// in, so both travel together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConverterParams", into = "RawConverterParams")]
pub struct ConverterParams {
    length_cm: f64,
    eta_max_int: f64,
    eta_max_ext: f64,
    eta_n: f64,
    alpha_n: f64,
    bandwidth_ref_hz: f64,
    noise_eta_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverterParams {
    length_cm: f64,
    eta_max_int: f64,
    eta_max_ext: f64,
    /// 1/(W cm^2)
    eta_n: f64,
    /// Hz/(W cm)
    alpha_n: f64,
    bandwidth_ref_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_eta_max: Option<f64>,
}

impl TryFrom<RawConverterParams> for ConverterParams {
    type Error = Error;

    fn try_from(raw: RawConverterParams) -> Result<Self> {
        ConverterParams::new(
            raw.length_cm,
            raw.eta_max_int,
            raw.eta_max_ext,
            raw.eta_n,
            raw.alpha_n,
            raw.bandwidth_ref_hz,
        )?
        .with_noise_eta_max(raw.noise_eta_max)
    }
}

impl From<ConverterParams> for RawConverterParams {
    fn from(p: ConverterParams) -> Self {
        RawConverterParams {
            length_cm: p.length_cm,
            eta_max_int: p.eta_max_int,
            eta_max_ext: p.eta_max_ext,
            eta_n: p.eta_n,
            alpha_n: p.alpha_n,
            bandwidth_ref_hz: p.bandwidth_ref_hz,
            noise_eta_max: p.noise_eta_max,
        }
    }
}

impl ConverterParams {
    /// Arguments in order: waveguide length (cm), internal and external
    /// saturation efficiencies, conversion parameter (1/(W cm^2)), noise
    /// coefficient (Hz/(W cm)) and the bandwidth (Hz) it was measured in.
    pub fn new(
        length_cm: f64,
        eta_max_int: f64,
        eta_max_ext: f64,
        eta_n: f64,
        alpha_n: f64,
        bandwidth_ref_hz: f64,
    ) -> Result<Self> {
        ensure(length_cm.is_finite() && length_cm > 0.0, "length_cm", length_cm, "must be > 0")?;
        ensure(
            (0.0..=1.0).contains(&eta_max_int),
            "eta_max_int",
            eta_max_int,
            "must lie in [0, 1]",
        )?;
        ensure(
            (0.0..=eta_max_int).contains(&eta_max_ext),
            "eta_max_ext",
            eta_max_ext,
            "must lie in [0, eta_max_int]",
        )?;
        ensure(eta_n.is_finite() && eta_n >= 0.0, "eta_n", eta_n, "must be >= 0")?;
        ensure(alpha_n.is_finite() && alpha_n >= 0.0, "alpha_n", alpha_n, "must be >= 0")?;
        ensure(
            bandwidth_ref_hz.is_finite() && bandwidth_ref_hz > 0.0,
            "bandwidth_ref_hz",
            bandwidth_ref_hz,
            "must be > 0",
        )?;
        Ok(Self {
            length_cm,
            eta_max_int,
            eta_max_ext,
            eta_n,
            alpha_n,
            bandwidth_ref_hz,
            noise_eta_max: None,
        })
    }

    /// The 4 cm PPLN ridge waveguide converting 580 nm to 1541 nm with a
    /// 930 nm pump; alpha_N measured through a 25 GHz filter.
    pub fn device_defaults() -> Self {
        Self::new(4.0, 0.67, 0.46, 0.63, 129e3, 25e9).expect("default parameters are valid")
    }

    /// Overrides the saturation efficiency used in the noise models
    /// (defaults to the internal one).
    pub fn with_noise_eta_max(mut self, eta: Option<f64>) -> Result<Self> {
        if let Some(v) = eta {
            ensure((0.0..=1.0).contains(&v), "noise_eta_max", v, "must lie in [0, 1]")?;
        }
        self.noise_eta_max = eta;
        Ok(self)
    }

    pub fn with_alpha_n(self, alpha_n: f64, bandwidth_ref_hz: f64) -> Result<Self> {
        Self::new(
            self.length_cm,
            self.eta_max_int,
            self.eta_max_ext,
            self.eta_n,
            alpha_n,
            bandwidth_ref_hz,
        )?
        .with_noise_eta_max(self.noise_eta_max)
    }

    pub fn with_efficiency(self, eta_max_int: f64, eta_max_ext: f64, eta_n: f64) -> Result<Self> {
        Self::new(
            self.length_cm,
            eta_max_int,
            eta_max_ext,
            eta_n,
            self.alpha_n,
            self.bandwidth_ref_hz,
        )?
        .with_noise_eta_max(self.noise_eta_max)
    }

    pub fn length_cm(&self) -> f64 {
        self.length_cm
    }

    pub fn eta_max(&self, which: Efficiency) -> f64 {
        match which {
            Efficiency::Internal => self.eta_max_int,
            Efficiency::External => self.eta_max_ext,
        }
    }

    pub fn eta_n(&self) -> f64 {
        self.eta_n
    }

    pub fn alpha_n(&self) -> f64 {
        self.alpha_n
    }

    pub fn bandwidth_ref_hz(&self) -> f64 {
        self.bandwidth_ref_hz
    }

    /// Saturation efficiency entering the noise models.
    pub fn noise_eta_max(&self) -> f64 {
        self.noise_eta_max.unwrap_or(self.eta_max_int)
    }

    /// `L * sqrt(eta_n * P)`, the argument of the efficiency sine.
    pub fn phase(&self, p: PumpPower) -> f64 {
        self.length_cm * (self.eta_n * p.watts()).sqrt()
    }
}

/// Pump power coupled into the waveguide, in watts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PumpPower(f64);

impl PumpPower {
    pub const ZERO: PumpPower = PumpPower(0.0);

    pub fn new(watts: f64) -> Result<Self> {
        ensure(watts.is_finite() && watts >= 0.0, "pump power", watts, "must be >= 0 W")?;
        Ok(Self(watts))
    }

    pub fn watts(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PumpPower {
    type Error = Error;

    fn try_from(w: f64) -> Result<Self> {
        Self::new(w)
    }
}

impl From<PumpPower> for f64 {
    fn from(p: PumpPower) -> f64 {
        p.0
    }
}

/// Visible, pump and telecom wavelengths (nm) linked by energy conservation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthTriple {
    pub lambda_vis: f64,
    pub lambda_pump: f64,
    pub lambda_tele: f64,
}

impl WavelengthTriple {
    /// Checks ordering and `1/vis = 1/pump + 1/tele` to relative `tolerance`.
    pub fn new(lambda_vis: f64, lambda_pump: f64, lambda_tele: f64, tolerance: f64) -> Result<Self> {
        ensure(lambda_vis > 0.0, "lambda_vis", lambda_vis, "must be > 0")?;
        ensure(lambda_pump > lambda_vis, "lambda_pump", lambda_pump, "must exceed lambda_vis")?;
        ensure(lambda_tele > lambda_pump, "lambda_tele", lambda_tele, "must exceed lambda_pump")?;
        let lhs = 1.0 / lambda_vis;
        let rhs = 1.0 / lambda_pump + 1.0 / lambda_tele;
        let mismatch = (lhs - rhs).abs() / lhs;
        ensure(
            mismatch <= tolerance,
            "energy mismatch",
            mismatch,
            "1/vis must equal 1/pump + 1/tele",
        )?;
        Ok(Self {
            lambda_vis,
            lambda_pump,
            lambda_tele,
        })
    }

    /// Builds the triple from pump and telecom wavelengths.
    pub fn from_pump_and_telecom(lambda_pump: f64, lambda_tele: f64) -> Result<Self> {
        let lambda_vis = sfg_partner_wavelength(lambda_pump, lambda_tele)?;
        Self::new(lambda_vis, lambda_pump, lambda_tele, DEFAULT_ENERGY_TOLERANCE)
    }
}

/// `sin(x)/x`, with the Taylor series near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `1 - sinc(x)`, accurate for small `x`.
fn one_minus_sinc(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        1.0 - x.sin() / x
    }
}

pub fn dfg_efficiency(params: &ConverterParams, which: Efficiency, p: PumpPower) -> f64 {
    let s = params.phase(p).sin();
    params.eta_max(which) * s * s
}

/// First maximum of the efficiency curve, `(pi / 2L)^2 / eta_n`.
pub fn peak_pump_power(params: &ConverterParams) -> Result<PumpPower> {
    if params.eta_n <= 0.0 {
        return Err(Error::NoMaximum);
    }
    let half_pi_over_l = PI / (2.0 * params.length_cm);
    PumpPower::new(half_pi_over_l * half_pi_over_l / params.eta_n)
}

/// Fraction of the SPDC noise converted to the visible by SFG,
/// `(eta_max/2) * (1 - sinc(2 L sqrt(eta_n P)))`.
///
/// This is also the fractional depth of a telecom noise dip.
pub fn dip_depth(params: &ConverterParams, p: PumpPower) -> f64 {
    0.5 * params.noise_eta_max() * one_minus_sinc(2.0 * params.phase(p))
}

/// Noise rate without SFG back-conversion, `alpha_N * P * L`.
pub fn linear_noise_rate(params: &ConverterParams, p: PumpPower) -> f64 {
    params.alpha_n * p.watts() * params.length_cm
}

pub fn telecom_noise_rate(params: &ConverterParams, p: PumpPower) -> f64 {
    linear_noise_rate(params, p) * (1.0 - dip_depth(params, p))
}

/// Integrates `alpha_N P (1 - eta_max sin^2(x sqrt(eta_n P)))` over the
/// waveguide with the composite Simpson rule. An odd `n_steps` is rounded up.
pub fn telecom_noise_rate_quadrature(
    params: &ConverterParams,
    p: PumpPower,
    n_steps: usize,
) -> Result<f64> {
    ensure(n_steps >= 2, "n_steps", n_steps as f64, "must be >= 2")?;
    let n = n_steps + n_steps % 2;
    let k = (params.eta_n * p.watts()).sqrt();
    let eta = params.noise_eta_max();
    let h = params.length_cm / n as f64;
    let f = |x: f64| {
        let s = (x * k).sin();
        1.0 - eta * s * s
    };
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    let integral = h / 3.0 * (f(0.0) + 4.0 * odd + 2.0 * even + f(params.length_cm));
    Ok(params.alpha_n * p.watts() * integral)
}

pub fn visible_noise_rate(params: &ConverterParams, p: PumpPower) -> f64 {
    linear_noise_rate(params, p) * dip_depth(params, p)
}

/// Quadratic low-power form `(1/3) alpha_N eta_n eta_max L^3 P^2`.
///
/// Overestimates [`visible_noise_rate`] by a factor `~1/(1 - x^2/20)` with
/// `x = 2L sqrt(eta_n P)`: about 2% at `x = 0.63`, 2.5% at `x = 0.7`.
pub fn visible_noise_rate_lowpower(params: &ConverterParams, p: PumpPower) -> f64 {
    let l = params.length_cm;
    params.alpha_n * params.eta_n * params.noise_eta_max() * l * l * l * p.watts() * p.watts() / 3.0
}

/// Visible SFG partner of a telecom wavelength, `1/(1/pump + 1/tele)`.
pub fn sfg_partner_wavelength(lambda_pump: f64, lambda_tele: f64) -> Result<f64> {
    ensure(lambda_pump > 0.0, "lambda_pump", lambda_pump, "must be > 0")?;
    ensure(lambda_tele > 0.0, "lambda_tele", lambda_tele, "must be > 0")?;
    Ok(1.0 / (1.0 / lambda_pump + 1.0 / lambda_tele))
}

/// DFG target of a visible wavelength, `1/(1/vis - 1/pump)`.
pub fn dfg_target_wavelength(lambda_vis: f64, lambda_pump: f64) -> Result<f64> {
    ensure(lambda_vis > 0.0, "lambda_vis", lambda_vis, "must be > 0")?;
    ensure(lambda_pump > lambda_vis, "lambda_pump", lambda_pump, "must exceed lambda_vis")?;
    Ok(1.0 / (1.0 / lambda_vis - 1.0 / lambda_pump))
}

/// Noise photons per spectro-temporal mode per W per cm.
pub fn photons_per_mode(alpha_n: f64, bandwidth_hz: f64) -> Result<f64> {
    ensure(alpha_n >= 0.0 && alpha_n.is_finite(), "alpha_n", alpha_n, "must be >= 0")?;
    ensure(bandwidth_hz > 0.0, "bandwidth", bandwidth_hz, "must be > 0")?;
    Ok(alpha_n / bandwidth_hz)
}

/// Rescales a noise coefficient between bandwidths, assuming flat noise.
/// Both bandwidths must share units.
pub fn rescale_alpha_to_bandwidth(alpha_n: f64, from_bw: f64, to_bw: f64) -> Result<f64> {
    ensure(alpha_n >= 0.0 && alpha_n.is_finite(), "alpha_n", alpha_n, "must be >= 0")?;
    ensure(from_bw > 0.0, "from bandwidth", from_bw, "must be > 0")?;
    ensure(to_bw > 0.0, "to bandwidth", to_bw, "must be > 0")?;
    Ok(alpha_n * (to_bw / from_bw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pw(w: f64) -> PumpPower {
        PumpPower::new(w).unwrap()
    }

    fn params(alpha: f64) -> ConverterParams {
        ConverterParams::new(4.0, 0.67, 0.46, 0.63, alpha, 25e9).unwrap()
    }

    #[test]
    fn efficiency_zero_pump() {
        assert_eq!(dfg_efficiency(&params(0.0), Efficiency::Internal, PumpPower::ZERO), 0.0);
    }

    #[test]
    fn efficiency_near_saturation() {
        let p = params(0.0);
        assert!((dfg_efficiency(&p, Efficiency::Internal, pw(0.245)) - 0.67).abs() < 1e-3);
        assert!((dfg_efficiency(&p, Efficiency::External, pw(0.245)) - 0.46).abs() < 1e-3);
    }

    #[test]
    fn peak_power_values() {
        let p = params(0.0);
        assert!((peak_pump_power(&p).unwrap().watts() - 0.2448).abs() < 1e-4);
        let p4 = ConverterParams::new(4.0, 0.67, 0.46, 2.52, 0.0, 1.0).unwrap();
        assert!((peak_pump_power(&p4).unwrap().watts() - 0.0612).abs() < 1e-4);
        let l8 = ConverterParams::new(8.0, 0.67, 0.46, 0.63, 0.0, 1.0).unwrap();
        assert_relative_eq!(
            peak_pump_power(&l8).unwrap().watts(),
            peak_pump_power(&p4).unwrap().watts(),
            max_relative = 1e-14
        );
        let flat = ConverterParams::new(4.0, 0.67, 0.46, 0.0, 0.0, 1.0).unwrap();
        assert!(matches!(peak_pump_power(&flat), Err(Error::NoMaximum)));
    }

    #[test]
    fn peak_is_maximum() {
        let p = params(0.0);
        let pk = peak_pump_power(&p).unwrap();
        assert_relative_eq!(dfg_efficiency(&p, Efficiency::Internal, pk), 0.67, max_relative = 1e-15);
    }

    #[test]
    fn telecom_rate_values() {
        // Oracle values from adaptive quadrature of the integral form.
        let p = params(129e3);
        assert_eq!(telecom_noise_rate(&p, PumpPower::ZERO), 0.0);
        assert_relative_eq!(telecom_noise_rate(&p, pw(0.1)), 42112.957054899, max_relative = 1e-10);
        let small = telecom_noise_rate(&p, pw(1e-4));
        assert_relative_eq!(small, 51.588386149599, max_relative = 1e-10);
        assert!((small / 51.6 - 1.0).abs() < 3e-4);
    }

    #[test]
    fn quadrature_edge_cases() {
        let p = params(129e3);
        assert_eq!(telecom_noise_rate_quadrature(&p, PumpPower::ZERO, 10).unwrap(), 0.0);
        let dark = ConverterParams::new(4.0, 0.0, 0.0, 0.63, 129e3, 25e9).unwrap();
        let got = telecom_noise_rate_quadrature(&dark, pw(0.3), 7).unwrap();
        assert_relative_eq!(got, 129e3 * 0.3 * 4.0, max_relative = 1e-14);
        assert!(telecom_noise_rate_quadrature(&p, pw(0.1), 1).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let p = params(129e3);
        for w in [0.01, 0.1, 0.44] {
            let q = telecom_noise_rate_quadrature(&p, pw(w), 100_000).unwrap();
            assert_relative_eq!(q, telecom_noise_rate(&p, pw(w)), max_relative = 1e-9);
        }
    }

    #[test]
    fn visible_rate_values() {
        let p = params(391e3);
        assert_eq!(visible_noise_rate(&p, PumpPower::ZERO), 0.0);
        assert_relative_eq!(visible_noise_rate(&p, pw(0.01)), 345.057353814, max_relative = 1e-9);
        assert_relative_eq!(visible_noise_rate(&p, pw(0.1)), 28755.300709567, max_relative = 1e-10);
    }

    #[test]
    fn lowpower_approximation() {
        let p = params(391e3);
        assert_eq!(visible_noise_rate_lowpower(&p, PumpPower::ZERO), 0.0);
        let approx = visible_noise_rate_lowpower(&p, pw(0.01));
        assert_relative_eq!(approx, 352.08768, max_relative = 1e-12);
        assert!(approx / visible_noise_rate(&p, pw(0.01)) - 1.0 < 0.025);
        let tiny = pw(1e-9);
        assert_relative_eq!(
            visible_noise_rate_lowpower(&p, tiny) / visible_noise_rate(&p, tiny),
            1.0,
            max_relative = 1e-8
        );
    }

    #[test]
    fn lowpower_validity_bound() {
        // x = 2 L sqrt(eta_n P) = 0.7
        let p = params(391e3);
        let w = (0.7_f64 / 8.0).powi(2) / 0.63;
        let ratio = visible_noise_rate_lowpower(&p, pw(w)) / visible_noise_rate(&p, pw(w));
        assert!(ratio > 1.0 && ratio < 1.025, "{ratio}");
    }

    #[test]
    fn sfg_partners_of_mode_table() {
        let cases = [(1541.0, 579.9797652772), (1546.0, 580.6865912763), (1554.6, 581.8956773726)];
        for (tele, vis) in cases {
            assert_relative_eq!(sfg_partner_wavelength(930.0, tele).unwrap(), vis, max_relative = 1e-11);
        }
        assert!(sfg_partner_wavelength(0.0, 1541.0).is_err());
        assert!(sfg_partner_wavelength(930.0, -1.0).is_err());
    }

    #[test]
    fn wavelength_triple_checks() {
        let t = WavelengthTriple::from_pump_and_telecom(930.0, 1541.0).unwrap();
        assert!(t.lambda_vis < t.lambda_pump);
        assert!(WavelengthTriple::new(580.0, 930.0, 1541.0, 1e-4).is_ok());
        assert!(WavelengthTriple::new(580.0, 930.0, 1560.0, 1e-4).is_err());
        assert!(WavelengthTriple::new(930.0, 580.0, 1541.0, 1e-4).is_err());
    }

    #[test]
    fn photons_per_mode_values() {
        assert_relative_eq!(photons_per_mode(129e3, 25e9).unwrap(), 5.16e-6, max_relative = 1e-12);
        // Per-mode probability expressed as a rate in a 1 MHz bandwidth.
        assert_relative_eq!(
            photons_per_mode(129e3, 25e9).unwrap() * 1e6,
            5.16,
            max_relative = 1e-12
        );
        assert_relative_eq!(rescale_alpha_to_bandwidth(129e3, 25e9, 1e6).unwrap(), 5.16, max_relative = 1e-12);
        assert_eq!(photons_per_mode(0.0, 3.0).unwrap(), 0.0);
        assert!(photons_per_mode(1.0, 0.0).is_err());
    }

    #[test]
    fn bandwidth_rescaling() {
        assert_relative_eq!(rescale_alpha_to_bandwidth(129e3, 200.0, 500.0).unwrap(), 322.5e3, max_relative = 1e-12);
        assert_eq!(rescale_alpha_to_bandwidth(7.5, 3.0, 3.0).unwrap(), 7.5);
        assert_relative_eq!(rescale_alpha_to_bandwidth(391e3, 500.0, 200.0).unwrap(), 156.4e3, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ConverterParams::new(0.0, 0.5, 0.4, 1.0, 1.0, 1.0).is_err());
        assert!(ConverterParams::new(4.0, 0.4, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ConverterParams::new(4.0, 1.2, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ConverterParams::new(4.0, 0.5, 0.4, -1.0, 1.0, 1.0).is_err());
        assert!(ConverterParams::new(4.0, 0.5, 0.4, 1.0, -1.0, 1.0).is_err());
        assert!(ConverterParams::new(4.0, 0.5, 0.4, 1.0, 1.0, 0.0).is_err());
        assert!(PumpPower::new(-0.1).is_err());
        assert!(PumpPower::new(f64::NAN).is_err());
    }

    #[test]
    fn sinc_series_is_continuous() {
        for x in [9.9e-5_f64, 1e-4, 1.01e-4] {
            assert_relative_eq!(sinc(x), x.sin() / x, max_relative = 1e-15);
        }
        assert_eq!(sinc(0.0), 1.0);
        for x in [1e-3_f64, 9.9e-3, 1e-2] {
            assert_relative_eq!(one_minus_sinc(x), 1.0 - x.sin() / x, max_relative = 1e-6);
        }
    }

    #[test]
    fn dip_depth_at_full_power() {
        let d = dip_depth(&ConverterParams::device_defaults(), pw(0.44));
        assert!((d - 0.405).abs() < 0.005);
        assert_relative_eq!(d, 0.404783026649, max_relative = 1e-10);
    }

    #[test]
    fn params_serde_rejects_invalid() {
        let bad = r#"{"length_cm":-1,"eta_max_int":0.5,"eta_max_ext":0.4,"eta_n":1,"alpha_n":1,"bandwidth_ref_hz":1}"#;
        assert!(serde_json::from_str::<ConverterParams>(bad).is_err());
        let p = ConverterParams::device_defaults();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ConverterParams>(&s).unwrap(), p);
    }
}
