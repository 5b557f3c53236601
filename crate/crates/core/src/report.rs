//! Summary of fitted parameters and the figures derived from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::converter::{self, ConverterParams, PumpPower};
use crate::error::{Error, Result};
use crate::estimator::Estimate;
use crate::io::FitReport;

pub const KIND_EFFICIENCY: &str = "efficiency";
pub const KIND_ALPHA_TELECOM: &str = "alpha_telecom";
pub const KIND_ALPHA_VISIBLE: &str = "alpha_visible";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthFigure {
    pub bandwidth_hz: f64,
    /// Hz/(W cm)
    pub rate_per_w_cm: f64,
}

/// Telecom coefficient scaled to the visible detection bandwidth, compared
/// with the visible coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub alpha_telecom: Estimate,
    pub bandwidth_ratio: Estimate,
    pub alpha_telecom_rescaled: Estimate,
    pub alpha_visible: Estimate,
    /// visible / rescaled telecom
    pub ratio: f64,
    /// |difference| in combined standard deviations
    pub tension_sigma: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub length_cm: f64,
    pub eta_max_int: Estimate,
    pub eta_max_ext: Estimate,
    pub eta_n: Estimate,
    pub alpha_telecom: Estimate,
    pub bandwidth_ref_hz: f64,
    pub peak_pump_power_w: f64,
    pub max_pump_power_w: f64,
    pub dip_depth_at_max: f64,
    /// Noise photons per spectro-temporal mode, per W per cm.
    pub photons_per_mode: f64,
    pub bandwidth_figures: Vec<BandwidthFigure>,
    pub reconciliation: Option<Reconciliation>,
}

fn find<'a>(fits: &'a [FitReport], kind: &str) -> Option<&'a FitReport> {
    fits.iter().find(|f| f.kind == kind)
}

fn estimate(fit: &FitReport, name: &str) -> Result<Estimate> {
    fit.parameter(name)
        .map(|p| Estimate {
            value: p.value,
            sigma: p.sigma,
        })
        .ok_or_else(|| Error::InsufficientData(format!("fit `{}` has no parameter `{name}`", fit.kind)))
}

/// Builds the report. Efficiency and telecom noise fits are required; the
/// reconciliation needs the visible noise fit as well.
pub fn build_report(cfg: &RunConfig, fits: &[FitReport]) -> Result<Report> {
    let missing: Vec<&str> = [KIND_EFFICIENCY, KIND_ALPHA_TELECOM]
        .into_iter()
        .filter(|k| find(fits, k).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::InsufficientData(format!("missing fit results: {}", missing.join(", "))));
    }
    let eff = find(fits, KIND_EFFICIENCY).expect("checked above");
    let tele = find(fits, KIND_ALPHA_TELECOM).expect("checked above");
    let eta_max_int = estimate(eff, "eta_max_int")?;
    let eta_max_ext = estimate(eff, "eta_max_ext")?;
    let eta_n = estimate(eff, "eta_n")?;
    let alpha_telecom = estimate(tele, "alpha_n")?;

    let bw_ref = cfg.converter.bandwidth_ref_hz();
    let params: ConverterParams = cfg
        .converter
        .with_efficiency(eta_max_int.value, eta_max_ext.value, eta_n.value)?
        .with_alpha_n(alpha_telecom.value, bw_ref)?;
    let p_max = PumpPower::new(cfg.sweep.stop_w)?;
    let bandwidth_figures = cfg
        .report
        .bandwidths_hz
        .iter()
        .map(|&b| {
            Ok(BandwidthFigure {
                bandwidth_hz: b,
                rate_per_w_cm: converter::rescale_alpha_to_bandwidth(alpha_telecom.value, bw_ref, b)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let reconciliation = match find(fits, KIND_ALPHA_VISIBLE) {
        Some(vis) => Some(reconcile(alpha_telecom, cfg.report.bandwidth_ratio, estimate(vis, "alpha_n")?, cfg.report.tension_sigma)),
        None => None,
    };

    Ok(Report {
        length_cm: params.length_cm(),
        eta_max_int,
        eta_max_ext,
        eta_n,
        alpha_telecom,
        bandwidth_ref_hz: bw_ref,
        peak_pump_power_w: converter::peak_pump_power(&params)?.watts(),
        max_pump_power_w: p_max.watts(),
        dip_depth_at_max: converter::dip_depth(&params, p_max),
        photons_per_mode: converter::photons_per_mode(alpha_telecom.value, bw_ref)?,
        bandwidth_figures,
        reconciliation,
    })
}

/// First-order error propagation for the product `alpha * ratio`.
pub fn reconcile(alpha_telecom: Estimate, ratio: Estimate, alpha_visible: Estimate, threshold: f64) -> Reconciliation {
    let value = alpha_telecom.value * ratio.value;
    let sigma = (alpha_telecom.sigma * ratio.value).hypot(alpha_telecom.value * ratio.sigma);
    let combined = sigma.hypot(alpha_visible.sigma);
    let diff = (alpha_visible.value - value).abs();
    let tension = if combined > 0.0 {
        diff / combined
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Reconciliation {
        alpha_telecom,
        bandwidth_ratio: ratio,
        alpha_telecom_rescaled: Estimate { value, sigma },
        alpha_visible,
        ratio: alpha_visible.value / value,
        tension_sigma: tension,
        consistent: tension <= threshold,
    }
}

fn kilo(e: Estimate) -> String {
    format!("{:.1} +- {:.1}", e.value / 1e3, e.sigma / 1e3)
}

impl Report {
    /// Plain `key = value` text in sections.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[fitted]");
        let _ = writeln!(s, "eta_max_int = {:.4} +- {:.4}", self.eta_max_int.value, self.eta_max_int.sigma);
        let _ = writeln!(s, "eta_max_ext = {:.4} +- {:.4}", self.eta_max_ext.value, self.eta_max_ext.sigma);
        let _ = writeln!(s, "eta_n_per_w_cm2 = {:.4} +- {:.4}", self.eta_n.value, self.eta_n.sigma);
        let _ = writeln!(
            s,
            "alpha_n_telecom_khz_per_w_cm = {} @ {:e} Hz",
            kilo(self.alpha_telecom),
            self.bandwidth_ref_hz
        );
        if let Some(r) = &self.reconciliation {
            let _ = writeln!(s, "alpha_n_visible_khz_per_w_cm = {}", kilo(r.alpha_visible));
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[derived]");
        let _ = writeln!(s, "length_cm = {}", self.length_cm);
        let _ = writeln!(s, "peak_pump_power_w = {:.4}", self.peak_pump_power_w);
        let _ = writeln!(s, "max_pump_power_w = {}", self.max_pump_power_w);
        let _ = writeln!(s, "dip_depth_at_max_power = {:.4}", self.dip_depth_at_max);
        let _ = writeln!(
            s,
            "photons_per_mode_per_w_cm = {:.2e} @ {:e} Hz",
            self.photons_per_mode, self.bandwidth_ref_hz
        );
        for f in &self.bandwidth_figures {
            let _ = writeln!(s, "rate_hz_per_w_cm @ {:e} Hz = {}", f.bandwidth_hz, sig3(f.rate_per_w_cm));
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[reconciliation]");
        match &self.reconciliation {
            Some(r) => {
                let _ = writeln!(
                    s,
                    "telecom_x_ratio_khz = {:.1} x {} = {:.1} +- {:.1}",
                    r.alpha_telecom.value / 1e3,
                    r.bandwidth_ratio.value,
                    r.alpha_telecom_rescaled.value / 1e3,
                    r.alpha_telecom_rescaled.sigma / 1e3
                );
                let _ = writeln!(s, "visible_khz = {}", kilo(r.alpha_visible));
                let _ = writeln!(s, "ratio_visible_over_telecom = {:.3}", r.ratio);
                let _ = writeln!(s, "tension_sigma = {:.2}", r.tension_sigma);
                let _ = writeln!(s, "flag = {}", if r.consistent { "consistent" } else { "tension" });
            }
            None => {
                let _ = writeln!(s, "flag = not_available (no {KIND_ALPHA_VISIBLE} fit)");
            }
        }
        s
    }
}

/// Three significant digits without an exponent for moderate magnitudes.
fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        let decimals = (2 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.2e}")
    }
}
