//! Parameter estimation: shared-`eta_n` efficiency fit, noise-coefficient
//! fits and zero-retuning prediction of the noise curves.

mod lsq;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::converter::{self, ConverterParams, Efficiency, PumpPower};
use crate::error::{ensure, Error, Result};

pub use lsq::{covariance_from_jacobian, lsq_minimize, LeastSquaresProblem, LsqOptions};

/// A value with its 1-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Row-major, symmetric.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_reduced: f64,
    pub n_iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn new(
        names: Vec<String>,
        values: Vec<f64>,
        covariance: DMatrix<f64>,
        chi2: f64,
        n_data: usize,
        n_iterations: usize,
        converged: bool,
    ) -> Self {
        let dof = n_data.saturating_sub(values.len());
        let chi2_reduced = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
        let covariance = covariance.row_iter().map(|row| row.iter().copied().collect()).collect();
        Self {
            names,
            values,
            covariance,
            chi2,
            dof,
            chi2_reduced,
            n_iterations,
            converged,
        }
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<Estimate> {
        self.index_of(name).map(|i| Estimate {
            value: self.values[i],
            sigma: self.sigma(i),
        })
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.values.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    EfficiencyInt,
    EfficiencyExt,
    NoiseTeleOnpeak,
    NoiseTeleDetuned,
    NoiseVis,
}

impl SweepKind {
    pub fn is_efficiency(self) -> bool {
        matches!(self, SweepKind::EfficiencyInt | SweepKind::EfficiencyExt)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::EfficiencyInt => "efficiency_int",
            SweepKind::EfficiencyExt => "efficiency_ext",
            SweepKind::NoiseTeleOnpeak => "noise_tele_onpeak",
            SweepKind::NoiseTeleDetuned => "noise_tele_detuned",
            SweepKind::NoiseVis => "noise_vis",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            SweepKind::EfficiencyInt,
            SweepKind::EfficiencyExt,
            SweepKind::NoiseTeleOnpeak,
            SweepKind::NoiseTeleDetuned,
            SweepKind::NoiseVis,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown sweep kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub pump_w: f64,
    pub value: f64,
    pub sigma: f64,
}

/// Rate (Hz) or efficiency versus coupled pump power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSweep {
    kind: SweepKind,
    points: Vec<SweepPoint>,
}

impl PowerSweep {
    pub fn new(kind: SweepKind, points: Vec<SweepPoint>) -> Result<Self> {
        let mut prev = f64::NEG_INFINITY;
        for p in &points {
            ensure(p.pump_w >= 0.0, "pump_w", p.pump_w, "must be >= 0")?;
            ensure(p.pump_w > prev, "pump_w", p.pump_w, "must be strictly increasing")?;
            ensure(p.sigma > 0.0 && p.sigma.is_finite(), "sigma", p.sigma, "must be > 0")?;
            ensure(p.value.is_finite(), "value", p.value, "must be finite")?;
            prev = p.pump_w;
        }
        Ok(Self { kind, points })
    }

    pub fn kind(&self) -> SweepKind {
        self.kind
    }

    pub fn points(&self) -> &[SweepPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One efficiency measurement tagged with the curve it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyPoint {
    pub curve: Efficiency,
    pub pump_w: f64,
    pub value: f64,
    pub sigma: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Joint `eta_max sin^2(L sqrt(eta_n P))` model of the internal and external
/// curves with a shared `eta_n`.
///
/// Internal parameters: `[logit eta_max_int, logit eta_max_ext, ln eta_n]`.
#[derive(Debug, Clone)]
pub struct EfficiencyProblem {
    points: Vec<EfficiencyPoint>,
    length_cm: f64,
}

impl EfficiencyProblem {
    pub fn new(points: Vec<EfficiencyPoint>, length_cm: f64) -> Self {
        Self { points, length_cm }
    }

    /// Internal parameter vector for natural values.
    pub fn encode(eta_max_int: f64, eta_max_ext: f64, eta_n: f64) -> DVector<f64> {
        DVector::from_vec(vec![logit(eta_max_int), logit(eta_max_ext), eta_n.ln()])
    }

    /// `(eta_max_int, eta_max_ext, eta_n)` from internal parameters.
    pub fn decode(p: &DVector<f64>) -> (f64, f64, f64) {
        (logistic(p[0]), logistic(p[1]), p[2].exp())
    }

    fn model(&self, pt: &EfficiencyPoint, p: &DVector<f64>) -> f64 {
        let (ei, ee, en) = Self::decode(p);
        let eta = match pt.curve {
            Efficiency::Internal => ei,
            Efficiency::External => ee,
        };
        let s = (self.length_cm * (en * pt.pump_w).sqrt()).sin();
        eta * s * s
    }

    /// Initial guess: `eta_max` from the largest observed efficiency, `eta_n`
    /// from the pump power where the internal curve peaks.
    pub fn initial_guess(&self) -> DVector<f64> {
        let best = |curve| {
            self.points
                .iter()
                .filter(|p| p.curve == curve)
                .max_by(|a, b| a.value.total_cmp(&b.value))
                .copied()
        };
        let int = best(Efficiency::Internal);
        let ext = best(Efficiency::External);
        let clamp = |v: f64| v.clamp(0.02, 0.98);
        let ei = int.map_or(0.5, |p| clamp(p.value));
        let ee = ext.map_or(0.5, |p| clamp(p.value));
        let p_peak = int.or(ext).map_or(0.0, |p| p.pump_w);
        let en = if p_peak > 0.0 {
            (PI / (2.0 * self.length_cm)).powi(2) / p_peak
        } else {
            1.0
        };
        Self::encode(ei, ee, en)
    }
}

impl LeastSquaresProblem for EfficiencyProblem {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|pt| (pt.value - self.model(pt, p)) / pt.sigma),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (ei, ee, en) = Self::decode(p);
        let mut jac = DMatrix::zeros(self.points.len(), 3);
        for (row, pt) in self.points.iter().enumerate() {
            let theta = self.length_cm * (en * pt.pump_w).sqrt();
            let s2 = theta.sin().powi(2);
            let (col, eta) = match pt.curve {
                Efficiency::Internal => (0, ei),
                Efficiency::External => (1, ee),
            };
            // d/d(logit eta) = eta (1 - eta) d/d eta
            jac[(row, col)] = -eta * (1.0 - eta) * s2 / pt.sigma;
            // d theta / d(ln eta_n) = theta / 2
            jac[(row, 2)] = -eta * (2.0 * theta).sin() * theta / 2.0 / pt.sigma;
        }
        jac
    }

    fn parameter_names(&self, _n: usize) -> Vec<String> {
        vec!["logit_eta_max_int".into(), "logit_eta_max_ext".into(), "ln_eta_n".into()]
    }
}

/// Joint fit of the internal and external efficiency curves sharing `eta_n`.
///
/// Reports `eta_max_int`, `eta_max_ext` and `eta_n` in natural units; the
/// covariance is propagated from the internal parameterization.
pub fn fit_efficiency_shared(
    sweep_int: &PowerSweep,
    sweep_ext: &PowerSweep,
    length_cm: f64,
) -> Result<FitResult> {
    for (sweep, name) in [(sweep_int, "internal"), (sweep_ext, "external")] {
        if sweep.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "{name} efficiency sweep has {} points, need at least 3",
                sweep.len()
            )));
        }
    }
    ensure(length_cm > 0.0, "length_cm", length_cm, "must be > 0")?;
    let tag = |sweep: &PowerSweep, curve| {
        sweep
            .points()
            .iter()
            .map(move |p| EfficiencyPoint {
                curve,
                pump_w: p.pump_w,
                value: p.value,
                sigma: p.sigma,
            })
            .collect::<Vec<_>>()
    };
    let mut points = tag(sweep_int, Efficiency::Internal);
    points.extend(tag(sweep_ext, Efficiency::External));
    let problem = EfficiencyProblem::new(points, length_cm);
    let raw = lsq_minimize(&problem, problem.initial_guess(), &LsqOptions::default())?;
    Ok(efficiency_to_natural(&raw))
}

/// Maps an [`EfficiencyProblem`] result to natural units (delta method).
pub fn efficiency_to_natural(raw: &FitResult) -> FitResult {
    let p = DVector::from_column_slice(&raw.values);
    let (ei, ee, en) = EfficiencyProblem::decode(&p);
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![ei * (1.0 - ei), ee * (1.0 - ee), en]));
    let cov = &d * raw.covariance_matrix() * &d;
    FitResult::new(
        vec!["eta_max_int".into(), "eta_max_ext".into(), "eta_n".into()],
        vec![ei, ee, en],
        cov,
        raw.chi2,
        raw.dof + raw.values.len(),
        raw.n_iterations,
        raw.converged,
    )
}

/// Weighted zero-intercept fit `value = alpha * basis(P)` in closed form.
fn fit_scale(points: &[SweepPoint], basis: impl Fn(f64) -> f64, name: &str) -> Result<FitResult> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for pt in points {
        let w = 1.0 / (pt.sigma * pt.sigma);
        let b = basis(pt.pump_w);
        sxx += w * b * b;
        sxy += w * b * pt.value;
    }
    if sxx <= 0.0 {
        return Err(Error::RankDeficient { rank: 0, n_params: 1 });
    }
    let alpha = sxy / sxx;
    let chi2: f64 = points
        .iter()
        .map(|pt| ((pt.value - alpha * basis(pt.pump_w)) / pt.sigma).powi(2))
        .sum();
    Ok(FitResult::new(
        vec![name.to_string()],
        vec![alpha],
        DMatrix::from_element(1, 1, 1.0 / sxx),
        chi2,
        points.len(),
        1,
        true,
    ))
}

/// Linear low-power fit `rate = alpha_N * L * P` on the first `n_points`.
pub fn fit_alpha_linear(sweep: &PowerSweep, n_points: usize, length_cm: f64) -> Result<FitResult> {
    if n_points == 0 || n_points > sweep.len() {
        return Err(Error::InsufficientData(format!(
            "asked for {n_points} points from a sweep of {}",
            sweep.len()
        )));
    }
    ensure(length_cm > 0.0, "length_cm", length_cm, "must be > 0")?;
    fit_scale(&sweep.points()[..n_points], |p| p * length_cm, "alpha_n")
}

/// Fits the visible noise model with `alpha_N` as the only free parameter;
/// `eta_n` and `eta_max` are taken from `params`.
pub fn fit_alpha_visible(sweep: &PowerSweep, params: &ConverterParams) -> Result<FitResult> {
    if sweep.is_empty() {
        return Err(Error::InsufficientData("empty visible noise sweep".into()));
    }
    let unit = params.with_alpha_n(1.0, params.bandwidth_ref_hz())?;
    fit_scale(
        sweep.points(),
        |p| converter::visible_noise_rate(&unit, PumpPower::new(p).unwrap_or_default()),
        "alpha_n",
    )
}

/// [`fit_alpha_visible`] with `eta_max_int`, `eta_max_ext` and `eta_n` taken
/// from `efficiency`, whose covariance is propagated to first order into the
/// `alpha_N` variance. Without it the Poisson-only sigma understates the
/// uncertainty once the counts are large.
pub fn fit_alpha_visible_propagated(
    sweep: &PowerSweep,
    params: &ConverterParams,
    efficiency: &FitResult,
) -> Result<FitResult> {
    const NAMES: [&str; 3] = ["eta_max_int", "eta_max_ext", "eta_n"];
    let idx = NAMES
        .iter()
        .map(|n| {
            efficiency
                .index_of(n)
                .ok_or_else(|| Error::InsufficientData(format!("efficiency fit has no parameter `{n}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let theta: Vec<f64> = idx.iter().map(|&i| efficiency.values[i]).collect();
    let alpha_at = |t: &[f64]| -> Result<f64> {
        let p = params.with_efficiency(t[0], t[1], t[2])?;
        Ok(fit_alpha_visible(sweep, &p)?.values[0])
    };
    let base = fit_alpha_visible(sweep, &params.with_efficiency(theta[0], theta[1], theta[2])?)?;

    let mut grad = DVector::zeros(3);
    for k in 0..3 {
        let h = 1e-6 * theta[k].abs().max(1e-3);
        let mut hi = theta.clone();
        let mut lo = theta.clone();
        hi[k] += h;
        lo[k] -= h;
        // one-sided at a parameter bound
        grad[k] = match (alpha_at(&hi), alpha_at(&lo)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (Ok(a), Err(_)) => (a - base.values[0]) / h,
            (Err(_), Ok(b)) => (base.values[0] - b) / h,
            (Err(e), Err(_)) => return Err(e),
        };
    }
    let cov = DMatrix::from_fn(3, 3, |i, j| efficiency.covariance[idx[i]][idx[j]]);
    let extra = (grad.transpose() * cov * &grad)[0].max(0.0);
    let var = base.covariance[0][0] + extra;
    Ok(FitResult::new(
        base.names,
        base.values,
        DMatrix::from_element(1, 1, var),
        base.chi2,
        base.dof + 1,
        base.n_iterations,
        base.converged,
    ))
}

/// Noise curves fully determined by previously fitted parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCurves {
    /// Parameters for the telecom curves (alpha_N in the telecom filter bandwidth).
    pub telecom: ConverterParams,
    /// Parameters for the visible curves (alpha_N from the visible fit).
    pub visible: ConverterParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurveRow {
    pub pump_w: f64,
    pub telecom_onpeak_hz: f64,
    pub telecom_detuned_hz: f64,
    pub visible_hz: f64,
    pub visible_quadratic_hz: f64,
}

impl NoiseCurves {
    pub fn telecom_onpeak(&self, p: PumpPower) -> f64 {
        converter::telecom_noise_rate(&self.telecom, p)
    }

    pub fn telecom_detuned(&self, p: PumpPower) -> f64 {
        converter::linear_noise_rate(&self.telecom, p)
    }

    pub fn visible(&self, p: PumpPower) -> f64 {
        converter::visible_noise_rate(&self.visible, p)
    }

    pub fn visible_quadratic(&self, p: PumpPower) -> f64 {
        converter::visible_noise_rate_lowpower(&self.visible, p)
    }

    pub fn row(&self, p: PumpPower) -> NoiseCurveRow {
        NoiseCurveRow {
            pump_w: p.watts(),
            telecom_onpeak_hz: self.telecom_onpeak(p),
            telecom_detuned_hz: self.telecom_detuned(p),
            visible_hz: self.visible(p),
            visible_quadratic_hz: self.visible_quadratic(p),
        }
    }

    pub fn table(&self, powers: &[PumpPower]) -> Vec<NoiseCurveRow> {
        powers.iter().map(|&p| self.row(p)).collect()
    }
}

/// Builds the overlay curves. With one parameter set, the visible curves use
/// the same `alpha_N` as the telecom ones; use [`NoiseCurves`] directly to
/// pass a separately fitted visible coefficient.
pub fn predict_noise_curves(params: &ConverterParams) -> NoiseCurves {
    NoiseCurves {
        telecom: *params,
        visible: *params,
    }
}
