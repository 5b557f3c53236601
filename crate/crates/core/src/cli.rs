//! Command-line front end. `main` only parses arguments and maps errors to
//! exit codes; everything else lives here so it can be tested in-process.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::converter::{self, ConverterParams, Efficiency, PumpPower};
use crate::error::{Error, Result};
use crate::estimator::{self, FitResult, NoiseCurves, PowerSweep, SweepKind};
use crate::io::{self, FitReport, TableMetadata};
use crate::pipeline;
use crate::report::{self, KIND_ALPHA_TELECOM, KIND_ALPHA_VISIBLE, KIND_EFFICIENCY};
use crate::spectral::{self, SpectralScan};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;

/// Pump grid step for the noiseless efficiency curve, W.
const CURVE_STEP_W: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "dfgnoise", version, about = "Noise model and fits for a waveguide frequency converter")]
pub struct Cli {
    /// Run configuration (TOML). Defaults to the shipped measured-device preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic data from the model.
    Simulate {
        target: SimulateTarget,
        /// Sweep kind for `power-sweep`; all noise sweeps when omitted.
        #[arg(long)]
        kind: Option<SweepKind>,
        /// Number of pump powers in a sweep.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Fit sweep files.
    Fit {
        target: FitTarget,
        /// Sweep CSV files. Without sidecars the kind follows the order:
        /// internal then external, or detuned telecom then visible.
        #[arg(required = true)]
        data: Vec<PathBuf>,
        /// Leading points used by the linear noise fit.
        #[arg(long)]
        points: Option<usize>,
        /// Efficiency fit JSON whose parameters feed the visible noise fit.
        #[arg(long)]
        efficiency_fit: Option<PathBuf>,
    },
    /// Summarize fit results.
    Report {
        /// Fit JSON files written by `fit`.
        #[arg(required = true)]
        fits: Vec<PathBuf>,
    },
    /// Parse and check a config file.
    ValidateConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateTarget {
    Efficiency,
    TelecomSpectrum,
    VisibleSpectrum,
    PowerSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitTarget {
    Efficiency,
    Noise,
}

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        _ => EXIT_DATA,
    }
}

struct Context {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::device_defaults(),
        };
        let seed = cli.seed.unwrap_or(cfg.seed);
        let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok(Self { cfg, seed, out })
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(self.out.join(name))
    }
}

/// Runs a parsed command and returns the files it wrote (or, for
/// `validate-config`, nothing).
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Simulate { target, kind, points } => simulate(&ctx, *target, *kind, *points),
        Command::Fit {
            target,
            data,
            points,
            efficiency_fit,
        } => match target {
            FitTarget::Efficiency => fit_efficiency(&ctx, data),
            FitTarget::Noise => fit_noise(&ctx, data, *points, efficiency_fit.as_deref()),
        },
        Command::Report { fits } => write_report(&ctx, fits),
        Command::ValidateConfig => Ok(vec![]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurveRow {
    pub pump_w: f64,
    pub efficiency_int: f64,
    pub efficiency_ext: f64,
}

fn simulate(ctx: &Context, target: SimulateTarget, kind: Option<SweepKind>, points: Option<usize>) -> Result<Vec<PathBuf>> {
    if kind.is_some() && target != SimulateTarget::PowerSweep {
        return Err(Error::Config("--kind only applies to power-sweep".into()));
    }
    let cfg = &ctx.cfg;
    let params = cfg.converter;
    let mut written = Vec::new();
    match target {
        SimulateTarget::Efficiency => {
            let (a, b) = (cfg.sweep.start_w, cfg.sweep.stop_w);
            let n = ((b - a) / CURVE_STEP_W + 1e-9).floor() as usize + 1;
            let rows: Vec<EfficiencyCurveRow> = (0..n)
                .map(|i| {
                    let p = PumpPower::new(a + i as f64 * CURVE_STEP_W)?;
                    Ok(EfficiencyCurveRow {
                        pump_w: p.watts(),
                        efficiency_int: converter::dfg_efficiency(&params, Efficiency::Internal, p),
                        efficiency_ext: converter::dfg_efficiency(&params, Efficiency::External, p),
                    })
                })
                .collect::<Result<_>>()?;
            let path = ctx.path("efficiency_curves.csv")?;
            io::write_table(&path, &rows)?;
            io::write_json(
                &io::sidecar_path(&path),
                &TableMetadata {
                    description: "noiseless efficiency curves".into(),
                    seed: ctx.seed,
                },
            )?;
            written.push(path);
            for k in [SweepKind::EfficiencyInt, SweepKind::EfficiencyExt] {
                written.push(write_efficiency_sweep(ctx, k, points)?);
            }
        }
        SimulateTarget::PowerSweep => {
            let kinds = match kind {
                Some(k) => vec![k],
                None => vec![SweepKind::NoiseTeleOnpeak, SweepKind::NoiseTeleDetuned, SweepKind::NoiseVis],
            };
            for k in kinds {
                if k.is_efficiency() {
                    written.push(write_efficiency_sweep(ctx, k, points)?);
                    continue;
                }
                let chain = if k == SweepKind::NoiseVis {
                    &cfg.chains.visible
                } else {
                    &cfg.chains.telecom
                };
                let sim = pipeline::simulate_noise_sweep(
                    k,
                    &params,
                    &cfg.visible_params()?,
                    chain,
                    cfg.visible_noise.in_band_fraction,
                    &cfg.pump_grid(points),
                    ctx.seed,
                )?;
                let path = ctx.path(&format!("{}.csv", k.as_str()))?;
                io::write_sweep(&path, &sim.sweep, Some(ctx.seed))?;
                written.push(path);
                let path = ctx.path(&format!("{}_counts.csv", k.as_str()))?;
                io::write_counts(&path, &sim.counts)?;
                io::write_json(
                    &io::sidecar_path(&path),
                    &TableMetadata {
                        description: format!("raw detector counts for {}", k.as_str()),
                        seed: ctx.seed,
                    },
                )?;
                written.push(path);
            }
        }
        SimulateTarget::TelecomSpectrum => {
            let p = PumpPower::new(cfg.telecom_scan.pump_w)?;
            let scan = spectral::telecom_spectrum(&params, &cfg.modes()?, p, &cfg.telecom_grid()?)?;
            written.extend(write_scan_pair(
                ctx,
                "telecom_spectrum",
                &scan,
                cfg.telecom_scan.filter.as_ref(),
                "telecom noise at the waveguide output",
            )?);
        }
        SimulateTarget::VisibleSpectrum => {
            let p = PumpPower::new(cfg.visible_scan.pump_w)?;
            let scan = spectral::visible_spectrum(
                &cfg.visible_params()?,
                &cfg.modes()?,
                p,
                &cfg.visible_grid()?,
                &cfg.visible_scan.collection,
            )?;
            written.extend(write_scan_pair(
                ctx,
                "visible_spectrum",
                &scan,
                cfg.visible_scan.instrument.as_ref(),
                "visible SFG noise after fibre collection",
            )?);
        }
    }
    Ok(written)
}

fn write_scan_pair(
    ctx: &Context,
    stem: &str,
    scan: &SpectralScan,
    filter: Option<&spectral::FilterProfile>,
    description: &str,
) -> Result<Vec<PathBuf>> {
    let path = ctx.path(&format!("{stem}.csv"))?;
    io::write_scan(&path, scan, Some(description), Some(ctx.seed))?;
    let mut written = vec![path];
    if let Some(f) = filter {
        let seen = spectral::convolve_with_filter(scan, f)?;
        let path = ctx.path(&format!("{stem}_filtered.csv"))?;
        io::write_scan(&path, &seen, Some(&format!("{description}, seen through the filter")), Some(ctx.seed))?;
        written.push(path);
    }
    Ok(written)
}

fn write_efficiency_sweep(ctx: &Context, kind: SweepKind, points: Option<usize>) -> Result<PathBuf> {
    let s = &ctx.cfg.sweep;
    let sweep = pipeline::simulate_efficiency_sweep(
        kind,
        &ctx.cfg.converter,
        &ctx.cfg.pump_grid(points),
        s.efficiency_noise_rel,
        s.efficiency_noise_floor,
        ctx.seed,
    )?;
    let path = ctx.path(&format!("{}.csv", kind.as_str()))?;
    io::write_sweep(&path, &sweep, Some(ctx.seed))?;
    Ok(path)
}

/// Reads sweeps, taking kinds from sidecars or else from `order`.
fn read_sweeps(paths: &[PathBuf], order: &[SweepKind]) -> Result<Vec<PowerSweep>> {
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| io::read_sweep(p, order.get(i).copied()))
        .collect()
}

fn take(sweeps: &[PowerSweep], kind: SweepKind) -> Result<Option<&PowerSweep>> {
    let mut it = sweeps.iter().filter(|s| s.kind() == kind);
    let first = it.next();
    if it.next().is_some() {
        return Err(Error::Config(format!("more than one {} sweep given", kind.as_str())));
    }
    Ok(first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub curve: String,
    pub pump_w: f64,
    pub value: f64,
    pub sigma: f64,
    pub model: f64,
    pub normalized_residual: f64,
}

fn residuals(sweep: &PowerSweep, model: impl Fn(f64) -> f64) -> Vec<ResidualRow> {
    sweep
        .points()
        .iter()
        .map(|pt| {
            let m = model(pt.pump_w);
            ResidualRow {
                curve: sweep.kind().as_str().into(),
                pump_w: pt.pump_w,
                value: pt.value,
                sigma: pt.sigma,
                model: m,
                normalized_residual: (pt.value - m) / pt.sigma,
            }
        })
        .collect()
}

/// Writes the fit JSON (best point included on non-convergence) before
/// propagating the error.
fn save_fit(
    ctx: &Context,
    kind: &str,
    fit: Result<FitResult>,
    inputs: &[&Path],
    written: &mut Vec<PathBuf>,
) -> Result<FitResult> {
    let path = ctx.path(&format!("fit_{kind}.json"))?;
    match fit {
        Ok(f) => {
            io::write_json(&path, &FitReport::new(kind, &f, inputs)?)?;
            written.push(path);
            Ok(f)
        }
        Err(Error::NonConvergence { best }) => {
            io::write_json(&path, &FitReport::new(kind, &best, inputs)?)?;
            Err(Error::NonConvergence { best })
        }
        Err(e) => Err(e),
    }
}

fn fit_efficiency(ctx: &Context, data: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let sweeps = read_sweeps(data, &[SweepKind::EfficiencyInt, SweepKind::EfficiencyExt])?;
    let int = take(&sweeps, SweepKind::EfficiencyInt)?;
    let ext = take(&sweeps, SweepKind::EfficiencyExt)?;
    let (Some(int), Some(ext)) = (int, ext) else {
        return Err(Error::InsufficientData(
            "efficiency fit needs one internal and one external sweep".into(),
        ));
    };
    let length = ctx.cfg.converter.length_cm();
    let mut written = Vec::new();
    let inputs: Vec<&Path> = data.iter().map(PathBuf::as_path).collect();
    let fit = save_fit(
        ctx,
        KIND_EFFICIENCY,
        estimator::fit_efficiency_shared(int, ext, length),
        &inputs,
        &mut written,
    )?;
    let params = ctx.cfg.converter.with_efficiency(fit.values[0], fit.values[1], fit.values[2])?;
    let model = |which| move |w: f64| converter::dfg_efficiency(&params, which, PumpPower::new(w).unwrap_or_default());
    let mut rows = residuals(int, model(Efficiency::Internal));
    rows.extend(residuals(ext, model(Efficiency::External)));
    let path = ctx.path("fit_efficiency_residuals.csv")?;
    io::write_table(&path, &rows)?;
    written.push(path);
    Ok(written)
}

fn fit_noise(ctx: &Context, data: &[PathBuf], points: Option<usize>, efficiency_fit: Option<&Path>) -> Result<Vec<PathBuf>> {
    let sweeps = read_sweeps(data, &[SweepKind::NoiseTeleDetuned, SweepKind::NoiseVis])?;
    if let Some(s) = sweeps.iter().find(|s| {
        !matches!(s.kind(), SweepKind::NoiseTeleDetuned | SweepKind::NoiseVis)
    }) {
        return Err(Error::Config(format!(
            "noise fit takes noise_tele_detuned and noise_vis sweeps, got {}",
            s.kind().as_str()
        )));
    }
    let cfg = &ctx.cfg;
    let length = cfg.converter.length_cm();
    let mut written = Vec::new();
    if let Some(tele) = take(&sweeps, SweepKind::NoiseTeleDetuned)? {
        let n = points.unwrap_or(cfg.sweep.alpha_fit_points).min(tele.len());
        let fit = save_fit(
            ctx,
            KIND_ALPHA_TELECOM,
            estimator::fit_alpha_linear(tele, n, length),
            &[data[sweeps.iter().position(|s| std::ptr::eq(s, tele)).expect("from list")].as_path()],
            &mut written,
        )?;
        let alpha = fit.values[0];
        let path = ctx.path("fit_alpha_telecom_residuals.csv")?;
        io::write_table(&path, &residuals(tele, |w| alpha * length * w))?;
        written.push(path);
    }
    if let Some(vis) = take(&sweeps, SweepKind::NoiseVis)? {
        let mut params: ConverterParams = cfg.converter;
        let mut efficiency = None;
        let mut inputs = vec![data[sweeps.iter().position(|s| std::ptr::eq(s, vis)).expect("from list")].as_path()];
        if let Some(path) = efficiency_fit {
            let eff: FitReport = io::read_json(path)?;
            let get = |n: &str| {
                eff.parameter(n)
                    .map(|p| p.value)
                    .ok_or_else(|| Error::InsufficientData(format!("{}: no parameter `{n}`", path.display())))
            };
            params = params.with_efficiency(get("eta_max_int")?, get("eta_max_ext")?, get("eta_n")?)?;
            efficiency = Some(eff.to_fit_result()?);
            inputs.push(path);
        }
        let result = match &efficiency {
            Some(eff) => estimator::fit_alpha_visible_propagated(vis, &cfg.converter, eff),
            None => estimator::fit_alpha_visible(vis, &params),
        };
        let fit = save_fit(ctx, KIND_ALPHA_VISIBLE, result, &inputs, &mut written)?;
        let fitted = params.with_alpha_n(fit.values[0], params.bandwidth_ref_hz())?;
        let path = ctx.path("fit_alpha_visible_residuals.csv")?;
        io::write_table(
            &path,
            &residuals(vis, |w| converter::visible_noise_rate(&fitted, PumpPower::new(w).unwrap_or_default())),
        )?;
        written.push(path);
    }
    if written.is_empty() {
        return Err(Error::InsufficientData("no noise sweeps given".into()));
    }
    Ok(written)
}

fn write_report(ctx: &Context, fits: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let fits = fits.iter().map(|p| io::read_json::<FitReport>(p)).collect::<Result<Vec<_>>>()?;
    let rep = report::build_report(&ctx.cfg, &fits)?;
    let path = ctx.path("report.txt")?;
    fs::write(&path, rep.render()).map_err(|e| Error::io(&path, e))?;
    let mut written = vec![path];

    // overlay curves from the fitted parameters
    let telecom = ctx
        .cfg
        .converter
        .with_efficiency(rep.eta_max_int.value, rep.eta_max_ext.value, rep.eta_n.value)?
        .with_alpha_n(rep.alpha_telecom.value, rep.bandwidth_ref_hz)?;
    let visible = match &rep.reconciliation {
        Some(r) => telecom.with_alpha_n(r.alpha_visible.value, rep.bandwidth_ref_hz)?,
        None => telecom,
    };
    let curves = NoiseCurves { telecom, visible };
    let (a, b) = (ctx.cfg.sweep.start_w, ctx.cfg.sweep.stop_w);
    let n = ((b - a) / CURVE_STEP_W + 1e-9).floor() as usize + 1;
    let powers = (0..n)
        .map(|i| PumpPower::new(a + i as f64 * CURVE_STEP_W))
        .collect::<Result<Vec<_>>>()?;
    let path = ctx.path("noise_curves.csv")?;
    io::write_table(&path, &curves.table(&powers))?;
    written.push(path);
    Ok(written)
}
