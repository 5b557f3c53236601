//! C ABI over the `dfgnoise` model and estimators.
//!
//! Every function returns a [`DfgStatus`] and writes results through out
//! pointers. On failure the message is available from
//! [`dfg_last_error_message`] on the same thread. Handles are opaque and must
//! be released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dfgnoise::converter::{self, ConverterParams, Efficiency, PumpPower};
use dfgnoise::estimator::{self, FitResult, PowerSweep, SweepKind, SweepPoint};
use dfgnoise::photon::{self, MeasurementChain};
use dfgnoise::{spectral, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoMaximum = 3,
    InsufficientData = 4,
    RankDeficient = 5,
    NonConvergence = 6,
    FitFailure = 7,
    ModelViolation = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfgEfficiency {
    Internal = 0,
    External = 1,
}

impl From<DfgEfficiency> for Efficiency {
    fn from(e: DfgEfficiency) -> Self {
        match e {
            DfgEfficiency::Internal => Efficiency::Internal,
            DfgEfficiency::External => Efficiency::External,
        }
    }
}

/// Opaque converter parameter set.
pub struct DfgConverterParams {
    inner: ConverterParams,
}

/// Opaque fit result.
pub struct DfgFitResult {
    inner: FitResult,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DfgStatus {
    match err {
        Error::Domain { .. }
        | Error::Resolution { .. }
        | Error::NonPhysicalWidth { .. }
        | Error::Grid(_)
        | Error::Config(_) => DfgStatus::InvalidArgument,
        Error::NoMaximum => DfgStatus::NoMaximum,
        Error::InsufficientData(_) => DfgStatus::InsufficientData,
        Error::RankDeficient { .. } => DfgStatus::RankDeficient,
        Error::NonConvergence { .. } => DfgStatus::NonConvergence,
        Error::FitFailure(_) => DfgStatus::FitFailure,
        Error::ModelViolation { .. } => DfgStatus::ModelViolation,
        Error::Parse { .. } | Error::Io { .. } | Error::Json(_) => DfgStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DfgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DfgStatus::Ok
        }
        Ok(Err(Fail::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            DfgStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            DfgStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: caller guarantees `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or(Fail::Null(name))
}

fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: caller guarantees `p` is null or a live handle from this library.
    unsafe { p.as_ref() }.ok_or(Fail::Null(name))
}

fn array<'a>(p: *const f64, n: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    // SAFETY: caller guarantees `p` points to `n` readable doubles.
    Ok(unsafe { slice::from_raw_parts(p, n) })
}

/// Message for the last failed call on this thread, or NULL after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dfg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn dfg_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Creates a parameter set. `alpha_n` is in Hz/(W cm) measured in
/// `bandwidth_ref_hz`.
#[no_mangle]
pub extern "C" fn dfg_params_new(
    length_cm: f64,
    eta_max_int: f64,
    eta_max_ext: f64,
    eta_n: f64,
    alpha_n: f64,
    bandwidth_ref_hz: f64,
    out_params: *mut *mut DfgConverterParams,
) -> DfgStatus {
    guard(|| {
        let slot = out(out_params, "out_params")?;
        let inner = ConverterParams::new(length_cm, eta_max_int, eta_max_ext, eta_n, alpha_n, bandwidth_ref_hz)?;
        *slot = Box::into_raw(Box::new(DfgConverterParams { inner }));
        Ok(())
    })
}

/// Parameter set of the measured 4 cm device.
#[no_mangle]
pub extern "C" fn dfg_params_measured_device(out_params: *mut *mut DfgConverterParams) -> DfgStatus {
    guard(|| {
        *out(out_params, "out_params")? = Box::into_raw(Box::new(DfgConverterParams {
            inner: ConverterParams::device_defaults(),
        }));
        Ok(())
    })
}

/// Releases a parameter set; NULL is ignored.
#[no_mangle]
pub extern "C" fn dfg_params_free(params: *mut DfgConverterParams) {
    if !params.is_null() {
        // SAFETY: `params` came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(params) });
    }
}

fn with_params(
    params: *const DfgConverterParams,
    pump_w: f64,
    out_value: *mut f64,
    f: impl FnOnce(&ConverterParams, PumpPower) -> f64,
) -> DfgStatus {
    guard(|| {
        let p = handle(params, "params")?;
        let slot = out(out_value, "out_value")?;
        *slot = f(&p.inner, PumpPower::new(pump_w)?);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn dfg_efficiency(
    params: *const DfgConverterParams,
    which: DfgEfficiency,
    pump_w: f64,
    out_value: *mut f64,
) -> DfgStatus {
    with_params(params, pump_w, out_value, |c, p| converter::dfg_efficiency(c, which.into(), p))
}

#[no_mangle]
pub extern "C" fn dfg_dip_depth(params: *const DfgConverterParams, pump_w: f64, out_value: *mut f64) -> DfgStatus {
    with_params(params, pump_w, out_value, converter::dip_depth)
}

/// Telecom noise rate at the waveguide output, Hz.
#[no_mangle]
pub extern "C" fn dfg_telecom_noise_rate(
    params: *const DfgConverterParams,
    pump_w: f64,
    out_value: *mut f64,
) -> DfgStatus {
    with_params(params, pump_w, out_value, converter::telecom_noise_rate)
}

/// Visible (up-converted) noise rate, Hz.
#[no_mangle]
pub extern "C" fn dfg_visible_noise_rate(
    params: *const DfgConverterParams,
    pump_w: f64,
    out_value: *mut f64,
) -> DfgStatus {
    with_params(params, pump_w, out_value, converter::visible_noise_rate)
}

/// Pump power of maximum efficiency, W.
#[no_mangle]
pub extern "C" fn dfg_peak_pump_power(params: *const DfgConverterParams, out_value: *mut f64) -> DfgStatus {
    guard(|| {
        let p = handle(params, "params")?;
        let slot = out(out_value, "out_value")?;
        *slot = converter::peak_pump_power(&p.inner)?.watts();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn dfg_sfg_partner_wavelength(lambda_pump_nm: f64, lambda_tele_nm: f64, out_value: *mut f64) -> DfgStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = converter::sfg_partner_wavelength(lambda_pump_nm, lambda_tele_nm)?;
        Ok(())
    })
}

/// Noise photons per spectro-temporal mode, per W per cm.
#[no_mangle]
pub extern "C" fn dfg_photons_per_mode(alpha_n: f64, bandwidth_hz: f64, out_value: *mut f64) -> DfgStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = converter::photons_per_mode(alpha_n, bandwidth_hz)?;
        Ok(())
    })
}

/// Intrinsic width of a Gaussian line observed through a Gaussian filter.
#[no_mangle]
pub extern "C" fn dfg_deconvolve_gaussian(observed_fwhm: f64, filter_fwhm: f64, out_value: *mut f64) -> DfgStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = spectral::deconvolve_gaussian(observed_fwhm, filter_fwhm)?;
        Ok(())
    })
}

/// Poisson draw of detected counts for `true_rate` Hz at the waveguide
/// output seen through total transmission `transmission`.
#[no_mangle]
pub extern "C" fn dfg_simulate_counts(
    true_rate: f64,
    transmission: f64,
    dark_rate: f64,
    integration_time: f64,
    seed: u64,
    out_counts: *mut u64,
) -> DfgStatus {
    guard(|| {
        let slot = out(out_counts, "out_counts")?;
        let chain = MeasurementChain::new(vec![], transmission, dark_rate, integration_time)?;
        *slot = photon::simulate_counts(true_rate, &chain, seed)?.counts;
        Ok(())
    })
}

fn sweep(kind: SweepKind, pump: &[f64], value: &[f64], sigma: &[f64]) -> Result<PowerSweep, Fail> {
    if pump.len() != value.len() || pump.len() != sigma.len() {
        return Err(Error::InsufficientData("array lengths differ".into()).into());
    }
    let points = (0..pump.len())
        .map(|i| SweepPoint {
            pump_w: pump[i],
            value: value[i],
            sigma: sigma[i],
        })
        .collect();
    Ok(PowerSweep::new(kind, points)?)
}

/// Joint fit of internal and external efficiency sweeps with a shared
/// conversion parameter. Parameters: eta_max_int, eta_max_ext, eta_n.
///
/// On non-convergence the best point is still returned in `out_fit`
/// together with `DFG_STATUS_NON_CONVERGENCE`.
#[no_mangle]
pub extern "C" fn dfg_fit_efficiency(
    pump_int: *const f64,
    eta_int: *const f64,
    sigma_int: *const f64,
    n_int: usize,
    pump_ext: *const f64,
    eta_ext: *const f64,
    sigma_ext: *const f64,
    n_ext: usize,
    length_cm: f64,
    out_fit: *mut *mut DfgFitResult,
) -> DfgStatus {
    guard(|| {
        let slot = out(out_fit, "out_fit")?;
        *slot = ptr::null_mut();
        let int = sweep(
            SweepKind::EfficiencyInt,
            array(pump_int, n_int, "pump_int")?,
            array(eta_int, n_int, "eta_int")?,
            array(sigma_int, n_int, "sigma_int")?,
        )?;
        let ext = sweep(
            SweepKind::EfficiencyExt,
            array(pump_ext, n_ext, "pump_ext")?,
            array(eta_ext, n_ext, "eta_ext")?,
            array(sigma_ext, n_ext, "sigma_ext")?,
        )?;
        match estimator::fit_efficiency_shared(&int, &ext, length_cm) {
            Ok(fit) => {
                *slot = into_handle(fit);
                Ok(())
            }
            Err(Error::NonConvergence { best }) => {
                *slot = into_handle((*best).clone());
                Err(Error::NonConvergence { best }.into())
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// Linear fit `rate = alpha_n * L * P` over the first `n_fit` points.
#[no_mangle]
pub extern "C" fn dfg_fit_alpha_linear(
    pump_w: *const f64,
    rate_hz: *const f64,
    sigma_hz: *const f64,
    n: usize,
    n_fit: usize,
    length_cm: f64,
    out_fit: *mut *mut DfgFitResult,
) -> DfgStatus {
    guard(|| {
        let slot = out(out_fit, "out_fit")?;
        *slot = ptr::null_mut();
        let s = sweep(
            SweepKind::NoiseTeleDetuned,
            array(pump_w, n, "pump_w")?,
            array(rate_hz, n, "rate_hz")?,
            array(sigma_hz, n, "sigma_hz")?,
        )?;
        *slot = into_handle(estimator::fit_alpha_linear(&s, n_fit, length_cm)?);
        Ok(())
    })
}

fn into_handle(inner: FitResult) -> *mut DfgFitResult {
    let names = inner
        .names
        .iter()
        .map(|n| CString::new(n.as_str()).expect("parameter names have no NUL"))
        .collect();
    Box::into_raw(Box::new(DfgFitResult { inner, names }))
}

#[no_mangle]
pub extern "C" fn dfg_fit_result_free(fit: *mut DfgFitResult) {
    if !fit.is_null() {
        // SAFETY: `fit` came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Number of fitted parameters, 0 for NULL.
#[no_mangle]
pub extern "C" fn dfg_fit_result_len(fit: *const DfgFitResult) -> usize {
    // SAFETY: caller passes NULL or a live handle.
    unsafe { fit.as_ref() }.map_or(0, |f| f.inner.values.len())
}

/// Name of parameter `index`, owned by the handle; NULL when out of range.
#[no_mangle]
pub extern "C" fn dfg_fit_result_name(fit: *const DfgFitResult, index: usize) -> *const c_char {
    // SAFETY: caller passes NULL or a live handle.
    unsafe { fit.as_ref() }
        .and_then(|f| f.names.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Value and 1-sigma uncertainty of parameter `index`.
#[no_mangle]
pub extern "C" fn dfg_fit_result_parameter(
    fit: *const DfgFitResult,
    index: usize,
    out_value: *mut f64,
    out_sigma: *mut f64,
) -> DfgStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let v = out(out_value, "out_value")?;
        let s = out(out_sigma, "out_sigma")?;
        if index >= f.inner.values.len() {
            return Err(Error::Domain {
                name: "index",
                value: index as f64,
                constraint: "must be < number of parameters",
            }
            .into());
        }
        *v = f.inner.values[index];
        *s = f.inner.sigma(index);
        Ok(())
    })
}

/// Covariance element `(row, col)`.
#[no_mangle]
pub extern "C" fn dfg_fit_result_covariance(
    fit: *const DfgFitResult,
    row: usize,
    col: usize,
    out_value: *mut f64,
) -> DfgStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let v = out(out_value, "out_value")?;
        let n = f.inner.values.len();
        if row >= n || col >= n {
            return Err(Error::Domain {
                name: "row/col",
                value: row.max(col) as f64,
                constraint: "must be < number of parameters",
            }
            .into());
        }
        *v = f.inner.covariance[row][col];
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn dfg_fit_result_chi2_reduced(fit: *const DfgFitResult, out_value: *mut f64) -> DfgStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        *out(out_value, "out_value")? = f.inner.chi2_reduced;
        Ok(())
    })
}
