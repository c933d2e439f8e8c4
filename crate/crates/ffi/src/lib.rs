//! C ABI for the pdegp library.
//!
//! Conventions:
//! - Handles (`PdegpDataset`, `PdegpFitResult`) are opaque pointers created
//!   and destroyed by this library; pass each to its `_free` function
//!   exactly once.
//! - Every fallible function returns a [`PdegpStatus`]; on failure,
//!   [`pdegp_last_error_message`] returns a thread-local, NUL-terminated
//!   description valid until the next failing call on the same thread.
//! - Parameter vectors are length-6 arrays in the fixed order
//!   D, alpha, beta, sigma_y2, theta_t, theta_x.
//! - All pointers must be valid for the stated lengths; NULL where a value
//!   is required yields `PDEGP_STATUS_NULL_POINTER`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use pdegp::data::{
    generate_simulation, load_dataset, load_dataset_with_noise_default, save_dataset,
    ChannelSelection, Dataset, PointSpec, SimulationSpec,
};
use pdegp::gp::{GpModel, PriorSet};
use pdegp::hmc::{run_chain, Chain, HmcConfig, PosteriorSummary};
use pdegp::kernels::{Channel, Params, Point, PARAM_NAMES};

/// Result codes mirroring the library's error classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdegpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    IllConditioned = 4,
    ParseError = 5,
    ValidationError = 6,
    AdaptationFailure = 7,
    IoError = 8,
    Panic = 9,
}

/// Which channels a generated dataset contains.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdegpChannels {
    Both = 0,
    YOnly = 1,
    FOnly = 2,
}

/// Prediction channel selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdegpChannel {
    Y = 0,
    F = 1,
}

/// Options for [`pdegp_dataset_generate`]: `n_locations` points uniform over
/// the rectangle, one row per selected channel per location, noise standard
/// deviation `sigma0`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PdegpSimulationOptions {
    pub n_locations: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub sigma0: f64,
    pub seed: u64,
    pub channels: PdegpChannels,
}

/// Options for [`pdegp_fit`]. `sampled[i] != 0` marks parameter `i` as
/// inferred; frozen parameters stay at `init[i]`. Priors are flat on the
/// log scale.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PdegpFitOptions {
    pub n_warmup: usize,
    pub n_samples: usize,
    pub leapfrog_steps: usize,
    pub step_size: f64,
    pub target_accept: f64,
    pub seed: u64,
    pub sampled: [u8; 6],
    pub init: [f64; 6],
}

/// Opaque dataset handle.
pub struct PdegpDataset {
    inner: Dataset,
}

/// Opaque fit-result handle: posterior summary plus the raw chain.
pub struct PdegpFitResult {
    summary: PosteriorSummary,
    chain: Chain,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &pdegp::Error) -> PdegpStatus {
    use pdegp::Error::*;
    match err {
        InvalidInput(_) => PdegpStatus::InvalidInput,
        InvalidConfig(_) => PdegpStatus::InvalidConfig,
        IllConditionedKernel { .. } | NegativeVariance { .. } => PdegpStatus::IllConditioned,
        Parse { .. } => PdegpStatus::ParseError,
        Validation(_) => PdegpStatus::ValidationError,
        AdaptationFailure(_) => PdegpStatus::AdaptationFailure,
        Io(_) => PdegpStatus::IoError,
    }
}

fn fail(err: &pdegp::Error) -> PdegpStatus {
    set_error(&err.to_string());
    status_of(err)
}

// Run `f` with panics converted to a status code, so unwinding never
// crosses the FFI boundary.
fn guarded<F: FnOnce() -> PdegpStatus>(f: F) -> PdegpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            PdegpStatus::Panic
        }
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, PdegpStatus> {
    if ptr.is_null() {
        set_error("path is NULL");
        return Err(PdegpStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(PdegpStatus::InvalidInput)
        }
    }
}

unsafe fn params_from(ptr: *const f64) -> Result<Params, PdegpStatus> {
    if ptr.is_null() {
        set_error("params is NULL");
        return Err(PdegpStatus::NullPointer);
    }
    let raw: [f64; 6] = std::slice::from_raw_parts(ptr, 6).try_into().unwrap();
    Params::from_array(raw).map_err(|e| fail(&e))
}

fn model_of(ds: &Dataset) -> Result<GpModel, PdegpStatus> {
    let (obs, noise) = ds.to_observations().map_err(|e| fail(&e))?;
    GpModel::new(obs, noise).map_err(|e| fail(&e))
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pdegp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Name of parameter `index` (0..6) in the canonical order, or NULL.
#[no_mangle]
pub extern "C" fn pdegp_param_name(index: usize) -> *const c_char {
    const NAMES: [&[u8]; 6] = [
        b"D\0",
        b"alpha\0",
        b"beta\0",
        b"sigma_y2\0",
        b"theta_t\0",
        b"theta_x\0",
    ];
    debug_assert_eq!(PARAM_NAMES.len(), NAMES.len());
    if index < NAMES.len() {
        NAMES[index].as_ptr().cast()
    } else {
        std::ptr::null()
    }
}

/// Load a dataset CSV (header `x,t,channel,value,noise_variance`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdegp_dataset_load(
    path: *const c_char,
    out: *mut *mut PdegpDataset,
) -> PdegpStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is NULL");
            return PdegpStatus::NullPointer;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_dataset(&path) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(PdegpDataset { inner: ds }));
                PdegpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Like [`pdegp_dataset_load`] for files without a noise column; every row
/// gets `noise_variance`.
///
/// # Safety
/// Same contract as [`pdegp_dataset_load`].
#[no_mangle]
pub unsafe extern "C" fn pdegp_dataset_load_with_noise(
    path: *const c_char,
    noise_variance: f64,
    out: *mut *mut PdegpDataset,
) -> PdegpStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is NULL");
            return PdegpStatus::NullPointer;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_dataset_with_noise_default(&path, noise_variance) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(PdegpDataset { inner: ds }));
                PdegpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Generate the trigonometric simulation dataset.
///
/// # Safety
/// `options` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pdegp_dataset_generate(
    options: *const PdegpSimulationOptions,
    out: *mut *mut PdegpDataset,
) -> PdegpStatus {
    guarded(|| {
        if options.is_null() || out.is_null() {
            set_error("options or out is NULL");
            return PdegpStatus::NullPointer;
        }
        let o = &*options;
        let spec = SimulationSpec {
            points: PointSpec::RandomUniform {
                n_locations: o.n_locations,
                x_range: (o.x_min, o.x_max),
                t_range: (o.t_min, o.t_max),
            },
            channels: match o.channels {
                PdegpChannels::Both => ChannelSelection::Both,
                PdegpChannels::YOnly => ChannelSelection::YOnly,
                PdegpChannels::FOnly => ChannelSelection::FOnly,
            },
            sigma0: o.sigma0,
            seed: o.seed,
        };
        match generate_simulation(&spec) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(PdegpDataset { inner: ds }));
                PdegpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Write a dataset back to CSV.
///
/// # Safety
/// `ds` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pdegp_dataset_save(
    ds: *const PdegpDataset,
    path: *const c_char,
) -> PdegpStatus {
    guarded(|| {
        if ds.is_null() {
            set_error("dataset is NULL");
            return PdegpStatus::NullPointer;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_dataset(&(*ds).inner, &path) {
            Ok(()) => PdegpStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_dataset_len(ds: *const PdegpDataset) -> usize {
    if ds.is_null() {
        0
    } else {
        (*ds).inner.rows.len()
    }
}

/// Destroy a dataset handle.
///
/// # Safety
/// `ds` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pdegp_dataset_free(ds: *mut PdegpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Log marginal likelihood of the dataset at the given parameters
/// (length-6 array).
///
/// # Safety
/// `ds` live handle, `params` length-6 array, `out` valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdegp_log_marginal_likelihood(
    ds: *const PdegpDataset,
    params: *const f64,
    out: *mut f64,
) -> PdegpStatus {
    guarded(|| {
        if ds.is_null() || out.is_null() {
            set_error("dataset or out is NULL");
            return PdegpStatus::NullPointer;
        }
        let params = match params_from(params) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let model = match model_of(&(*ds).inner) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match model.log_marginal_likelihood(&params) {
            Ok(v) => {
                *out = v;
                PdegpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Gradient of the log marginal likelihood over the six parameters.
///
/// # Safety
/// `out_grad` must point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pdegp_grad_log_marginal_likelihood(
    ds: *const PdegpDataset,
    params: *const f64,
    out_grad: *mut f64,
) -> PdegpStatus {
    guarded(|| {
        if ds.is_null() || out_grad.is_null() {
            set_error("dataset or out_grad is NULL");
            return PdegpStatus::NullPointer;
        }
        let params = match params_from(params) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let model = match model_of(&(*ds).inner) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match model.grad_log_marginal_likelihood(&params) {
            Ok(g) => {
                std::ptr::copy_nonoverlapping(g.as_ptr(), out_grad, 6);
                PdegpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Fill `out` with the default fit options (1000 warmup, 7000 samples,
/// L = 20, step 0.1, target acceptance 0.8, all parameters sampled from 1).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_options_default(out: *mut PdegpFitOptions) -> PdegpStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is NULL");
            return PdegpStatus::NullPointer;
        }
        let d = HmcConfig::default();
        *out = PdegpFitOptions {
            n_warmup: d.n_warmup,
            n_samples: d.n_samples,
            leapfrog_steps: d.leapfrog_steps,
            step_size: d.step_size,
            target_accept: d.target_accept,
            seed: d.seed,
            sampled: [1; 6],
            init: [1.0; 6],
        };
        PdegpStatus::Ok
    })
}

/// Run the HMC sampler on a dataset. Flat-on-log priors; frozen parameters
/// stay at their `init` values.
///
/// # Safety
/// `ds` live handle, `options` valid, `out` valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit(
    ds: *const PdegpDataset,
    options: *const PdegpFitOptions,
    out: *mut *mut PdegpFitResult,
) -> PdegpStatus {
    guarded(|| {
        if ds.is_null() || options.is_null() || out.is_null() {
            set_error("dataset, options or out is NULL");
            return PdegpStatus::NullPointer;
        }
        let o = &*options;
        let model = match model_of(&(*ds).inner) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let init = match Params::from_array(o.init) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let cfg = HmcConfig {
            n_warmup: o.n_warmup,
            n_samples: o.n_samples,
            leapfrog_steps: o.leapfrog_steps,
            step_size: o.step_size,
            mass_diag: None,
            target_accept: o.target_accept,
            seed: o.seed,
            sampled: std::array::from_fn(|i| o.sampled[i] != 0),
            jitter_steps: true,
        };
        match run_chain(&model, &PriorSet::flat(), &init, &cfg) {
            Ok((chain, summary)) => {
                *out = Box::into_raw(Box::new(PdegpFitResult { summary, chain }));
                PdegpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Posterior mean of parameter `index` (NaN for a bad index or NULL).
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_mean(r: *const PdegpFitResult, index: usize) -> f64 {
    if r.is_null() || index >= 6 {
        return f64::NAN;
    }
    (*r).summary.mean[index]
}

/// Posterior standard deviation of parameter `index`.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_sd(r: *const PdegpFitResult, index: usize) -> f64 {
    if r.is_null() || index >= 6 {
        return f64::NAN;
    }
    (*r).summary.sd[index]
}

/// Effective sample size of parameter `index`.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_ess(r: *const PdegpFitResult, index: usize) -> f64 {
    if r.is_null() || index >= 6 {
        return f64::NAN;
    }
    (*r).summary.ess[index]
}

/// Posterior correlation between parameters `i` and `j`.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_correlation(
    r: *const PdegpFitResult,
    i: usize,
    j: usize,
) -> f64 {
    if r.is_null() || i >= 6 || j >= 6 {
        return f64::NAN;
    }
    (*r).summary.correlation[i][j]
}

/// Acceptance rate of the chain.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_acceptance_rate(r: *const PdegpFitResult) -> f64 {
    if r.is_null() {
        return f64::NAN;
    }
    (*r).summary.acceptance_rate
}

/// Number of divergent trajectories after warmup.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_divergences(r: *const PdegpFitResult) -> usize {
    if r.is_null() {
        return 0;
    }
    (*r).summary.divergences
}

/// Number of post-warmup draws.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_len(r: *const PdegpFitResult) -> usize {
    if r.is_null() {
        return 0;
    }
    (*r).chain.draws.len()
}

/// Copy up to `len` posterior draws of parameter `param_index` into `out`.
/// Returns the number of values written.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_draws(
    r: *const PdegpFitResult,
    param_index: usize,
    out: *mut f64,
    len: usize,
) -> usize {
    if r.is_null() || out.is_null() || param_index >= 6 {
        return 0;
    }
    let draws = &(*r).chain.draws;
    let n = draws.len().min(len);
    for (k, row) in draws.iter().take(n).enumerate() {
        *out.add(k) = row[param_index];
    }
    n
}

/// Destroy a fit-result handle.
///
/// # Safety
/// `r` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pdegp_fit_result_free(r: *mut PdegpFitResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Posterior mean and variance of one channel on the `n_x` x `n_t` grid
/// spanned by `xs` and `ts`. Output buffers are row-major `n_x * n_t`.
/// When the dataset holds only F rows and `channel` is Y, this is the
/// probabilistic PDE solve.
///
/// # Safety
/// `xs`/`ts` must point to `n_x`/`n_t` doubles; `out_mean` and
/// `out_variance` to `n_x * n_t` writable doubles each.
#[no_mangle]
pub unsafe extern "C" fn pdegp_predict(
    ds: *const PdegpDataset,
    params: *const f64,
    channel: PdegpChannel,
    xs: *const f64,
    n_x: usize,
    ts: *const f64,
    n_t: usize,
    out_mean: *mut f64,
    out_variance: *mut f64,
) -> PdegpStatus {
    guarded(|| {
        if ds.is_null() || xs.is_null() || ts.is_null() || out_mean.is_null()
            || out_variance.is_null()
        {
            set_error("NULL pointer argument");
            return PdegpStatus::NullPointer;
        }
        if n_x == 0 || n_t == 0 {
            set_error("empty prediction grid");
            return PdegpStatus::InvalidInput;
        }
        let params = match params_from(params) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let model = match model_of(&(*ds).inner) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let xs = std::slice::from_raw_parts(xs, n_x);
        let ts = std::slice::from_raw_parts(ts, n_t);
        let ch = match channel {
            PdegpChannel::Y => Channel::Y,
            PdegpChannel::F => Channel::F,
        };
        let points: Vec<Point> = xs
            .iter()
            .flat_map(|&x| ts.iter().map(move |&t| Point::new(x, t)))
            .collect();
        let result = if ch == Channel::Y && model.observations().points_y().is_empty() {
            model.predict_y_from_f(&params, &points)
        } else {
            let targets: Vec<(Point, Channel)> = points.iter().map(|&p| (p, ch)).collect();
            model.predict(&params, &targets)
        };
        match result {
            Ok(field) => {
                std::ptr::copy_nonoverlapping(field.mean.as_ptr(), out_mean, n_x * n_t);
                std::ptr::copy_nonoverlapping(field.variance.as_ptr(), out_variance, n_x * n_t);
                PdegpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
