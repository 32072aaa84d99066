//! C ABI for the edgecast library.
//!
//! Every fallible function returns an [`EcStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and
//! can be read with [`ec_last_error_message`]. Handles (`EcProblem`,
//! `EcAllocation`, `EcModel`) are opaque and must be released with their
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use edgecast::allocator::{self, AllocationProblem, AllocationResult, RadioParams, UserLink};
use edgecast::cache::{self, PredictionMatrix};
use edgecast::channel::{Fading, LinkProfile, PathLoss};
use edgecast::delay::{self, DelayConstraint};
use edgecast::features::FeatureVector;
use edgecast::model::{ModelWeights, WeightsFile};
use edgecast::queue::{self, QueueOptions};
use edgecast::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcFading {
    Rayleigh = 0,
    Deterministic = 1,
}

/// One downlink: bandwidth, transmit power, distance and the shared radio
/// parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EcLink {
    pub bandwidth_hz: f64,
    pub power_w: f64,
    pub distance_m: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    pub block_s: f64,
    pub reference_loss_db: f64,
    pub path_loss_exponent: f64,
    pub fading: EcFading,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EcConstraint {
    pub target_s: f64,
    pub violation_prob: f64,
    pub cloud_delay_s: f64,
    /// Nonzero when the requested video is in the edge cache.
    pub cached: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcScheme {
    DoubleBisection = 0,
    IdenticalBandwidth = 1,
}

/// Opaque allocation problem under construction.
pub struct EcProblem(AllocationProblem);

/// Opaque allocation result.
pub struct EcAllocation(AllocationResult);

/// Opaque interest model.
pub struct EcModel(ModelWeights);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EcStatus {
    match e {
        Error::Infeasible(_) | Error::Stability { .. } => EcStatus::Infeasible,
        Error::Quadrature { .. } | Error::Divergence { .. } | Error::UndefinedMetric(_) | Error::Internal(_) => {
            EcStatus::Numerical
        }
        Error::Io { .. } | Error::Parse { .. } | Error::Format(_) | Error::Integrity(_) => EcStatus::Io,
        Error::Domain(_) | Error::DimensionMismatch { .. } | Error::Config { .. } => EcStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, recording any error or panic for [`ec_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EcStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            EcStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            EcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn fading(f: EcFading) -> Fading {
    match f {
        EcFading::Rayleigh => Fading::Rayleigh,
        EcFading::Deterministic => Fading::Deterministic,
    }
}

fn link_profile(l: &EcLink) -> Result<LinkProfile, Error> {
    let pl = PathLoss {
        reference_loss_db: l.reference_loss_db,
        exponent: l.path_loss_exponent,
    };
    Ok(LinkProfile::new(l.bandwidth_hz, l.power_w, l.distance_m, l.noise_psd, l.block_s, &pl)?.with_fading(fading(l.fading)))
}

fn constraint(c: &EcConstraint) -> DelayConstraint {
    DelayConstraint::new(c.target_s, c.violation_prob, c.cloud_delay_s, c.cached != 0)
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `E[exp(-theta R T)]` of the link's per-block capacity.
///
/// # Safety
/// `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ec_neg_moment(link: *const EcLink, theta: f64, out: *mut f64) -> EcStatus {
    guard(|| {
        let l = link_profile(deref(link, "link")?)?;
        *deref_mut(out, "out")? = l.neg_moment(theta)?;
        Ok(())
    })
}

/// Mean capacity `E[R]` in bit/s.
///
/// # Safety
/// `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ec_mean_capacity(link: *const EcLink, out: *mut f64) -> EcStatus {
    guard(|| {
        let l = link_profile(deref(link, "link")?)?;
        *deref_mut(out, "out")? = l.mean_capacity()?;
        Ok(())
    })
}

/// Effective capacity `-ln E[exp(-theta R T)] / (theta T)` in bit/s.
///
/// # Safety
/// `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ec_max_coding_rate(link: *const EcLink, theta: f64, out: *mut f64) -> EcStatus {
    guard(|| {
        let l = link_profile(deref(link, "link")?)?;
        *deref_mut(out, "out")? = delay::max_coding_rate(&l, theta)?;
        Ok(())
    })
}

/// Largest coding rate whose delay bound meets the constraint.
///
/// # Safety
/// `link`, `constraint` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ec_calibrated_rate(link: *const EcLink, constraint: *const EcConstraint, out: *mut f64) -> EcStatus {
    guard(|| {
        let l = link_profile(deref(link, "link")?)?;
        let c = self::constraint(deref(constraint, "constraint")?);
        *deref_mut(out, "out")? = delay::calibrated_rate(&l, &c)?;
        Ok(())
    })
}

/// Upper bound on the delay violation probability at coding rate `rate`.
///
/// # Safety
/// `link`, `constraint` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ec_dvp_bound(
    link: *const EcLink,
    constraint: *const EcConstraint,
    rate: f64,
    out: *mut f64,
) -> EcStatus {
    guard(|| {
        let l = link_profile(deref(link, "link")?)?;
        let c = self::constraint(deref(constraint, "constraint")?);
        *deref_mut(out, "out")? = delay::dvp_bound(&l, &c, rate)?;
        Ok(())
    })
}

/// Simulates the link's queue at `rate` and reports the fraction of arrival
/// blocks delayed more than `budget_blocks`, with its standard error.
///
/// # Safety
/// `link`, `probability` and `std_error` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ec_simulate_queue(
    link: *const EcLink,
    rate: f64,
    blocks: usize,
    warmup: usize,
    seed: u64,
    budget_blocks: u32,
    probability: *mut f64,
    std_error: *mut f64,
) -> EcStatus {
    guard(|| {
        let l = link_profile(deref(link, "link")?)?;
        let p = deref_mut(probability, "probability")?;
        let se = deref_mut(std_error, "std_error")?;
        let trace = queue::simulate_queue(&l, rate, &QueueOptions::new(blocks, warmup), seed)?;
        let est = trace.dvp(budget_blocks);
        *p = est.probability;
        *se = est.std_error;
        Ok(())
    })
}

/// Starts an empty allocation problem.
///
/// # Safety
/// `out` must be a valid pointer; the handle it receives must be released
/// with [`ec_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn ec_problem_new(
    total_bandwidth_hz: f64,
    noise_psd: f64,
    block_s: f64,
    reference_loss_db: f64,
    path_loss_exponent: f64,
    fading: EcFading,
    rate_tol: f64,
    band_tol: f64,
    out: *mut *mut EcProblem,
) -> EcStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let problem = AllocationProblem {
            users: Vec::new(),
            radio: RadioParams {
                noise_psd,
                block_s,
                path_loss: PathLoss {
                    reference_loss_db,
                    exponent: path_loss_exponent,
                },
                fading: self::fading(fading),
            },
            total_bandwidth_hz,
            rate_tol,
            band_tol,
        };
        *out = Box::into_raw(Box::new(EcProblem(problem)));
        Ok(())
    })
}

/// Appends a user to the problem.
///
/// # Safety
/// `problem` must come from [`ec_problem_new`]; `constraint` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ec_problem_add_user(
    problem: *mut EcProblem,
    distance_m: f64,
    power_w: f64,
    constraint: *const EcConstraint,
) -> EcStatus {
    guard(|| {
        let p = deref_mut(problem, "problem")?;
        let c = self::constraint(deref(constraint, "constraint")?);
        p.0.users.push(UserLink {
            distance_m,
            power_w,
            constraint: c,
        });
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`ec_problem_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ec_problem_free(problem: *mut EcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves the problem with the chosen scheme.
///
/// # Safety
/// `problem` must come from [`ec_problem_new`]; `out` must be valid. The
/// result must be released with [`ec_allocation_free`].
#[no_mangle]
pub unsafe extern "C" fn ec_allocate(problem: *const EcProblem, scheme: EcScheme, out: *mut *mut EcAllocation) -> EcStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        let out = deref_mut(out, "out")?;
        let r = match scheme {
            EcScheme::DoubleBisection => allocator::double_bisection(&p.0)?,
            EcScheme::IdenticalBandwidth => allocator::identical_bandwidth(&p.0)?,
        };
        *out = Box::into_raw(Box::new(EcAllocation(r)));
        Ok(())
    })
}

/// Common coding rate of the allocation.
///
/// # Safety
/// `alloc` must come from [`ec_allocate`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ec_allocation_rate(alloc: *const EcAllocation, out: *mut f64) -> EcStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(alloc, "alloc")?.0.rate;
        Ok(())
    })
}

/// Number of users in the allocation.
///
/// # Safety
/// `alloc` must come from [`ec_allocate`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ec_allocation_len(alloc: *const EcAllocation, out: *mut usize) -> EcStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(alloc, "alloc")?.0.bandwidths.len();
        Ok(())
    })
}

/// Copies per-user bandwidths and sustained rates into caller buffers of
/// length `len`, which must equal [`ec_allocation_len`]. Either buffer may
/// be NULL to skip it.
///
/// # Safety
/// Non-NULL buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ec_allocation_copy(
    alloc: *const EcAllocation,
    bandwidths: *mut f64,
    sustained_rates: *mut f64,
    len: usize,
) -> EcStatus {
    guard(|| {
        let a = &deref(alloc, "alloc")?.0;
        if len != a.bandwidths.len() {
            return Err(Error::DimensionMismatch {
                expected: a.bandwidths.len(),
                got: len,
            }
            .into());
        }
        if !bandwidths.is_null() {
            slice_mut(bandwidths, len, "bandwidths")?.copy_from_slice(&a.bandwidths);
        }
        if !sustained_rates.is_null() {
            slice_mut(sustained_rates, len, "sustained_rates")?.copy_from_slice(&a.sustained_rates);
        }
        Ok(())
    })
}

/// # Safety
/// `alloc` must come from [`ec_allocate`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ec_allocation_free(alloc: *mut EcAllocation) {
    if !alloc.is_null() {
        drop(Box::from_raw(alloc));
    }
}

/// Group interest score of each video from a row-major `users x videos`
/// prediction matrix and per-user similarity weights.
///
/// # Safety
/// `predictions` holds `users * videos` doubles, `similarity_weights` holds
/// `users`, `out_scores` holds `videos`.
#[no_mangle]
pub unsafe extern "C" fn ec_group_interest(
    predictions: *const f64,
    users: usize,
    videos: usize,
    similarity_weights: *const f64,
    delta: f64,
    out_scores: *mut f64,
) -> EcStatus {
    guard(|| {
        let total = users
            .checked_mul(videos)
            .ok_or_else(|| Error::Domain("matrix size overflows".into()))?;
        let preds = slice(predictions, total, "predictions")?;
        let a_si = slice(similarity_weights, users, "similarity_weights")?;
        let out = slice_mut(out_scores, videos, "out_scores")?;
        let m = PredictionMatrix::new((0..users as u32).collect(), (0..videos as u32).collect(), preds.to_vec())?;
        out.copy_from_slice(&cache::group_interest(&m, a_si, delta)?.pre);
        Ok(())
    })
}

/// Marks the `capacity` best-scored videos (ties to the lower id) with 1 in
/// `out_cached`, others with 0.
///
/// # Safety
/// `videos`, `scores` and `out_cached` each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ec_decide_cache(
    videos: *const u32,
    scores: *const f64,
    len: usize,
    capacity: usize,
    out_cached: *mut u8,
) -> EcStatus {
    guard(|| {
        let v = slice(videos, len, "videos")?;
        let s = slice(scores, len, "scores")?;
        let out = slice_mut(out_cached, len, "out_cached")?;
        let plan = cache::decide_cache(v, s, capacity)?;
        for (o, &c) in out.iter_mut().zip(&plan.cached) {
            *o = u8::from(c);
        }
        Ok(())
    })
}

/// Loads a weights file written by `edgecast train`.
///
/// # Safety
/// `path` is a NUL-terminated UTF-8 path; `out` must be valid. The handle
/// must be released with [`ec_model_free`].
#[no_mangle]
pub unsafe extern "C" fn ec_model_load(path: *const c_char, out: *mut *mut EcModel) -> EcStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::Domain("path is not UTF-8".into()))?;
        let file = WeightsFile::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(EcModel(file.weights)));
        Ok(())
    })
}

/// Input dimension of the model.
///
/// # Safety
/// `model` must come from [`ec_model_load`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ec_model_dim(model: *const EcModel, out: *mut usize) -> EcStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(model, "model")?.0.dim;
        Ok(())
    })
}

/// Predicted interest for one dense, already encoded feature vector.
///
/// # Safety
/// `x` holds `len` doubles; `model` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ec_model_predict(model: *const EcModel, x: *const f64, len: usize, out: *mut f64) -> EcStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let x = slice(x, len, "x")?;
        *deref_mut(out, "out")? = m.predict(&FeatureVector::from_dense(x.to_vec()))?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ec_model_load`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ec_model_free(model: *mut EcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
