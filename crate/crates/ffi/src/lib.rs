//! C ABI for `ewa_oracle`.
//!
//! Dictionaries and weight vectors cross the boundary as opaque handles that
//! the caller releases with the matching `_free` function. Every fallible
//! function returns an [`EwaStatus`]; on failure a description is available
//! from [`ewa_last_error_message`] on the same thread. Results are written
//! through out-pointers. Matrices are row-major `m x n` arrays of doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ewa_oracle::cli::{execute, SubcommandKind};
use ewa_oracle::report::Format;
use ewa_oracle::rng::{threads_from_env, with_threads};
use ewa_oracle::{
    Dictionary, Error, NoiseModel, SignalVector, SupportDiameter, WeightVector,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwaStatus {
    Ok = 0,
    InvalidInput = 1,
    DimensionMismatch = 2,
    Unsupported = 3,
    NullPointer = 4,
    /// The operation ran but a verdict in its report failed.
    VerificationFailed = 5,
    Panic = 6,
}

/// Finite dictionary of atoms in `R^n`.
pub struct EwaDictionary {
    inner: Dictionary,
}

/// Probability vector on the dictionary indices.
pub struct EwaWeights {
    inner: WeightVector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: EwaStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidInput(_) => EwaStatus::InvalidInput,
            Error::DimensionMismatch { .. } => EwaStatus::DimensionMismatch,
            Error::Unsupported(_) => EwaStatus::Unsupported,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn failure(status: EwaStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn call(f: impl FnOnce() -> Result<EwaStatus, Failure>) -> EwaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(fail)) => {
            set_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_error("internal panic");
            EwaStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(failure(EwaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn reference<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| failure(EwaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(failure(EwaStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_vector(out: *mut f64, len: usize, values: &[f64]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(failure(EwaStatus::NullPointer, "output buffer is null"));
    }
    if len != values.len() {
        return Err(Error::DimensionMismatch {
            what: "output buffer",
            expected: values.len(),
            found: len,
        }
        .into());
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, len);
    Ok(())
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(failure(EwaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| failure(EwaStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn signal(ptr: *const f64, n: usize, what: &str) -> Result<SignalVector, Failure> {
    Ok(SignalVector::new(slice(ptr, n, what)?.to_vec())?)
}

fn noise_from_json(text: &str) -> Result<NoiseModel, Failure> {
    let model: NoiseModel = serde_json::from_str(text)
        .map_err(|e| failure(EwaStatus::InvalidInput, format!("noise: {e}")))?;
    model.validate()?;
    Ok(model)
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ewa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ewa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dictionary from `m` rows of `n` doubles.
///
/// # Safety
/// `data` must point to `m * n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_dictionary_new(
    data: *const f64,
    m: usize,
    n: usize,
    out: *mut *mut EwaDictionary,
) -> EwaStatus {
    call(|| {
        let len = m
            .checked_mul(n)
            .ok_or_else(|| failure(EwaStatus::InvalidInput, "m * n overflows"))?;
        let flat = slice(data, len, "data")?;
        let rows = if n == 0 { vec![Vec::new(); m] } else { flat.chunks(n).map(<[f64]>::to_vec).collect() };
        let inner = Dictionary::from_rows(rows)?;
        write(out, Box::into_raw(Box::new(EwaDictionary { inner })), "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// # Safety
/// `dict` must be NULL or a handle from [`ewa_dictionary_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ewa_dictionary_free(dict: *mut EwaDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Number of atoms, or 0 for NULL.
///
/// # Safety
/// `dict` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewa_dictionary_len(dict: *const EwaDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.inner.len())
}

/// Dimension of the atoms, or 0 for NULL.
///
/// # Safety
/// `dict` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewa_dictionary_dim(dict: *const EwaDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.inner.dim())
}

/// Largest coordinate-wise spread of the atoms.
///
/// # Safety
/// `dict` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_dictionary_sup_diameter(dict: *const EwaDictionary, out: *mut f64) -> EwaStatus {
    call(|| {
        let d = reference(dict, "dict")?;
        write(out, ewa_oracle::sup_diameter(&d.inner).value(), "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// Validated probability vector (nonnegative, sum 1 within 1e-12).
///
/// # Safety
/// `weights` must point to `m` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_weights_new(weights: *const f64, m: usize, out: *mut *mut EwaWeights) -> EwaStatus {
    call(|| {
        let inner = WeightVector::new(slice(weights, m, "weights")?.to_vec())?;
        write(out, Box::into_raw(Box::new(EwaWeights { inner })), "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// Uniform weights on `m` atoms.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_weights_uniform(m: usize, out: *mut *mut EwaWeights) -> EwaStatus {
    call(|| {
        let inner = WeightVector::uniform(m)?;
        write(out, Box::into_raw(Box::new(EwaWeights { inner })), "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// Point mass on atom `j` of `m`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_weights_dirac(m: usize, j: usize, out: *mut *mut EwaWeights) -> EwaStatus {
    call(|| {
        let inner = WeightVector::dirac(m, j)?;
        write(out, Box::into_raw(Box::new(EwaWeights { inner })), "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// # Safety
/// `w` must be NULL or a weights handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ewa_weights_free(w: *mut EwaWeights) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Number of weights, or 0 for NULL.
///
/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewa_weights_len(w: *const EwaWeights) -> usize {
    w.as_ref().map_or(0, |w| w.inner.len())
}

/// Copies the weights into `out`, which must hold exactly `len` doubles.
///
/// # Safety
/// `w` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ewa_weights_copy(w: *const EwaWeights, out: *mut f64, len: usize) -> EwaStatus {
    call(|| {
        let w = reference(w, "weights")?;
        write_vector(out, len, w.inner.weights())?;
        Ok(EwaStatus::Ok)
    })
}

/// Posterior weights of the observation `y` (length `n`) at temperature
/// `beta`; `beta = INFINITY` returns the prior.
///
/// # Safety
/// Handles must be live, `y` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_posterior_weights(
    dict: *const EwaDictionary,
    y: *const f64,
    n: usize,
    prior: *const EwaWeights,
    beta: f64,
    out: *mut *mut EwaWeights,
) -> EwaStatus {
    call(|| {
        let d = reference(dict, "dict")?;
        let p = reference(prior, "prior")?;
        let post = ewa_oracle::posterior_weights(&signal(y, n, "y")?, &d.inner, &p.inner, beta)?;
        write(out, Box::into_raw(Box::new(EwaWeights { inner: post.weights })), "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// Weighted average of the atoms, written to `out` (length `n`).
///
/// # Safety
/// Handles must be live and `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ewa_aggregate(
    dict: *const EwaDictionary,
    weights: *const EwaWeights,
    out: *mut f64,
    n: usize,
) -> EwaStatus {
    call(|| {
        let d = reference(dict, "dict")?;
        let w = reference(weights, "weights")?;
        let est = ewa_oracle::aggregate(&d.inner, &w.inner)?;
        write_vector(out, n, est.as_slice())?;
        Ok(EwaStatus::Ok)
    })
}

/// EWA estimate of the observation `y`, written to `out`; both have length `n`.
///
/// # Safety
/// Handles must be live; `y` and `out` must point to `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn ewa_estimate(
    dict: *const EwaDictionary,
    y: *const f64,
    prior: *const EwaWeights,
    beta: f64,
    out: *mut f64,
    n: usize,
) -> EwaStatus {
    call(|| {
        let d = reference(dict, "dict")?;
        let p = reference(prior, "prior")?;
        let (est, _) = ewa_oracle::ewa_estimate(&signal(y, n, "y")?, &d.inner, &p.inner, beta)?;
        write_vector(out, n, est.as_slice())?;
        Ok(EwaStatus::Ok)
    })
}

/// `sum_j w_j ||theta_j - mean||^2`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_posterior_variance(
    dict: *const EwaDictionary,
    weights: *const EwaWeights,
    out: *mut f64,
) -> EwaStatus {
    call(|| {
        let d = reference(dict, "dict")?;
        let w = reference(weights, "weights")?;
        write(out, ewa_oracle::posterior_variance(&d.inner, &w.inner)?, "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// `KL(p || q)`; `INFINITY` when `p` charges an atom `q` does not.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_kl_divergence(p: *const EwaWeights, q: *const EwaWeights, out: *mut f64) -> EwaStatus {
    call(|| {
        let p = reference(p, "p")?;
        let q = reference(q, "q")?;
        write(out, ewa_oracle::kl_divergence(&p.inner, &q.inner)?, "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// `sum_j w_j ||y - theta_j||^2 + beta KL(w || prior)`.
///
/// # Safety
/// Handles must be live, `y` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_gibbs_objective(
    weights: *const EwaWeights,
    y: *const f64,
    n: usize,
    dict: *const EwaDictionary,
    prior: *const EwaWeights,
    beta: f64,
    out: *mut f64,
) -> EwaStatus {
    call(|| {
        let w = reference(weights, "weights")?;
        let d = reference(dict, "dict")?;
        let p = reference(prior, "prior")?;
        let g = ewa_oracle::gibbs_objective(&w.inner, &signal(y, n, "y")?, &d.inner, &p.inner, beta)?;
        write(out, g, "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// `min_j ||theta_j - truth||^2 + beta log(1 / prior_j)`.
///
/// # Safety
/// Handles must be live, `truth` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_oracle_bound_finite(
    dict: *const EwaDictionary,
    truth: *const f64,
    n: usize,
    prior: *const EwaWeights,
    beta: f64,
    out: *mut f64,
) -> EwaStatus {
    call(|| {
        let d = reference(dict, "dict")?;
        let p = reference(prior, "prior")?;
        let b = ewa_oracle::oracle_bound_finite(&d.inner, &signal(truth, n, "truth")?, &p.inner, beta)?;
        write(out, b, "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// `-beta log sum_j prior_j exp(-||theta_j - truth||^2 / beta)`.
///
/// # Safety
/// Handles must be live, `truth` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_oracle_bound_gibbs(
    dict: *const EwaDictionary,
    truth: *const f64,
    n: usize,
    prior: *const EwaWeights,
    beta: f64,
    out: *mut f64,
) -> EwaStatus {
    call(|| {
        let d = reference(dict, "dict")?;
        let p = reference(prior, "prior")?;
        let b = ewa_oracle::oracle_bound_gibbs(&d.inner, &signal(truth, n, "truth")?, &p.inner, beta)?;
        write(out, b, "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// Smallest `beta` with a vanishing variance penalty for the noise law given
/// as JSON (`{"family": ..., "params": {...}}`) and support diameter `d0`.
///
/// # Safety
/// `noise_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_beta_threshold(noise_json: *const c_char, d0: f64, out: *mut f64) -> EwaStatus {
    call(|| {
        let model = noise_from_json(string(noise_json, "noise_json")?)?;
        let d0 = SupportDiameter::new(d0)?;
        write(out, ewa_oracle::beta_threshold(&ewa_oracle::profile_for(&model), d0), "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// Multiplier of the expected posterior variance in the risk bound at `beta`.
///
/// # Safety
/// `noise_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_variance_penalty_coefficient(
    noise_json: *const c_char,
    beta: f64,
    d0: f64,
    out: *mut f64,
) -> EwaStatus {
    call(|| {
        let model = noise_from_json(string(noise_json, "noise_json")?)?;
        let d0 = SupportDiameter::new(d0)?;
        let c = ewa_oracle::variance_penalty_coefficient(beta, &ewa_oracle::profile_for(&model), d0)?;
        write(out, c, "out")?;
        Ok(EwaStatus::Ok)
    })
}

/// Runs a command-line subcommand (`"simulate"`, `"certify"`,
/// `"verify-coupling"`, `"verify-bernstein"`, `"dv-check"`, `"oracle-bound"`)
/// on a JSON config and stores the JSON report in `*out`. `seed` may be NULL
/// to keep the config's seed. Returns `EWA_STATUS_VERIFICATION_FAILED` with
/// the report still stored when a verdict fails. Release the report with
/// [`ewa_string_free`].
///
/// # Safety
/// Strings must be NUL-terminated, `seed` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ewa_run_json(
    subcommand: *const c_char,
    config_json: *const c_char,
    seed: *const u64,
    out: *mut *mut c_char,
) -> EwaStatus {
    call(|| {
        if out.is_null() {
            return Err(failure(EwaStatus::NullPointer, "out is null"));
        }
        let kind: SubcommandKind = string(subcommand, "subcommand")?.parse()?;
        let config = string(config_json, "config_json")?;
        let seed = seed.as_ref().copied();
        let threads = threads_from_env()?;
        let outcome = with_threads(threads, || execute(kind, config, seed, Format::Json))?;
        let text = CString::new(outcome.text).map_err(|_| failure(EwaStatus::InvalidInput, "report contains NUL"))?;
        out.write(text.into_raw());
        Ok(if outcome.passed {
            EwaStatus::Ok
        } else {
            EwaStatus::VerificationFailed
        })
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer returned through [`ewa_run_json`].
#[no_mangle]
pub unsafe extern "C" fn ewa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
