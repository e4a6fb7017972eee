//! C ABI over the core library.
//!
//! Every fallible call returns an [`EgStatus`] and writes results through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`eg_last_error_message`]. Handles are opaque and released with their
//! `_free` function; passing NULL to a `_free` function is a no-op.

use extreme_gibbs::exceedance::{self, ExceedanceApprox, ExceedanceOptions};
use extreme_gibbs::gibbs::{self, FastGrowthParams};
use extreme_gibbs::oracle::{ConditionalOracle, GridDensity, OracleOptions};
use extreme_gibbs::tilt::{self, TiltParams};
use extreme_gibbs::{DensityModel, Error, ModelSpec};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Numeric = 4,
    Range = 5,
    Resource = 6,
    Model = 7,
    Io = 8,
    Panic = 9,
}

/// Tilt parameters and tilted moments.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EgTilt {
    pub t: f64,
    /// Tilted mean.
    pub m: f64,
    pub s2: f64,
    pub mu3: f64,
    pub log_phi: f64,
}

impl From<TiltParams> for EgTilt {
    fn from(tp: TiltParams) -> Self {
        EgTilt {
            t: tp.t,
            m: tp.a,
            s2: tp.s2,
            mu3: tp.mu3,
            log_phi: tp.log_phi,
        }
    }
}

/// A density model.
pub struct EgModel {
    model: DensityModel,
}

/// Exact conditional law of `X_1` given `S_n = n a` (and given `S_n ≥ n a`).
pub struct EgOracle {
    oracle: ConditionalOracle,
    marginal: GridDensity,
    exceedance: GridDensity,
}

/// Fast-growth density at fixed `(n, a)`.
pub struct EgFastGrowth {
    model: DensityModel,
    params: FastGrowthParams,
}

/// Exceedance mixture at fixed `(n, a)`.
pub struct EgExceedance {
    model: DensityModel,
    approx: ExceedanceApprox,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EgStatus {
    match e {
        Error::Domain(_) => EgStatus::Domain,
        Error::Numeric(_) | Error::AcceptanceTooLow { .. } => EgStatus::Numeric,
        Error::Range(_) => EgStatus::Range,
        Error::Resource(_) => EgStatus::Resource,
        Error::Model(_) | Error::Config(_) => EgStatus::Model,
        Error::Io(_) => EgStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EgStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            EgStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            EgStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            EgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: the caller guarantees `p` is NULL or a live pointer from this library.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: non-null and, per the caller contract, valid for writes.
    unsafe { p.write(v) };
    Ok(())
}

fn row_size(n: usize) -> Result<usize, Fail> {
    if n < 2 {
        return Err(Fail::Arg(format!("row size must be at least 2, got {n}")));
    }
    Ok(n)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be NULL or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn eg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` holds at least `len > n` bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Builds a model from a short name (`weibull:2`, `exp_exponential`,
/// `half_gaussian`) or a path to a model spec file.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_model_new(spec: *const c_char, out: *mut *mut EgModel) -> EgStatus {
    guard(|| {
        if spec.is_null() {
            return Err(Fail::Null("spec"));
        }
        // SAFETY: non-null, NUL-terminated per the contract.
        let s = unsafe { CStr::from_ptr(spec) }
            .to_str()
            .map_err(|_| Fail::Arg("spec is not UTF-8".into()))?;
        let model = ModelSpec::from_short(s)?.build()?;
        unsafe { write(out, Box::into_raw(Box::new(EgModel { model })), "out") }
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`eg_model_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eg_model_free(model: *mut EgModel) {
    if !model.is_null() {
        // SAFETY: created by Box::into_raw in eg_model_new.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// `ln p(x)`; `-inf` outside the support.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_model_log_density(
    model: *const EgModel,
    x: f64,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        unsafe { write(out, m.model.log_density_unchecked(x), "out") }
    })
}

/// Moments of the tilt at parameter `t`.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_tilt_moments(
    model: *const EgModel,
    t: f64,
    out: *mut EgTilt,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let tp = tilt::tilt_moments(&m.model, t)?;
        unsafe { write(out, tp.into(), "out") }
    })
}

/// Solves `m(t) = a`.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_tilt_solve(
    model: *const EgModel,
    a: f64,
    out: *mut EgTilt,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let tp = tilt::solve_tilt(&m.model, a)?;
        unsafe { write(out, tp.into(), "out") }
    })
}

/// Tilted density at level `a`, evaluated at `y`.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_tilted_approx(
    model: *const EgModel,
    n: usize,
    a: f64,
    y: f64,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let v = gibbs::tilted_approx(&m.model, row_size(n)?, a, y)?;
        unsafe { write(out, v, "out") }
    })
}

/// `ln P(S_n ≥ n a)` from the tail formula.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_log_tail_probability(
    model: *const EgModel,
    n: usize,
    a: f64,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let v = exceedance::tail_probability(&m.model, row_size(n)?, a)?;
        unsafe { write(out, v, "out") }
    })
}

/// # Safety
/// `model` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_fast_growth_new(
    model: *const EgModel,
    n: usize,
    a: f64,
    out: *mut *mut EgFastGrowth,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let params = gibbs::fast_growth_params(&m.model, row_size(n)?, a)?;
        let h = EgFastGrowth {
            model: m.model.clone(),
            params,
        };
        unsafe { write(out, Box::into_raw(Box::new(h)), "out") }
    })
}

/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_fast_growth_density(
    h: *const EgFastGrowth,
    y: f64,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let h = unsafe { deref(h, "handle") }?;
        unsafe {
            write(
                out,
                gibbs::fast_growth_approx(&h.params, &h.model, y),
                "out",
            )
        }
    })
}

/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eg_fast_growth_free(h: *mut EgFastGrowth) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Exceedance mixture with default options.
///
/// # Safety
/// `model` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_exceedance_new(
    model: *const EgModel,
    n: usize,
    a: f64,
    out: *mut *mut EgExceedance,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let approx =
            ExceedanceApprox::new(&m.model, row_size(n)?, a, &ExceedanceOptions::default())?;
        let h = EgExceedance {
            model: m.model.clone(),
            approx,
        };
        unsafe { write(out, Box::into_raw(Box::new(h)), "out") }
    })
}

/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_exceedance_density(
    h: *const EgExceedance,
    y: f64,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let h = unsafe { deref(h, "handle") }?;
        unsafe { write(out, h.approx.density(&h.model, y), "out") }
    })
}

/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eg_exceedance_free(h: *mut EgExceedance) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Builds the convolution oracle at `(n, a)` with default grid options.
///
/// # Safety
/// `model` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_oracle_new(
    model: *const EgModel,
    n: usize,
    a: f64,
    out: *mut *mut EgOracle,
) -> EgStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let oracle =
            ConditionalOracle::new(&m.model, row_size(n)?, a, 1, &OracleOptions::default())?;
        let marginal = oracle.marginal()?;
        let exceedance = oracle.exceedance()?;
        let h = EgOracle {
            oracle,
            marginal,
            exceedance,
        };
        unsafe { write(out, Box::into_raw(Box::new(h)), "out") }
    })
}

/// Exact density of `X_1` given `S_n = n a`, at `y`.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_oracle_conditional(
    h: *const EgOracle,
    y: f64,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let h = unsafe { deref(h, "handle") }?;
        unsafe { write(out, h.marginal.eval(y), "out") }
    })
}

/// Exact density of `X_1` given `S_n ≥ n a`, at `y`.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_oracle_exceedance(
    h: *const EgOracle,
    y: f64,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let h = unsafe { deref(h, "handle") }?;
        unsafe { write(out, h.exceedance.eval(y), "out") }
    })
}

/// Exact `ln P(S_n ≥ n a)`.
///
/// # Safety
/// Handle and out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_oracle_log_tail(h: *const EgOracle, out: *mut f64) -> EgStatus {
    guard(|| {
        let h = unsafe { deref(h, "handle") }?;
        let v = h.oracle.log_tail_probability()?;
        unsafe { write(out, v, "out") }
    })
}

/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eg_oracle_free(h: *mut EgOracle) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        let mut buf = [0 as c_char; 256];
        unsafe { eg_last_error_message(buf.as_mut_ptr(), buf.len()) };
        unsafe { CStr::from_ptr(buf.as_ptr()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn model_lifecycle_and_errors() {
        let mut m: *mut EgModel = ptr::null_mut();
        assert_eq!(
            unsafe { eg_model_new(c"nope".as_ptr(), &mut m) },
            EgStatus::Model
        );
        assert!(last_error().contains("nope"));
        assert!(m.is_null());
        assert_eq!(
            unsafe { eg_model_new(c"weibull:2".as_ptr(), &mut m) },
            EgStatus::Ok
        );
        let mut tp = EgTilt::default();
        assert_eq!(unsafe { eg_tilt_solve(m, 3.0, &mut tp) }, EgStatus::Ok);
        assert!((tp.m - 3.0).abs() < 1e-9);
        assert_eq!(unsafe { eg_tilt_solve(m, -1.0, &mut tp) }, EgStatus::Domain);
        let mut v = 0.0;
        assert_eq!(
            unsafe { eg_tilted_approx(m, 1, 3.0, 3.0, &mut v) },
            EgStatus::InvalidArgument
        );
        assert_eq!(
            unsafe { eg_tilted_approx(ptr::null(), 8, 3.0, 3.0, &mut v) },
            EgStatus::NullPointer
        );
        unsafe { eg_model_free(m) };
        unsafe { eg_model_free(ptr::null_mut()) };
    }

    #[test]
    fn short_buffers_truncate() {
        set_error("abcdef".into());
        let mut buf = [0 as c_char; 4];
        let n = unsafe { eg_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 6);
        assert_eq!(
            unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(),
            "abc"
        );
        assert_eq!(unsafe { eg_last_error_message(ptr::null_mut(), 0) }, 6);
    }

    #[test]
    fn version_string() {
        let v = unsafe { CStr::from_ptr(eg_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
