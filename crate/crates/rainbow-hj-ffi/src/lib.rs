//! C ABI over the rainbow pricing library.
//!
//! Conventions:
//! - Every fallible call returns a status code (`RHJ_OK` on success) and
//!   writes its results through out-pointers, which are touched only on
//!   success.
//! - `RhjModel` is an opaque handle created by [`rhj_model_new`] and released
//!   by [`rhj_model_free`]; it is immutable and safe to share across threads.
//! - On failure a thread-local message is retained; fetch it with
//!   [`rhj_last_error`].
//! - No call unwinds across the boundary: internal panics are caught and
//!   reported as `RHJ_ERR_INTERNAL`.
//!
//! The matching declarations live in `include/rainbow_hj.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use rainbow_hj::market::{
    payoff_max_call, term_count, CorrelationMatrix, MarketModel, OptionSpec, ValidatedModel,
};
use rainbow_hj::montecarlo::{mc_price, PathConfig};
use rainbow_hj::pde::{bs_closed_form_1d, norm_cdf};

/// Success.
pub const RHJ_OK: i32 = 0;
/// A required pointer argument was null.
pub const RHJ_ERR_NULL: i32 = 1;
/// Arguments failed validation (details via `rhj_last_error`).
pub const RHJ_ERR_INVALID: i32 = 2;
/// The operation does not cover the requested dimension.
pub const RHJ_ERR_UNSUPPORTED: i32 = 3;
/// An internal error was caught at the boundary.
pub const RHJ_ERR_INTERNAL: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes removed");
    });
}

fn fail(code: i32, message: &str) -> i32 {
    set_last_error(message);
    code
}

/// Runs `body` with panics converted to `RHJ_ERR_INTERNAL`.
fn guarded(body: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => fail(RHJ_ERR_INTERNAL, "internal error"),
    }
}

/// Opaque validated market model.
pub struct RhjModel {
    model: ValidatedModel,
}

/// Copies the message of the most recent failure on this thread into `buf`
/// as a NUL-terminated string, truncating to `cap` bytes, and returns the
/// full message length in bytes (excluding the NUL). `buf` may be null or
/// `cap` zero to query the length alone.
///
/// # Safety
/// `buf`, when non-null, must point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rhj_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Builds a validated model from `n` spots, `n` vols, a rate, and an optional
/// row-major `n * n` correlation matrix (null means identity). On success
/// writes the new handle to `out_model`; release it with [`rhj_model_free`].
///
/// # Safety
/// `spots` and `vols` must point to `n` readable doubles, `corr` to `n * n`
/// readable doubles when non-null, and `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rhj_model_new(
    n: usize,
    spots: *const f64,
    vols: *const f64,
    rate: f64,
    corr: *const f64,
    out_model: *mut *mut RhjModel,
) -> i32 {
    if spots.is_null() || vols.is_null() || out_model.is_null() {
        return fail(RHJ_ERR_NULL, "null pointer argument");
    }
    if n == 0 {
        return fail(RHJ_ERR_INVALID, "the model needs at least one asset");
    }
    let spots = slice::from_raw_parts(spots, n).to_vec();
    let vols = slice::from_raw_parts(vols, n).to_vec();
    let corr_rows: Option<Vec<Vec<f64>>> = if corr.is_null() {
        None
    } else {
        let flat = slice::from_raw_parts(corr, n * n);
        Some(flat.chunks(n).map(<[f64]>::to_vec).collect())
    };
    guarded(move || {
        let corr = match corr_rows {
            Some(rows) => match CorrelationMatrix::from_rows(&rows) {
                Ok(c) => c,
                Err(e) => return fail(RHJ_ERR_INVALID, &e.to_string()),
            },
            None => CorrelationMatrix::identity(n),
        };
        match MarketModel::new(spots, vols, rate, corr).validate() {
            Ok(model) => {
                let handle = Box::new(RhjModel { model });
                *out_model = Box::into_raw(handle);
                RHJ_OK
            }
            Err(errors) => {
                let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
                fail(RHJ_ERR_INVALID, &lines.join("; "))
            }
        }
    })
}

/// Releases a model handle. Null is accepted and ignored.
///
/// # Safety
/// `model` must be null or a handle from [`rhj_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rhj_model_free(model: *mut RhjModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of assets in the model.
///
/// # Safety
/// `model` must be a live handle and `out_n` writable.
#[no_mangle]
pub unsafe extern "C" fn rhj_model_dim(model: *const RhjModel, out_n: *mut usize) -> i32 {
    if model.is_null() || out_n.is_null() {
        return fail(RHJ_ERR_NULL, "null pointer argument");
    }
    *out_n = (*model).model.n();
    RHJ_OK
}

/// Monte Carlo price of the max-of-n call: writes the discounted estimate and
/// its standard error. `antithetic` is 0 or 1; the result is a pure function
/// of the inputs, independent of thread count.
///
/// # Safety
/// `model` must be a live handle; `out_price` and `out_std_error` writable.
#[no_mangle]
pub unsafe extern "C" fn rhj_price_mc(
    model: *const RhjModel,
    strike: f64,
    maturity: f64,
    n_paths: u64,
    seed: u64,
    antithetic: i32,
    out_price: *mut f64,
    out_std_error: *mut f64,
) -> i32 {
    if model.is_null() || out_price.is_null() || out_std_error.is_null() {
        return fail(RHJ_ERR_NULL, "null pointer argument");
    }
    let model = &(*model).model;
    guarded(move || {
        let option = match OptionSpec::max_call(strike, maturity) {
            Ok(o) => o,
            Err(errors) => {
                let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
                return fail(RHJ_ERR_INVALID, &lines.join("; "));
            }
        };
        let pc = PathConfig {
            n_paths: n_paths as usize,
            seed,
            antithetic: antithetic != 0,
        };
        match mc_price(model, &option, &pc) {
            Ok(estimate) => {
                *out_price = estimate.price;
                *out_std_error = estimate.std_error;
                RHJ_OK
            }
            Err(e) => fail(RHJ_ERR_INVALID, &e.to_string()),
        }
    })
}

/// Single-asset closed-form call price. Fails with `RHJ_ERR_UNSUPPORTED` when
/// the model holds more than one asset.
///
/// # Safety
/// `model` must be a live handle and `out_price` writable.
#[no_mangle]
pub unsafe extern "C" fn rhj_price_closed_form(
    model: *const RhjModel,
    strike: f64,
    maturity: f64,
    out_price: *mut f64,
) -> i32 {
    if model.is_null() || out_price.is_null() {
        return fail(RHJ_ERR_NULL, "null pointer argument");
    }
    let model = &(*model).model;
    if model.n() != 1 {
        return fail(
            RHJ_ERR_UNSUPPORTED,
            "the closed form covers a single asset",
        );
    }
    guarded(move || {
        let option = match OptionSpec::max_call(strike, maturity) {
            Ok(o) => o,
            Err(errors) => {
                let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
                return fail(RHJ_ERR_INVALID, &lines.join("; "));
            }
        };
        *out_price = bs_closed_form_1d(
            model.spots()[0],
            option.strike,
            model.rate(),
            model.vols()[0],
            option.maturity,
        );
        RHJ_OK
    })
}

/// Terminal payoff max(s_1, ..., s_n) - K, floored at zero.
///
/// # Safety
/// `spots` must point to `n` readable doubles and `out_payoff` be writable.
#[no_mangle]
pub unsafe extern "C" fn rhj_payoff_max_call(
    n: usize,
    spots: *const f64,
    strike: f64,
    out_payoff: *mut f64,
) -> i32 {
    if spots.is_null() || out_payoff.is_null() {
        return fail(RHJ_ERR_NULL, "null pointer argument");
    }
    let spots = slice::from_raw_parts(spots, n);
    match payoff_max_call(spots, strike) {
        Ok(value) => {
            *out_payoff = value;
            RHJ_OK
        }
        Err(e) => fail(RHJ_ERR_INVALID, &e.to_string()),
    }
}

/// Number of spatial terms in the n-asset pricing operator.
#[no_mangle]
pub extern "C" fn rhj_term_count(n: u64) -> u64 {
    term_count(n)
}

/// Standard normal cumulative distribution function.
#[no_mangle]
pub extern "C" fn rhj_norm_cdf(x: f64) -> f64 {
    norm_cdf(x)
}
