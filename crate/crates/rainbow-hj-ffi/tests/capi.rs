//! Exercises the C ABI exactly as a foreign caller would: through raw
//! pointers and status codes, never through the Rust types underneath.

use std::ffi::c_char;
use std::ptr;

use rainbow_hj_ffi::*;

fn last_error_string() -> String {
    let needed = unsafe { rhj_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; needed + 1];
    unsafe { rhj_last_error(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    buf.truncate(needed);
    String::from_utf8(buf).unwrap()
}

/// Every exported function keeps the exact signature the header declares;
/// a change here must be mirrored in include/rainbow_hj.h.
#[test]
fn exported_symbols_match_the_header() {
    let _: unsafe extern "C" fn(*mut c_char, usize) -> usize = rhj_last_error;
    let _: unsafe extern "C" fn(
        usize,
        *const f64,
        *const f64,
        f64,
        *const f64,
        *mut *mut RhjModel,
    ) -> i32 = rhj_model_new;
    let _: unsafe extern "C" fn(*mut RhjModel) = rhj_model_free;
    let _: unsafe extern "C" fn(*const RhjModel, *mut usize) -> i32 = rhj_model_dim;
    let _: unsafe extern "C" fn(
        *const RhjModel,
        f64,
        f64,
        u64,
        u64,
        i32,
        *mut f64,
        *mut f64,
    ) -> i32 = rhj_price_mc;
    let _: unsafe extern "C" fn(*const RhjModel, f64, f64, *mut f64) -> i32 =
        rhj_price_closed_form;
    let _: unsafe extern "C" fn(usize, *const f64, f64, *mut f64) -> i32 = rhj_payoff_max_call;
    let _: extern "C" fn(u64) -> u64 = rhj_term_count;
    let _: extern "C" fn(f64) -> f64 = rhj_norm_cdf;

    let header = include_str!("../include/rainbow_hj.h");
    for symbol in [
        "rhj_last_error",
        "rhj_model_new",
        "rhj_model_free",
        "rhj_model_dim",
        "rhj_price_mc",
        "rhj_price_closed_form",
        "rhj_payoff_max_call",
        "rhj_term_count",
        "rhj_norm_cdf",
    ] {
        assert!(header.contains(symbol), "header missing {symbol}");
    }
}

#[test]
fn model_lifecycle_and_pricing_round_trip() {
    let spots = [100.0];
    let vols = [0.2];
    let mut model: *mut RhjModel = ptr::null_mut();
    let status = unsafe {
        rhj_model_new(
            1,
            spots.as_ptr(),
            vols.as_ptr(),
            0.05,
            ptr::null(),
            &mut model,
        )
    };
    assert_eq!(status, RHJ_OK);
    assert!(!model.is_null());

    let mut n = 0usize;
    assert_eq!(unsafe { rhj_model_dim(model, &mut n) }, RHJ_OK);
    assert_eq!(n, 1);

    let mut closed = 0.0;
    assert_eq!(
        unsafe { rhj_price_closed_form(model, 100.0, 1.0, &mut closed) },
        RHJ_OK
    );
    assert!((closed - 10.4506).abs() < 1e-4, "closed form {closed}");

    let (mut price, mut se) = (0.0, 0.0);
    let status =
        unsafe { rhj_price_mc(model, 100.0, 1.0, 100_000, 42, 1, &mut price, &mut se) };
    assert_eq!(status, RHJ_OK);
    assert!(se > 0.0);
    assert!(
        (price - closed).abs() <= 4.0 * se,
        "mc {price} +- {se} vs closed {closed}"
    );

    let (mut again, mut se_again) = (0.0, 0.0);
    unsafe { rhj_price_mc(model, 100.0, 1.0, 100_000, 42, 1, &mut again, &mut se_again) };
    assert_eq!(price.to_bits(), again.to_bits(), "same seed, same bits");

    unsafe { rhj_model_free(model) };
}

#[test]
fn correlated_two_asset_model_prices() {
    let spots = [100.0, 100.0];
    let vols = [0.2, 0.3];
    let corr = [1.0, 0.5, 0.5, 1.0];
    let mut model: *mut RhjModel = ptr::null_mut();
    let status = unsafe {
        rhj_model_new(
            2,
            spots.as_ptr(),
            vols.as_ptr(),
            0.05,
            corr.as_ptr(),
            &mut model,
        )
    };
    assert_eq!(status, RHJ_OK);

    let mut closed = 0.0;
    assert_eq!(
        unsafe { rhj_price_closed_form(model, 100.0, 1.0, &mut closed) },
        RHJ_ERR_UNSUPPORTED
    );
    assert!(last_error_string().contains("single asset"));

    let (mut price, mut se) = (0.0, 0.0);
    assert_eq!(
        unsafe { rhj_price_mc(model, 100.0, 1.0, 200_000, 7, 0, &mut price, &mut se) },
        RHJ_OK
    );
    assert!((price - 18.8356).abs() < 0.5, "two-asset price {price}");

    unsafe { rhj_model_free(model) };
}

#[test]
fn null_pointers_are_rejected_not_dereferenced() {
    let spots = [100.0];
    let vols = [0.2];
    let mut model: *mut RhjModel = ptr::null_mut();
    assert_eq!(
        unsafe { rhj_model_new(1, ptr::null(), vols.as_ptr(), 0.05, ptr::null(), &mut model) },
        RHJ_ERR_NULL
    );
    assert_eq!(
        unsafe {
            rhj_model_new(
                1,
                spots.as_ptr(),
                vols.as_ptr(),
                0.05,
                ptr::null(),
                ptr::null_mut(),
            )
        },
        RHJ_ERR_NULL
    );
    let mut out = 0.0;
    assert_eq!(
        unsafe { rhj_price_closed_form(ptr::null(), 100.0, 1.0, &mut out) },
        RHJ_ERR_NULL
    );
    assert_eq!(
        unsafe { rhj_payoff_max_call(1, ptr::null(), 100.0, &mut out) },
        RHJ_ERR_NULL
    );
    unsafe { rhj_model_free(ptr::null_mut()) };
}

#[test]
fn invalid_arguments_set_a_readable_message() {
    let spots = [100.0, 100.0];
    let vols = [0.2, 0.3];
    let corr = [1.0, 1.2, 1.2, 1.0];
    let mut model: *mut RhjModel = ptr::null_mut();
    let status = unsafe {
        rhj_model_new(
            2,
            spots.as_ptr(),
            vols.as_ptr(),
            0.05,
            corr.as_ptr(),
            &mut model,
        )
    };
    assert_eq!(status, RHJ_ERR_INVALID);
    assert!(model.is_null(), "handle must stay untouched on failure");
    assert!(!last_error_string().is_empty());

    let spots = [100.0];
    let mut out = 0.0;
    assert_eq!(
        unsafe { rhj_payoff_max_call(0, spots.as_ptr(), 100.0, &mut out) },
        RHJ_ERR_INVALID,
        "an empty spot vector has no payoff"
    );
    assert!(!last_error_string().is_empty());
}

#[test]
fn scalar_helpers_agree_with_reference_values() {
    assert_eq!(rhj_term_count(1), 4);
    assert_eq!(rhj_term_count(2), 7);
    assert_eq!(rhj_term_count(3), 11);
    assert_eq!(rhj_term_count(4), 16);
    assert_eq!(rhj_term_count(5), 22);

    assert!((rhj_norm_cdf(0.0) - 0.5).abs() < 1e-15);
    assert!((rhj_norm_cdf(1.959963984540054) - 0.975).abs() < 1e-12);

    let spots = [90.0, 120.0, 80.0];
    let mut payoff = 0.0;
    assert_eq!(
        unsafe { rhj_payoff_max_call(3, spots.as_ptr(), 100.0, &mut payoff) },
        RHJ_OK
    );
    assert_eq!(payoff, 20.0);
}
