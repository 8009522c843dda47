//! C ABI for the asyncdiff engine.
//!
//! The interface is JSON-in / JSON-out: a model handle is created from the
//! same JSON experiment config accepted by the CLI, and the analysis and
//! simulation entry points return JSON documents matching the CLI's
//! `theory.json` and `sim.json` artifacts. All returned strings are owned by
//! the library and must be released with [`asyncdiff_string_free`].

use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

use asyncdiff::config::ExperimentConfig;
use asyncdiff::error::Error;
use asyncdiff::netmodel::AsyncNetworkModel;
use asyncdiff::sim::{self, SimConfig};
use asyncdiff::theory;

/// Success.
pub const ASYNCDIFF_OK: c_int = 0;
/// Null pointer, invalid UTF-8, or a config that failed to parse or validate.
pub const ASYNCDIFF_ERR_INVALID: c_int = 1;
/// A step-size stability gate failed.
pub const ASYNCDIFF_ERR_GATE: c_int = 2;
/// The mean combination model is not primitive.
pub const ASYNCDIFF_ERR_PRIMITIVITY: c_int = 3;
/// A numeric routine failed (singular solve, non-convergence, guard).
pub const ASYNCDIFF_ERR_NUMERIC: c_int = 4;
/// A simulation run diverged.
pub const ASYNCDIFF_ERR_DIVERGED: c_int = 5;

/// Opaque experiment handle: a validated network model plus the simulation
/// settings from its config.
pub struct AsyncdiffModel {
    model: AsyncNetworkModel,
    sim_cfg: SimConfig,
}

fn error_code(e: &Error) -> c_int {
    match e {
        Error::InvalidConfig(_) | Error::InvalidPolicy(_) | Error::Json(_) | Error::Io(_) => {
            ASYNCDIFF_ERR_INVALID
        }
        Error::Unstable { .. } => ASYNCDIFF_ERR_GATE,
        Error::NotPrimitive(_) | Error::NonPositivePerron { .. } => ASYNCDIFF_ERR_PRIMITIVITY,
        Error::Diverged { .. } => ASYNCDIFF_ERR_DIVERGED,
        _ => ASYNCDIFF_ERR_NUMERIC,
    }
}

fn set_out(out: *mut *mut c_char, s: String) {
    if out.is_null() {
        return;
    }
    let c = CString::new(s.replace('\0', " ")).unwrap_or_default();
    unsafe { *out = c.into_raw() };
}

/// Builds a model handle from a JSON experiment config.
///
/// Returns null on failure; if `err_out` is non-null it then receives an
/// error message (release it with [`asyncdiff_string_free`]).
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string; `err_out`, if
/// non-null, must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn asyncdiff_model_new(
    config_json: *const c_char,
    err_out: *mut *mut c_char,
) -> *mut AsyncdiffModel {
    if !err_out.is_null() {
        *err_out = ptr::null_mut();
    }
    if config_json.is_null() {
        set_out(err_out, "config_json is null".to_string());
        return ptr::null_mut();
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_out(err_out, "config_json is not valid UTF-8".to_string());
            return ptr::null_mut();
        }
    };
    let cfg = match ExperimentConfig::from_json(text) {
        Ok(c) => c,
        Err(e) => {
            set_out(err_out, e.to_string());
            return ptr::null_mut();
        }
    };
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => {
            set_out(err_out, e.to_string());
            return ptr::null_mut();
        }
    };
    let sim_cfg = cfg.sim_config();
    Box::into_raw(Box::new(AsyncdiffModel { model, sim_cfg }))
}

/// Releases a model handle. Null is accepted and ignored.
///
/// # Safety
/// `handle` must have come from [`asyncdiff_model_new`] and not have been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn asyncdiff_model_free(handle: *mut AsyncdiffModel) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Runs the closed-form analysis and writes the report JSON to `out_json`.
///
/// On failure the return code is nonzero and `out_json` receives an error
/// message instead. `dump_matrices != 0` includes the aggregate matrices.
///
/// # Safety
/// `handle` must be a live handle from [`asyncdiff_model_new`]; `out_json`
/// must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn asyncdiff_analyze(
    handle: *const AsyncdiffModel,
    dump_matrices: c_int,
    out_json: *mut *mut c_char,
) -> c_int {
    if handle.is_null() || out_json.is_null() {
        set_out(out_json, "null argument".to_string());
        return ASYNCDIFF_ERR_INVALID;
    }
    let h = &*handle;
    match theory::analyze(&h.model, dump_matrices != 0) {
        Ok(rep) => match serde_json::to_string_pretty(&rep) {
            Ok(s) => {
                set_out(out_json, s);
                ASYNCDIFF_OK
            }
            Err(e) => {
                set_out(out_json, e.to_string());
                ASYNCDIFF_ERR_NUMERIC
            }
        },
        Err(e) => {
            set_out(out_json, e.to_string());
            error_code(&e)
        }
    }
}

/// Runs the Monte-Carlo ensemble and writes the simulation report JSON to
/// `out_json`. A `seed >= 0` overrides the config's master seed.
///
/// # Safety
/// Same contracts as [`asyncdiff_analyze`].
#[no_mangle]
pub unsafe extern "C" fn asyncdiff_simulate(
    handle: *const AsyncdiffModel,
    seed: i64,
    out_json: *mut *mut c_char,
) -> c_int {
    if handle.is_null() || out_json.is_null() {
        set_out(out_json, "null argument".to_string());
        return ASYNCDIFF_ERR_INVALID;
    }
    let h = &*handle;
    let mut cfg = h.sim_cfg.clone();
    if seed >= 0 {
        cfg.master_seed = seed as u64;
    }
    match sim::run_ensemble(&h.model, &cfg) {
        Ok(rep) => match serde_json::to_string_pretty(&rep) {
            Ok(s) => {
                set_out(out_json, s);
                ASYNCDIFF_OK
            }
            Err(e) => {
                set_out(out_json, e.to_string());
                ASYNCDIFF_ERR_NUMERIC
            }
        },
        Err(e) => {
            set_out(out_json, e.to_string());
            error_code(&e)
        }
    }
}

/// Releases a string returned by this library. Null is accepted and ignored.
///
/// # Safety
/// `s` must have been produced by this library and not freed already.
#[no_mangle]
pub unsafe extern "C" fn asyncdiff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
