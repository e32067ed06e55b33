//! C ABI for the hidden-basis simulator.
//!
//! Conventions: every fallible call returns [`HbStatus`]; on failure a
//! thread-local message is retrievable through [`hb_last_error_message`].
//! Reference states travel as opaque handles owned by the caller and
//! released with [`hb_reference_free`]; experiment results arrive as
//! heap-allocated JSON strings released with [`hb_string_free`]. All
//! entry points catch panics and report them as `HB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hbsim_core::harness::{self, Command, ExperimentParams};
use hbsim_core::hidden_basis::LogicalState;
use hbsim_core::phase_reference::{make_reference, run_circuit, GateSpec, ReferenceState};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbStatus {
    /// The call succeeded.
    HbStatusOk = 0,
    /// A required pointer argument was null.
    HbStatusNullPointer = 1,
    /// An argument failed validation; see the error message.
    HbStatusInvalidArgument = 2,
    /// The computation reported a domain error; see the error message.
    HbStatusRuntimeError = 3,
    /// A panic was caught at the boundary; see the error message.
    HbStatusPanic = 4,
}

/// Opaque handle to a bounded phase reference.
pub struct HbReference {
    inner: ReferenceState,
    theta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let stored = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Message for the most recent failure on this thread, or null when the
/// last call succeeded. The pointer stays valid until the next failing
/// call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn hb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |message| message.as_ptr())
    })
}

fn guard(body: impl FnOnce() -> HbStatus) -> HbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".into());
            set_error(format!("panic: {message}"));
            HbStatus::HbStatusPanic
        }
    }
}

fn leak_string(text: String) -> *mut c_char {
    CString::new(text)
        .unwrap_or_else(|_| CString::new("output contained a NUL byte").unwrap())
        .into_raw()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `text` must be a pointer previously returned by this library's
/// string-producing calls, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hb_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Creates the equal-modulus phase reference of size `t` at phase `theta`
/// and stores the handle in `out`.
///
/// # Safety
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hb_reference_new(
    theta: f64,
    t: u64,
    out: *mut *mut HbReference,
) -> HbStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null".into());
            return HbStatus::HbStatusNullPointer;
        }
        match make_reference(theta, t as usize) {
            Ok(inner) => {
                clear_error();
                unsafe { *out = Box::into_raw(Box::new(HbReference { inner, theta })) };
                HbStatus::HbStatusOk
            }
            Err(e) => {
                set_error(e.to_string());
                HbStatus::HbStatusInvalidArgument
            }
        }
    })
}

/// Releases a reference handle. Null is ignored.
///
/// # Safety
/// `reference` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hb_reference_free(reference: *mut HbReference) {
    if !reference.is_null() {
        drop(unsafe { Box::from_raw(reference) });
    }
}

/// Reads the reference size `t`.
///
/// # Safety
/// `reference` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn hb_reference_size(
    reference: *const HbReference,
    out: *mut u64,
) -> HbStatus {
    guard(|| {
        if reference.is_null() || out.is_null() {
            set_error("reference or out pointer is null".into());
            return HbStatus::HbStatusNullPointer;
        }
        clear_error();
        unsafe { *out = (*reference).inner.t() as u64 };
        HbStatus::HbStatusOk
    })
}

/// Runs a chain of `l` reference-consuming Hadamard gates on one qubit
/// starting from the first basis state, using a copy of the handle's
/// reference, and returns the fidelity report as JSON in `out_json`.
///
/// # Safety
/// `reference` and `out_json` must be valid, non-null pointers; the
/// returned string must be released with `hb_string_free`.
#[no_mangle]
pub unsafe extern "C" fn hb_reference_run_chain(
    reference: *const HbReference,
    l: u64,
    alpha: f64,
    out_json: *mut *mut c_char,
) -> HbStatus {
    guard(|| {
        if reference.is_null() || out_json.is_null() {
            set_error("reference or out pointer is null".into());
            return HbStatus::HbStatusNullPointer;
        }
        let handle = unsafe { &*reference };
        let gates = vec![GateSpec::HTheta { qubit: 0, alpha }; l as usize];
        let run = LogicalState::basis(1, 0)
            .and_then(|rho0| run_circuit(&rho0, &gates, &handle.inner, handle.theta));
        match run {
            Ok((_, report)) => match serde_json::to_string_pretty(&report) {
                Ok(json) => {
                    clear_error();
                    unsafe { *out_json = leak_string(json) };
                    HbStatus::HbStatusOk
                }
                Err(e) => {
                    set_error(format!("report serialization failed: {e}"));
                    HbStatus::HbStatusRuntimeError
                }
            },
            Err(e) => {
                set_error(e.to_string());
                HbStatus::HbStatusRuntimeError
            }
        }
    })
}

fn parse_c_str<'a>(pointer: *const c_char, what: &str) -> Result<&'a str, String> {
    if pointer.is_null() {
        return Err(format!("{what} pointer is null"));
    }
    unsafe { CStr::from_ptr(pointer) }
        .to_str()
        .map_err(|_| format!("{what} is not valid UTF-8"))
}

/// Runs one named experiment (`lift`, `prep`, `hadamard-chain`,
/// `id-protocol`, `squash`, `forge`) with JSON parameters (null or empty
/// for defaults). The JSON report lands in `out_json`; `out_pass`
/// (optional) receives whether every assertion held.
///
/// # Safety
/// `out_json` must be valid and non-null; `params_json` and `out_pass`
/// may be null; the returned string must be released with
/// `hb_string_free`.
#[no_mangle]
pub unsafe extern "C" fn hb_run_experiment(
    command: *const c_char,
    params_json: *const c_char,
    out_json: *mut *mut c_char,
    out_pass: *mut bool,
) -> HbStatus {
    guard(|| {
        if out_json.is_null() {
            set_error("out pointer is null".into());
            return HbStatus::HbStatusNullPointer;
        }
        let name = match parse_c_str(command, "command") {
            Ok(name) => name,
            Err(message) => {
                set_error(message);
                return HbStatus::HbStatusNullPointer;
            }
        };
        let command = match Command::from_name(name) {
            Ok(command) => command,
            Err(e) => {
                set_error(e.to_string());
                return HbStatus::HbStatusInvalidArgument;
            }
        };
        let params = if params_json.is_null() {
            ExperimentParams::default()
        } else {
            let text = match parse_c_str(params_json, "params") {
                Ok(text) => text,
                Err(message) => {
                    set_error(message);
                    return HbStatus::HbStatusInvalidArgument;
                }
            };
            if text.trim().is_empty() {
                ExperimentParams::default()
            } else {
                match ExperimentParams::from_json(text) {
                    Ok(params) => params,
                    Err(e) => {
                        set_error(e.to_string());
                        return HbStatus::HbStatusInvalidArgument;
                    }
                }
            }
        };
        match harness::run(command, &params) {
            Ok(outcome) => {
                clear_error();
                unsafe {
                    *out_json = leak_string(outcome.json);
                    if !out_pass.is_null() {
                        *out_pass = outcome.pass;
                    }
                }
                HbStatus::HbStatusOk
            }
            Err(e) => {
                set_error(e.to_string());
                HbStatus::HbStatusInvalidArgument
            }
        }
    })
}
