//! C ABI over the agreement simulator.
//!
//! The interface follows the usual opaque-handle pattern: create a
//! simulation with [`agreesim_sim_new`], configure it, call
//! [`agreesim_sim_run`], then read the outcome. Every fallible call returns
//! an [`AgreesimStatus`]; strings returned to the caller must be released
//! with [`agreesim_string_free`] and handles with [`agreesim_sim_free`].

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use agreesim::adversaries::make_adversary;
use agreesim::properties::InputSpec;
use agreesim::protocol::Thresholds;
use agreesim::rng::{derive_seed, stream};
use agreesim::simnet::{run, Execution, ExecutionTrace};
use agreesim::trace::TraceFile;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreesimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    RunFailed = 4,
    NotRun = 5,
    Undecided = 6,
}

/// Opaque simulation handle.
pub struct AgreesimSim {
    n: u32,
    t: u32,
    seed: u64,
    thresholds: Thresholds,
    inputs: Vec<u8>,
    adversary: String,
    finished: Option<(Execution, ExecutionTrace)>,
}

/// Creates a simulation with default thresholds, balanced inputs, and the
/// fair adversary. Returns null when `(n, t)` does not admit valid
/// thresholds.
#[no_mangle]
pub extern "C" fn agreesim_sim_new(n: u32, t: u32, seed: u64) -> *mut AgreesimSim {
    let Ok(thresholds) = Thresholds::default_for(n, t) else {
        return ptr::null_mut();
    };
    Box::into_raw(Box::new(AgreesimSim {
        n,
        t,
        seed,
        thresholds,
        inputs: InputSpec::Balanced.materialize(n, 0),
        adversary: "fair".to_string(),
        finished: None,
    }))
}

/// Releases a handle returned by [`agreesim_sim_new`].
///
/// # Safety
/// `sim` must be null or a pointer previously returned by
/// [`agreesim_sim_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_free(sim: *mut AgreesimSim) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Overrides the message-count thresholds; they must satisfy the protocol
/// constraints for the handle's `(n, t)`.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_set_thresholds(
    sim: *mut AgreesimSim,
    t1: u32,
    t2: u32,
    t3: u32,
) -> AgreesimStatus {
    let Some(sim) = (unsafe { sim.as_mut() }) else {
        return AgreesimStatus::NullPointer;
    };
    let th = Thresholds::new(sim.n, sim.t, t1, t2, t3);
    if th.validate().is_err() {
        return AgreesimStatus::InvalidArgument;
    }
    sim.thresholds = th;
    sim.finished = None;
    AgreesimStatus::Ok
}

/// Sets the input bits; `len` must equal `n` and every byte must be 0 or 1.
///
/// # Safety
/// `sim` must be a live handle and `bits` must point to `len` readable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_set_inputs(
    sim: *mut AgreesimSim,
    bits: *const u8,
    len: usize,
) -> AgreesimStatus {
    let Some(sim) = (unsafe { sim.as_mut() }) else {
        return AgreesimStatus::NullPointer;
    };
    if bits.is_null() {
        return AgreesimStatus::NullPointer;
    }
    if len != sim.n as usize {
        return AgreesimStatus::InvalidArgument;
    }
    let slice = unsafe { std::slice::from_raw_parts(bits, len) };
    if slice.iter().any(|&b| b > 1) {
        return AgreesimStatus::InvalidArgument;
    }
    sim.inputs = slice.to_vec();
    sim.finished = None;
    AgreesimStatus::Ok
}

/// Selects the adversary by name: "fair", "random", "splitvote",
/// "splitvote-reset", or "crash".
///
/// # Safety
/// `sim` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_set_adversary(
    sim: *mut AgreesimSim,
    name: *const c_char,
) -> AgreesimStatus {
    let Some(sim) = (unsafe { sim.as_mut() }) else {
        return AgreesimStatus::NullPointer;
    };
    if name.is_null() {
        return AgreesimStatus::NullPointer;
    }
    let Ok(name) = (unsafe { CStr::from_ptr(name) }).to_str() else {
        return AgreesimStatus::InvalidUtf8;
    };
    if make_adversary(name, 0, sim.n, sim.t).is_err() {
        return AgreesimStatus::InvalidArgument;
    }
    sim.adversary = name.to_string();
    sim.finished = None;
    AgreesimStatus::Ok
}

/// Runs the simulation for at most `max_windows` windows.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_run(
    sim: *mut AgreesimSim,
    max_windows: u32,
) -> AgreesimStatus {
    let Some(sim) = (unsafe { sim.as_mut() }) else {
        return AgreesimStatus::NullPointer;
    };
    if max_windows == 0 {
        return AgreesimStatus::InvalidArgument;
    }
    let Ok(mut exec) = Execution::new(sim.n, sim.t, &sim.inputs, sim.thresholds, sim.seed) else {
        return AgreesimStatus::InvalidArgument;
    };
    let Ok(mut adversary) = make_adversary(
        &sim.adversary,
        derive_seed(sim.seed, stream::ADVERSARY, 0),
        sim.n,
        sim.t,
    ) else {
        return AgreesimStatus::InvalidArgument;
    };
    match run(&mut exec, adversary.as_mut(), max_windows) {
        Ok(trace) => {
            sim.finished = Some((exec, trace));
            AgreesimStatus::Ok
        }
        Err(_) => AgreesimStatus::RunFailed,
    }
}

/// Reads the first decision: its value and the window it happened in.
/// Returns `NOT_RUN` before [`agreesim_sim_run`] and `UNDECIDED` when no
/// processor decided within the window budget.
///
/// # Safety
/// `sim` must be a live handle; out-pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_decision(
    sim: *const AgreesimSim,
    out_value: *mut u8,
    out_window: *mut u32,
) -> AgreesimStatus {
    let Some(sim) = (unsafe { sim.as_ref() }) else {
        return AgreesimStatus::NullPointer;
    };
    let Some((_, trace)) = &sim.finished else {
        return AgreesimStatus::NotRun;
    };
    let Some(first) = trace.decisions.first() else {
        return AgreesimStatus::Undecided;
    };
    if let Some(out) = unsafe { out_value.as_mut() } {
        *out = first.value;
    }
    if let Some(out) = unsafe { out_window.as_mut() } {
        *out = first.window;
    }
    AgreesimStatus::Ok
}

/// Number of processors that wrote an output during the run.
///
/// # Safety
/// `sim` must be a live handle and `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_decider_count(
    sim: *const AgreesimSim,
    out_count: *mut u32,
) -> AgreesimStatus {
    let Some(sim) = (unsafe { sim.as_ref() }) else {
        return AgreesimStatus::NullPointer;
    };
    let Some((_, trace)) = &sim.finished else {
        return AgreesimStatus::NotRun;
    };
    if let Some(out) = unsafe { out_count.as_mut() } {
        *out = trace.decisions.len() as u32;
    }
    AgreesimStatus::Ok
}

/// Serializes the finished run as a JSON trace. The returned string must be
/// released with [`agreesim_string_free`]; null is returned before a run.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_trace_json(sim: *const AgreesimSim) -> *mut c_char {
    let Some(sim) = (unsafe { sim.as_ref() }) else {
        return ptr::null_mut();
    };
    let Some((exec, trace)) = &sim.finished else {
        return ptr::null_mut();
    };
    let file = TraceFile::from_run(exec, trace, &sim.adversary);
    let Ok(json) = file.to_json() else {
        return ptr::null_mut();
    };
    CString::new(json).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Hex digest of the finished run. Release with [`agreesim_string_free`].
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn agreesim_sim_digest(sim: *const AgreesimSim) -> *mut c_char {
    let Some(sim) = (unsafe { sim.as_ref() }) else {
        return ptr::null_mut();
    };
    let Some((_, trace)) = &sim.finished else {
        return ptr::null_mut();
    };
    CString::new(trace.digest.clone())
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Exhaustive concentration-inequality sweep over `{0,1}^n` (`n <= 4`):
/// reports how many instances were checked and how many violated the bound.
///
/// # Safety
/// Out-pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn agreesim_talagrand_sweep(
    n: usize,
    random_dists: usize,
    seed: u64,
    out_instances: *mut u64,
    out_violations: *mut u64,
) -> AgreesimStatus {
    match agreesim::concentration::talagrand_sweep(n, random_dists, seed) {
        Ok(report) => {
            if let Some(out) = unsafe { out_instances.as_mut() } {
                *out = report.instances;
            }
            if let Some(out) = unsafe { out_violations.as_mut() } {
                *out = report.violations;
            }
            AgreesimStatus::Ok
        }
        Err(_) => AgreesimStatus::InvalidArgument,
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer returned by an `agreesim_*` function that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn agreesim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
