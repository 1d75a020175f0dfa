//! C interface to pipeflow.
//!
//! Every fallible function returns a [`PfStatus`]. On failure the message is
//! kept per thread and can be read with [`pf_last_error_message`]. Handles are
//! opaque; release each with its matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use pipeflow::backends::CostModelParams;
use pipeflow::frameio::{load_sequence, Frame};
use pipeflow::motion::{self, FlowConfig, GrayFrame};
use pipeflow::scheduler::{
    predict_times, run_schedule, two_stage_tasks, validate_trace, Mode, NoopExecutor, ResourcePool,
    ScheduleError, ScheduleTrace, TaskSpec,
};
use pipeflow::selection::{select_frames, SelectionConfig, SelectionResult};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Motion = 4,
    Selection = 5,
    Schedule = 6,
    Overflow = 7,
    Panic = 8,
}

/// Loaded frames.
pub struct PfSequence {
    frames: Vec<Frame>,
}

/// Indices of the frames kept by selection.
pub struct PfSelection {
    result: SelectionResult,
}

/// A finished schedule with the tasks and pool it ran on.
pub struct PfTrace {
    trace: ScheduleTrace,
    tasks: Vec<TaskSpec>,
    pool: ResourcePool,
}

/// Closed-form time predictions. `t_async` is `t_async_num / t_async_den`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PfPredictedTimes {
    pub t_serial: u64,
    pub t_async_num: u64,
    pub t_async_den: u64,
    pub t_async: f64,
    pub t_serial_sum: u64,
    pub pipeline_bound: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PfStatus, msg: impl Into<String>) -> PfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> PfStatus + UnwindSafe) -> PfStatus {
    catch_unwind(f).unwrap_or_else(|_| fail(PfStatus::Panic, "panic inside pipeflow"))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PfStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from a pipeflow function that returns an owned string, or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn gray_pair(
    a: *const u8,
    b: *const u8,
    width: u32,
    height: u32,
) -> Result<(GrayFrame, GrayFrame), PfStatus> {
    let n = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| fail(PfStatus::Overflow, "width * height overflows"))?;
    let gray = |p: *const u8| {
        let data = std::slice::from_raw_parts(p, n)
            .iter()
            .map(|&v| v as f64)
            .collect();
        GrayFrame::new(width, height, data)
            .map_err(|e| fail(PfStatus::InvalidArgument, e.to_string()))
    };
    Ok((gray(a)?, gray(b)?))
}

/// Global SSIM of two 8-bit gray images of `width * height` bytes each.
///
/// # Safety
/// `a` and `b` must point to `width * height` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_ssim_gray(
    a: *const u8,
    b: *const u8,
    width: u32,
    height: u32,
    out: *mut f64,
) -> PfStatus {
    non_null!(a, b, out);
    guard(move || {
        let (ga, gb) = match gray_pair(a, b, width, height) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match motion::ssim_global(&ga, &gb) {
            Ok(v) => {
                *out = v;
                PfStatus::Ok
            }
            Err(e) => fail(PfStatus::Motion, e.to_string()),
        }
    })
}

/// Mean optical-flow magnitude from `a` to `b` with the default flow settings.
///
/// # Safety
/// Same as [`pf_ssim_gray`].
#[no_mangle]
pub unsafe extern "C" fn pf_mean_flow_magnitude(
    a: *const u8,
    b: *const u8,
    width: u32,
    height: u32,
    out: *mut f64,
) -> PfStatus {
    non_null!(a, b, out);
    guard(move || {
        let (ga, gb) = match gray_pair(a, b, width, height) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match motion::estimate_flow(&ga, &gb, &FlowConfig::default()) {
            Ok(flow) => {
                *out = motion::mean_flow_magnitude(&flow);
                PfStatus::Ok
            }
            Err(e) => fail(PfStatus::Motion, e.to_string()),
        }
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_predict_times(
    n1: u64,
    n2: u64,
    t1: u64,
    t2: u64,
    batches: u64,
    out: *mut PfPredictedTimes,
) -> PfStatus {
    non_null!(out);
    guard(move || {
        let cost = CostModelParams {
            n1,
            n2,
            t1,
            t2,
            batches,
            ..Default::default()
        };
        let p = match predict_times(&cost) {
            Ok(p) => p,
            Err(e) => return fail(PfStatus::InvalidArgument, e.to_string()),
        };
        let narrow = |v: u128| u64::try_from(v).ok();
        let fields = (
            narrow(p.t_serial_paper),
            narrow(*p.t_async_paper.numer()),
            narrow(*p.t_async_paper.denom()),
            narrow(p.t_serial_sum),
            narrow(p.pipeline_bound),
        );
        let (Some(t_serial), Some(num), Some(den), Some(sum), Some(bound)) = fields else {
            return fail(PfStatus::Overflow, "prediction does not fit in 64 bits");
        };
        *out = PfPredictedTimes {
            t_serial,
            t_async_num: num,
            t_async_den: den,
            t_async: p.t_async_paper_f64(),
            t_serial_sum: sum,
            pipeline_bound: bound,
        };
        PfStatus::Ok
    })
}

/// Loads every frame of the sequence directory `dir` into memory. `*out` is
/// null on failure.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_sequence_load(
    dir: *const c_char,
    out: *mut *mut PfSequence,
) -> PfStatus {
    non_null!(dir, out);
    *out = ptr::null_mut();
    guard(move || {
        let Ok(dir) = CStr::from_ptr(dir).to_str() else {
            return fail(PfStatus::InvalidArgument, "dir is not UTF-8");
        };
        match load_sequence(dir).and_then(|s| s.load_all()) {
            Ok(frames) => {
                *out = Box::into_raw(Box::new(PfSequence { frames }));
                PfStatus::Ok
            }
            Err(e) => fail(PfStatus::Io, e.to_string()),
        }
    })
}

/// Number of frames, or 0 for null.
///
/// # Safety
/// `seq` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_sequence_len(seq: *const PfSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.frames.len())
}

/// # Safety
/// `seq` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_sequence_shape(
    seq: *const PfSequence,
    width: *mut u32,
    height: *mut u32,
    channels: *mut u8,
) -> PfStatus {
    non_null!(seq, width, height, channels);
    let Some(first) = (*seq).frames.first() else {
        return fail(PfStatus::InvalidArgument, "sequence is empty");
    };
    let (w, h, c) = first.shape();
    *width = w;
    *height = h;
    *channels = c;
    PfStatus::Ok
}

/// # Safety
/// `seq` must come from [`pf_sequence_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pf_sequence_free(seq: *mut PfSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Runs frame selection with thresholds `tau_s` (SSIM) and `tau_f` (pixels).
///
/// # Safety
/// `seq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_select(
    seq: *const PfSequence,
    tau_s: f64,
    tau_f: f64,
    out: *mut *mut PfSelection,
) -> PfStatus {
    non_null!(seq, out);
    *out = ptr::null_mut();
    let frames = &(*seq).frames;
    guard(move || {
        let cfg = SelectionConfig { tau_s, tau_f };
        match select_frames(frames, &cfg, &FlowConfig::default()) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(PfSelection { result }));
                PfStatus::Ok
            }
            Err(e) => fail(PfStatus::Selection, e.to_string()),
        }
    })
}

/// Number of selected frames, or 0 for null.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_selection_len(sel: *const PfSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.result.selected.len())
}

/// Copies up to `cap` selected indices into `buf`, ascending.
///
/// # Safety
/// `sel` must be a live handle; `buf` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn pf_selection_indices(
    sel: *const PfSelection,
    buf: *mut usize,
    cap: usize,
    written: *mut usize,
) -> PfStatus {
    non_null!(sel, buf, written);
    let selected = &(*sel).result.selected;
    let n = selected.len().min(cap);
    ptr::copy_nonoverlapping(selected.as_ptr(), buf, n);
    *written = n;
    PfStatus::Ok
}

/// # Safety
/// `sel` must come from [`pf_select`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pf_selection_free(sel: *mut PfSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}

/// Simulates `n` invert/edit pairs with durations `t1[i]`, `t2[i]` (ticks)
/// on `workers` workers of `capacity` memory units. Every task needs one
/// unit. With `dedicated`, even workers only invert and odd ones only edit.
///
/// # Safety
/// `t1` and `t2` must hold `n` values each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_schedule_two_stage(
    t1: *const u64,
    t2: *const u64,
    n: usize,
    workers: usize,
    capacity: u64,
    dedicated: bool,
    out: *mut *mut PfTrace,
) -> PfStatus {
    non_null!(t1, t2, out);
    *out = ptr::null_mut();
    guard(move || {
        let t1 = std::slice::from_raw_parts(t1, n);
        let t2 = std::slice::from_raw_parts(t2, n);
        let durations: Vec<(u64, u64)> = t1.iter().copied().zip(t2.iter().copied()).collect();
        let tasks = two_stage_tasks(&durations, (1, 1));
        let pool = ResourcePool::alternating(workers, capacity, workers, 0, dedicated);
        match run_schedule(&tasks, &pool, &NoopExecutor, Mode::Simulated) {
            Ok(trace) => {
                *out = Box::into_raw(Box::new(PfTrace { trace, tasks, pool }));
                PfStatus::Ok
            }
            Err(e @ (ScheduleError::BadPool(_) | ScheduleError::BadConfig(_))) => {
                fail(PfStatus::InvalidArgument, e.to_string())
            }
            Err(e) => fail(PfStatus::Schedule, e.to_string()),
        }
    })
}

/// Makespan in ticks, or NaN for null.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_trace_makespan(trace: *const PfTrace) -> f64 {
    trace.as_ref().map_or(f64::NAN, |t| t.trace.makespan)
}

/// Number of constraint violations found when checking the trace.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_trace_violation_count(trace: *const PfTrace) -> usize {
    trace
        .as_ref()
        .map_or(0, |t| validate_trace(&t.trace, &t.tasks, &t.pool).len())
}

/// The trace as JSON. Free the result with [`pf_string_free`]. Null on failure.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_trace_to_json(trace: *const PfTrace) -> *mut c_char {
    let Some(t) = trace.as_ref() else {
        set_error("trace is null");
        return ptr::null_mut();
    };
    match serde_json::to_string(&t.trace) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `trace` must come from [`pf_schedule_two_stage`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pf_trace_free(trace: *mut PfTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
