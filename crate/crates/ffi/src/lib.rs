//! C ABI over the simulator, the wire codec and the steering server.
//!
//! Every fallible function returns an [`LbsStatus`]; on failure the
//! message is kept per thread and read with [`lbs_last_error`]. Handles
//! are opaque and must be released with their `_free` (or, for servers,
//! `_shutdown`) function exactly once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lbsteer::engine::Engine;
use lbsteer::extract::{render, Axis, FieldId, SliceSpec};
use lbsteer::protocol::{encode, Decoder, MAX_MESSAGE_LEN, PROTOCOL_VERSION};
use lbsteer::scenario::Scenario;
use lbsteer::server::{self, ServerConfig, ServerHandle};
use lbsteer::Simulation;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Scenario = 3,
    Diverged = 4,
    Protocol = 5,
    Io = 6,
    /// The output buffer is too small; the required size was written.
    BufferTooSmall = 7,
    /// The decoder needs more bytes before the next message is complete.
    NeedMore = 8,
    Panic = 9,
}

/// Opaque simulation handle.
pub struct LbsSim {
    sim: Simulation,
}

/// Opaque incremental message decoder.
pub struct LbsDecoder {
    decoder: Decoder,
    /// Encoded message that did not fit the caller's buffer.
    held: Option<Vec<u8>>,
}

/// Opaque running server.
pub struct LbsServer {
    handle: ServerHandle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: LbsStatus, msg: impl Into<String>) -> LbsStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> LbsStatus) -> LbsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(LbsStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, LbsStatus> {
    if p.is_null() {
        return Err(fail(LbsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LbsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_mut() {
            Some(r) => r,
            None => return fail(LbsStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lbs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn lbs_protocol_version() -> u16 {
    PROTOCOL_VERSION
}

#[no_mangle]
pub extern "C" fn lbs_max_message_len() -> u32 {
    MAX_MESSAGE_LEN as u32
}

fn new_sim(scenario: Result<Scenario, lbsteer::scenario::ScenarioError>, seed: u64, out: *mut *mut LbsSim) -> LbsStatus {
    let built = scenario.and_then(|s| s.build(seed));
    match built {
        Ok((sim, _)) => {
            unsafe { *out = Box::into_raw(Box::new(LbsSim { sim })) };
            LbsStatus::Ok
        }
        Err(e) => fail(LbsStatus::Scenario, e.to_string()),
    }
}

/// Builds a simulation from a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_from_file(path: *const c_char, seed: u64, out: *mut *mut LbsSim) -> LbsStatus {
    guard(|| {
        if out.is_null() {
            return fail(LbsStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        new_sim(Scenario::load(Path::new(path)), seed, out)
    })
}

/// Builds a simulation from scenario text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_from_text(text: *const c_char, seed: u64, out: *mut *mut LbsSim) -> LbsStatus {
    guard(|| {
        if out.is_null() {
            return fail(LbsStatus::NullPointer, "out is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        new_sim(Scenario::parse(text, "ffi"), seed, out)
    })
}

/// # Safety
/// `sim` must come from `lbs_sim_from_*` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_free(sim: *mut LbsSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `n` iterations. On divergence the simulation stays at the
/// last stable state and `LBS_STATUS_DIVERGED` is returned.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_step(sim: *mut LbsSim, n: u64) -> LbsStatus {
    guard(|| {
        let s = deref!(sim);
        match s.sim.step_n(n) {
            Ok(_) => LbsStatus::Ok,
            Err(e) => fail(LbsStatus::Diverged, e.to_string()),
        }
    })
}

/// # Safety
/// `sim` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_iteration(sim: *const LbsSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.sim.iteration())
}

/// # Safety
/// `sim` must be a live handle or null (which yields NaN).
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_total_mass(sim: *const LbsSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.sim.total_mass())
}

/// Writes the grid extent as `[nx, ny, nz]`.
///
/// # Safety
/// `sim` must be a live handle and `dims` point to three writable u32.
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_dims(sim: *const LbsSim, dims: *mut u32) -> LbsStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(LbsStatus::NullPointer, "sim is null");
        };
        if dims.is_null() {
            return fail(LbsStatus::NullPointer, "dims is null");
        }
        for (i, v) in s.sim.dims().as_array().into_iter().enumerate() {
            *dims.add(i) = v as u32;
        }
        LbsStatus::Ok
    })
}

/// Shape of a rendered field.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LbsFrameShape {
    pub width: u32,
    pub height: u32,
    pub components: u32,
    /// Number of f32 values, `width * height * components`.
    pub len: u64,
}

/// Renders field `field_id` on the slice `axis`/`index` into `buf`
/// (`cap` floats). With a null `buf` or a short `cap` only `shape` is
/// filled and `LBS_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `sim` must be a live handle, `shape` writable, and `buf` valid for
/// `cap` floats when non-null.
#[no_mangle]
pub unsafe extern "C" fn lbs_sim_render(
    sim: *const LbsSim,
    field_id: u16,
    axis: u8,
    index: u32,
    buf: *mut f32,
    cap: u64,
    shape: *mut LbsFrameShape,
) -> LbsStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(LbsStatus::NullPointer, "sim is null");
        };
        let shape = deref!(shape);
        let Some(field) = FieldId::from_u16(field_id) else {
            return fail(LbsStatus::InvalidArgument, format!("unknown field id {field_id}"));
        };
        let Some(axis) = Axis::from_u8(axis) else {
            return fail(LbsStatus::InvalidArgument, format!("axis {axis} is not 0, 1 or 2"));
        };
        let r = match render(s.sim.field(), s.sim.flags(), field, SliceSpec { axis, index }) {
            Ok(r) => r,
            Err(e) => return fail(LbsStatus::InvalidArgument, e.to_string()),
        };
        *shape = LbsFrameShape {
            width: r.width,
            height: r.height,
            components: r.components,
            len: r.data.len() as u64,
        };
        if buf.is_null() || cap < r.data.len() as u64 {
            return fail(
                LbsStatus::BufferTooSmall,
                format!("need {} floats, have {cap}", r.data.len()),
            );
        }
        ptr::copy_nonoverlapping(r.data.as_ptr(), buf, r.data.len());
        LbsStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn lbs_decoder_new() -> *mut LbsDecoder {
    Box::into_raw(Box::new(LbsDecoder {
        decoder: Decoder::new(),
        held: None,
    }))
}

/// # Safety
/// `d` must come from `lbs_decoder_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lbs_decoder_free(d: *mut LbsDecoder) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Appends received bytes.
///
/// # Safety
/// `d` must be a live handle and `bytes` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lbs_decoder_push(d: *mut LbsDecoder, bytes: *const u8, len: usize) -> LbsStatus {
    guard(|| {
        let d = deref!(d);
        if len > 0 {
            if bytes.is_null() {
                return fail(LbsStatus::NullPointer, "bytes is null");
            }
            d.decoder.push(std::slice::from_raw_parts(bytes, len));
        }
        LbsStatus::Ok
    })
}

/// Takes the next complete message: writes its type and copies its
/// payload (canonically re-encoded) into `buf`. Returns
/// `LBS_STATUS_NEED_MORE` if no message is complete yet and
/// `LBS_STATUS_PROTOCOL` once the stream is malformed. When `cap` is too
/// small the message stays queued and the payload size is written.
///
/// # Safety
/// `d` must be a live handle, `msg_type` and `payload_len` writable, and
/// `buf` valid for `cap` bytes when non-null.
#[no_mangle]
pub unsafe extern "C" fn lbs_decoder_next(
    d: *mut LbsDecoder,
    msg_type: *mut u16,
    buf: *mut u8,
    cap: usize,
    payload_len: *mut usize,
) -> LbsStatus {
    guard(|| {
        let d = deref!(d);
        let msg_type = deref!(msg_type);
        let payload_len = deref!(payload_len);
        let bytes = match d.held.take() {
            Some(b) => b,
            None => match d.decoder.next_message() {
                Ok(Some(m)) => match encode(&m) {
                    Ok(b) => b,
                    Err(e) => return fail(LbsStatus::Protocol, e.to_string()),
                },
                Ok(None) => return LbsStatus::NeedMore,
                Err(e) => return fail(LbsStatus::Protocol, e.to_string()),
            },
        };
        *msg_type = u16::from_le_bytes([bytes[4], bytes[5]]);
        let payload = &bytes[6..];
        *payload_len = payload.len();
        if payload.len() > cap || (buf.is_null() && !payload.is_empty()) {
            let need = payload.len();
            d.held = Some(bytes);
            return fail(
                LbsStatus::BufferTooSmall,
                format!("need {need} bytes, have {cap}"),
            );
        }
        if !payload.is_empty() {
            ptr::copy_nonoverlapping(payload.as_ptr(), buf, payload.len());
        }
        LbsStatus::Ok
    })
}

/// Starts a steering server that owns the simulation. `sim` is consumed
/// even on failure. Pass null for a transport to disable it; port 0 picks
/// a free port.
///
/// # Safety
/// `sim` must be a live handle, the binds null or NUL-terminated, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lbs_server_start(
    sim: *mut LbsSim,
    tcp_bind: *const c_char,
    ws_bind: *const c_char,
    start_running: bool,
    out: *mut *mut LbsServer,
) -> LbsStatus {
    guard(|| {
        if sim.is_null() {
            return fail(LbsStatus::NullPointer, "sim is null");
        }
        let sim = Box::from_raw(sim).sim;
        if out.is_null() {
            return fail(LbsStatus::NullPointer, "out is null");
        }
        let bind = |p: *const c_char, what| -> Result<Option<String>, LbsStatus> {
            if p.is_null() {
                Ok(None)
            } else {
                str_arg(p, what).map(|s| Some(s.to_string()))
            }
        };
        let (bind_tcp, bind_ws) = match (bind(tcp_bind, "tcp_bind"), bind(ws_bind, "ws_bind")) {
            (Ok(t), Ok(w)) => (t, w),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let config = ServerConfig {
            bind_tcp,
            bind_ws,
            ..ServerConfig::default()
        };
        let (mut engine, _) = Engine::new(sim);
        if start_running {
            engine.start();
        }
        match server::serve(engine, &config) {
            Ok(handle) => {
                *out = Box::into_raw(Box::new(LbsServer { handle }));
                LbsStatus::Ok
            }
            Err(e) => fail(LbsStatus::Io, e.to_string()),
        }
    })
}

/// Bound TCP port, or 0 when the transport is disabled.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lbs_server_tcp_port(s: *const LbsServer) -> u16 {
    s.as_ref().and_then(|s| s.handle.tcp_addr()).map_or(0, |a| a.port())
}

/// Bound WebSocket port, or 0 when the transport is disabled.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lbs_server_ws_port(s: *const LbsServer) -> u16 {
    s.as_ref().and_then(|s| s.handle.ws_addr()).map_or(0, |a| a.port())
}

/// # Safety
/// `s` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn lbs_server_iteration(s: *const LbsServer) -> u64 {
    s.as_ref().map_or(0, |s| s.handle.iteration())
}

/// Stops the server, closes every session and frees the handle along
/// with the simulation it owned.
///
/// # Safety
/// `s` must be a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn lbs_server_shutdown(s: *mut LbsServer) {
    if !s.is_null() {
        let s = Box::from_raw(s);
        let _ = catch_unwind(AssertUnwindSafe(|| drop(s.handle.shutdown())));
    }
}
