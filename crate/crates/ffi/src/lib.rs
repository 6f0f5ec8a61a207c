//! C ABI over `torus-cascade`.
//!
//! Every function returns a [`TcStatus`]; results come back through out
//! pointers. Handles are opaque and owned by the caller once created; free
//! each with its `_free` function exactly once. After a non-`TC_STATUS_OK` status,
//! `tc_last_error_message` describes the failure on the calling thread.
//! Panics never cross the boundary; they surface as `TC_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use torus_cascade::chain::{apply_move, exp_ta, propagate_exact, ChainState, MoveKind, MoveSpec};
use torus_cascade::criteria::{evaluate, CriteriaConfig, Status};
use torus_cascade::lattice::{construct_family, verify_properties, FrequencyFamily, LatticeVec};
use torus_cascade::potential::PotentialSpec;
use torus_cascade::schedule::{build_schedule, BetaMode};
use torus_cascade::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A 128-bit lattice computation overflowed, or a value does not fit the C type.
    Overflow = 3,
    /// Integration, underflow or other numerical failure.
    Numeric = 4,
    /// The caller's buffer is too small; the required size was reported.
    BufferTooSmall = 5,
    /// A criterion or certification ran and did not pass.
    VerificationFailed = 6,
    Internal = 7,
}

/// Drive amplitude convention, passed to [`tc_cascade_new`] as its integer value.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcBetaMode {
    Scaled = 0,
    Paper = 1,
}

/// Certified frequency family.
pub struct TcFamily {
    inner: FrequencyFamily,
}

/// Family plus drive schedule: everything needed to evaluate the chain and the potential.
pub struct TcCascade {
    inner: PotentialSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> TcStatus {
    match e {
        Error::Overflow { .. } => TcStatus::Overflow,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) | Error::Json(_) => TcStatus::InvalidArgument,
        _ => TcStatus::Numeric,
    }
}

/// Runs `f`, recording any error or panic for `tc_last_error_message`.
fn guarded(f: impl FnOnce() -> Result<(), (TcStatus, String)>) -> TcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TcStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TcStatus::Internal
        }
    }
}

fn lib<T>(r: torus_cascade::Result<T>) -> Result<T, (TcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TcStatus, String) {
    (TcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: String) -> (TcStatus, String) {
    (TcStatus::InvalidArgument, msg)
}

/// # Safety
/// `p` must be null or valid for reads of `T`.
unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (TcStatus, String)> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or valid for writes of `T`.
unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), (TcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { p.write(v) };
    Ok(())
}

/// Copies `text` and a NUL into `buf` of `len` bytes; `needed` (if non-null)
/// receives the full size including the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes; `needed` null or writable.
unsafe fn write_str(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), (TcStatus, String)> {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        unsafe { needed.write(bytes.len() + 1) };
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return Err((TcStatus::BufferTooSmall, format!("need {} bytes", bytes.len() + 1)));
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        buf.add(bytes.len()).write(0);
    }
    Ok(())
}

/// Copies the last error message of this thread (empty after success).
///
/// # Safety
/// `buf` must be null or valid for `len` bytes; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn tc_last_error_message(buf: *mut c_char, len: usize, needed: *mut usize) -> TcStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match catch_unwind(AssertUnwindSafe(|| unsafe { write_str(&msg, buf, len, needed) })) {
        Ok(Ok(())) => TcStatus::Ok,
        Ok(Err((s, _))) => s,
        Err(_) => TcStatus::Internal,
    }
}

/// Constructs and certifies the family from `m0` up to index `k_max`.
/// Fails with `TC_STATUS_OVERFLOW` when the norms outgrow 128-bit integers and with
/// `TC_STATUS_VERIFICATION_FAILED` if certification does not pass.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tc_family_new(m0_x: i64, m0_y: i64, k_max: usize, out: *mut *mut TcFamily) -> TcStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = lib(construct_family(LatticeVec::new(m0_x.into(), m0_y.into()), k_max))?;
        let report = lib(verify_properties(&f))?;
        if !report.all_passed() {
            return Err((TcStatus::VerificationFailed, format!("{report}")));
        }
        unsafe { out.write(Box::into_raw(Box::new(TcFamily { inner: f }))) };
        Ok(())
    })
}

/// # Safety
/// `family` must be null or a handle from `tc_family_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tc_family_free(family: *mut TcFamily) {
    if !family.is_null() {
        drop(unsafe { Box::from_raw(family) });
    }
}

/// # Safety
/// `family` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_family_k_max(family: *const TcFamily, out: *mut usize) -> TcStatus {
    guarded(|| unsafe { write_out(out, deref(family, "family")?.inner.k_max(), "out") })
}

fn coords(v: LatticeVec) -> Result<[i64; 2], (TcStatus, String)> {
    match (i64::try_from(v.x), i64::try_from(v.y)) {
        (Ok(x), Ok(y)) => Ok([x, y]),
        _ => Err((TcStatus::Overflow, format!("{v} does not fit 64-bit integers"))),
    }
}

/// Frequency `m_index` for `index ≤ K + 1`, as two 64-bit integers in `out`.
///
/// # Safety
/// `family` must be a live handle; `out` valid for two `int64_t`.
#[no_mangle]
pub unsafe extern "C" fn tc_family_m(family: *const TcFamily, index: usize, out: *mut i64) -> TcStatus {
    guarded(|| unsafe {
        let f = &deref(family, "family")?.inner;
        let v = coords(lib(f.m_at(index))?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), out, 2);
        Ok(())
    })
}

/// Potential mode `l_index` for `index ≤ K`, as two 64-bit integers in `out`.
///
/// # Safety
/// `family` must be a live handle; `out` valid for two `int64_t`.
#[no_mangle]
pub unsafe extern "C" fn tc_family_l(family: *const TcFamily, index: usize, out: *mut i64) -> TcStatus {
    guarded(|| unsafe {
        let f = &deref(family, "family")?.inner;
        let l = *f.l.get(index).ok_or_else(|| invalid(format!("l_{index} is beyond K = {}", f.k_max())))?;
        let v = coords(l)?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), out, 2);
        Ok(())
    })
}

/// The family as JSON text.
///
/// # Safety
/// `family` must be a live handle; `buf` null or valid for `len` bytes;
/// `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn tc_family_to_json(family: *const TcFamily, buf: *mut c_char, len: usize, needed: *mut usize) -> TcStatus {
    guarded(|| unsafe {
        let text = lib(deref(family, "family")?.inner.to_json())?;
        write_str(&text, buf, len, needed)
    })
}

/// Parses family JSON and recertifies it.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_family_from_json(json: *const c_char, out: *mut *mut TcFamily) -> TcStatus {
    guarded(|| unsafe {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| invalid(format!("json is not UTF-8: {e}")))?;
        let f = lib(FrequencyFamily::from_json(text))?;
        if !lib(verify_properties(&f))?.all_passed() {
            return Err((TcStatus::VerificationFailed, "family does not certify".into()));
        }
        out.write(Box::into_raw(Box::new(TcFamily { inner: f })));
        Ok(())
    })
}

/// Builds the `cycles`-cycle schedule on a copy of `family`. `mode` is a
/// `tc_beta_mode` value; `base` and `ratio` are used only in scaled mode.
///
/// # Safety
/// `family` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_cascade_new(
    family: *const TcFamily,
    cycles: usize,
    mode: u32,
    base: f64,
    ratio: f64,
    out: *mut *mut TcCascade,
) -> TcStatus {
    guarded(|| unsafe {
        let f = deref(family, "family")?.inner.clone();
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            m if m == TcBetaMode::Scaled as u32 => BetaMode::Scaled { base, ratio },
            m if m == TcBetaMode::Paper as u32 => BetaMode::Paper,
            m => return Err(invalid(format!("unknown beta mode {m}"))),
        };
        let sched = lib(build_schedule(&f, cycles, mode))?;
        let spec = lib(PotentialSpec::new(f, sched))?;
        out.write(Box::into_raw(Box::new(TcCascade { inner: spec })));
        Ok(())
    })
}

/// # Safety
/// `cascade` must be null or a handle from `tc_cascade_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tc_cascade_free(cascade: *mut TcCascade) {
    if !cascade.is_null() {
        drop(unsafe { Box::from_raw(cascade) });
    }
}

/// Cycle boundary `T_n` for `n ≤ cycles`.
///
/// # Safety
/// `cascade` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_cascade_cycle_time(cascade: *const TcCascade, n: usize, out: *mut f64) -> TcStatus {
    guarded(|| unsafe {
        let s = &deref(cascade, "cascade")?.inner.schedule;
        let t = *s.cycle_times.get(n).ok_or_else(|| invalid(format!("T_{n} is beyond {} cycles", s.cycles())))?;
        write_out(out, t, "out")
    })
}

/// Exact chain state at `t` from the standard initial data: `p` receives
/// `p_0..p_{K+1}` (`K + 2` values), `s` receives `s_0..s_K` (`K + 1` values).
///
/// # Safety
/// `cascade` must be a live handle; `p` and `s` valid for `p_len`, `s_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tc_cascade_chain_state(
    cascade: *const TcCascade,
    t: f64,
    p: *mut f64,
    p_len: usize,
    s: *mut f64,
    s_len: usize,
) -> TcStatus {
    guarded(|| unsafe {
        let spec = &deref(cascade, "cascade")?.inner;
        let k = spec.family.k_max();
        if p.is_null() || s.is_null() {
            return Err(null("p or s"));
        }
        if p_len != k + 2 || s_len != k + 1 {
            return Err(invalid(format!("need p_len = {} and s_len = {}, got {p_len} and {s_len}", k + 2, k + 1)));
        }
        let st = lib(propagate_exact(&spec.schedule, &ChainState::initial(k), t))?;
        std::ptr::copy_nonoverlapping(st.p.as_ptr(), p, p_len);
        std::ptr::copy_nonoverlapping(st.s.as_ptr(), s, s_len);
        Ok(())
    })
}

/// `‖∂_t^m V(t)‖_{H^s}`.
///
/// # Safety
/// `cascade` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_cascade_potential_norm(cascade: *const TcCascade, t: f64, s: f64, m: usize, out: *mut f64) -> TcStatus {
    guarded(|| unsafe {
        let spec = &deref(cascade, "cascade")?.inner;
        if !(s >= 0.0 && s.is_finite()) {
            return Err(invalid(format!("s must be finite and nonnegative, got {s}")));
        }
        write_out(out, spec.v_sobolev_norm(t, s, m), "out")
    })
}

/// `exp(tA)` in row-major order.
///
/// # Safety
/// `out` must be valid for nine doubles.
#[no_mangle]
pub unsafe extern "C" fn tc_exp_ta(t: f64, out: *mut f64) -> TcStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = exp_ta(t);
        for i in 0..3 {
            for j in 0..3 {
                out.add(3 * i + j).write(m[(i, j)]);
            }
        }
        Ok(())
    })
}

/// Applies move 1, 2 or 3 to the triple `(p_{k+1}, p_k, s_k)`.
///
/// # Safety
/// `input` and `out` must be valid for three doubles each.
#[no_mangle]
pub unsafe extern "C" fn tc_apply_move(kind: u32, input: *const f64, out: *mut f64) -> TcStatus {
    guarded(|| unsafe {
        let kind = match kind {
            1 => MoveKind::Move1,
            2 => MoveKind::Move2,
            3 => MoveKind::Move3,
            _ => return Err(invalid(format!("move kind must be 1, 2 or 3, got {kind}"))),
        };
        if input.is_null() || out.is_null() {
            return Err(null("input or out"));
        }
        let v = [input.read(), input.add(1).read(), input.add(2).read()];
        let r = apply_move(v, &MoveSpec::new(kind, 0));
        std::ptr::copy_nonoverlapping(r.as_ptr(), out, 3);
        Ok(())
    })
}

/// Runs acceptance criterion `id` (1–10) at its acceptance setting. The
/// one-line outcome is copied to `buf`; the status is `TC_STATUS_OK` on pass and
/// `TC_STATUS_VERIFICATION_FAILED` otherwise.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn tc_run_criterion(id: u8, buf: *mut c_char, len: usize, needed: *mut usize) -> TcStatus {
    guarded(|| unsafe {
        if !(1..=10).contains(&id) {
            return Err(invalid(format!("criterion id must be 1..=10, got {id}")));
        }
        let outcome = evaluate(id, &CriteriaConfig::default());
        let line = outcome.to_string();
        if buf.is_null() {
            if !needed.is_null() {
                needed.write(line.len() + 1);
            }
        } else {
            write_str(&line, buf, len, needed)?;
        }
        match outcome.status {
            Status::Pass => Ok(()),
            _ => Err((TcStatus::VerificationFailed, line)),
        }
    })
}
