use std::ffi::{c_char, CStr, CString};
use std::ptr;

use torus_cascade_ffi::*;

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe { tc_last_error_message(ptr::null_mut(), 0, &mut needed) };
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { tc_last_error_message(buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, TcStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn family(k: usize) -> *mut TcFamily {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { tc_family_new(1, 0, k, &mut f) }, TcStatus::Ok, "{}", last_error());
    f
}

#[test]
fn family_round_trip_through_json() {
    let f = family(6);
    let mut needed = 0usize;
    assert_eq!(unsafe { tc_family_to_json(f, ptr::null_mut(), 0, &mut needed) }, TcStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { tc_family_to_json(f, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, TcStatus::Ok);
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_owned();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { tc_family_from_json(json.as_ptr(), &mut g) }, TcStatus::Ok);
    let (mut a, mut b) = ([0i64; 2], [0i64; 2]);
    for i in 0..=7 {
        unsafe {
            assert_eq!(tc_family_m(f, i, a.as_mut_ptr()), TcStatus::Ok);
            assert_eq!(tc_family_m(g, i, b.as_mut_ptr()), TcStatus::Ok);
        }
        assert_eq!(a, b);
    }
    let mut k = 0usize;
    assert_eq!(unsafe { tc_family_k_max(g, &mut k) }, TcStatus::Ok);
    assert_eq!(k, 6);
    unsafe {
        tc_family_free(f);
        tc_family_free(g);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { tc_family_new(1, 0, 30, &mut f) }, TcStatus::Overflow);
    assert!(f.is_null());
    assert!(last_error().contains("l_19"), "{}", last_error());
    assert_eq!(unsafe { tc_family_new(1, 0, 3, ptr::null_mut()) }, TcStatus::NullPointer);
    assert_eq!(unsafe { tc_family_k_max(ptr::null(), &mut 0) }, TcStatus::NullPointer);

    let g = family(4);
    let mut out = [0i64; 2];
    assert_eq!(unsafe { tc_family_l(g, 5, out.as_mut_ptr()) }, TcStatus::InvalidArgument);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { tc_cascade_new(g, 4, TcBetaMode::Scaled as u32, 0.05, 0.5, &mut c) }, TcStatus::InvalidArgument);
    assert_eq!(unsafe { tc_cascade_new(g, 1, 7, 0.05, 0.5, &mut c) }, TcStatus::InvalidArgument);
    assert_eq!(unsafe { tc_cascade_new(g, 3, TcBetaMode::Paper as u32, 0.0, 0.0, &mut c) }, TcStatus::Numeric);
    assert!(last_error().contains("underflow"), "{}", last_error());

    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { tc_family_from_json(bad.as_ptr(), &mut f) }, TcStatus::InvalidArgument);
    assert_eq!(unsafe { tc_apply_move(4, [0.0; 3].as_ptr(), [0.0; 3].as_mut_ptr()) }, TcStatus::InvalidArgument);
    unsafe { tc_family_free(g) };
    // a success clears the message
    assert_eq!(unsafe { tc_exp_ta(0.0, [0.0; 9].as_mut_ptr()) }, TcStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn cascade_reaches_the_shifted_pattern() {
    let f = family(10);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { tc_cascade_new(f, 3, TcBetaMode::Scaled as u32, 0.05, 0.5, &mut c) }, TcStatus::Ok);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for n in 0..=3 {
        let mut t = 0.0;
        assert_eq!(unsafe { tc_cascade_cycle_time(c, n, &mut t) }, TcStatus::Ok);
        let (mut p, mut s) = ([0.0; 12], [0.0; 11]);
        assert_eq!(unsafe { tc_cascade_chain_state(c, t, p.as_mut_ptr(), 12, s.as_mut_ptr(), 11) }, TcStatus::Ok);
        assert!((p[n + 1] - 0.5).abs() < 1e-12 && (p[n] + r).abs() < 1e-12 && (s[n] - 0.5).abs() < 1e-12);
        let mass: f64 = p.iter().chain(&s).map(|x| x * x).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
    let mut v = -1.0;
    let mut t3 = 0.0;
    unsafe { tc_cascade_cycle_time(c, 3, &mut t3) };
    assert_eq!(unsafe { tc_cascade_potential_norm(c, t3 + 1.0, 1.0, 0, &mut v) }, TcStatus::Ok);
    assert_eq!(v, 0.0);
    assert_eq!(unsafe { tc_cascade_potential_norm(c, 5.0, 1.0, 0, &mut v) }, TcStatus::Ok);
    assert!(v > 0.0);
    assert_eq!(unsafe { tc_cascade_chain_state(c, 1.0, [0.0; 3].as_mut_ptr(), 3, [0.0; 3].as_mut_ptr(), 3) }, TcStatus::InvalidArgument);
    unsafe {
        tc_cascade_free(c);
        tc_family_free(f);
    }
}

#[test]
fn moves_and_exponential() {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = [0.0; 3];
    assert_eq!(unsafe { tc_apply_move(1, [0.5, -r, 0.5].as_ptr(), out.as_mut_ptr()) }, TcStatus::Ok);
    assert!((out[0] - r).abs() < 1e-12 && out[1].abs() < 1e-12 && (out[2] - r).abs() < 1e-12);
    let mut m = [0.0; 9];
    assert_eq!(unsafe { tc_exp_ta(0.7, m.as_mut_ptr()) }, TcStatus::Ok);
    // rows of an orthogonal matrix are orthonormal
    for i in 0..3 {
        for j in 0..3 {
            let d: f64 = (0..3).map(|k| m[3 * i + k] * m[3 * j + k]).sum();
            assert!((d - f64::from(u8::from(i == j))).abs() < 1e-12);
        }
    }
}

#[test]
fn criterion_runs_through_the_boundary() {
    let mut needed = 0usize;
    assert_eq!(unsafe { tc_run_criterion(1, ptr::null_mut(), 0, &mut needed) }, TcStatus::Ok);
    assert!(needed > 1);
    assert_eq!(unsafe { tc_run_criterion(3, ptr::null_mut(), 0, &mut needed) }, TcStatus::Ok);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { tc_run_criterion(3, buf.as_mut_ptr(), buf.len(), &mut needed) }, TcStatus::Ok);
    let line = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert!(line.starts_with("criterion  3 [PASS]"), "{line}");
    assert_eq!(unsafe { tc_run_criterion(11, ptr::null_mut(), 0, ptr::null_mut()) }, TcStatus::InvalidArgument);
}
