use std::ffi::CStr;
use std::ptr;

use hjreact_ffi::*;

fn model() -> *mut HjModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hj_model_new(1e-3, &mut m) }, HjStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { hj_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn energy_and_gradient_at_reactant_minimum() {
    let m = model();
    let (mut e, mut gx, mut gy) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(hj_model_energy(m, 0.623, 0.028, &mut e), HjStatus::Ok);
        assert_eq!(hj_model_gradient(m, 0.62350, 0.02804, &mut gx, &mut gy), HjStatus::Ok);
        hj_model_free(m);
    }
    assert!((e + 0.108).abs() < 1e-3);
    assert!(gx.abs() < 1e-3 && gy.abs() < 1e-3);
}

#[test]
fn stationary_points_and_buffer_size() {
    let m = model();
    let mut len = 0usize;
    let mut small = [HjStationaryPoint::default(); 2];
    let st = unsafe { hj_model_stationary_points(m, small.as_mut_ptr(), small.len(), &mut len) };
    assert_eq!(st, HjStatus::BufferTooSmall);
    assert_eq!(len, 5);
    let mut buf = [HjStationaryPoint::default(); 8];
    assert_eq!(unsafe { hj_model_stationary_points(m, buf.as_mut_ptr(), buf.len(), &mut len) }, HjStatus::Ok);
    assert_eq!(buf[..len].iter().filter(|p| p.kind == 0).count(), 3);
    assert_eq!(buf[..len].iter().filter(|p| p.kind == 1).count(), 2);
    unsafe { hj_model_free(m) };
}

#[test]
fn path_runs_from_reactants_to_products() {
    let m = model();
    let mut path = ptr::null_mut();
    let mut n = 0usize;
    let (mut first, mut last) = (HjPathPoint::default(), HjPathPoint::default());
    unsafe {
        assert_eq!(hj_path_new(m, &mut path), HjStatus::Ok);
        assert_eq!(hj_path_len(path, &mut n), HjStatus::Ok);
        assert_eq!(hj_path_point(path, 0, &mut first), HjStatus::Ok);
        assert_eq!(hj_path_point(path, n - 1, &mut last), HjStatus::Ok);
        assert_eq!(hj_path_point(path, n, &mut last), HjStatus::OutOfRange);
        hj_path_free(path);
        hj_model_free(m);
    }
    assert!((first.x - 0.623).abs() < 1e-2 && (last.x + 0.558).abs() < 1e-2);
    assert!(last.s > first.s);
}

#[test]
fn propagator_conserves_norm() {
    let m = model();
    let mut p = ptr::null_mut();
    let (mut norm, mut t, mut pr) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(hj_propagator_new(m, 128, 128, 0.05, 0.623, 0.028, 0.0125, 1.0, &mut p), HjStatus::Ok);
        assert_eq!(hj_propagator_step(p, 20), HjStatus::Ok);
        hj_propagator_time(p, &mut t);
        hj_propagator_norm(p, &mut norm);
        hj_propagator_restricted_norm(p, &mut pr);
        hj_propagator_free(p);
        hj_model_free(m);
    }
    assert!((t - 1.0).abs() < 1e-12);
    assert!((norm - 1.0).abs() < 1e-10, "{norm}");
    assert!((0.0..1e-3).contains(&pr), "{pr}");
}

#[test]
fn errors_are_codes_with_messages() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hj_model_new(-1.0, &mut m) }, HjStatus::InvalidParameter);
    assert!(m.is_null());
    assert!(last_error().contains("energy_scale"));

    let mut e = 0.0;
    assert_eq!(unsafe { hj_model_energy(ptr::null(), 0.0, 0.0, &mut e) }, HjStatus::NullPointer);

    let m = model();
    let mut p = ptr::null_mut();
    let st = unsafe { hj_propagator_new(m, 100, 64, 0.05, 0.623, 0.028, 0.0125, 1.0, &mut p) };
    assert_eq!(st, HjStatus::InvalidParameter);
    unsafe {
        hj_model_free(m);
        hj_model_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(hj_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api_and_compiles() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hjreact.h")).unwrap();
    for name in ["hj_model_new", "hj_path_point", "hj_propagator_step", "hj_last_error", "HJ_STATUS_OK", "HjModel"] {
        assert!(header.contains(name), "{name} missing");
    }
    // syntax check with the system C compiler when one is present
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", concat!(env!("CARGO_MANIFEST_DIR"), "/include/hjreact.h")])
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
