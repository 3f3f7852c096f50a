use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gorom_ffi::*;

fn last_error() -> String {
    let p = gorom_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_model() -> *mut GoromModel {
    let mut m = ptr::null_mut();
    let st = unsafe { gorom_model_generate(GoromProblemKind::AdvectionDiffusion, 64, 3, 2, 1, &mut m) };
    assert_eq!(st, GoromStatus::Ok);
    m
}

const CONFIG: &str = r#"{"training":{"kind":"sample","count":20,"seed":1},"max_iterations":3}"#;

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(gorom_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generate_dims_and_truth() {
    let m = small_model();
    let (mut n, mut d, mut l) = (0, 0, 0);
    assert_eq!(unsafe { gorom_model_dims(m, &mut n, &mut d, &mut l) }, GoromStatus::Ok);
    assert_eq!((n, d, l), (64, 3, 2));
    let xi = [1.0, 1.0, 1.0];
    let mut s = [0.0; 2];
    assert_eq!(unsafe { gorom_truth_output(m, xi.as_ptr(), 3, s.as_mut_ptr(), 2) }, GoromStatus::Ok);
    assert!(s.iter().all(|v| v.is_finite()));
    assert!(gorom_last_error().is_null());
    unsafe { gorom_model_free(m) };
}

#[test]
fn errors_map_to_codes_and_messages() {
    let m = small_model();
    let mut s = [0.0; 2];
    let bad = [1.0, 1.0];
    assert_eq!(unsafe { gorom_truth_output(m, bad.as_ptr(), 2, s.as_mut_ptr(), 2) }, GoromStatus::DomainViolation);
    assert!(!last_error().is_empty());
    let xi = [1.0; 3];
    assert_eq!(unsafe { gorom_truth_output(m, xi.as_ptr(), 3, s.as_mut_ptr(), 1) }, GoromStatus::Shape);
    assert_eq!(unsafe { gorom_truth_output(ptr::null(), xi.as_ptr(), 3, s.as_mut_ptr(), 2) }, GoromStatus::NullPointer);
    assert!(last_error().contains("model"));
    let mut out = ptr::null_mut();
    let dir = CString::new("/nonexistent/bundle").unwrap();
    let st = unsafe { gorom_model_load(dir.as_ptr(), &mut out) };
    assert_ne!(st, GoromStatus::Ok);
    assert!(out.is_null());
    let cfg = CString::new("{\"bogus\":1}").unwrap();
    assert_eq!(unsafe { gorom_reduced_build(m, cfg.as_ptr(), &mut ptr::null_mut()) }, GoromStatus::Config);
    unsafe { gorom_model_free(m) };
    unsafe { gorom_model_free(ptr::null_mut()) };
}

#[test]
fn build_save_load_eval_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = CString::new(tmp.path().join("b").to_str().unwrap()).unwrap();
    let spaces = CString::new(tmp.path().join("sp").to_str().unwrap()).unwrap();
    let m0 = small_model();
    assert_eq!(unsafe { gorom_model_save(m0, bundle.as_ptr()) }, GoromStatus::Ok);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gorom_model_load(bundle.as_ptr(), &mut m) }, GoromStatus::Ok);
    let cfg = CString::new(CONFIG).unwrap();
    let mut red = ptr::null_mut();
    assert_eq!(unsafe { gorom_reduced_build(m, cfg.as_ptr(), &mut red) }, GoromStatus::Ok);
    let (mut r, mut k) = (0, 0);
    assert_eq!(unsafe { gorom_reduced_dims(red, &mut r, &mut k) }, GoromStatus::Ok);
    assert!(r > 0 && k > 0);
    assert_eq!(unsafe { gorom_reduced_save(red, spaces.as_ptr()) }, GoromStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { gorom_reduced_load(m, spaces.as_ptr(), &mut back) }, GoromStatus::Ok);
    let xi = [0.7, 3.0, 20.0];
    for method in [GoromMethod::Primal, GoromMethod::Dual, GoromMethod::PrimalDual, GoromMethod::Saddle] {
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        assert_eq!(unsafe { gorom_reduced_eval(red, method, xi.as_ptr(), 3, a.as_mut_ptr(), 2) }, GoromStatus::Ok);
        assert_eq!(unsafe { gorom_reduced_eval(back, method, xi.as_ptr(), 3, b.as_mut_ptr(), 2) }, GoromStatus::Ok);
        assert_eq!(a, b);
        let mut delta = -1.0;
        let mut cert = true;
        let st = unsafe { gorom_reduced_estimate(back, method, xi.as_ptr(), 3, ptr::null_mut(), 0, &mut delta, &mut cert) };
        assert_eq!(st, GoromStatus::Ok);
        assert!(delta >= 0.0);
        assert!(!cert, "nonsymmetric model has no coercivity constant by default");
    }
    unsafe {
        gorom_reduced_free(red);
        gorom_reduced_free(back);
        gorom_model_free(m);
        gorom_model_free(m0);
    }
}

#[test]
fn offline_writes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let m = small_model();
    let cfg = CString::new(CONFIG).unwrap();
    let dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gorom_offline(m, cfg.as_ptr(), dir.as_ptr()) }, GoromStatus::Ok);
    assert!(tmp.path().join("trace.json").exists());
    assert!(tmp.path().join("spaces.json").exists());
    unsafe { gorom_model_free(m) };
}

#[test]
fn header_declares_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gorom.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["gorom_model_generate", "gorom_reduced_eval", "gorom_last_error", "GOROM_STATUS_OK", "typedef struct GoromModel GoromModel"] {
        assert!(text.contains(sym), "{sym}");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
