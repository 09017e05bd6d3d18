//! Exercises the C ABI exactly as a foreign caller would: through raw
//! pointers and status codes.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use visc_nonlocal_ffi::*;

fn scenarios() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .join("core/scenarios")
}

#[test]
fn kernel_lifecycle_and_moments() {
    let mut k: *mut VnKernel = ptr::null_mut();
    assert_eq!(vn_kernel_new_box(1, 1.0, 1.0, &mut k), VnStatus::VnOk);
    assert!(!k.is_null());

    let (mut near, mut tail, mut err) = (0.0, 0.0, 0.0);
    let st = unsafe { vn_kernel_verify(k, 1e-10, &mut near, &mut tail, &mut err) };
    assert_eq!(st, VnStatus::VnOk);
    assert!((near - 2.0 / 3.0).abs() < 1e-8);
    assert_eq!(tail, 0.0);

    let mut m = [0.0f64; 1];
    let st = unsafe { vn_kernel_small_ball_moment(k, 0.5, m.as_mut_ptr()) };
    assert_eq!(st, VnStatus::VnOk);
    assert!((m[0] - 1.0 / 12.0).abs() < 1e-12);

    unsafe { vn_kernel_free(k) };
}

#[test]
fn divergent_kernel_reports_status_and_message() {
    let mut k: *mut VnKernel = ptr::null_mut();
    assert_eq!(
        vn_kernel_new_truncated_stable(1, 2.1, 1.0, &mut k),
        VnStatus::VnOk
    );
    let (mut near, mut tail, mut err) = (0.0, 0.0, 0.0);
    let st = unsafe { vn_kernel_verify(k, 1e-10, &mut near, &mut tail, &mut err) };
    assert_eq!(st, VnStatus::VnErrDivergentMoment);
    let msg = unsafe { CStr::from_ptr(vn_last_error_message()) };
    assert!(msg.to_string_lossy().contains("divergent"));
    unsafe { vn_kernel_free(k) };
}

#[test]
fn null_arguments_rejected() {
    assert_eq!(
        vn_kernel_new_box(1, 1.0, 1.0, ptr::null_mut()),
        VnStatus::VnErrInvalidArgument
    );
    let st = unsafe { vn_kernel_verify(ptr::null(), 1e-10, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, VnStatus::VnErrInvalidArgument);
    unsafe { vn_kernel_free(ptr::null_mut()) }; // no-op
}

#[test]
fn glue_eval_matches_lemma_values() {
    let mut g: *mut VnGlue = ptr::null_mut();
    assert_eq!(vn_glue_new(-1.0, 3.0, &mut g), VnStatus::VnOk);
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    let st = unsafe { vn_glue_eval(g, 1.0, &mut v, &mut d1, &mut d2) };
    assert_eq!(st, VnStatus::VnOk);
    assert!((v + 1.0).abs() < 1e-12);
    assert!((d1 + 2.0).abs() < 1e-12);
    assert!((d2 + 2.0).abs() < 1e-12);
    // outside the domain
    let st = unsafe { vn_glue_eval(g, 3.5, &mut v, &mut d1, &mut d2) };
    assert_eq!(st, VnStatus::VnErrInvalidArgument);
    unsafe { vn_glue_free(g) };
    // invalid parameters
    let mut bad: *mut VnGlue = ptr::null_mut();
    assert_eq!(vn_glue_new(1.0, 3.0, &mut bad), VnStatus::VnErrInvalidArgument);
}

#[test]
fn scenario_runs_through_the_c_surface() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = CString::new(
        scenarios().join("zero_case.toml").to_str().unwrap(),
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();

    let st = unsafe { vn_run_equivalence_suite(scenario.as_ptr(), out.as_ptr()) };
    assert_eq!(st, VnStatus::VnOk);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("study.csv").exists());
    assert!(dir.path().join("plotdata.csv").exists());

    let def = CString::new("B").unwrap();
    let st = unsafe {
        vn_run_check(scenario.as_ptr(), def.as_ptr(), ptr::null(), out.as_ptr())
    };
    assert_eq!(st, VnStatus::VnOk);

    // bad definition string
    let bad = CString::new("Z").unwrap();
    let st = unsafe {
        vn_run_check(scenario.as_ptr(), bad.as_ptr(), ptr::null(), out.as_ptr())
    };
    assert_eq!(st, VnStatus::VnErrScenario);
}

#[test]
fn generated_header_covers_the_surface() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/visc_nonlocal.h");
    let text = std::fs::read_to_string(header).expect("cbindgen header present");
    for symbol in [
        "vn_kernel_new_box",
        "vn_kernel_new_truncated_stable",
        "vn_kernel_verify",
        "vn_kernel_small_ball_moment",
        "vn_kernel_free",
        "vn_glue_new",
        "vn_glue_eval",
        "vn_glue_free",
        "vn_run_check",
        "vn_run_equivalence_suite",
        "vn_last_error_message",
        "VnKernel",
        "VnGlue",
        "VnStatus",
    ] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
}
