//! C ABI for the viscosity-solution verification toolkit.
//!
//! Conventions: every fallible call returns a `VnStatus`; out-parameters are
//! written only on `VN_OK`. Handles are opaque, created and freed by this
//! library, and must not be shared across a free. `vn_last_error_message`
//! returns a thread-local, NUL-terminated description of the most recent
//! failure on the calling thread, valid until the next failing call there.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};

use visc_nonlocal::checkers::DefinitionId;
use visc_nonlocal::error::Error;
use visc_nonlocal::forge::GlueSpline1D;
use visc_nonlocal::functions::Mode;
use visc_nonlocal::harness::{run_check, run_equivalence_suite};
use visc_nonlocal::levy::{verify_levy_integrability, LevyKernel};
use visc_nonlocal::quadrature::QuadratureConfig;
use visc_nonlocal::report;
use visc_nonlocal::scenario::Scenario;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VnStatus {
    VnOk = 0,
    VnErrInvalidArgument = 1,
    VnErrDivergentMoment = 2,
    VnErrUnsupportedDimension = 3,
    VnErrNotSmooth = 4,
    VnErrScenario = 5,
    VnErrCoherence = 6,
    VnErrIo = 7,
    VnErrInternal = 8,
}

/// Opaque Levy kernel handle.
#[repr(C)]
pub struct VnKernel {
    _private: [u8; 0],
}

/// Opaque glue-spline handle.
#[repr(C)]
pub struct VnGlue {
    _private: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn status_of(err: &Error) -> VnStatus {
    match err {
        Error::DivergentMoment(_) => VnStatus::VnErrDivergentMoment,
        Error::UnsupportedDimension(_) => VnStatus::VnErrUnsupportedDimension,
        Error::NotSmooth(_) => VnStatus::VnErrNotSmooth,
        Error::InvalidParameters(_) | Error::OutOfDomain(_) => VnStatus::VnErrInvalidArgument,
        Error::ScenarioInvalid(_) => VnStatus::VnErrScenario,
        Error::IoFailure(_) => VnStatus::VnErrIo,
        Error::NoValidScale(_)
        | Error::ExtensionFailure(_)
        | Error::JetRejected(_)
        | Error::MaxViolated(_)
        | Error::PhiCertificateFailed(_) => VnStatus::VnErrInvalidArgument,
    }
}

fn fail(err: Error) -> VnStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

/// Most recent error message on this thread; empty string when none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn kernel_out(out: *mut *mut VnKernel, result: Result<LevyKernel, Error>) -> VnStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return VnStatus::VnErrInvalidArgument;
    }
    match result {
        Ok(k) => {
            let ptr = Box::into_raw(Box::new(k)) as *mut VnKernel;
            unsafe { *out = ptr };
            VnStatus::VnOk
        }
        Err(e) => fail(e),
    }
}

unsafe fn kernel_ref<'a>(ptr: *const VnKernel) -> Option<&'a LevyKernel> {
    (ptr as *const LevyKernel).as_ref()
}

/// Compound-Poisson box kernel: q = intensity on |z| <= cutoff.
#[no_mangle]
pub extern "C" fn vn_kernel_new_box(
    dim: usize,
    intensity: f64,
    cutoff: f64,
    out: *mut *mut VnKernel,
) -> VnStatus {
    kernel_out(out, LevyKernel::box_kernel(dim, intensity, cutoff))
}

/// Truncated alpha-stable kernel: q = |z|^{-dim-alpha} on 0 < |z| <= cutoff.
#[no_mangle]
pub extern "C" fn vn_kernel_new_truncated_stable(
    dim: usize,
    alpha: f64,
    cutoff: f64,
    out: *mut *mut VnKernel,
) -> VnStatus {
    kernel_out(out, LevyKernel::truncated_stable(dim, alpha, cutoff))
}

/// Tempered stable kernel: q = e^{-lambda |z|} |z|^{-dim-alpha}.
#[no_mangle]
pub extern "C" fn vn_kernel_new_tempered_stable(
    dim: usize,
    alpha: f64,
    lambda: f64,
    out: *mut *mut VnKernel,
) -> VnStatus {
    kernel_out(out, LevyKernel::tempered_stable(dim, alpha, lambda))
}

/// Gaussian-tail kernel: q = e^{-lambda |z|^2}.
#[no_mangle]
pub extern "C" fn vn_kernel_new_gaussian_tail(
    dim: usize,
    lambda: f64,
    out: *mut *mut VnKernel,
) -> VnStatus {
    kernel_out(out, LevyKernel::gaussian_tail(dim, lambda))
}

/// The zero kernel.
#[no_mangle]
pub extern "C" fn vn_kernel_new_zero(dim: usize, out: *mut *mut VnKernel) -> VnStatus {
    kernel_out(out, LevyKernel::zero(dim))
}

/// Frees a kernel handle; NULL is a no-op.
///
/// # Safety
/// `kernel` must have been returned by one of the `vn_kernel_new_*`
/// constructors and not freed before.
#[no_mangle]
pub unsafe extern "C" fn vn_kernel_free(kernel: *mut VnKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel as *mut LevyKernel));
    }
}

/// Admissibility check: writes the near second moment, tail mass and the
/// quadrature error estimate. A divergent kernel returns
/// `VN_ERR_DIVERGENT_MOMENT` and leaves the outputs untouched.
///
/// # Safety
/// `kernel` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vn_kernel_verify(
    kernel: *const VnKernel,
    tolerance: f64,
    near_second_moment: *mut f64,
    tail_mass: *mut f64,
    error_estimate: *mut f64,
) -> VnStatus {
    let Some(k) = kernel_ref(kernel) else {
        set_error("kernel handle is null");
        return VnStatus::VnErrInvalidArgument;
    };
    if near_second_moment.is_null() || tail_mass.is_null() || error_estimate.is_null() {
        set_error("out pointer is null");
        return VnStatus::VnErrInvalidArgument;
    }
    let cfg = QuadratureConfig {
        target_tolerance: if tolerance > 0.0 { tolerance } else { 1e-10 },
        ..QuadratureConfig::default()
    };
    match verify_levy_integrability(k, &cfg) {
        Ok(rep) => {
            *near_second_moment = rep.near_second_moment;
            *tail_mass = rep.tail_mass;
            *error_estimate = rep.quadrature_error_estimate;
            VnStatus::VnOk
        }
        Err(e) => fail(e),
    }
}

/// Small-ball quadratic moment M(eps): writes dim*dim row-major entries.
///
/// # Safety
/// `kernel` must be a live handle; `out_matrix` must point to at least
/// dim*dim writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vn_kernel_small_ball_moment(
    kernel: *const VnKernel,
    eps: f64,
    out_matrix: *mut f64,
) -> VnStatus {
    let Some(k) = kernel_ref(kernel) else {
        set_error("kernel handle is null");
        return VnStatus::VnErrInvalidArgument;
    };
    if out_matrix.is_null() {
        set_error("out pointer is null");
        return VnStatus::VnErrInvalidArgument;
    }
    match visc_nonlocal::levy::small_ball_quadratic_moment(k, eps) {
        Ok(m) => {
            std::ptr::copy_nonoverlapping(m.a.as_ptr(), out_matrix, m.a.len());
            VnStatus::VnOk
        }
        Err(e) => fail(e),
    }
}

/// Builds the C2 glue spline for lambda < 0, s > 0.
#[no_mangle]
pub extern "C" fn vn_glue_new(lambda: f64, s: f64, out: *mut *mut VnGlue) -> VnStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return VnStatus::VnErrInvalidArgument;
    }
    match visc_nonlocal::forge::build_glue_1d(lambda, s) {
        Ok(g) => {
            unsafe { *out = Box::into_raw(Box::new(g)) as *mut VnGlue };
            VnStatus::VnOk
        }
        Err(e) => fail(e),
    }
}

/// Frees a glue handle; NULL is a no-op.
///
/// # Safety
/// `glue` must have been returned by `vn_glue_new` and not freed before.
#[no_mangle]
pub unsafe extern "C" fn vn_glue_free(glue: *mut VnGlue) {
    if !glue.is_null() {
        drop(Box::from_raw(glue as *mut GlueSpline1D));
    }
}

/// Evaluates the glue spline: value and first two derivatives at x in
/// [-s, s]; outside the domain returns `VN_ERR_INVALID_ARGUMENT`.
///
/// # Safety
/// `glue` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vn_glue_eval(
    glue: *const VnGlue,
    x: f64,
    value: *mut f64,
    first: *mut f64,
    second: *mut f64,
) -> VnStatus {
    let Some(g) = (glue as *const GlueSpline1D).as_ref() else {
        set_error("glue handle is null");
        return VnStatus::VnErrInvalidArgument;
    };
    if value.is_null() || first.is_null() || second.is_null() {
        set_error("out pointer is null");
        return VnStatus::VnErrInvalidArgument;
    }
    match g.eval(x) {
        Ok((v, d1, d2)) => {
            *value = v;
            *first = d1;
            *second = d2;
            VnStatus::VnOk
        }
        Err(e) => fail(e),
    }
}

unsafe fn path_arg(ptr: *const c_char, name: &str) -> Result<PathBuf, VnStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} is null"));
        return Err(VnStatus::VnErrInvalidArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(&format!("{name} is not valid UTF-8"));
            Err(VnStatus::VnErrInvalidArgument)
        }
    }
}

/// Runs one definitional check over the scenario's point grid and writes
/// report.json into `out_dir`. `definition` is one of
/// "A" | "Aprime" | "B" | "Bprime" | "C"; `mode` is "sub", "super", or NULL
/// for the scenario's own mode.
///
/// # Safety
/// The string arguments must be NUL-terminated (or NULL where allowed).
#[no_mangle]
pub unsafe extern "C" fn vn_run_check(
    scenario_path: *const c_char,
    definition: *const c_char,
    mode: *const c_char,
    out_dir: *const c_char,
) -> VnStatus {
    let scenario_path = match path_arg(scenario_path, "scenario_path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    let def_str = match path_arg(definition, "definition") {
        Ok(p) => p,
        Err(s) => return s,
    };
    let out = match path_arg(out_dir, "out_dir") {
        Ok(p) => p,
        Err(s) => return s,
    };
    let sc = match Scenario::load(&scenario_path) {
        Ok(sc) => sc,
        Err(e) => return fail(e),
    };
    let def = match DefinitionId::parse(&def_str.to_string_lossy()) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    let mode = if mode.is_null() {
        sc.mode
    } else {
        match CStr::from_ptr(mode).to_str() {
            Ok("sub") => Mode::Sub,
            Ok("super") => Mode::Super,
            _ => {
                set_error("mode must be \"sub\", \"super\" or NULL");
                return VnStatus::VnErrInvalidArgument;
            }
        }
    };
    let reports = match run_check(&sc, def, mode) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Err(e) = std::fs::create_dir_all(&out) {
        return fail(Error::IoFailure(e));
    }
    match report::write_report_json(&reports, &out.join("report.json")) {
        Ok(()) => VnStatus::VnOk,
        Err(e) => fail(e),
    }
}

/// Runs the five-definition equivalence suite, writing report.json,
/// study.csv and plotdata.csv into `out_dir`. Coherence or ordering
/// failures return `VN_ERR_COHERENCE` (outputs are still written).
///
/// # Safety
/// The string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn vn_run_equivalence_suite(
    scenario_path: *const c_char,
    out_dir: *const c_char,
) -> VnStatus {
    let scenario_path = match path_arg(scenario_path, "scenario_path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    let out = match path_arg(out_dir, "out_dir") {
        Ok(p) => p,
        Err(s) => return s,
    };
    let sc = match Scenario::load(&scenario_path) {
        Ok(sc) => sc,
        Err(e) => return fail(e),
    };
    let outcome = match run_equivalence_suite(&sc) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let dim = sc.dim();
    if let Err(e) = report::emit_reports(
        &outcome.reports,
        Some(&outcome.study),
        Some((&outcome.plot, dim)),
        Path::new(&out),
    ) {
        return fail(e);
    }
    if !outcome.failures.is_empty() {
        set_error(&outcome.failures.join("; "));
        VnStatus::VnErrCoherence
    } else if outcome.divergence_encountered {
        set_error("divergence encountered");
        VnStatus::VnErrDivergentMoment
    } else {
        VnStatus::VnOk
    }
}
