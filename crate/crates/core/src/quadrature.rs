//! Singularity-aware quadrature for the compensated jump integrals.
//!
//! Everything is deterministic: Gauss-Legendre panels with bisection
//! refinement in radius, fixed product rules on the sphere, geometric
//! grading toward the origin, and dyadic expanding shells for tails.
//! Compensated integrands vanish like |z|^2 at 0, so grading suffices for
//! every admissible singularity order.

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::CandidateFunction;
use crate::levy::LevyKernel;
use crate::linalg::{self, SymMat};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub target_tolerance: f64,
    pub max_grading_levels: u32,
    pub tail_truncation_radius: f64,
    pub richardson: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            target_tolerance: 1e-10,
            max_grading_levels: 40,
            tail_truncation_radius: 8.0,
            richardson: false,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_tolerance > 0.0) {
            return Err(Error::InvalidParameters("target_tolerance must be > 0".into()));
        }
        if self.tail_truncation_radius < 1.0 {
            return Err(Error::InvalidParameters(
                "tail_truncation_radius must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct IntegralValue {
    pub value: f64,
    pub error_estimate: f64,
    pub tail_truncation_error_bound: f64,
    pub diverged: bool,
}

impl IntegralValue {
    fn exact_zero() -> Self {
        IntegralValue::default()
    }

    pub fn total_uncertainty(&self) -> f64 {
        self.error_estimate + self.tail_truncation_error_bound
    }
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules
// ---------------------------------------------------------------------------

/// Legendre P_n(x) and its derivative by the three-term recurrence.
fn legendre_p_dp(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights on [-1, 1] by Newton iteration from Chebyshev guesses.
fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre_p_dp(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_p_dp(n, x);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

static G16: Lazy<(Vec<f64>, Vec<f64>)> = Lazy::new(|| legendre_rule(16));
static G32: Lazy<(Vec<f64>, Vec<f64>)> = Lazy::new(|| legendre_rule(32));

fn gauss_on(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        s += w * f(c + h * x);
    }
    s * h
}

/// Adaptive 1D integration: G16/G32 pair per panel, bisect while the pair
/// disagrees beyond `tol`. Depth-first recursion in a fixed order keeps the
/// summation deterministic.
pub(crate) fn integrate_1d(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let coarse = gauss_on(f, a, b, &G16);
    let fine = gauss_on(f, a, b, &G32);
    let err = (fine - coarse).abs();
    if err <= tol || max_depth == 0 {
        return (fine, err);
    }
    let m = 0.5 * (a + b);
    let (v1, e1) = integrate_1d(f, a, m, 0.5 * tol, max_depth - 1);
    let (v2, e2) = integrate_1d(f, m, b, 0.5 * tol, max_depth - 1);
    (v1 + v2, e1 + e2)
}

// ---------------------------------------------------------------------------
// Angular rules (weights sum to |S^{N-1}|)
// ---------------------------------------------------------------------------

pub(crate) struct AngularRule {
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn make_angular(dim: usize) -> AngularRule {
    match dim {
        1 => AngularRule { dirs: vec![vec![1.0], vec![-1.0]], weights: vec![1.0, 1.0] },
        2 => {
            let m = 64;
            let mut dirs = Vec::with_capacity(m);
            let w = 2.0 * std::f64::consts::PI / m as f64;
            for j in 0..m {
                let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
                dirs.push(vec![th.cos(), th.sin()]);
            }
            AngularRule { dirs, weights: vec![w; m] }
        }
        3 => {
            let (cs, cw) = legendre_rule(16);
            let m = 32;
            let wphi = 2.0 * std::f64::consts::PI / m as f64;
            let mut dirs = Vec::new();
            let mut weights = Vec::new();
            for (c, w) in cs.iter().zip(&cw) {
                let st = (1.0 - c * c).max(0.0).sqrt();
                for j in 0..m {
                    let ph = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
                    dirs.push(vec![st * ph.cos(), st * ph.sin(), *c]);
                    weights.push(w * wphi);
                }
            }
            AngularRule { dirs, weights }
        }
        d => panic!("unsupported dimension {d}"),
    }
}

static ANG1: Lazy<AngularRule> = Lazy::new(|| make_angular(1));
static ANG2: Lazy<AngularRule> = Lazy::new(|| make_angular(2));
static ANG3: Lazy<AngularRule> = Lazy::new(|| make_angular(3));

pub(crate) fn angular_rule(dim: usize) -> &'static AngularRule {
    match dim {
        1 => &ANG1,
        2 => &ANG2,
        3 => &ANG3,
        d => panic!("unsupported dimension {d}"),
    }
}

/// Integral of f(z) * q(|z|) over the shell a <= |z| <= b.
pub(crate) fn shell_integral(
    dim: usize,
    a: f64,
    b: f64,
    q_radial: &dyn Fn(f64) -> f64,
    f: &dyn Fn(&[f64]) -> f64,
    tol: f64,
    max_depth: u32,
) -> (f64, f64) {
    let ang = angular_rule(dim);
    let mut z = vec![0.0; dim];
    let mut g = |r: f64| {
        let mut s = 0.0;
        for (d, w) in ang.dirs.iter().zip(&ang.weights) {
            for (zi, di) in z.iter_mut().zip(d) {
                *zi = r * di;
            }
            s += w * f(&z);
        }
        r.powi(dim as i32 - 1) * q_radial(r) * s
    };
    integrate_1d(&mut g, a, b, tol, max_depth)
}

// ---------------------------------------------------------------------------
// Graded series toward the origin and expanding tails
// ---------------------------------------------------------------------------

pub(crate) struct SeriesResult {
    pub value: f64,
    pub error: f64,
    pub diverged: bool,
}

/// Sums shell contributions `term(k)` = (value, quadrature error) over
/// geometrically graded levels k = 0, 1, ... Detects divergence when the
/// level magnitudes stop decaying; otherwise extrapolates the geometric
/// remainder once the ratio stabilizes.
pub(crate) fn graded_series(
    term: &mut dyn FnMut(u32) -> (f64, f64),
    max_levels: u32,
    abs_tol: f64,
) -> SeriesResult {
    const DIVERGENCE_CAP: f64 = 1e14;
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut mags: Vec<f64> = Vec::new();
    let mut last = 0.0;
    let mut converged_at = None;
    for k in 0..max_levels {
        let (c, e) = term(k);
        sum += c;
        err += e;
        last = c;
        mags.push(c.abs());
        if sum.abs() > DIVERGENCE_CAP {
            return SeriesResult { value: sum, error: err, diverged: true };
        }
        // five consecutive non-decaying levels above tolerance: divergent
        if k >= 8 && mags[k as usize].abs() > abs_tol {
            let w = &mags[(k as usize - 4)..=(k as usize)];
            if w.windows(2).all(|p| p[1] >= 0.999 * p[0]) {
                return SeriesResult { value: sum, error: err, diverged: true };
            }
        }
        if k >= 2 && c.abs() < 0.01 * abs_tol {
            converged_at = Some(k);
            break;
        }
    }
    let n = mags.len();
    if converged_at.is_none() && n >= 4 {
        // geometric remainder from the tail ratio
        let r1 = safe_ratio(mags[n - 1], mags[n - 2]);
        let r2 = safe_ratio(mags[n - 2], mags[n - 3]);
        let rho = r1.max(r2);
        if rho < 0.995 && mags[n - 1] > 0.0 {
            let tail = last * rho / (1.0 - rho);
            let spread = (r1 - r2).abs() / rho.max(1e-3);
            sum += tail;
            err += tail.abs() * spread.clamp(0.01, 1.0) + 1e-16 * sum.abs();
        } else if mags[n - 1] > abs_tol {
            return SeriesResult { value: sum, error: err, diverged: true };
        } else {
            err += mags[n - 1] * n as f64;
        }
    } else {
        err += last.abs();
    }
    SeriesResult { value: sum, error: err, diverged: false }
}

fn safe_ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// The known kernel reach for a truncated computation plus the truncation
/// error bound 2 sup|u| * (mass beyond R), when available.
struct TailPlan {
    outer: f64,
    truncation_bound: f64,
    extend: bool, // expanding shells needed beyond `outer`
}

fn plan_tail(kernel: &LevyKernel, cfg: &QuadratureConfig, sup_abs_u: Option<f64>) -> TailPlan {
    match kernel.support_radius() {
        Some(r) => TailPlan {
            outer: r.min(cfg.tail_truncation_radius.max(r)),
            truncation_bound: 0.0,
            extend: false,
        },
        None => {
            let outer = cfg.tail_truncation_radius;
            match sup_abs_u {
                Some(b) => TailPlan {
                    outer,
                    truncation_bound: 2.0 * b * kernel.tail_mass_bound_beyond(outer),
                    extend: false,
                },
                None => TailPlan { outer, truncation_bound: 0.0, extend: true },
            }
        }
    }
}

/// Shared tail machinery over a closure integrand.
#[allow(clippy::too_many_arguments)]
fn tail_integral_impl(
    dim: usize,
    f_u: &dyn Fn(&[f64]) -> f64,
    u_at: f64,
    p: &[f64],
    eps: f64,
    kernel: &LevyKernel,
    cfg: &QuadratureConfig,
    sup_abs_u: Option<f64>,
) -> IntegralValue {
    let plan = plan_tail(kernel, cfg, sup_abs_u);
    let q = |r: f64| kernel.radial_density(r);
    let integrand = |z: &[f64]| {
        let mut v = f_u(z) - u_at;
        let r2 = linalg::dot(z, z);
        if r2 <= 1.0 {
            v -= linalg::dot(z, p);
        }
        v
    };

    if eps >= plan.outer && !plan.extend {
        return IntegralValue {
            value: 0.0,
            error_estimate: 0.0,
            tail_truncation_error_bound: plan.truncation_bound,
            diverged: false,
        };
    }

    // panel breakpoints: dyadic grading up from eps, a break exactly at
    // |z| = 1 so the compensation indicator never lands inside a panel,
    // then dyadic expansion out to the truncation radius
    let outer = plan.outer.max(eps);
    let mut brk = vec![eps];
    let mut r = eps;
    while r * 2.0 < outer.min(1.0) {
        r *= 2.0;
        brk.push(r);
    }
    if eps < 1.0 && outer > 1.0 {
        brk.push(1.0);
    }
    let mut r = 1f64.max(eps);
    while r * 2.0 < outer {
        r *= 2.0;
        brk.push(r);
    }
    brk.push(outer);
    brk.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * outer);

    let per_panel_tol = cfg.target_tolerance / (brk.len().max(1) as f64);
    let mut value = 0.0;
    let mut error = 0.0;
    for w in brk.windows(2) {
        let (v, e) = shell_integral(dim, w[0], w[1], &q, &integrand, per_panel_tol, 18);
        value += v;
        error += e;
    }

    let mut diverged = false;
    let mut truncation_bound = plan.truncation_bound;
    if plan.extend {
        // no sup bound: push expanding dyadic shells until Cauchy
        let mut base = outer;
        let mut term = |_k: u32| {
            let (v, e) = shell_integral(
                dim,
                base,
                base * 2.0,
                &q,
                &integrand,
                cfg.target_tolerance,
                16,
            );
            base *= 2.0;
            (v, e)
        };
        let series = graded_series(&mut term, 24, cfg.target_tolerance);
        value += series.value;
        error += series.error;
        diverged = series.diverged;
        truncation_bound = 0.0;
    }

    IntegralValue {
        value,
        error_estimate: error,
        tail_truncation_error_bound: truncation_bound,
        diverged,
    }
}

/// Tail part of the compensated jump integral:
/// integral over |z| >= eps of [u(x+z) - u(x) - 1_{|z|<=1} <z,p>] q(z) dz.
pub fn tail_integral(
    u: &CandidateFunction,
    x_hat: &[f64],
    p: &[f64],
    eps: f64,
    kernel: &LevyKernel,
    cfg: &QuadratureConfig,
) -> Result<IntegralValue> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameters("tail_integral needs eps > 0".into()));
    }
    cfg.validate()?;
    kernel.check_dimension()?;
    if kernel.is_zero() {
        return Ok(IntegralValue::exact_zero());
    }
    let u_at = u.value(x_hat);
    let f = |z: &[f64]| u.value(&linalg::add(x_hat, z));
    Ok(tail_integral_impl(
        kernel.dim(),
        &f,
        u_at,
        p,
        eps,
        kernel,
        cfg,
        u.sup_abs_bound(),
    ))
}

/// (1/2) trace((X +- 2 delta I) M(eps)): the small-ball bound term of
/// Definitions A/A'. `Mode::Sub` uses +, `Mode::Super` uses -.
pub fn small_ball_bound_term(
    x: &SymMat,
    delta: f64,
    eps: f64,
    kernel: &LevyKernel,
    mode: crate::functions::Mode,
) -> Result<f64> {
    let m = crate::levy::small_ball_quadratic_moment(kernel, eps)?;
    let sign = match mode {
        crate::functions::Mode::Sub => 1.0,
        crate::functions::Mode::Super => -1.0,
    };
    let shifted = x.add_scaled_identity(sign * 2.0 * delta);
    Ok(0.5 * shifted.trace_product(&m))
}

/// Near-origin compensated part over |z| < eps with full gradient
/// compensation (eps <= 1 keeps it identical to the indicator form).
fn near_compensated(
    dim: usize,
    f: &dyn Fn(&[f64]) -> f64,
    f_at: f64,
    grad: &[f64],
    eps: f64,
    kernel: &LevyKernel,
    cfg: &QuadratureConfig,
) -> SeriesResult {
    let q = |r: f64| kernel.radial_density(r);
    let integrand = |z: &[f64]| f(z) - f_at - linalg::dot(z, grad);
    let mut term = |k: u32| {
        let b = eps * 2f64.powi(-(k as i32));
        let a = 0.5 * b;
        shell_integral(dim, a, b, &q, &integrand, cfg.target_tolerance * 0.01, 14)
    };
    graded_series(&mut term, cfg.max_grading_levels, cfg.target_tolerance)
}

fn internal_epsilon(kernel: &LevyKernel, cfg: &QuadratureConfig) -> f64 {
    let reach = kernel
        .support_radius()
        .unwrap_or(cfg.tail_truncation_radius)
        .min(cfg.tail_truncation_radius);
    reach.min(1.0) * 2f64.powi(-6)
}

#[allow(clippy::too_many_arguments)]
fn full_integral_impl(
    dim: usize,
    f: &dyn Fn(&[f64]) -> f64,
    f_at: f64,
    grad: &[f64],
    kernel: &LevyKernel,
    cfg: &QuadratureConfig,
    sup_abs: Option<f64>,
) -> IntegralValue {
    let eps0 = internal_epsilon(kernel, cfg);
    let split = |eps: f64| -> IntegralValue {
        let near = near_compensated(dim, f, f_at, grad, eps, kernel, cfg);
        let tail = tail_integral_impl(dim, f, f_at, grad, eps, kernel, cfg, sup_abs);
        IntegralValue {
            value: near.value + tail.value,
            error_estimate: near.error + tail.error_estimate,
            tail_truncation_error_bound: tail.tail_truncation_error_bound,
            diverged: near.diverged || tail.diverged,
        }
    };
    if !cfg.richardson {
        return split(eps0);
    }
    // the split is eps-independent in exact arithmetic; Aitken over three
    // halvings cancels any residual systematic eps dependence
    let v0 = split(eps0);
    let v1 = split(eps0 * 0.5);
    let v2 = split(eps0 * 0.25);
    if v0.diverged || v1.diverged || v2.diverged {
        return IntegralValue { diverged: true, ..v2 };
    }
    let d1 = v1.value - v0.value;
    let d2 = v2.value - v1.value;
    let denom = d2 - d1;
    let (value, extra_err) = if denom.abs() > 1e-3 * (d1.abs() + d2.abs()).max(1e-300) {
        let extrap = v2.value - d2 * d2 / denom;
        (extrap, (extrap - v2.value).abs())
    } else {
        (v2.value, d2.abs())
    };
    IntegralValue {
        value,
        error_estimate: v2.error_estimate + extra_err,
        tail_truncation_error_bound: v2.tail_truncation_error_bound,
        diverged: false,
    }
}

/// Full compensated integral of a C2 test function:
/// integral over R^N of [phi(x+z) - phi(x) - 1_{|z|<=1} <z, grad phi(x)>] q dz.
pub fn compensated_full_integral(
    phi: &CandidateFunction,
    x_hat: &[f64],
    kernel: &LevyKernel,
    cfg: &QuadratureConfig,
) -> Result<IntegralValue> {
    cfg.validate()?;
    kernel.check_dimension()?;
    if kernel.is_zero() {
        return Ok(IntegralValue::exact_zero());
    }
    let jet = phi.jet(x_hat)?;
    let f = |z: &[f64]| phi.value(&linalg::add(x_hat, z));
    Ok(full_integral_impl(
        kernel.dim(),
        &f,
        jet.value,
        &jet.gradient,
        kernel,
        cfg,
        phi.sup_abs_bound(),
    ))
}

/// Full compensated integral with the candidate u in place of phi; the
/// near-origin part integrates u directly on the graded mesh, so a tripped
/// divergence flag is exactly the L1 failure of Definition C's integrand.
pub fn nonsmooth_full_integral(
    u: &CandidateFunction,
    x_hat: &[f64],
    grad_phi_at_x_hat: &[f64],
    kernel: &LevyKernel,
    cfg: &QuadratureConfig,
) -> Result<IntegralValue> {
    cfg.validate()?;
    kernel.check_dimension()?;
    if kernel.is_zero() {
        return Ok(IntegralValue::exact_zero());
    }
    let u_at = u.value(x_hat);
    if !u_at.is_finite() {
        return Err(Error::InvalidParameters("u(x_hat) must be finite".into()));
    }
    let f = |z: &[f64]| u.value(&linalg::add(x_hat, z));
    Ok(full_integral_impl(
        kernel.dim(),
        &f,
        u_at,
        grad_phi_at_x_hat,
        kernel,
        cfg,
        u.sup_abs_bound(),
    ))
}

/// First absolute moment of the kernel beyond the unit ball,
/// integral over |z| >= 1 of |z| q dz. Finiteness decides whether dropping
/// the compensation indicator (Definition C's prose form of h) still gives
/// an L1 integrand.
pub fn gradient_tail_first_moment(kernel: &LevyKernel, cfg: &QuadratureConfig) -> IntegralValue {
    if kernel.is_zero() {
        return IntegralValue::exact_zero();
    }
    let dim = kernel.dim();
    let q = |r: f64| kernel.radial_density(r);
    let f = |z: &[f64]| linalg::norm(z);
    let outer = kernel
        .support_radius()
        .unwrap_or(cfg.tail_truncation_radius * 16.0);
    if outer <= 1.0 {
        return IntegralValue::exact_zero();
    }
    let mut base = 1.0f64;
    let mut term = |_k: u32| {
        let hi = (base * 2.0).min(outer);
        let (v, e) = shell_integral(dim, base, hi, &q, &f, cfg.target_tolerance, 14);
        base = hi;
        (v, e)
    };
    let series = graded_series(&mut term, 40, cfg.target_tolerance);
    IntegralValue {
        value: series.value,
        error_estimate: series.error,
        tail_truncation_error_bound: 0.0,
        diverged: series.diverged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::CandidateFunction;
    use crate::levy::LevyKernel;
    use crate::linalg::SymMat;

    fn box1() -> LevyKernel {
        LevyKernel::box_kernel(1, 1.0, 1.0).unwrap()
    }

    fn square_1d() -> CandidateFunction {
        CandidateFunction::Quadratic { q: SymMat::scalar(2.0), b: vec![0.0], c: 0.0 }
    }

    #[test]
    fn gauss_rule_matches_published_g7_weights() {
        // the 15-point Kronrod tables embed the Gauss-7 weights
        let (xs, ws) = legendre_rule(7);
        let mut pairs: Vec<(f64, f64)> = xs.iter().cloned().zip(ws.iter().cloned()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!((pairs[3].1 - 0.417_959_183_673_469_387).abs() < 1e-14);
        assert!((pairs[0].0 + 0.949_107_912_342_758_524).abs() < 1e-13);
    }

    #[test]
    fn integrate_1d_polynomial_exact() {
        let mut f = |x: f64| 3.0 * x * x;
        let (v, e) = integrate_1d(&mut f, 0.0, 2.0, 1e-12, 10);
        assert!((v - 8.0).abs() < 1e-12);
        assert!(e < 1e-12);
    }

    #[test]
    fn angular_weights_sum_to_sphere_area() {
        for (dim, area) in [
            (1usize, 2.0),
            (2, 2.0 * std::f64::consts::PI),
            (3, 4.0 * std::f64::consts::PI),
        ] {
            let r = angular_rule(dim);
            let s: f64 = r.weights.iter().sum();
            assert!((s - area).abs() < 1e-12, "dim {dim}: {s}");
        }
    }

    #[test]
    fn tail_integral_zero_candidate() {
        let u = CandidateFunction::Quadratic { q: SymMat::zeros(1), b: vec![0.0], c: 0.0 };
        let v = tail_integral(&u, &[0.0], &[0.0], 0.25, &box1(), &QuadratureConfig::default())
            .unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn tail_integral_square_box_kernel() {
        // 2 * int_{1/2}^{1} z^2 dz = 7/12
        let v = tail_integral(
            &square_1d(),
            &[0.0],
            &[0.0],
            0.5,
            &box1(),
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((v.value - 7.0 / 12.0).abs() < 1e-10, "{}", v.value);
        assert!(!v.diverged);
    }

    #[test]
    fn tail_integral_odd_symmetry_cancels() {
        // u odd (u = b x), symmetric kernel, p = grad u(0): integrand vanishes
        let u = CandidateFunction::Quadratic { q: SymMat::zeros(1), b: vec![3.0], c: 0.0 };
        let v = tail_integral(&u, &[0.0], &[3.0], 0.25, &box1(), &QuadratureConfig::default())
            .unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn small_ball_bound_term_closed_form() {
        // 1/2 * (2 + 0.2) * M(1/2), M(1/2) = 1/12
        let v = small_ball_bound_term(
            &SymMat::scalar(2.0),
            0.1,
            0.5,
            &box1(),
            crate::functions::Mode::Sub,
        )
        .unwrap();
        assert!((v - 1.1 / 12.0).abs() < 1e-14);
        // super flips the delta sign; X = 0 gives +-delta * trace M symmetry
        let plus = small_ball_bound_term(
            &SymMat::scalar(0.0),
            0.1,
            0.5,
            &box1(),
            crate::functions::Mode::Sub,
        )
        .unwrap();
        let minus = small_ball_bound_term(
            &SymMat::scalar(0.0),
            0.1,
            0.5,
            &box1(),
            crate::functions::Mode::Super,
        )
        .unwrap();
        assert!((plus + minus).abs() < 1e-15);
        assert!(plus > 0.0);
    }

    #[test]
    fn compensated_full_integral_square() {
        // int_{-1}^{1} z^2 dz = 2/3
        let v = compensated_full_integral(&square_1d(), &[0.0], &box1(), &QuadratureConfig::default())
            .unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-10, "{}", v.value);
    }

    #[test]
    fn compensated_full_integral_linear_vanishes() {
        let phi = CandidateFunction::Quadratic { q: SymMat::zeros(1), b: vec![2.0], c: 1.0 };
        let v = compensated_full_integral(&phi, &[0.3], &box1(), &QuadratureConfig::default())
            .unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn compensated_full_integral_stable_kernel() {
        // q = |z|^{-3/2} on |z| <= 1: integral of z^2 q = 4/3
        let k = LevyKernel::truncated_stable(1, 0.5, 1.0).unwrap();
        let v = compensated_full_integral(&square_1d(), &[0.0], &k, &QuadratureConfig::default())
            .unwrap();
        assert!((v.value - 4.0 / 3.0).abs() < 1e-8, "{}", v.value);
    }

    #[test]
    fn nonsmooth_matches_smooth_for_smooth_candidate() {
        let cfg = QuadratureConfig::default();
        let a = compensated_full_integral(&square_1d(), &[0.0], &box1(), &cfg).unwrap();
        let b = nonsmooth_full_integral(&square_1d(), &[0.0], &[0.0], &box1(), &cfg).unwrap();
        assert!((a.value - b.value).abs() <= a.error_estimate + b.error_estimate + 1e-10);
    }

    #[test]
    fn nonsmooth_cone_box_kernel() {
        // int_{-1}^{1} -|z| dz = -1
        let u = CandidateFunction::Cone { sign: -1.0, apex: vec![0.0] };
        let v = nonsmooth_full_integral(&u, &[0.0], &[0.0], &box1(), &QuadratureConfig::default())
            .unwrap();
        assert!((v.value + 1.0).abs() < 1e-8, "{}", v.value);
        assert!(!v.diverged);
    }

    #[test]
    fn nonsmooth_cone_stable_kernel_closed_form() {
        // -2 int_0^1 z^{-1/2} dz = -4
        let u = CandidateFunction::Cone { sign: -1.0, apex: vec![0.0] };
        let k = LevyKernel::truncated_stable(1, 0.5, 1.0).unwrap();
        let v = nonsmooth_full_integral(&u, &[0.0], &[0.0], &k, &QuadratureConfig::default())
            .unwrap();
        assert!((v.value + 4.0).abs() < 1e-6, "{}", v.value);
        assert!(!v.diverged);
    }

    #[test]
    fn nonsmooth_kink_against_alpha_ge_one_diverges() {
        // |h(z)| ~ |z| against |z|^{-1-alpha} with alpha = 1.5: not L1
        let u = CandidateFunction::Cone { sign: -1.0, apex: vec![0.0] };
        let k = LevyKernel::truncated_stable(1, 1.5, 1.0).unwrap();
        let v = nonsmooth_full_integral(&u, &[0.0], &[0.0], &k, &QuadratureConfig::default())
            .unwrap();
        assert!(v.diverged);
    }

    #[test]
    fn split_consistency_across_eps() {
        // small-ball bound term at exact Hessian + tail = full, for all eps
        let cfg = QuadratureConfig::default();
        let phi = square_1d();
        let k = box1();
        let full = compensated_full_integral(&phi, &[0.0], &k, &cfg).unwrap();
        for k_exp in 1..=8 {
            let eps = 2f64.powi(-k_exp);
            let near = small_ball_bound_term(&SymMat::scalar(2.0), 0.0, eps, &k, crate::functions::Mode::Sub)
                .unwrap();
            let tail = tail_integral(&phi, &[0.0], &[0.0], eps, &k, &cfg).unwrap();
            let split = near + tail.value;
            assert!(
                (split - full.value).abs() <= tail.error_estimate + full.error_estimate + 1e-11,
                "eps = {eps}: {split} vs {}",
                full.value
            );
        }
    }

    #[test]
    fn refinement_changes_less_than_error_estimate() {
        let mut cfg = QuadratureConfig::default();
        let u = CandidateFunction::GaussianBump { amplitude: 1.0, center: vec![0.0], width: 0.7 };
        let k = LevyKernel::truncated_stable(1, 0.5, 1.0).unwrap();
        let v1 = nonsmooth_full_integral(&u, &[0.1], &[0.0], &k, &cfg).unwrap();
        cfg.max_grading_levels *= 2;
        cfg.target_tolerance *= 0.1;
        let v2 = nonsmooth_full_integral(&u, &[0.1], &[0.0], &k, &cfg).unwrap();
        assert!((v1.value - v2.value).abs() <= v1.error_estimate.max(1e-12) * 4.0 + 1e-12);
    }

    #[test]
    fn monotone_in_integrand() {
        // u <= w with equality at x_hat: integral(u) <= integral(w) + err
        let cfg = QuadratureConfig::default();
        let k = box1();
        let u = CandidateFunction::Cone { sign: -1.0, apex: vec![0.0] };
        let w = CandidateFunction::Quadratic { q: SymMat::zeros(1), b: vec![0.0], c: 0.0 };
        let iu = nonsmooth_full_integral(&u, &[0.0], &[0.0], &k, &cfg).unwrap();
        let iw = nonsmooth_full_integral(&w, &[0.0], &[0.0], &k, &cfg).unwrap();
        assert!(iu.value <= iw.value + iu.error_estimate + iw.error_estimate + 1e-12);
    }

    #[test]
    fn gradient_tail_first_moment_box_is_zero() {
        let cfg = QuadratureConfig::default();
        let v = gradient_tail_first_moment(&box1(), &cfg);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn limit_identity_small_ball_plus_tail_vs_full() {
        // |1/2 tr((hess phi + 2 delta I) M(eps)) + tail(phi, eps) - full(phi)|
        // <= (delta + omega(eps)) tr M(eps), and the left side vanishes as
        // eps -> 0 at fixed delta, then as delta -> 0
        let cfg = QuadratureConfig::default();
        let phi = CandidateFunction::GaussianBump { amplitude: 1.0, center: vec![0.0], width: 1.0 };
        let k = box1();
        let x_hat = [0.2];
        let jet = phi.jet(&x_hat).unwrap();
        let full = compensated_full_integral(&phi, &x_hat, &k, &cfg).unwrap();
        for delta in [0.1, 0.01] {
            let mut lhs_prev = f64::INFINITY;
            for k_exp in 2..=9 {
                let eps = 2f64.powi(-k_exp);
                let m = crate::levy::small_ball_quadratic_moment(&k, eps).unwrap();
                let small = 0.5
                    * jet
                        .hessian
                        .add_scaled_identity(2.0 * delta)
                        .trace_product(&m);
                let tail = tail_integral(&phi, &x_hat, &jet.gradient, eps, &k, &cfg).unwrap();
                let lhs = (small + tail.value - full.value).abs();
                // omega(eps): sampled Hessian modulus near x_hat
                let mut omega = 0.0f64;
                for j in 1..=8 {
                    let y = [x_hat[0] + eps * j as f64 / 8.0];
                    let ym = [x_hat[0] - eps * j as f64 / 8.0];
                    for p in [y, ym] {
                        let h = phi.jet(&p).unwrap().hessian;
                        omega = omega.max((h.get(0, 0) - jet.hessian.get(0, 0)).abs());
                    }
                }
                let rhs = (delta + omega) * m.trace()
                    + tail.error_estimate
                    + full.error_estimate
                    + 1e-13;
                assert!(lhs <= rhs, "delta {delta}, eps {eps}: {lhs} > {rhs}");
                assert!(lhs <= lhs_prev + tail.error_estimate + full.error_estimate + 1e-12);
                lhs_prev = lhs;
            }
            // at the finest eps the residual mismatch is essentially delta-scaled
            assert!(lhs_prev <= delta * 1e-2 + 1e-10, "delta {delta}: {lhs_prev}");
        }
    }

    #[test]
    fn richardson_agrees_with_plain() {
        let mut cfg = QuadratureConfig::default();
        let phi = CandidateFunction::GaussianBump { amplitude: 1.0, center: vec![0.0], width: 1.0 };
        let k = box1();
        let plain = compensated_full_integral(&phi, &[0.0], &k, &cfg).unwrap();
        cfg.richardson = true;
        let rich = compensated_full_integral(&phi, &[0.0], &k, &cfg).unwrap();
        assert!((plain.value - rich.value).abs() < 1e-9);
    }
}
