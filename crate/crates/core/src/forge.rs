//! Construction of the C2 test functions: the 1D glue spline, the
//! parallelotope function psi^r with its +rI Hessian bump, the decreasing
//! exterior sequence psi^r_n, and the radial-cap sequence psi_n.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::{quintic_step, C2Function, CandidateFunction, SmoothnessClass};
use crate::linalg::{self, Mat, SymMat};
use crate::sampling;

// ---------------------------------------------------------------------------
// Glue spline
// ---------------------------------------------------------------------------

/// C2 patch joining the concave quadratic f(x) = lambda x^2 to a constant:
/// f on [0, s/3], then a exp(-c/|x - alpha|^2) + b up to 2s/3, then the
/// constant 2 lambda s^2 / 9 out to s; extended evenly to [-s, 0].
#[derive(Clone, Debug, Serialize)]
pub struct GlueSpline1D {
    pub lambda: f64,
    pub s: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn build_glue_1d(lambda: f64, s: f64) -> Result<GlueSpline1D> {
    if !(lambda < 0.0) || !(s > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "glue spline needs lambda < 0 and s > 0, got ({lambda}, {s})"
        )));
    }
    Ok(GlueSpline1D {
        lambda,
        s,
        alpha: 2.0 * s / 3.0,
        a: -std::f64::consts::E * lambda * s * s / 9.0,
        b: 2.0 * lambda * s * s / 9.0,
        c: s * s / 9.0,
    })
}

impl GlueSpline1D {
    /// Value and first two derivatives; the domain is [-s, s].
    pub fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        if x.abs() > self.s * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!("|{x}| > s = {}", self.s)));
        }
        Ok(self.eval_extended(x))
    }

    /// Same with the constant branch continued past |x| = s; the junction at
    /// s has two vanishing derivatives so the continuation stays C2.
    pub fn eval_extended(&self, x: f64) -> (f64, f64, f64) {
        let t = x.abs();
        let sgn = if x < 0.0 { -1.0 } else { 1.0 };
        let third = self.s / 3.0;
        let (v, d1, d2) = if t <= third {
            (self.lambda * t * t, 2.0 * self.lambda * t, 2.0 * self.lambda)
        } else if t < 2.0 * third {
            self.eval_bridge(t)
        } else {
            (self.b, 0.0, 0.0)
        };
        (v, sgn * d1, d2)
    }

    fn eval_bridge(&self, t: f64) -> (f64, f64, f64) {
        let d = t - self.alpha; // negative on the branch
        let d2 = d * d;
        if d2 <= 0.0 || self.c / d2 > 600.0 {
            // exp underflow region abutting the constant branch
            return (self.b, 0.0, 0.0);
        }
        let e = (-self.c / d2).exp();
        let v = self.a * e + self.b;
        let g1 = self.a * e * (2.0 * self.c / (d2 * d));
        let g2 = self.a
            * e
            * (4.0 * self.c * self.c / (d2 * d2 * d2) - 6.0 * self.c / (d2 * d2));
        (v, g1, g2)
    }

    /// Second-difference diagnostics at the junctions s/3 and 2s/3.
    ///
    /// The per-branch differences sit entirely inside one smooth branch and
    /// converge at O(h^2); the straddling difference carries an O(h) term
    /// from the third-derivative jump across a junction that is C2 but not
    /// C3, so it only certifies continuity at first order.
    pub fn junction_diagnostics(&self, h: f64) -> Vec<JunctionDiagnostic> {
        let f = |x: f64| self.eval_extended(x).0;
        let second = |c: f64| (f(c + h) - 2.0 * f(c) + f(c - h)) / (h * h);
        [self.s / 3.0, 2.0 * self.s / 3.0]
            .into_iter()
            .map(|x0| JunctionDiagnostic {
                location: x0,
                analytic: self.eval_extended(x0).2,
                straddle_fd: second(x0),
                left_fd: second(x0 - 2.0 * h),
                left_analytic: self.eval_extended(x0 - 2.0 * h).2,
                right_fd: second(x0 + 2.0 * h),
                right_analytic: self.eval_extended(x0 + 2.0 * h).2,
            })
            .collect()
    }
}

/// Lemma-style piecewise evaluation as a free function, mirroring the
/// operation surface: (value, first, second derivative) at x in [-s, s].
pub fn eval_glue(spline: &GlueSpline1D, x: f64) -> Result<(f64, f64, f64)> {
    spline.eval(x)
}

/// Per-junction second-difference record emitted by the forge CLI.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JunctionDiagnostic {
    pub location: f64,
    pub analytic: f64,
    pub straddle_fd: f64,
    pub left_fd: f64,
    pub left_analytic: f64,
    pub right_fd: f64,
    pub right_analytic: f64,
}

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

/// Regions with strict membership: balls, cubes, their annular variants
/// (cube shells constrain every coordinate, so they are the corner boxes),
/// and parallelotope images P_t = T C_{t s}.
#[derive(Clone, Debug)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    BallShell { center: Vec<f64>, inner: f64, outer: f64 },
    Cube { center: Vec<f64>, half_edge: f64 },
    CubeShell { center: Vec<f64>, inner: f64, outer: f64 },
    Parallelotope { center: Vec<f64>, rotation: Mat, half_edge: f64 },
    ParallelotopeShell { center: Vec<f64>, rotation: Mat, inner: f64, outer: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                linalg::norm(&linalg::sub(x, center)) < *radius
            }
            Region::BallShell { center, inner, outer } => {
                let r = linalg::norm(&linalg::sub(x, center));
                *inner < r && r < *outer
            }
            Region::Cube { center, half_edge } => x
                .iter()
                .zip(center)
                .all(|(xi, ci)| (xi - ci).abs() < *half_edge),
            Region::CubeShell { center, inner, outer } => x.iter().zip(center).all(|(xi, ci)| {
                let d = (xi - ci).abs();
                *inner < d && d < *outer
            }),
            Region::Parallelotope { center, rotation, half_edge } => {
                let y = rotation.tr_matvec(&linalg::sub(x, center));
                y.iter().all(|yi| yi.abs() < *half_edge)
            }
            Region::ParallelotopeShell { center, rotation, inner, outer } => {
                let y = rotation.tr_matvec(&linalg::sub(x, center));
                y.iter().all(|yi| {
                    let d = yi.abs();
                    *inner < d && d < *outer
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scale selection
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct SelectSConfig {
    /// Top of the dyadic grid; the effective top is min(s_max, r).
    pub s_max: f64,
    /// Number of dyadic halvings to try below the top.
    pub levels: u32,
    /// Low-discrepancy interior samples per candidate scale.
    pub samples: usize,
    /// Strictness margin mu: ties count as failures.
    pub strictness_margin: f64,
    pub seed: u64,
}

impl Default for SelectSConfig {
    fn default() -> Self {
        SelectSConfig {
            s_max: 1.0,
            levels: 24,
            samples: 256,
            strictness_margin: 1e-9,
            seed: 0,
        }
    }
}

/// Largest dyadic s with phi <= psi^r_0 on the sampled open ball B_{2s} and
/// u - psi^r_0 strictly below its base-point value there. The grid top is
/// capped at r so the parallelotope diameters vanish with r.
pub fn select_s(
    phi: &CandidateFunction,
    u: &CandidateFunction,
    x_hat: &[f64],
    r: f64,
    cfg: &SelectSConfig,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameters("select_s needs r > 0".into()));
    }
    let jet = phi.jet(x_hat)?;
    let u_at = u.value(x_hat);
    let shifted = jet.hessian.add_scaled_identity(r);
    let psi0 = |x: &[f64]| {
        let d = linalg::sub(x, x_hat);
        u_at + linalg::dot(&jet.gradient, &d) + 0.5 * shifted.quad_form(&d)
    };
    let mu = cfg.strictness_margin;
    let dirs = sampling::directions(phi.dimension());

    let s_top = cfg.s_max.min(r);
    for j in 0..=cfg.levels {
        let s = s_top * 2f64.powi(-(j as i32));
        let ball = 2.0 * s;
        let mut points: Vec<Vec<f64>> = Vec::new();
        for k in 1..=15 {
            let rad = ball * k as f64 / 16.0;
            for d in &dirs {
                points.push(linalg::add(x_hat, &linalg::scale(d, rad)));
            }
        }
        for k in 1..=12 {
            let rad = ball * (1.0 - 2f64.powi(-k));
            for d in &dirs {
                points.push(linalg::add(x_hat, &linalg::scale(d, rad)));
            }
        }
        points.extend(sampling::halton_ball(
            x_hat,
            ball * (1.0 - 1e-9),
            cfg.samples,
            cfg.seed,
        ));
        let mut ok = true;
        for x in &points {
            let p0 = psi0(x);
            let d = linalg::sub(x, x_hat);
            let d2 = linalg::dot(&d, &d);
            if d2 == 0.0 {
                continue;
            }
            let tol = 1e-12 * (1.0 + p0.abs() + d2);
            if phi.value(x) > p0 + tol {
                ok = false;
                break;
            }
            if u.value(x) - p0 >= -mu * d2 + tol {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(s);
        }
    }
    Err(Error::NoValidScale(format!(
        "no dyadic s in [{:.3e}, {:.3e}] satisfies the touching conditions",
        s_top * 2f64.powi(-(cfg.levels as i32)),
        s_top
    )))
}

// ---------------------------------------------------------------------------
// Parallelotope test function
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum CoordinatePiece {
    /// lambda >= 0 keeps the plain quadratic lambda y^2.
    Quadratic(f64),
    Glue(GlueSpline1D),
}

impl CoordinatePiece {
    fn eval(&self, y: f64) -> (f64, f64, f64) {
        match self {
            CoordinatePiece::Quadratic(l) => (l * y * y, 2.0 * l * y, 2.0 * l),
            CoordinatePiece::Glue(g) => g.eval_extended(y),
        }
    }
}

/// psi^r: quadratic with Hessian grad^2 phi(x_hat) + rI near the base point,
/// flattened by glue splines along negative eigendirections, convex on the
/// outer corner region of P^r = T C_{s_r}.
///
/// Convention: the diagonalized quadratic is written as sum lambda_i y_i^2,
/// so each lambda_i is HALF the corresponding eigenvalue of
/// grad^2 phi(x_hat) + rI. Reports state this.
#[derive(Clone, Debug)]
pub struct ParallelotopeTestFunction {
    base_point: Vec<f64>,
    value_at_base: f64,
    reference_gradient: Vec<f64>,
    r: f64,
    s_r: f64,
    rotation: Mat,
    lambdas: Vec<f64>,
    pieces: Vec<CoordinatePiece>,
    hessian_at_base: SymMat,
    taylor_constant: f64,
}

impl ParallelotopeTestFunction {
    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s_r(&self) -> f64 {
        self.s_r
    }

    pub fn rotation(&self) -> &Mat {
        &self.rotation
    }

    /// Halved eigenvalues lambda_i of grad^2 phi(x_hat) + rI, descending.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn reference_gradient(&self) -> &[f64] {
        &self.reference_gradient
    }

    /// grad^2 phi(x_hat) + rI.
    pub fn hessian_at_base(&self) -> &SymMat {
        &self.hessian_at_base
    }

    /// C = |grad^2 phi(x_hat)| + 1, independent of r.
    pub fn taylor_constant(&self) -> f64 {
        self.taylor_constant
    }

    pub fn glue_splines(&self) -> Vec<&GlueSpline1D> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                CoordinatePiece::Glue(g) => Some(g),
                CoordinatePiece::Quadratic(_) => None,
            })
            .collect()
    }

    /// Rotated local coordinates y = T^T (x - x_hat).
    pub fn rotated(&self, x: &[f64]) -> Vec<f64> {
        self.rotation.tr_matvec(&linalg::sub(x, &self.base_point))
    }

    /// Map local rotated coordinates back to ambient ones.
    pub fn from_rotated(&self, y: &[f64]) -> Vec<f64> {
        linalg::add(&self.base_point, &self.rotation.matvec(y))
    }

    /// P^r_t(x_hat), the scaled parallelotope.
    pub fn region(&self, t: f64) -> Region {
        Region::Parallelotope {
            center: self.base_point.clone(),
            rotation: self.rotation.clone(),
            half_edge: t * self.s_r,
        }
    }

    /// P^r_{t,t'}(x_hat), the corner-box annulus.
    pub fn region_shell(&self, t: f64, t2: f64) -> Region {
        Region::ParallelotopeShell {
            center: self.base_point.clone(),
            rotation: self.rotation.clone(),
            inner: t * self.s_r,
            outer: t2 * self.s_r,
        }
    }

    /// The quadratic that psi^r must equal inside P^r_{1/3}.
    pub fn quadratic_model(&self, x: &[f64]) -> f64 {
        let d = linalg::sub(x, &self.base_point);
        self.value_at_base
            + linalg::dot(&self.reference_gradient, &d)
            + 0.5 * self.hessian_at_base.quad_form(&d)
    }
}

impl C2Function for ParallelotopeTestFunction {
    fn dimension(&self) -> usize {
        self.base_point.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let y = self.rotated(x);
        let d = linalg::sub(x, &self.base_point);
        let mut v = self.value_at_base + linalg::dot(&self.reference_gradient, &d);
        for (piece, yi) in self.pieces.iter().zip(&y) {
            v += piece.eval(*yi).0;
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let y = self.rotated(x);
        let local: Vec<f64> = self
            .pieces
            .iter()
            .zip(&y)
            .map(|(p, yi)| p.eval(*yi).1)
            .collect();
        linalg::add(&self.reference_gradient, &self.rotation.matvec(&local))
    }

    fn hessian(&self, x: &[f64]) -> SymMat {
        let y = self.rotated(x);
        let n = y.len();
        let curv: Vec<f64> = self
            .pieces
            .iter()
            .zip(&y)
            .map(|(p, yi)| p.eval(*yi).2)
            .collect();
        let mut h = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += self.rotation.get(i, k) * curv[k] * self.rotation.get(j, k);
                }
                h.set_sym(i, j, v);
            }
        }
        h
    }
}

/// Builds psi^r for a touching pair (u - phi maximal at x_hat with equal
/// values there). Negative halved eigenvalues get glue splines at scale
/// s(r); the rest stay quadratic.
pub fn build_psi_r(
    phi: &CandidateFunction,
    u: &CandidateFunction,
    x_hat: &[f64],
    r: f64,
    cfg: &SelectSConfig,
) -> Result<ParallelotopeTestFunction> {
    let jet = phi.jet(x_hat)?;
    let u_at = u.value(x_hat);
    if (u_at - jet.value).abs() > 1e-9 * (1.0 + u_at.abs() + jet.value.abs()) {
        return Err(Error::MaxViolated(format!(
            "u(x_hat) = {u_at} and phi(x_hat) = {} do not touch",
            jet.value
        )));
    }
    let s_r = select_s(phi, u, x_hat, r, cfg)?;
    let shifted = jet.hessian.add_scaled_identity(r);
    let (evals, rotation) = shifted.eigh();
    let lambdas: Vec<f64> = evals.iter().map(|e| 0.5 * e).collect();
    let mut pieces = Vec::with_capacity(lambdas.len());
    for &l in &lambdas {
        if l < 0.0 {
            pieces.push(CoordinatePiece::Glue(build_glue_1d(l, s_r)?));
        } else {
            pieces.push(CoordinatePiece::Quadratic(l));
        }
    }
    Ok(ParallelotopeTestFunction {
        base_point: x_hat.to_vec(),
        value_at_base: u_at,
        reference_gradient: jet.gradient,
        r,
        s_r,
        rotation,
        lambdas,
        pieces,
        hessian_at_base: shifted,
        taylor_constant: jet.hessian.spectral_norm() + 1.0,
    })
}

// ---------------------------------------------------------------------------
// Smoothed envelope shared by the decreasing sequences
// ---------------------------------------------------------------------------

const MOLLIFIER_NODES: usize = 8;

/// Smooth upper envelope of a (possibly nonsmooth) candidate: quadratic
/// sup-convolution sampled by a deterministic zooming grid, mollified with a
/// C2 bump kernel. C2 candidates skip both steps and evaluate directly.
#[derive(Clone, Debug)]
struct SmoothEnvelope {
    u: CandidateFunction,
    /// affine part subtracted before enveloping: u~(x) = u(x) - c0 - <g, x - anchor>
    anchor: Vec<f64>,
    c0: f64,
    g: Vec<f64>,
    kappa: f64,
    moll_h: f64,
    smooth: bool,
}

impl SmoothEnvelope {
    fn new(
        u: &CandidateFunction,
        anchor: &[f64],
        c0: f64,
        g: &[f64],
        kappa: f64,
        moll_h: f64,
    ) -> Self {
        SmoothEnvelope {
            u: u.clone(),
            anchor: anchor.to_vec(),
            c0,
            g: g.to_vec(),
            kappa,
            moll_h,
            smooth: u.smoothness_class() == SmoothnessClass::C2,
        }
    }

    fn u_tilde(&self, x: &[f64]) -> f64 {
        self.u.value(x) - self.c0 - linalg::dot(&self.g, &linalg::sub(x, &self.anchor))
    }

    /// max over w of [u~(w) - |w - y|^2 / (2 kappa)], sampled on a zooming
    /// grid that always contains the center, so the result dominates u~(y).
    fn sup_convolution(&self, y: &[f64]) -> f64 {
        let dim = y.len();
        let local = 1.0 + self.u_tilde(y).abs();
        let mut radius = (4.0 * self.kappa).max(2.0 * (2.0 * self.kappa * local).sqrt());
        let mut center = y.to_vec();
        let mut best = self.u_tilde(y);
        for _round in 0..5 {
            let mut best_point = center.clone();
            let mut idx = vec![0usize; dim];
            'grid: loop {
                let mut w = vec![0.0; dim];
                for d in 0..dim {
                    w[d] = center[d] + radius * (idx[d] as f64 - 2.0) / 2.0;
                }
                let dy = linalg::sub(&w, y);
                let v = self.u_tilde(&w) - linalg::dot(&dy, &dy) / (2.0 * self.kappa);
                if v > best {
                    best = v;
                    best_point = w;
                }
                let mut d = 0;
                loop {
                    idx[d] += 1;
                    if idx[d] < 5 {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                    if d == dim {
                        break 'grid;
                    }
                }
            }
            center = best_point;
            radius *= 0.25;
        }
        best
    }

    fn eval(&self, x: &[f64]) -> f64 {
        if self.smooth {
            return self.u_tilde(x);
        }
        // tensor-product mollification with the C2 bump (1 - t^2)^3
        let dim = x.len();
        let rule = mollifier_rule();
        let mut total = 0.0;
        let mut wsum = 0.0;
        let mut idx = vec![0usize; dim];
        'nodes: loop {
            let mut w = 1.0;
            let mut p = x.to_vec();
            for d in 0..dim {
                let (t, wt) = rule[idx[d]];
                w *= wt;
                p[d] += self.moll_h * t;
            }
            total += w * self.sup_convolution(&p);
            wsum += w;
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < MOLLIFIER_NODES {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dim {
                    break 'nodes;
                }
            }
        }
        total / wsum
    }
}

/// Gauss nodes on [-1, 1] pre-weighted by the bump (1 - t^2)^3.
fn mollifier_rule() -> &'static [(f64, f64); MOLLIFIER_NODES] {
    use once_cell::sync::Lazy;
    static RULE: Lazy<[(f64, f64); MOLLIFIER_NODES]> = Lazy::new(|| {
        let mut out = [(0.0, 0.0); MOLLIFIER_NODES];
        let n = MOLLIFIER_NODES;
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..60 {
                let (p, dp) = legendre_pair(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_pair(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            let bump = (1.0 - x * x).powi(3);
            *slot = (x, w * bump);
        }
        out
    });
    &RULE
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

// ---------------------------------------------------------------------------
// Decreasing exterior sequence
// ---------------------------------------------------------------------------

/// Blend-shell width cap keeping C_{s(1+rho)} inside B_{2s}, where the
/// strict-maximum property of psi^r over u is certified.
fn rho_cap(dim: usize) -> f64 {
    (2.0 / (dim as f64).sqrt() - 1.0).min(0.5) * (1.0 - 1e-6)
}

/// psi^r_n: equals psi^r on P^r, blends across P^r_{1,1+rho_n} to a smoothed
/// envelope of u offset by 1/n. Offsets strictly decrease, so the sequence
/// decreases outside P^r and converges to u there as n grows.
#[derive(Clone)]
pub struct DecreasingExtension {
    base: Arc<ParallelotopeTestFunction>,
    env: SmoothEnvelope,
    n: u32,
    rho_n: f64,
    offset: f64,
}

impl DecreasingExtension {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn rho_n(&self) -> f64 {
        self.rho_n
    }

    pub fn base(&self) -> &ParallelotopeTestFunction {
        &self.base
    }

    /// Blend factor: 1 on the closed P^r, 0 outside P^r_{1+rho_n}.
    fn chi(&self, x: &[f64]) -> f64 {
        let s = self.base.s_r();
        let y = self.base.rotated(x);
        let mut chi = 1.0;
        for yi in &y {
            let t = yi.abs();
            if t <= s {
                continue;
            }
            let (v, _, _) = quintic_step((t - s) / (s * self.rho_n));
            chi *= 1.0 - v;
            if chi == 0.0 {
                break;
            }
        }
        chi
    }
}

impl C2Function for DecreasingExtension {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let chi = self.chi(x);
        if chi == 1.0 {
            return self.base.value(x);
        }
        let envelope = self.env.eval(x) + self.offset;
        if chi == 0.0 {
            return envelope;
        }
        chi * self.base.value(x) + (1.0 - chi) * envelope
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let y = self.base.rotated(x);
        let s = self.base.s_r();
        if y.iter().all(|yi| yi.abs() <= s) {
            return self.base.gradient(x);
        }
        fd_gradient(&|p| self.value(p), x)
    }

    fn hessian(&self, x: &[f64]) -> SymMat {
        let y = self.base.rotated(x);
        let s = self.base.s_r();
        if y.iter().all(|yi| yi.abs() <= s) {
            return self.base.hessian(x);
        }
        fd_hessian(&|p| self.value(p), x)
    }
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-5 * (1.0 + linalg::norm(x));
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p.copy_from_slice(x);
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> SymMat {
    let n = x.len();
    let h = 1e-4 * (1.0 + linalg::norm(x));
    let f0 = f(x);
    let mut m = SymMat::zeros(n);
    let mut p = x.to_vec();
    for i in 0..n {
        p.copy_from_slice(x);
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        m.set_sym(i, i, (fp - 2.0 * f0 + fm) / (h * h));
        for j in (i + 1)..n {
            let mut eval = |si: f64, sj: f64| {
                p.copy_from_slice(x);
                p[i] = x[i] + si * h;
                p[j] = x[j] + sj * h;
                f(&p)
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h * h);
            m.set_sym(i, j, v);
        }
    }
    m
}

/// Builds psi^r_n from a forged psi^r. The envelope sup-convolution scale is
/// tied to the offset 1/n so exterior integrals are affine in the offset,
/// which the monotone-convergence study exploits when extrapolating.
pub fn extend_decreasing_sequence(
    base: &Arc<ParallelotopeTestFunction>,
    u: &CandidateFunction,
    n: u32,
) -> Result<DecreasingExtension> {
    if n == 0 {
        return Err(Error::InvalidParameters("sequence index n starts at 1".into()));
    }
    let dim = base.dimension();
    let offset = 1.0 / n as f64;
    let kappa = offset;
    let env = SmoothEnvelope::new(
        u,
        base.base_point(),
        0.0,
        &vec![0.0; dim],
        kappa,
        0.25 * kappa,
    );
    let rho_n = (2f64.powi(-(n as i32))).min(rho_cap(dim));
    let ext = DecreasingExtension { base: Arc::clone(base), env, n, rho_n, offset };

    // the blend must dominate u where it leaves psi^r
    let s = base.s_r();
    let mut bad: Option<(Vec<f64>, f64)> = None;
    for factor in [1.0 + 0.25 * rho_n, 1.0 + 0.5 * rho_n, 1.0 + rho_n, 1.0 + 2.0 * rho_n, 2.0, 4.0]
    {
        for q in sampling::halton_cube(dim, 32, 7 + n as u64) {
            let y: Vec<f64> = q.iter().map(|qi| (2.0 * qi - 1.0) * s * factor).collect();
            let x = ext.base.from_rotated(&y);
            let gap = ext.value(&x) - u.value(&x);
            if gap < -1e-9 {
                bad = Some((x, gap));
                break;
            }
        }
        if bad.is_some() {
            break;
        }
    }
    if let Some((x, gap)) = bad {
        return Err(Error::ExtensionFailure(format!(
            "envelope dips {gap:.3e} below u at {x:?} (n = {n})"
        )));
    }
    Ok(ext)
}

// ---------------------------------------------------------------------------
// Radial-cap sequence
// ---------------------------------------------------------------------------

/// psi_n: the cap 2 M_n |x - x_hat|^2 near the base point (plus the touching
/// affine part), blended to an envelope within [u, u + 1/n] outside 2/n.
#[derive(Clone)]
pub struct Prop2Sequence {
    x_hat: Vec<f64>,
    u_at: f64,
    grad_phi: Vec<f64>,
    n: u32,
    m_n: f64,
    offset: f64,
    env: SmoothEnvelope,
}

impl Prop2Sequence {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Sampled sup of the Hessian spectral norm over the 1/n ball, folded
    /// with all finer radii so n -> M_n is nonincreasing.
    pub fn m_n(&self) -> f64 {
        self.m_n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn chi(&self, t: f64) -> f64 {
        let inner = 0.5 / self.n as f64;
        if t <= inner {
            1.0
        } else {
            let (v, _, _) = quintic_step((t - inner) / inner);
            1.0 - v
        }
    }
}

impl C2Function for Prop2Sequence {
    fn dimension(&self) -> usize {
        self.x_hat.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let w = linalg::sub(x, &self.x_hat);
        let t = linalg::norm(&w);
        let affine = self.u_at + linalg::dot(&self.grad_phi, &w);
        let chi = self.chi(t);
        let cap = 2.0 * self.m_n * t * t;
        if chi == 1.0 {
            return affine + cap;
        }
        let envelope = self.env.eval(x) + self.offset;
        affine + chi * cap + (1.0 - chi) * envelope
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let w = linalg::sub(x, &self.x_hat);
        if linalg::norm(&w) <= 0.5 / self.n as f64 {
            let mut g = linalg::scale(&w, 4.0 * self.m_n);
            linalg::axpy(&mut g, 1.0, &self.grad_phi);
            return g;
        }
        fd_gradient(&|p| self.value(p), x)
    }

    fn hessian(&self, x: &[f64]) -> SymMat {
        let w = linalg::sub(x, &self.x_hat);
        let n = x.len();
        if linalg::norm(&w) <= 0.5 / self.n as f64 {
            return SymMat::identity(n).scaled(4.0 * self.m_n);
        }
        fd_hessian(&|p| self.value(p), x)
    }
}

/// Radii folded into each sampled Hessian sup; taking the max over finer
/// radii keeps n -> M_n nonincreasing without shared state between builds.
const PROP2_RADIUS_CAP: u32 = 48;

pub fn build_prop2_sequence(
    phi: &CandidateFunction,
    u: &CandidateFunction,
    x_hat: &[f64],
    n: u32,
) -> Result<Prop2Sequence> {
    if n == 0 {
        return Err(Error::InvalidParameters("sequence index n starts at 1".into()));
    }
    let jet = phi.jet(x_hat)?;
    let u_at = u.value(x_hat);
    if (u_at - jet.value).abs() > 1e-9 * (1.0 + u_at.abs() + jet.value.abs()) {
        return Err(Error::MaxViolated(format!(
            "u(x_hat) = {u_at} and phi(x_hat) = {} do not touch",
            jet.value
        )));
    }

    let sampled_sup = |radius: f64, seed: u64| -> Result<f64> {
        let mut sup = jet.hessian.spectral_norm();
        for p in sampling::halton_ball(x_hat, radius, 1024, seed) {
            sup = sup.max(phi.jet(&p)?.hessian.spectral_norm());
        }
        Ok(sup)
    };
    let mut m_n = 0.0f64;
    for m in n..=PROP2_RADIUS_CAP {
        m_n = m_n.max(sampled_sup(1.0 / m as f64, 1000 + m as u64)?);
    }

    // offset small enough that the envelope stays below the cap on the
    // overlap zone of consecutive blends, keeping the sequence decreasing
    let offset = (0.5 / n as f64).min(0.25 * m_n.max(1e-9) / ((n + 1) * (n + 1)) as f64);
    let kappa = 0.5 * offset;
    let env = SmoothEnvelope::new(u, x_hat, u_at, &jet.gradient, kappa, 0.25 * kappa);
    let seq = Prop2Sequence {
        x_hat: x_hat.to_vec(),
        u_at,
        grad_phi: jet.gradient.clone(),
        n,
        m_n,
        offset,
        env,
    };

    // domination checks: psi_n >= u at samples, within u + 1/n beyond 2/n
    let mut bad: Option<String> = None;
    for (radius, outer_band) in [
        (0.4 / n as f64, false),
        (0.9 / n as f64, false),
        (2.0 / n as f64, true),
        (4.0 / n as f64, true),
        (1.0, true),
    ] {
        for p in sampling::halton_ball(x_hat, radius, 48, 11 + n as u64) {
            let v = seq.value(&p);
            let uv = u.value(&p);
            if v < uv - 1e-9 {
                bad = Some(format!("psi_n dips {:.3e} below u at {p:?}", uv - v));
                break;
            }
            let w = linalg::sub(&p, x_hat);
            if outer_band && linalg::norm(&w) >= 2.0 / n as f64 && v > uv + 1.0 / n as f64 + 1e-9
            {
                bad = Some(format!(
                    "psi_n exceeds u + 1/n by {:.3e} at {p:?}",
                    v - uv - 1.0 / n as f64
                ));
                break;
            }
        }
        if bad.is_some() {
            break;
        }
    }
    if let Some(msg) = bad {
        return Err(Error::ExtensionFailure(format!("{msg} (n = {n})")));
    }
    Ok(seq)
}
