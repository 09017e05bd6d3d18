//! Levy densities q(z): admissibility verification and small-ball quadratic
//! moments.
//!
//! Kernels are named builtins plus parameters so scenario files reproduce
//! bit-exactly. All builtins are radially symmetric; N <= 3.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::quadrature::{self, QuadratureConfig};

/// Surface area of the unit sphere S^{N-1}.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        d => panic!("unsupported dimension {d}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// q = 0: the trivial kernel.
    Zero,
    /// Compound-Poisson box: q = intensity on |z| <= cutoff.
    Box { intensity: f64, cutoff: f64 },
    /// Truncated alpha-stable: q = |z|^{-N-alpha} on 0 < |z| <= cutoff.
    TruncatedStable { alpha: f64, cutoff: f64 },
    /// Tempered stable: q = e^{-lambda |z|} |z|^{-N-alpha}, full support.
    TemperedStable { alpha: f64, lambda: f64 },
    /// Gaussian tail: q = e^{-lambda |z|^2}, full support.
    GaussianTail { lambda: f64 },
}

/// A Levy density with its singularity metadata. Immutable after
/// construction; all operations are pure and thread-safe.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevyKernel {
    dim: usize,
    family: KernelFamily,
    singularity_order: f64,
    support_radius: Option<f64>,
    radial_symmetry: bool,
}

impl LevyKernel {
    fn new(dim: usize, family: KernelFamily) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameters("dimension must be >= 1".into()));
        }
        let (gamma, support) = match &family {
            KernelFamily::Zero => (0.0, Some(0.0)),
            KernelFamily::Box { intensity, cutoff } => {
                if *intensity < 0.0 || !(*cutoff > 0.0) {
                    return Err(Error::InvalidParameters("box kernel needs intensity >= 0, cutoff > 0".into()));
                }
                (0.0, Some(*cutoff))
            }
            KernelFamily::TruncatedStable { alpha, cutoff } => {
                if !(*alpha > 0.0) || !(*cutoff > 0.0) {
                    return Err(Error::InvalidParameters("stable kernel needs alpha > 0, cutoff > 0".into()));
                }
                (dim as f64 + alpha, Some(*cutoff))
            }
            KernelFamily::TemperedStable { alpha, lambda } => {
                if !(*alpha > 0.0) || !(*lambda > 0.0) {
                    return Err(Error::InvalidParameters("tempered kernel needs alpha > 0, lambda > 0".into()));
                }
                (dim as f64 + alpha, None)
            }
            KernelFamily::GaussianTail { lambda } => {
                if !(*lambda > 0.0) {
                    return Err(Error::InvalidParameters("gaussian kernel needs lambda > 0".into()));
                }
                (0.0, None)
            }
        };
        Ok(LevyKernel {
            dim,
            family,
            singularity_order: gamma,
            support_radius: support,
            radial_symmetry: true,
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        LevyKernel::new(dim, KernelFamily::Zero)
    }

    pub fn box_kernel(dim: usize, intensity: f64, cutoff: f64) -> Result<Self> {
        LevyKernel::new(dim, KernelFamily::Box { intensity, cutoff })
    }

    /// Note: alpha >= 2 is constructible on purpose; admissibility is the
    /// verifier's job (the near moment diverges there).
    pub fn truncated_stable(dim: usize, alpha: f64, cutoff: f64) -> Result<Self> {
        LevyKernel::new(dim, KernelFamily::TruncatedStable { alpha, cutoff })
    }

    pub fn tempered_stable(dim: usize, alpha: f64, lambda: f64) -> Result<Self> {
        LevyKernel::new(dim, KernelFamily::TemperedStable { alpha, lambda })
    }

    pub fn gaussian_tail(dim: usize, lambda: f64) -> Result<Self> {
        LevyKernel::new(dim, KernelFamily::GaussianTail { lambda })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    /// gamma with q(z) = O(|z|^{-gamma}) near 0.
    pub fn singularity_order(&self) -> f64 {
        self.singularity_order
    }

    /// None means full support.
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn radial_symmetry(&self) -> bool {
        self.radial_symmetry
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, KernelFamily::Zero)
    }

    pub fn check_dimension(&self) -> Result<()> {
        if self.dim > 3 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        Ok(())
    }

    pub fn radial_density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match &self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::Box { intensity, cutoff } => {
                if r <= *cutoff {
                    *intensity
                } else {
                    0.0
                }
            }
            KernelFamily::TruncatedStable { alpha, cutoff } => {
                if r <= *cutoff {
                    r.powf(-(self.dim as f64) - alpha)
                } else {
                    0.0
                }
            }
            KernelFamily::TemperedStable { alpha, lambda } => {
                (-lambda * r).exp() * r.powf(-(self.dim as f64) - alpha)
            }
            KernelFamily::GaussianTail { lambda } => (-lambda * r * r).exp(),
        }
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        self.radial_density(crate::linalg::norm(z))
    }

    /// Closed-form q-mass bound beyond `radius`, used for tail truncation of
    /// full-support kernels. Zero when the support ends inside `radius`.
    pub fn tail_mass_bound_beyond(&self, radius: f64) -> f64 {
        let s = sphere_area(self.dim);
        match &self.family {
            KernelFamily::Zero | KernelFamily::Box { .. } | KernelFamily::TruncatedStable { .. } => {
                match self.support_radius {
                    Some(sr) if sr <= radius => 0.0,
                    Some(sr) => {
                        // remaining shell of a compact kernel (rarely used)
                        let q_max = self.radial_density(radius);
                        q_max * s * (sr.powi(self.dim as i32) - radius.powi(self.dim as i32))
                            / self.dim as f64
                    }
                    None => unreachable!("compact families always carry a support radius"),
                }
            }
            KernelFamily::TemperedStable { alpha, lambda } => {
                // int_R^inf e^{-l r} r^{-1-a} dr <= R^{-1-a} e^{-l R} / l
                s * radius.powf(-1.0 - alpha) * (-lambda * radius).exp() / lambda
            }
            KernelFamily::GaussianTail { lambda } => {
                // r^{N-1} e^{-l r^2} <= r^{N-1} e^{-(l R) r} for r >= R
                let c = lambda * radius;
                let e = (-lambda * radius * radius).exp();
                let poly = match self.dim {
                    1 => 1.0 / c,
                    2 => radius / c + 1.0 / (c * c),
                    3 => radius * radius / c + 2.0 * radius / (c * c) + 2.0 / (c * c * c),
                    _ => unreachable!(),
                };
                s * e * poly
            }
        }
    }

    /// Scalar second moment m(eps) = int_{|z|<eps} |z|^2 q dz, closed form
    /// where the family admits one.
    pub fn closed_form_scalar_moment(&self, eps: f64) -> Option<f64> {
        let s = sphere_area(self.dim);
        let n = self.dim as f64;
        match &self.family {
            KernelFamily::Zero => Some(0.0),
            KernelFamily::Box { intensity, cutoff } => {
                let r = eps.min(*cutoff);
                Some(intensity * s * r.powf(n + 2.0) / (n + 2.0))
            }
            KernelFamily::TruncatedStable { alpha, cutoff } => {
                if *alpha >= 2.0 {
                    return None;
                }
                let r = eps.min(*cutoff);
                Some(s * r.powf(2.0 - alpha) / (2.0 - alpha))
            }
            _ => None,
        }
    }
}

/// Near-origin second moment, tail mass and the quadrature error estimate
/// of the admissibility check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub near_second_moment: f64,
    pub tail_mass: f64,
    pub quadrature_error_estimate: f64,
}

/// Checks the defining integrability condition: finite int_{|z|<1} |z|^2 q
/// and finite int_{|z|>=1} q, both by graded quadrature with a deterministic
/// divergence criterion.
pub fn verify_levy_integrability(
    kernel: &LevyKernel,
    cfg: &QuadratureConfig,
) -> Result<MomentReport> {
    kernel.check_dimension()?;
    cfg.validate()?;
    if kernel.is_zero() {
        return Ok(MomentReport {
            near_second_moment: 0.0,
            tail_mass: 0.0,
            quadrature_error_estimate: 0.0,
        });
    }
    if kernel.singularity_order() >= kernel.dim() as f64 + 2.0 {
        return Err(Error::DivergentMoment(format!(
            "singularity order {} >= N + 2 = {}",
            kernel.singularity_order(),
            kernel.dim() + 2
        )));
    }

    let near = scalar_moment_by_quadrature(kernel, 1.0, cfg)?;

    // tail mass over expanding dyadic shells out to the support
    let dim = kernel.dim();
    let q = |r: f64| kernel.radial_density(r);
    let one = |_z: &[f64]| 1.0;
    let outer_cap = kernel.support_radius().unwrap_or(f64::INFINITY);
    let (tail, tail_err) = if outer_cap <= 1.0 {
        (0.0, 0.0)
    } else {
        let mut base = 1.0f64;
        let mut term = |_k: u32| {
            if base >= outer_cap {
                return (0.0, 0.0);
            }
            let hi = (base * 2.0).min(outer_cap);
            let (v, e) =
                quadrature::shell_integral(dim, base, hi, &q, &one, cfg.target_tolerance, 14);
            base = hi;
            (v, e)
        };
        let series = quadrature::graded_series(&mut term, 64, cfg.target_tolerance);
        if series.diverged {
            return Err(Error::DivergentMoment("tail mass fails the Cauchy criterion".into()));
        }
        (series.value, series.error)
    };

    Ok(MomentReport {
        near_second_moment: near.0,
        tail_mass: tail,
        quadrature_error_estimate: near.1 + tail_err,
    })
}

/// m(eps) by graded-mesh quadrature regardless of closed forms; the
/// `(value, error)` pair feeds both the verifier and the moment matrix.
fn scalar_moment_by_quadrature(
    kernel: &LevyKernel,
    eps: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let dim = kernel.dim();
    // stop at the support edge so no annulus straddles the cutoff jump
    let upper = match kernel.support_radius() {
        Some(r) => eps.min(r),
        None => eps,
    };
    if upper <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let q = |r: f64| kernel.radial_density(r);
    let z2 = |z: &[f64]| crate::linalg::dot(z, z);
    let mut term = |k: u32| {
        let b = upper * 2f64.powi(-(k as i32));
        let a = 0.5 * b;
        quadrature::shell_integral(dim, a, b, &q, &z2, cfg.target_tolerance * 0.01, 14)
    };
    let series = quadrature::graded_series(&mut term, cfg.max_grading_levels, cfg.target_tolerance);
    if series.diverged {
        return Err(Error::DivergentMoment(format!(
            "near second moment fails the Cauchy criterion within {} grading levels",
            cfg.max_grading_levels
        )));
    }
    Ok((series.value, series.error))
}

/// M(eps) = int_{|z|<eps} z z^T q(z) dz, symmetric PSD. Uses the closed form
/// when the family has one, else the graded mesh; radial symmetry collapses
/// the matrix to (m(eps)/N) I.
pub fn small_ball_quadratic_moment(kernel: &LevyKernel, eps: f64) -> Result<SymMat> {
    small_ball_quadratic_moment_cfg(kernel, eps, &QuadratureConfig::default()).map(|p| p.0)
}

/// As `small_ball_quadratic_moment`, returning the quadrature error too.
pub fn small_ball_quadratic_moment_cfg(
    kernel: &LevyKernel,
    eps: f64,
    cfg: &QuadratureConfig,
) -> Result<(SymMat, f64)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameters("moment radius must be positive".into()));
    }
    kernel.check_dimension()?;
    let n = kernel.dim();
    if kernel.singularity_order() >= n as f64 + 2.0 {
        return Err(Error::DivergentMoment(format!(
            "singularity order {} >= N + 2 = {}",
            kernel.singularity_order(),
            n + 2
        )));
    }
    let (m, err) = match kernel.closed_form_scalar_moment(eps) {
        Some(m) => (m, 0.0),
        None => scalar_moment_by_quadrature(kernel, eps, cfg)?,
    };
    Ok((SymMat::identity(n).scaled(m / n as f64), err))
}

/// Forced quadrature route, kept public so the closed forms can be checked
/// against it.
pub fn small_ball_quadratic_moment_quadrature(
    kernel: &LevyKernel,
    eps: f64,
    cfg: &QuadratureConfig,
) -> Result<SymMat> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameters("moment radius must be positive".into()));
    }
    kernel.check_dimension()?;
    let n = kernel.dim();
    if kernel.singularity_order() >= n as f64 + 2.0 {
        return Err(Error::DivergentMoment("singularity order >= N + 2".into()));
    }
    let (m, _) = scalar_moment_by_quadrature(kernel, eps, cfg)?;
    Ok(SymMat::identity(n).scaled(m / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: composite Simpson over dyadic segments; unrelated
    // to the Gauss panel machinery under test.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn graded_simpson_oracle(f: &dyn Fn(f64) -> f64, upper: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..60 {
            let b = upper * 2f64.powi(-k);
            let a = 0.5 * b;
            total += simpson(f, a, b, 64);
        }
        total
    }

    #[test]
    fn box_kernel_moments_match_closed_form_and_oracle() {
        let k = LevyKernel::box_kernel(1, 1.0, 1.0).unwrap();
        let rep = verify_levy_integrability(&k, &QuadratureConfig::default()).unwrap();
        assert!((rep.near_second_moment - 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(rep.tail_mass, 0.0);
        let oracle = graded_simpson_oracle(&|r| 2.0 * r * r, 1.0);
        assert!((rep.near_second_moment - oracle).abs() < 1e-9);
    }

    #[test]
    fn zero_kernel_moments() {
        let k = LevyKernel::zero(1).unwrap();
        let rep = verify_levy_integrability(&k, &QuadratureConfig::default()).unwrap();
        assert_eq!(rep.near_second_moment, 0.0);
        assert_eq!(rep.tail_mass, 0.0);
    }

    #[test]
    fn truncated_stable_half_moment() {
        // q = |z|^{-3/2} on |z| <= 1: 2 int_0^1 r^2 r^{-3/2} dr = 4/3
        let k = LevyKernel::truncated_stable(1, 0.5, 1.0).unwrap();
        let rep = verify_levy_integrability(&k, &QuadratureConfig::default()).unwrap();
        assert!((rep.near_second_moment - 4.0 / 3.0).abs() < 1e-8);
        let oracle = graded_simpson_oracle(&|r| 2.0 * r * r * r.powf(-1.5), 1.0);
        assert!((rep.near_second_moment - oracle).abs() < 1e-7);
    }

    #[test]
    fn supercritical_stable_is_flagged_divergent() {
        // q = |z|^{-3.1} in 1D: gamma = 3.1 >= N + 2
        let k = LevyKernel::truncated_stable(1, 2.1, 1.0).unwrap();
        let err = verify_levy_integrability(&k, &QuadratureConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DivergentMoment(_)));
        assert!(small_ball_quadratic_moment(&k, 0.5).is_err());
    }

    #[test]
    fn dimension_cap() {
        assert!(LevyKernel::box_kernel(4, 1.0, 1.0)
            .unwrap()
            .check_dimension()
            .is_err());
    }

    #[test]
    fn small_ball_box_half() {
        let k = LevyKernel::box_kernel(1, 1.0, 1.0).unwrap();
        let m = small_ball_quadratic_moment(&k, 0.5).unwrap();
        assert!((m.get(0, 0) - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn small_ball_vanishes_with_radius() {
        let k = LevyKernel::truncated_stable(1, 0.5, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for e in [1.0, 0.25, 0.01, 1e-4] {
            let m = small_ball_quadratic_moment(&k, e).unwrap();
            assert!(m.trace() < prev);
            prev = m.trace();
        }
        // m(eps) = 2 eps^{3/2} / 1.5 -> 1.33e-6 at eps = 1e-4
        assert!(prev < 1e-5);
    }

    #[test]
    fn closed_form_agrees_with_quadrature_route() {
        let cfg = QuadratureConfig::default();
        for k in [
            LevyKernel::box_kernel(2, 0.7, 1.3).unwrap(),
            LevyKernel::truncated_stable(2, 0.8, 1.0).unwrap(),
        ] {
            for eps in [0.3, 1.0, 2.0] {
                let a = small_ball_quadratic_moment(&k, eps).unwrap();
                let b = small_ball_quadratic_moment_quadrature(&k, eps, &cfg).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(
                            (a.get(i, j) - b.get(i, j)).abs() < 1e-9,
                            "({i},{j}): {} vs {}",
                            a.get(i, j),
                            b.get(i, j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn radial_moment_matches_componentwise_tensor_oracle_2d() {
        // midpoint tensor rule with a ball mask, independent of the radial path
        let k = LevyKernel::box_kernel(2, 1.0, 2.0).unwrap();
        let eps = 0.8;
        let m = small_ball_quadratic_moment(&k, eps).unwrap();
        let n = 600;
        let h = 2.0 * eps / n as f64;
        let mut oracle = [[0.0f64; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                let x = -eps + (i as f64 + 0.5) * h;
                let y = -eps + (j as f64 + 0.5) * h;
                if x * x + y * y < eps * eps {
                    let q = k.density(&[x, y]);
                    oracle[0][0] += x * x * q * h * h;
                    oracle[0][1] += x * y * q * h * h;
                    oracle[1][1] += y * y * q * h * h;
                }
            }
        }
        let scale = m.trace();
        assert!((m.get(0, 0) - oracle[0][0]).abs() < 0.02 * scale);
        assert!((m.get(1, 1) - oracle[1][1]).abs() < 0.02 * scale);
        assert!((m.get(0, 1) - oracle[0][1]).abs() < 0.01 * scale);
    }

    #[test]
    fn three_d_box_moment_closed_form_and_quadrature() {
        // m(eps) = 4 pi eps^5 / 5, M = (m/3) I
        let k = LevyKernel::box_kernel(3, 1.0, 1.0).unwrap();
        let eps = 0.5;
        let m = small_ball_quadratic_moment(&k, eps).unwrap();
        let want = 4.0 * std::f64::consts::PI / 5.0 * eps.powi(5) / 3.0;
        for i in 0..3 {
            assert!((m.get(i, i) - want).abs() < 1e-14);
            for j in 0..3 {
                if i != j {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
        let q = small_ball_quadratic_moment_quadrature(&k, eps, &QuadratureConfig::default())
            .unwrap();
        assert!((q.get(0, 0) - want).abs() < 1e-10, "{} vs {want}", q.get(0, 0));
    }

    #[test]
    fn trace_monotone_in_radius_and_psd() {
        let k = LevyKernel::tempered_stable(2, 0.7, 1.5).unwrap();
        let mut prev = 0.0;
        for e in [0.1, 0.2, 0.4, 0.8, 1.6] {
            let m = small_ball_quadratic_moment(&k, e).unwrap();
            let tr = m.trace();
            assert!(tr >= prev - 1e-12 * tr.max(1.0));
            let (vals, _) = m.eigh();
            for v in vals {
                assert!(v >= -1e-12 * tr.max(1.0));
            }
            prev = tr;
        }
    }

    #[test]
    fn refinement_within_reported_error() {
        let k = LevyKernel::gaussian_tail(1, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let rep = verify_levy_integrability(&k, &cfg).unwrap();
        let mut fine = cfg;
        fine.target_tolerance *= 1e-2;
        let rep2 = verify_levy_integrability(&k, &fine).unwrap();
        assert!(
            (rep.near_second_moment - rep2.near_second_moment).abs()
                <= rep.quadrature_error_estimate.max(1e-12)
        );
        // gaussian tail mass: 2 int_1^inf e^{-r^2} dr ~ 0.27880558528066
        assert!((rep.tail_mass - 0.278_805_585_280_66).abs() < 1e-8);
    }

    #[test]
    fn tail_mass_bound_dominates_truth() {
        let k = LevyKernel::gaussian_tail(1, 1.0).unwrap();
        // bound at R = 2 must dominate 2 int_2^inf e^{-r^2} dr ~ 0.004677735
        let bound = k.tail_mass_bound_beyond(2.0);
        assert!(bound >= 0.004_677_73);
        let kt = LevyKernel::tempered_stable(1, 0.5, 2.0).unwrap();
        let bound_t = kt.tail_mass_bound_beyond(2.0);
        let oracle = simpson(&|r| 2.0 * (-2.0 * r).exp() * r.powf(-1.5), 2.0, 30.0, 400_000);
        assert!(bound_t >= oracle);
    }
}
