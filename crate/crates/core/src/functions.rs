//! Candidate functions u, v and smooth test functions phi, with analytic or
//! finite-difference jets, plus grid-backed semicontinuous candidates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMat};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessClass {
    C2,
    PiecewiseC2,
    UscGrid,
    LscGrid,
}

/// Sub/supersolution side. Sub checks work against USC candidates touched
/// from above, super against LSC candidates touched from below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sub,
    Super,
}

/// Value, gradient and Hessian of a function at a point.
#[derive(Clone, Debug)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMat,
}

/// The pair (p, X) at a base point.
#[derive(Clone, Debug)]
pub struct SecondOrderJet {
    pub base: Vec<f64>,
    pub p: Vec<f64>,
    pub x: SymMat,
}

/// A jet together with the certifying pair (epsilon, delta): the quadratic
/// bound with slack delta holds on the ball of radius epsilon.
#[derive(Clone, Debug)]
pub struct JetCertificate {
    pub jet: SecondOrderJet,
    pub delta: f64,
    pub epsilon: f64,
}

/// Twice continuously differentiable function with evaluable derivatives.
/// Implemented by the builtin smooth families and by forged test functions.
pub trait C2Function: Send + Sync {
    fn dimension(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> SymMat;

    fn jet(&self, x: &[f64]) -> Jet {
        Jet {
            value: self.value(x),
            gradient: self.gradient(x),
            hessian: self.hessian(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Upper,
    Lower,
}

/// Grid-backed candidate: multilinear interpolation inside the box, constant
/// extension outside, with envelope selection at cell boundaries so USC/LSC
/// semantics survive ties.
#[derive(Clone, Debug)]
pub struct GridCandidate {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub envelope: EnvelopeKind,
}

impl GridCandidate {
    pub fn new(
        lo: Vec<f64>,
        hi: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<f64>,
        envelope: EnvelopeKind,
    ) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || dim > 3 || hi.len() != dim || shape.len() != dim {
            return Err(Error::InvalidParameters("grid dims inconsistent".into()));
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(Error::InvalidParameters("grid needs >= 2 nodes per axis".into()));
        }
        let count: usize = shape.iter().product();
        if values.len() != count {
            return Err(Error::InvalidParameters(format!(
                "grid values length {} != {}",
                values.len(),
                count
            )));
        }
        for d in 0..dim {
            if !(hi[d] > lo[d]) {
                return Err(Error::InvalidParameters("grid box degenerate".into()));
            }
        }
        Ok(GridCandidate { lo, hi, shape, values, envelope })
    }

    /// Loads `x1,...,xN,value` rows; the coordinates must form a full,
    /// uniformly spaced tensor grid.
    pub fn from_csv(path: &std::path::Path, envelope: EnvelopeKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameters("empty grid file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[cols.len() - 1] != "value" {
            return Err(Error::InvalidParameters(
                "grid header must be x1,...,xN,value".into(),
            ));
        }
        let dim = cols.len() - 1;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for (li, line) in lines.enumerate() {
            let nums: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidParameters(format!("grid row {}: {e}", li + 2)))?;
            if nums.len() != dim + 1 {
                return Err(Error::InvalidParameters(format!(
                    "grid row {} has {} fields, expected {}",
                    li + 2,
                    nums.len(),
                    dim + 1
                )));
            }
            rows.push((nums[..dim].to_vec(), nums[dim]));
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for (xs, _) in &rows {
            for d in 0..dim {
                let v = xs[d];
                if !axes[d].iter().any(|&a| (a - v).abs() < 1e-12) {
                    axes[d].push(v);
                }
            }
        }
        for ax in axes.iter_mut() {
            ax.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let count: usize = shape.iter().product();
        if rows.len() != count {
            return Err(Error::InvalidParameters(format!(
                "grid has {} rows, tensor product needs {}",
                rows.len(),
                count
            )));
        }
        for ax in &axes {
            let h0 = ax[1] - ax[0];
            for w in ax.windows(2) {
                if ((w[1] - w[0]) - h0).abs() > 1e-9 * h0.abs().max(1.0) {
                    return Err(Error::InvalidParameters("grid spacing not uniform".into()));
                }
            }
        }
        let lo: Vec<f64> = axes.iter().map(|ax| ax[0]).collect();
        let hi: Vec<f64> = axes.iter().map(|ax| *ax.last().unwrap()).collect();
        let mut values = vec![f64::NAN; count];
        for (xs, v) in &rows {
            let mut idx = 0usize;
            for d in 0..dim {
                let pos = axes[d]
                    .iter()
                    .position(|&a| (a - xs[d]).abs() < 1e-12)
                    .unwrap();
                idx = idx * shape[d] + pos;
            }
            values[idx] = *v;
        }
        GridCandidate::new(lo, hi, shape, values, envelope)
    }

    fn spacing(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / (self.shape[d] - 1) as f64
    }

    fn node_value(&self, idx: &[usize]) -> f64 {
        let mut flat = 0usize;
        for d in 0..self.lo.len() {
            flat = flat * self.shape[d] + idx[d];
        }
        self.values[flat]
    }

    fn interp_in_cell(&self, cell: &[usize], x: &[f64]) -> f64 {
        let dim = self.lo.len();
        let mut t = vec![0.0; dim];
        for d in 0..dim {
            let h = self.spacing(d);
            let x0 = self.lo[d] + cell[d] as f64 * h;
            t[d] = ((x[d] - x0) / h).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = vec![0usize; dim];
            for d in 0..dim {
                if corner >> d & 1 == 1 {
                    w *= t[d];
                    idx[d] = cell[d] + 1;
                } else {
                    w *= 1.0 - t[d];
                    idx[d] = cell[d];
                }
            }
            acc += w * self.node_value(&idx);
        }
        acc
    }

    /// Envelope evaluation: constant extension clamps to the box; points on
    /// interior cell faces take the upper (USC) or lower (LSC) envelope over
    /// all incident cells.
    pub fn value(&self, x: &[f64]) -> f64 {
        let dim = self.lo.len();
        let xc: Vec<f64> = (0..dim).map(|d| x[d].clamp(self.lo[d], self.hi[d])).collect();
        // candidate cell indices per axis (two when exactly on an interior node)
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(dim);
        for d in 0..dim {
            let h = self.spacing(d);
            let raw = (xc[d] - self.lo[d]) / h;
            let i = (raw.floor() as isize).clamp(0, self.shape[d] as isize - 2) as usize;
            let on_node = (raw - raw.round()).abs() < 1e-12;
            let node = raw.round() as isize;
            let mut c = vec![i];
            if on_node && node > 0 && (node as usize) < self.shape[d] - 1 {
                let j = node as usize;
                c = vec![j - 1, j];
            }
            choices.push(c);
        }
        let mut best: Option<f64> = None;
        let mut cell = vec![0usize; dim];
        enumerate_cells(&choices, &mut cell, 0, &mut |cell| {
            let v = self.interp_in_cell(cell, &xc);
            best = Some(match (best, self.envelope) {
                (None, _) => v,
                (Some(b), EnvelopeKind::Upper) => b.max(v),
                (Some(b), EnvelopeKind::Lower) => b.min(v),
            });
        });
        best.unwrap()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn enumerate_cells(
    choices: &[Vec<usize>],
    cell: &mut Vec<usize>,
    d: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if d == choices.len() {
        f(cell);
        return;
    }
    for &c in &choices[d] {
        cell[d] = c;
        enumerate_cells(choices, cell, d + 1, f);
    }
}

/// Evaluable candidate built from the registry families, closed under sum
/// and scaling. Bounded families keep Definition-C tails integrable.
#[derive(Clone)]
pub enum CandidateFunction {
    /// (1/2) <Q x, x> + <b, x> + c
    Quadratic { q: SymMat, b: Vec<f64>, c: f64 },
    /// A exp(-|x - center|^2 / width^2)
    GaussianBump { amplitude: f64, center: Vec<f64>, width: f64 },
    /// sign * |x - apex|
    Cone { sign: f64, apex: Vec<f64> },
    /// C2 radial plateau: height inside radius `inner`, 0 beyond `outer`,
    /// quintic transition between.
    SmoothStep { center: Vec<f64>, inner: f64, outer: f64, height: f64 },
    Sum(Vec<CandidateFunction>),
    Scale(f64, Box<CandidateFunction>),
    Grid(GridCandidate),
    Forged(Arc<dyn C2Function>),
}

impl fmt::Debug for CandidateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateFunction::Quadratic { q, b, c } => {
                write!(f, "Quadratic(q={:?}, b={:?}, c={})", q.a, b, c)
            }
            CandidateFunction::GaussianBump { amplitude, center, width } => {
                write!(f, "GaussianBump(A={amplitude}, center={center:?}, w={width})")
            }
            CandidateFunction::Cone { sign, apex } => write!(f, "Cone({sign}, {apex:?})"),
            CandidateFunction::SmoothStep { center, inner, outer, height } => {
                write!(f, "SmoothStep({center:?}, {inner}, {outer}, {height})")
            }
            CandidateFunction::Sum(parts) => f.debug_tuple("Sum").field(parts).finish(),
            CandidateFunction::Scale(c, inner) => f.debug_tuple("Scale").field(c).field(inner).finish(),
            CandidateFunction::Grid(g) => write!(f, "Grid({:?}, shape={:?})", g.envelope, g.shape),
            CandidateFunction::Forged(fun) => write!(f, "Forged(dim={})", fun.dimension()),
        }
    }
}

/// Quintic smoothstep: 0 at 0, 1 at 1, with two vanishing derivatives at
/// both ends; value/first/second derivative.
pub(crate) fn quintic_step(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let t2 = t * t;
        let t3 = t2 * t;
        (
            t3 * (10.0 - 15.0 * t + 6.0 * t2),
            30.0 * t2 * (1.0 - 2.0 * t + t2),
            60.0 * t * (1.0 - 3.0 * t + 2.0 * t2),
        )
    }
}

impl CandidateFunction {
    pub fn dimension(&self) -> usize {
        match self {
            CandidateFunction::Quadratic { q, .. } => q.n,
            CandidateFunction::GaussianBump { center, .. } => center.len(),
            CandidateFunction::Cone { apex, .. } => apex.len(),
            CandidateFunction::SmoothStep { center, .. } => center.len(),
            CandidateFunction::Sum(parts) => parts[0].dimension(),
            CandidateFunction::Scale(_, inner) => inner.dimension(),
            CandidateFunction::Grid(g) => g.lo.len(),
            CandidateFunction::Forged(f) => f.dimension(),
        }
    }

    pub fn smoothness_class(&self) -> SmoothnessClass {
        match self {
            CandidateFunction::Quadratic { .. }
            | CandidateFunction::GaussianBump { .. }
            | CandidateFunction::SmoothStep { .. }
            | CandidateFunction::Forged(_) => SmoothnessClass::C2,
            CandidateFunction::Cone { .. } => SmoothnessClass::PiecewiseC2,
            CandidateFunction::Grid(g) => match g.envelope {
                EnvelopeKind::Upper => SmoothnessClass::UscGrid,
                EnvelopeKind::Lower => SmoothnessClass::LscGrid,
            },
            CandidateFunction::Sum(parts) => parts
                .iter()
                .map(CandidateFunction::smoothness_class)
                .max_by_key(|c| class_rank(*c))
                .unwrap(),
            CandidateFunction::Scale(c, inner) => {
                let cls = inner.smoothness_class();
                if *c < 0.0 {
                    // negation swaps the semicontinuous envelopes
                    match cls {
                        SmoothnessClass::UscGrid => SmoothnessClass::LscGrid,
                        SmoothnessClass::LscGrid => SmoothnessClass::UscGrid,
                        other => other,
                    }
                } else {
                    cls
                }
            }
        }
    }

    pub fn is_c2(&self) -> bool {
        self.smoothness_class() == SmoothnessClass::C2
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            CandidateFunction::Quadratic { q, b, c } => {
                0.5 * q.quad_form(x) + linalg::dot(b, x) + c
            }
            CandidateFunction::GaussianBump { amplitude, center, width } => {
                let d = linalg::sub(x, center);
                amplitude * (-linalg::dot(&d, &d) / (width * width)).exp()
            }
            CandidateFunction::Cone { sign, apex } => sign * linalg::norm(&linalg::sub(x, apex)),
            CandidateFunction::SmoothStep { center, inner, outer, height } => {
                let rho = linalg::norm(&linalg::sub(x, center));
                if rho <= *inner {
                    *height
                } else if rho >= *outer {
                    0.0
                } else {
                    let (s, _, _) = quintic_step((rho - inner) / (outer - inner));
                    height * (1.0 - s)
                }
            }
            CandidateFunction::Sum(parts) => parts.iter().map(|p| p.value(x)).sum(),
            CandidateFunction::Scale(c, inner) => c * inner.value(x),
            CandidateFunction::Grid(g) => g.value(x),
            CandidateFunction::Forged(f) => f.value(x),
        }
    }

    /// A bound on sup |u| over R^N when the family is bounded, None otherwise.
    pub fn sup_abs_bound(&self) -> Option<f64> {
        match self {
            CandidateFunction::Quadratic { q, b, c } => {
                if q.a.iter().all(|&v| v == 0.0) && b.iter().all(|&v| v == 0.0) {
                    Some(c.abs())
                } else {
                    None
                }
            }
            CandidateFunction::GaussianBump { amplitude, .. } => Some(amplitude.abs()),
            CandidateFunction::Cone { .. } => None,
            CandidateFunction::SmoothStep { height, .. } => Some(height.abs()),
            CandidateFunction::Sum(parts) => {
                parts.iter().map(|p| p.sup_abs_bound()).sum::<Option<f64>>()
            }
            CandidateFunction::Scale(c, inner) => inner.sup_abs_bound().map(|b| b * c.abs()),
            CandidateFunction::Grid(g) => Some(g.max_abs()),
            CandidateFunction::Forged(_) => None,
        }
    }

    /// Analytic jet where the family provides one; `NotSmooth` for grid
    /// classes everywhere and for cones at the apex.
    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        let n = self.dimension();
        match self {
            CandidateFunction::Quadratic { q, b, c } => {
                let mut grad = q.matvec(x);
                for (g, bi) in grad.iter_mut().zip(b) {
                    *g += bi;
                }
                Ok(Jet {
                    value: 0.5 * q.quad_form(x) + linalg::dot(b, x) + c,
                    gradient: grad,
                    hessian: q.clone(),
                })
            }
            CandidateFunction::GaussianBump { amplitude, center, width } => {
                let d = linalg::sub(x, center);
                let w2 = width * width;
                let e = amplitude * (-linalg::dot(&d, &d) / w2).exp();
                let grad = linalg::scale(&d, -2.0 * e / w2);
                let mut h = SymMat::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        let mut v = 4.0 * e * d[i] * d[j] / (w2 * w2);
                        if i == j {
                            v -= 2.0 * e / w2;
                        }
                        h.set_sym(i, j, v);
                    }
                }
                Ok(Jet { value: e, gradient: grad, hessian: h })
            }
            CandidateFunction::Cone { sign, apex } => {
                let d = linalg::sub(x, apex);
                let rho = linalg::norm(&d);
                if rho < 1e-14 {
                    return Err(Error::NotSmooth("cone has no jet at its apex".into()));
                }
                let e = linalg::scale(&d, 1.0 / rho);
                let mut h = SymMat::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        let mut v = -e[i] * e[j];
                        if i == j {
                            v += 1.0;
                        }
                        h.set_sym(i, j, sign * v / rho);
                    }
                }
                Ok(Jet {
                    value: sign * rho,
                    gradient: linalg::scale(&e, *sign),
                    hessian: h,
                })
            }
            CandidateFunction::SmoothStep { center, inner, outer, height } => {
                let d = linalg::sub(x, center);
                let rho = linalg::norm(&d);
                if rho <= *inner || rho >= *outer {
                    let value = if rho <= *inner { *height } else { 0.0 };
                    return Ok(Jet {
                        value,
                        gradient: vec![0.0; n],
                        hessian: SymMat::zeros(n),
                    });
                }
                let width = outer - inner;
                let (s, ds, dss) = quintic_step((rho - inner) / width);
                let g = height * (1.0 - s);
                let g1 = -height * ds / width; // d/d rho
                let g2 = -height * dss / (width * width);
                let e = linalg::scale(&d, 1.0 / rho);
                let mut h = SymMat::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        let pr = e[i] * e[j];
                        let mut v = g2 * pr;
                        v += g1 / rho * (if i == j { 1.0 } else { 0.0 } - pr);
                        h.set_sym(i, j, v);
                    }
                }
                Ok(Jet { value: g, gradient: linalg::scale(&e, g1), hessian: h })
            }
            CandidateFunction::Sum(parts) => {
                let mut it = parts.iter();
                let mut jet = it.next().unwrap().jet(x)?;
                for p in it {
                    let j = p.jet(x)?;
                    jet.value += j.value;
                    linalg::axpy(&mut jet.gradient, 1.0, &j.gradient);
                    jet.hessian = jet.hessian.add(&j.hessian);
                }
                Ok(jet)
            }
            CandidateFunction::Scale(c, inner) => {
                let j = inner.jet(x)?;
                Ok(Jet {
                    value: c * j.value,
                    gradient: linalg::scale(&j.gradient, *c),
                    hessian: j.hessian.scaled(*c),
                })
            }
            CandidateFunction::Grid(_) => Err(Error::NotSmooth(
                "grid-backed candidates carry no jets".into(),
            )),
            CandidateFunction::Forged(f) => Ok(f.jet(x)),
        }
    }
}

fn class_rank(c: SmoothnessClass) -> u8 {
    match c {
        SmoothnessClass::C2 => 0,
        SmoothnessClass::PiecewiseC2 => 1,
        SmoothnessClass::UscGrid => 2,
        SmoothnessClass::LscGrid => 3,
    }
}

/// Packages the analytic jet of a smooth candidate at `x` as (p, X).
pub fn jet_at(f: &CandidateFunction, x: &[f64]) -> Result<SecondOrderJet> {
    match f.smoothness_class() {
        SmoothnessClass::UscGrid | SmoothnessClass::LscGrid => Err(Error::NotSmooth(
            "jet_at requires a (piecewise) C2 candidate".into(),
        )),
        _ => {
            let j = f.jet(x)?;
            Ok(SecondOrderJet { base: x.to_vec(), p: j.gradient, x: j.hessian })
        }
    }
}

/// Max componentwise discrepancy between the analytic jet and central
/// finite differences of the evaluator at step `h`.
pub fn validate_jet_fd(f: &CandidateFunction, x: &[f64], h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::InvalidParameters("fd step must be positive".into()));
    }
    let n = f.dimension();
    let jet = f.jet(x)?;
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    let f0 = f.value(x);
    for i in 0..n {
        xp.copy_from_slice(x);
        xp[i] = x[i] + h;
        let fp = f.value(&xp);
        xp[i] = x[i] - h;
        let fm = f.value(&xp);
        worst = worst.max(((fp - fm) / (2.0 * h) - jet.gradient[i]).abs());
        worst = worst.max(((fp - 2.0 * f0 + fm) / (h * h) - jet.hessian.get(i, i)).abs());
        for j in (i + 1)..n {
            let mut eval = |si: f64, sj: f64| {
                xp.copy_from_slice(x);
                xp[i] = x[i] + si * h;
                xp[j] = x[j] + sj * h;
                f.value(&xp)
            };
            let mixed =
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                    / (4.0 * h * h);
            worst = worst.max((mixed - jet.hessian.get(i, j)).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug)]
pub struct JetCheck {
    pub ok: bool,
    pub worst_violation: f64,
}

/// Samples the jet inequality on dyadic shells plus low-discrepancy ball
/// points. Violations concentrate near 0 or the shell boundary, so the
/// radii eps * 2^-k (k = 0..20) are always included.
pub fn verify_jet(
    u: &CandidateFunction,
    cert: &JetCertificate,
    mode: Mode,
    samples: usize,
    seed: u64,
) -> JetCheck {
    let x_hat = &cert.jet.base;
    let eps = cert.epsilon;
    let u_at = u.value(x_hat);
    let dirs = sampling::directions(u.dimension());
    let mut offsets: Vec<Vec<f64>> = Vec::new();
    for k in 0..=20 {
        let r = eps * 2f64.powi(-k);
        for d in &dirs {
            offsets.push(linalg::scale(d, r));
        }
    }
    for p in sampling::halton_cube(u.dimension(), samples, seed) {
        let z = sampling::cube_to_ball(&p);
        offsets.push(linalg::scale(&z, eps));
    }

    let scale = 1.0
        + u_at.abs()
        + linalg::norm(&cert.jet.p)
        + cert.jet.x.frobenius_norm()
        + cert.delta;
    let tol = 1e-12 * scale;

    let mut worst = f64::NEG_INFINITY;
    for z in &offsets {
        let xz = linalg::add(x_hat, z);
        let quad = linalg::dot(&cert.jet.p, z) + 0.5 * cert.jet.x.quad_form(z);
        let z2 = linalg::dot(z, z);
        let viol = match mode {
            Mode::Sub => u.value(&xz) - u_at - quad - cert.delta * z2,
            Mode::Super => quad - cert.delta * z2 - (u.value(&xz) - u_at),
        };
        if viol > worst {
            worst = viol;
        }
    }
    JetCheck { ok: worst <= tol, worst_violation: worst }
}
