//! Scenario files: TOML text with nested tables describing the kernel, the
//! candidate u, the test function phi (or a forge directive), the operator
//! F, the point grid, schedules and quadrature settings. Everything needed
//! to reproduce a run bit-exactly lives in the file; the only randomness
//! seed is the scenario's own `seed` field.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::checkers::{FForm, FOperator};
use crate::error::{Error, Result};
use crate::functions::{CandidateFunction, EnvelopeKind, GridCandidate, Mode};
use crate::levy::LevyKernel;
use crate::linalg::SymMat;
use crate::quadrature::QuadratureConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    seed: u64,
    mode: String,
    #[serde(default = "default_slack")]
    slack: f64,
    working_box: BoxSpec,
    kernel: KernelSpec,
    candidate: FunctionSpec,
    test_function: Option<FunctionSpec>,
    operator: OperatorSpec,
    points: PointsSpec,
    #[serde(default)]
    params: ParamsSpec,
    #[serde(default)]
    schedules: SchedulesSpec,
    forge: Option<ForgeSpec>,
    #[serde(default)]
    quadrature: QuadratureSpec,
    #[serde(default)]
    output: OutputSpec,
}

fn default_slack() -> f64 {
    1e-9
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxSpec {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSpec {
    family: String,
    dim: usize,
    intensity: Option<f64>,
    cutoff: Option<f64>,
    alpha: Option<f64>,
    lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionSpec {
    family: String,
    // quadratic
    q: Option<Vec<Vec<f64>>>,
    b: Option<Vec<f64>>,
    c: Option<f64>,
    // gaussian_bump
    amplitude: Option<f64>,
    center: Option<Vec<f64>>,
    width: Option<f64>,
    // cone
    sign: Option<f64>,
    apex: Option<Vec<f64>>,
    // smooth_step
    inner: Option<f64>,
    outer: Option<f64>,
    height: Option<f64>,
    // sum / scale
    terms: Option<Vec<FunctionSpec>>,
    factor: Option<f64>,
    of: Option<Box<FunctionSpec>>,
    // grid-backed
    grid_file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorSpec {
    family: String,
    a: Option<Vec<Vec<f64>>>,
    b: Option<Vec<f64>>,
    c: Option<f64>,
    f: Option<f64>,
    r_coef: Option<f64>,
    p_coef: Option<Vec<f64>>,
    x_coef: Option<Vec<Vec<f64>>>,
    constant: Option<f64>,
    #[serde(default)]
    degenerate_elliptic: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsSpec {
    list: Option<Vec<Vec<f64>>>,
    #[serde(rename = "box")]
    box_: Option<BoxSpec>,
    spacing: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSpec {
    epsilon: Option<f64>,
    delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchedulesSpec {
    epsilon: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
    r: Option<Vec<f64>>,
    n_max: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForgeSpec {
    r: f64,
    s_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureSpec {
    tol: Option<f64>,
    levels: Option<u32>,
    tail_radius: Option<f64>,
    richardson: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    dir: Option<String>,
}

/// Per-definition parameters supplied to `check`; the checkers reject
/// extraneous ones rather than ignoring them.
#[derive(Clone, Copy, Debug, Default)]
pub struct CheckParams {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
}

/// Forge directive: which r to build psi^r at, and the scale-search top.
#[derive(Clone, Copy, Debug)]
pub struct ForgeDirective {
    pub r: f64,
    pub s_max: f64,
}

/// A fully validated scenario with constructed domain objects.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub mode: Mode,
    pub slack: f64,
    pub working_box: (Vec<f64>, Vec<f64>),
    pub kernel: LevyKernel,
    pub candidate: CandidateFunction,
    pub test_function: Option<CandidateFunction>,
    pub operator: FOperator,
    pub points: Vec<Vec<f64>>,
    pub params: CheckParams,
    pub epsilon_schedule: Vec<f64>,
    pub delta_schedule: Vec<f64>,
    pub r_schedule: Vec<f64>,
    pub n_max: u32,
    pub forge: Option<ForgeDirective>,
    pub quadrature: QuadratureConfig,
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Scenario::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Scenario> {
        let raw: ScenarioFile = toml::from_str(text)
            .map_err(|e| Error::ScenarioInvalid(format!("toml parse: {e}")))?;
        build_scenario(raw, base_dir)
    }

    pub fn dim(&self) -> usize {
        self.working_box.0.len()
    }
}

fn build_scenario(raw: ScenarioFile, base_dir: &Path) -> Result<Scenario> {
    let mode = match raw.mode.as_str() {
        "sub" => Mode::Sub,
        "super" => Mode::Super,
        other => {
            return Err(Error::ScenarioInvalid(format!(
                "mode must be sub|super, got {other:?}"
            )))
        }
    };
    let dim = raw.kernel.dim;
    if dim == 0 || dim > 3 {
        return Err(Error::ScenarioInvalid(format!("kernel dim {dim} outside 1..=3")));
    }
    if raw.working_box.min.len() != dim
        || raw.working_box.max.len() != dim
        || raw
            .working_box
            .min
            .iter()
            .zip(&raw.working_box.max)
            .any(|(a, b)| !(a < b))
    {
        return Err(Error::ScenarioInvalid("working_box inconsistent with dim".into()));
    }

    let kernel = build_kernel(&raw.kernel)?;
    let candidate = build_function(&raw.candidate, dim, base_dir)?;
    let test_function = raw
        .test_function
        .as_ref()
        .map(|s| build_function(s, dim, base_dir))
        .transpose()?;
    if let Some(phi) = &test_function {
        if !phi.is_c2() {
            return Err(Error::ScenarioInvalid("test_function must be a C2 family".into()));
        }
    }
    let operator = build_operator(&raw.operator, dim)?;

    let points = build_points(&raw.points, dim)?;
    if points.is_empty() {
        return Err(Error::ScenarioInvalid("point grid is empty".into()));
    }

    let epsilon_schedule = checked_schedule(raw.schedules.epsilon, "epsilon")?;
    let delta_schedule = checked_schedule(raw.schedules.delta, "delta")?;
    let r_schedule = checked_schedule(raw.schedules.r, "r")?;

    let quadrature = QuadratureConfig {
        target_tolerance: raw.quadrature.tol.unwrap_or(1e-10),
        max_grading_levels: raw.quadrature.levels.unwrap_or(40),
        tail_truncation_radius: raw.quadrature.tail_radius.unwrap_or(8.0),
        richardson: raw.quadrature.richardson.unwrap_or(false),
    };
    quadrature
        .validate()
        .map_err(|e| Error::ScenarioInvalid(e.to_string()))?;

    Ok(Scenario {
        seed: raw.seed,
        mode,
        slack: raw.slack,
        working_box: (raw.working_box.min, raw.working_box.max),
        kernel,
        candidate,
        test_function,
        operator,
        points,
        params: CheckParams { epsilon: raw.params.epsilon, delta: raw.params.delta },
        epsilon_schedule,
        delta_schedule,
        r_schedule,
        n_max: raw.schedules.n_max.unwrap_or(20),
        forge: raw.forge.map(|f| ForgeDirective { r: f.r, s_max: f.s_max.unwrap_or(1.0) }),
        quadrature,
        output_dir: raw.output.dir.map(PathBuf::from),
    })
}

fn checked_schedule(s: Option<Vec<f64>>, name: &str) -> Result<Vec<f64>> {
    let s = s.unwrap_or_default();
    for w in s.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::ScenarioInvalid(format!(
                "{name} schedule must be strictly decreasing"
            )));
        }
    }
    if s.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::ScenarioInvalid(format!(
            "{name} schedule entries must be positive"
        )));
    }
    Ok(s)
}

fn build_kernel(spec: &KernelSpec) -> Result<LevyKernel> {
    let bad = |msg: &str| Error::ScenarioInvalid(format!("kernel: {msg}"));
    match spec.family.as_str() {
        "zero" => LevyKernel::zero(spec.dim),
        "box" => LevyKernel::box_kernel(
            spec.dim,
            spec.intensity.unwrap_or(1.0),
            spec.cutoff.unwrap_or(1.0),
        ),
        "truncated_stable" => {
            let alpha = spec.alpha.ok_or_else(|| bad("truncated_stable needs alpha"))?;
            LevyKernel::truncated_stable(spec.dim, alpha, spec.cutoff.unwrap_or(1.0))
        }
        "tempered_stable" => {
            let alpha = spec.alpha.ok_or_else(|| bad("tempered_stable needs alpha"))?;
            let lambda = spec.lambda.ok_or_else(|| bad("tempered_stable needs lambda"))?;
            LevyKernel::tempered_stable(spec.dim, alpha, lambda)
        }
        "gaussian_tail" => {
            let lambda = spec.lambda.ok_or_else(|| bad("gaussian_tail needs lambda"))?;
            LevyKernel::gaussian_tail(spec.dim, lambda)
        }
        other => Err(bad(&format!("unknown family {other:?}"))),
    }
    .map_err(|e| Error::ScenarioInvalid(format!("kernel: {e}")))
}

fn build_function(spec: &FunctionSpec, dim: usize, base_dir: &Path) -> Result<CandidateFunction> {
    let bad = |msg: String| Error::ScenarioInvalid(format!("function: {msg}"));
    let need_vec = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
        let v = v
            .clone()
            .ok_or_else(|| bad(format!("{} requires {name}", spec.family)))?;
        if v.len() != dim {
            return Err(bad(format!("{name} has length {}, expected {dim}", v.len())));
        }
        Ok(v)
    };
    match spec.family.as_str() {
        "quadratic" => {
            let rows = spec.q.clone().ok_or_else(|| bad("quadratic requires q".into()))?;
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(bad(format!("q must be {dim}x{dim}")));
            }
            Ok(CandidateFunction::Quadratic {
                q: SymMat::from_rows(&rows),
                b: spec.b.clone().unwrap_or_else(|| vec![0.0; dim]),
                c: spec.c.unwrap_or(0.0),
            })
        }
        "gaussian_bump" => Ok(CandidateFunction::GaussianBump {
            amplitude: spec
                .amplitude
                .ok_or_else(|| bad("gaussian_bump requires amplitude".into()))?,
            center: need_vec(&spec.center, "center")?,
            width: spec.width.ok_or_else(|| bad("gaussian_bump requires width".into()))?,
        }),
        "cone" => Ok(CandidateFunction::Cone {
            sign: spec.sign.unwrap_or(1.0),
            apex: need_vec(&spec.apex, "apex")?,
        }),
        "smooth_step" => {
            let inner = spec.inner.ok_or_else(|| bad("smooth_step requires inner".into()))?;
            let outer = spec.outer.ok_or_else(|| bad("smooth_step requires outer".into()))?;
            if !(outer > inner && inner >= 0.0) {
                return Err(bad("smooth_step needs 0 <= inner < outer".into()));
            }
            Ok(CandidateFunction::SmoothStep {
                center: need_vec(&spec.center, "center")?,
                inner,
                outer,
                height: spec.height.ok_or_else(|| bad("smooth_step requires height".into()))?,
            })
        }
        "sum" => {
            let terms = spec
                .terms
                .as_ref()
                .ok_or_else(|| bad("sum requires terms".into()))?;
            if terms.is_empty() {
                return Err(bad("sum requires at least one term".into()));
            }
            Ok(CandidateFunction::Sum(
                terms
                    .iter()
                    .map(|t| build_function(t, dim, base_dir))
                    .collect::<Result<_>>()?,
            ))
        }
        "scale" => {
            let inner = spec
                .of
                .as_ref()
                .ok_or_else(|| bad("scale requires of = {...}".into()))?;
            Ok(CandidateFunction::Scale(
                spec.factor.ok_or_else(|| bad("scale requires factor".into()))?,
                Box::new(build_function(inner, dim, base_dir)?),
            ))
        }
        "grid_usc" | "grid_lsc" => {
            let file = spec
                .grid_file
                .as_ref()
                .ok_or_else(|| bad("grid functions require grid_file".into()))?;
            let envelope = if spec.family == "grid_usc" {
                EnvelopeKind::Upper
            } else {
                EnvelopeKind::Lower
            };
            let grid = GridCandidate::from_csv(&base_dir.join(file), envelope)
                .map_err(|e| bad(format!("grid_file: {e}")))?;
            if grid.lo.len() != dim {
                return Err(bad("grid dimension mismatch".into()));
            }
            Ok(CandidateFunction::Grid(grid))
        }
        other => Err(bad(format!("unknown family {other:?}"))),
    }
}

fn build_operator(spec: &OperatorSpec, dim: usize) -> Result<FOperator> {
    let bad = |msg: String| Error::ScenarioInvalid(format!("operator: {msg}"));
    let form = match spec.family.as_str() {
        "zero" => FForm::Zero,
        "zeroth" => FForm::Zeroth,
        "pure_second" => FForm::PureSecond,
        "linear_elliptic" => {
            let rows = spec.a.clone().ok_or_else(|| bad("linear_elliptic requires a".into()))?;
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(bad(format!("a must be {dim}x{dim}")));
            }
            FForm::LinearElliptic {
                a: SymMat::from_rows(&rows),
                b: spec.b.clone().unwrap_or_else(|| vec![0.0; dim]),
                c: spec.c.unwrap_or(0.0),
                f: spec.f.unwrap_or(0.0),
            }
        }
        "custom_affine" => {
            let rows = spec
                .x_coef
                .clone()
                .ok_or_else(|| bad("custom_affine requires x_coef".into()))?;
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(bad(format!("x_coef must be {dim}x{dim}")));
            }
            FForm::CustomAffine {
                r_coef: spec.r_coef.unwrap_or(0.0),
                p_coef: spec.p_coef.clone().unwrap_or_else(|| vec![0.0; dim]),
                x_coef: SymMat::from_rows(&rows),
                constant: spec.constant.unwrap_or(0.0),
            }
        }
        other => return Err(bad(format!("unknown family {other:?}"))),
    };
    Ok(FOperator { form, degenerate_ellipticity_declared: spec.degenerate_elliptic })
}

fn build_points(spec: &PointsSpec, dim: usize) -> Result<Vec<Vec<f64>>> {
    match (&spec.list, &spec.box_, spec.spacing) {
        (Some(list), None, None) => {
            for p in list {
                if p.len() != dim {
                    return Err(Error::ScenarioInvalid(format!(
                        "point {p:?} has wrong dimension"
                    )));
                }
            }
            Ok(list.clone())
        }
        (None, Some(b), Some(h)) => {
            if !(h > 0.0) || b.min.len() != dim || b.max.len() != dim {
                return Err(Error::ScenarioInvalid("points box/spacing invalid".into()));
            }
            let counts: Vec<usize> = (0..dim)
                .map(|d| ((b.max[d] - b.min[d]) / h + 1e-9).floor() as usize + 1)
                .collect();
            let mut pts = Vec::new();
            let mut idx = vec![0usize; dim];
            'grid: loop {
                pts.push((0..dim).map(|d| b.min[d] + h * idx[d] as f64).collect());
                let mut d = 0;
                loop {
                    idx[d] += 1;
                    if idx[d] < counts[d] {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                    if d == dim {
                        break 'grid;
                    }
                }
            }
            Ok(pts)
        }
        _ => Err(Error::ScenarioInvalid(
            "points needs either list OR box + spacing".into(),
        )),
    }
}
