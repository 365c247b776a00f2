//! Config file schema and parsing.
//!
//! A run is described by a TOML tree with sections `geometry`, `scalings`,
//! `coefficients`, `sources`, `drift`, `time`, `mesh` and optional `solver`.
//! Sources are named built-ins (`zero`, `constant:c`, `affine:c0,cx,cy,ct`,
//! `gaussian:amp,cx,cy,sigma`, `ramp:c,tau`) or tabulated grids
//! (`table:path.csv`) evaluated by bilinear interpolation. Dirichlet traces
//! accept `zero`, `constant:c`, `affine:a,b` (a + b*x2) and `ramp:c,tau`.

use crate::drift::{Drift, DriftPolynomial};
use crate::error::{Error, Result};
use crate::geometry::{build_standard_cell, LayerGeometry, WidthMode};
use crate::problem::{
    classify_scaling, validate_assumptions, BoundaryLift, BoundaryTrace, CellDiag, CellVec,
    CoefficientSet, DiagTensor, ScalingChoice, ScalingExponents, SourceData, SpaceTimeFn,
    Violation,
};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: RawGeometry,
    scalings: RawScalings,
    coefficients: RawCoefficients,
    #[serde(default)]
    sources: RawSources,
    drift: RawDrift,
    time: RawTime,
    mesh: RawMesh,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    ell: f64,
    height: f64,
    eps: f64,
    width: WidthSpec,
    cell: RawCell,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WidthSpec {
    Named(String),
    Fixed(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScalings {
    alpha: f64,
    beta: f64,
    gamma: f64,
    xi: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    d_l: [f64; 2],
    d_r: [f64; 2],
    d_m: [f64; 2],
    b_l: [f64; 2],
    b_r: [f64; 2],
    b_m: [f64; 2],
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSources {
    #[serde(default)]
    f_l: Option<String>,
    #[serde(default)]
    f_r: Option<String>,
    #[serde(default)]
    f_m: Option<String>,
    #[serde(default)]
    g_l: Option<String>,
    #[serde(default)]
    g_r: Option<String>,
    #[serde(default)]
    g_0: Option<String>,
    #[serde(default)]
    h_l: Option<String>,
    #[serde(default)]
    h_r: Option<String>,
    #[serde(default)]
    h_m: Option<String>,
    #[serde(default)]
    u_left: Option<String>,
    #[serde(default)]
    u_right: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrift {
    coeffs: Vec<f64>,
    delta: f64,
    #[serde(default = "default_nodes")]
    quadrature_nodes: usize,
}

fn default_nodes() -> usize {
    64
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_end: f64,
    dt: f64,
    #[serde(default)]
    picard: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    edge: f64,
    #[serde(default)]
    cell_edge: Option<f64>,
    #[serde(default = "default_n_sigma")]
    n_sigma: usize,
    #[serde(default = "default_layer_nx")]
    layer_nx: usize,
    #[serde(default = "default_layer_ny")]
    layer_ny: usize,
    #[serde(default = "default_cell_line_nodes")]
    cell_line_nodes: usize,
}

fn default_n_sigma() -> usize {
    16
}
fn default_layer_nx() -> usize {
    4
}
fn default_layer_ny() -> usize {
    8
}
fn default_cell_line_nodes() -> usize {
    32
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    tol_lin: f64,
    tol_picard: f64,
    tol_iface: f64,
    max_sweeps: usize,
    max_picard: usize,
    relax: f64,
    acknowledge_violations: bool,
}

impl Default for RawSolver {
    fn default() -> Self {
        RawSolver {
            tol_lin: 1e-10,
            tol_picard: 1e-10,
            tol_iface: 1e-8,
            max_sweeps: 30,
            max_picard: 50,
            relax: 0.5,
            acknowledge_violations: false,
        }
    }
}

/// Time discretization parameters.
#[derive(Debug, Clone, Copy)]
pub struct TimeParams {
    pub t_end: f64,
    pub dt: f64,
    pub picard: bool,
}

impl TimeParams {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Mesh resolution parameters.
#[derive(Debug, Clone, Copy)]
pub struct MeshParams {
    /// Target edge length of the strip meshes.
    pub edge: f64,
    /// Target edge length of the reference-cell mesh.
    pub cell_edge: f64,
    /// Interface points owning cell problems in the S1 coupling.
    pub n_sigma: usize,
    /// Fixed-width layer grid: columns across the layer.
    pub layer_nx: usize,
    /// Fixed-width layer grid: rows along the layer.
    pub layer_ny: usize,
    /// Nodes of the vertical cell line in the fixed-width models.
    pub cell_line_nodes: usize,
}

/// Solver tolerances and iteration limits.
#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    pub tol_lin: f64,
    pub tol_picard: f64,
    pub tol_iface: f64,
    pub max_sweeps: usize,
    pub max_picard: usize,
    /// Relaxation factor of the bulk-cell interface sweep.
    pub relax: f64,
    /// Proceed despite blocking admissibility violations.
    pub acknowledge_violations: bool,
}

/// Fully resolved run description.
#[derive(Clone)]
pub struct ProblemConfig {
    pub geometry: LayerGeometry,
    pub scalings: ScalingExponents,
    pub coefficients: CoefficientSet,
    pub sources: SourceData,
    pub drift: Drift,
    pub drift_nodes: usize,
    pub time: TimeParams,
    pub mesh: MeshParams,
    pub solver: SolverParams,
}

impl ProblemConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.resolve()
    }

    /// The affine lift induced by the Dirichlet traces.
    pub fn lift(&self) -> BoundaryLift {
        BoundaryLift::new(
            self.geometry.ell,
            self.sources.u_left.clone(),
            self.sources.u_right.clone(),
        )
    }

    pub fn classify(&self) -> Result<ScalingChoice> {
        classify_scaling(&self.scalings)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_assumptions(&self.coefficients, &self.scalings)
    }

    /// Blocking violations (warnings excluded).
    pub fn blocking_violations(&self) -> Vec<Violation> {
        self.validate().into_iter().filter(|v| !v.warning).collect()
    }

    /// Same run at a different micro scale.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.geometry = LayerGeometry::new(
            self.geometry.ell,
            self.geometry.h,
            eps,
            self.geometry.width_mode,
            self.geometry.cell,
        )?;
        Ok(cfg)
    }

    /// Same run at a different regularization width (`0` disables the
    /// mollifier).
    pub fn with_delta(&self, delta: f64) -> Self {
        let mut cfg = self.clone();
        cfg.drift = Drift::new(self.drift.poly.clone(), delta, self.drift_nodes);
        cfg
    }
}

impl RawConfig {
    fn resolve(self) -> Result<ProblemConfig> {
        let cell = build_standard_cell(
            self.geometry.cell.a1,
            self.geometry.cell.b1,
            self.geometry.cell.a2,
            self.geometry.cell.b2,
        )?;
        let width_mode = match &self.geometry.width {
            WidthSpec::Named(name) if name == "vanishing" => WidthMode::Vanishing,
            WidthSpec::Named(name) => {
                return Err(Error::Config(format!(
                    "unknown width mode '{name}' (use \"vanishing\" or a number)"
                )))
            }
            WidthSpec::Fixed(kappa) => WidthMode::Fixed(*kappa),
        };
        let geometry = LayerGeometry::new(
            self.geometry.ell,
            self.geometry.height,
            self.geometry.eps,
            width_mode,
            cell,
        )?;
        let scalings = ScalingExponents::new(
            self.scalings.alpha,
            self.scalings.beta,
            self.scalings.gamma,
            self.scalings.xi,
        );
        let coefficients = CoefficientSet {
            d_l: DiagTensor::new(self.coefficients.d_l[0], self.coefficients.d_l[1]),
            d_r: DiagTensor::new(self.coefficients.d_r[0], self.coefficients.d_r[1]),
            d_m: CellDiag::Constant(DiagTensor::new(
                self.coefficients.d_m[0],
                self.coefficients.d_m[1],
            )),
            b_l: self.coefficients.b_l,
            b_r: self.coefficients.b_r,
            b_m: CellVec::Constant(self.coefficients.b_m),
        };

        let s = &self.sources;
        let field = |spec: &Option<String>| -> Result<SpaceTimeFn> {
            match spec {
                None => Ok(crate::problem::zero_fn()),
                Some(text) => parse_source(text),
            }
        };
        let trace = |spec: &Option<String>| -> Result<BoundaryTrace> {
            match spec {
                None => Ok(BoundaryTrace::zero()),
                Some(text) => parse_trace(text),
            }
        };
        let sources = SourceData {
            f_l: field(&s.f_l)?,
            f_r: field(&s.f_r)?,
            f_m: field(&s.f_m)?,
            g_l: field(&s.g_l)?,
            g_r: field(&s.g_r)?,
            g_0: field(&s.g_0)?,
            h_l: field(&s.h_l)?,
            h_r: field(&s.h_r)?,
            h_m: field(&s.h_m)?,
            u_left: trace(&s.u_left)?,
            u_right: trace(&s.u_right)?,
            f_a0: None,
            g0_limit: None,
        };

        if self.drift.delta < 0.0 {
            return Err(Error::Config(format!(
                "drift.delta must be >= 0, got {}",
                self.drift.delta
            )));
        }
        let drift = Drift::new(
            DriftPolynomial::new(self.drift.coeffs.clone()),
            self.drift.delta,
            self.drift.quadrature_nodes,
        );

        Ok(ProblemConfig {
            geometry,
            scalings,
            coefficients,
            sources,
            drift,
            drift_nodes: self.drift.quadrature_nodes,
            time: TimeParams {
                t_end: self.time.t_end,
                dt: self.time.dt,
                picard: self.time.picard,
            },
            mesh: MeshParams {
                edge: self.mesh.edge,
                cell_edge: self.mesh.cell_edge.unwrap_or(self.mesh.edge),
                n_sigma: self.mesh.n_sigma,
                layer_nx: self.mesh.layer_nx,
                layer_ny: self.mesh.layer_ny,
                cell_line_nodes: self.mesh.cell_line_nodes,
            },
            solver: SolverParams {
                tol_lin: self.solver.tol_lin,
                tol_picard: self.solver.tol_picard,
                tol_iface: self.solver.tol_iface,
                max_sweeps: self.solver.max_sweeps,
                max_picard: self.solver.max_picard,
                relax: self.solver.relax,
                acknowledge_violations: self.solver.acknowledge_violations,
            },
        })
    }
}

fn parse_params(text: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != n {
        return Err(Error::Config(format!(
            "{what} expects {n} comma-separated numbers, got '{text}'"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{p}' in {what}")))
        })
        .collect()
}

/// Parses a source spec string into a space-time function.
pub fn parse_source(spec: &str) -> Result<SpaceTimeFn> {
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), a),
        None => (spec.trim(), ""),
    };
    match name {
        "zero" => Ok(crate::problem::zero_fn()),
        "constant" => {
            let p = parse_params(args, 1, "constant")?;
            Ok(crate::problem::constant_fn(p[0]))
        }
        "affine" => {
            let p = parse_params(args, 4, "affine")?;
            let (c0, cx, cy, ct) = (p[0], p[1], p[2], p[3]);
            Ok(Arc::new(move |t, x| c0 + cx * x[0] + cy * x[1] + ct * t))
        }
        "gaussian" => {
            let p = parse_params(args, 4, "gaussian")?;
            let (amp, cx, cy, sigma) = (p[0], p[1], p[2], p[3]);
            Ok(Arc::new(move |_, x| {
                let dx = x[0] - cx;
                let dy = x[1] - cy;
                amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }))
        }
        "ramp" => {
            let p = parse_params(args, 2, "ramp")?;
            let (c, tau) = (p[0], p[1]);
            Ok(Arc::new(move |t, _| c * (1.0 - (-t / tau).exp())))
        }
        "table" => {
            let table = TableField::from_csv(Path::new(args.trim()))?;
            Ok(Arc::new(move |_, x| table.eval(x)))
        }
        other => Err(Error::Config(format!("unknown source kind '{other}'"))),
    }
}

/// Parses a Dirichlet trace spec string.
pub fn parse_trace(spec: &str) -> Result<BoundaryTrace> {
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), a),
        None => (spec.trim(), ""),
    };
    match name {
        "zero" => Ok(BoundaryTrace::zero()),
        "constant" => {
            let p = parse_params(args, 1, "constant")?;
            Ok(BoundaryTrace::constant(p[0]))
        }
        "affine" => {
            let p = parse_params(args, 2, "affine")?;
            Ok(BoundaryTrace::affine(p[0], p[1]))
        }
        "ramp" => {
            let p = parse_params(args, 2, "ramp")?;
            let (c, tau) = (p[0], p[1]);
            Ok(BoundaryTrace::new(
                Arc::new(move |t, _| c * (1.0 - (-t / tau).exp())),
                Arc::new(move |t, _| c / tau * (-t / tau).exp()),
                Arc::new(|_, _| 0.0),
                Arc::new(|_, _| 0.0),
            ))
        }
        other => Err(Error::Config(format!("unknown trace kind '{other}'"))),
    }
}

/// Tabulated scalar field on a regular grid, evaluated by bilinear
/// interpolation and clamped outside the table.
#[derive(Debug, Clone)]
pub struct TableField {
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: Vec<f64>,
}

impl TableField {
    /// Reads rows `x,y,value`; the (x, y) pairs must form a full regular
    /// grid (any row order). A header row is skipped if non-numeric.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut triples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::Config(format!(
                    "{}:{}: expected 3 columns",
                    path.display(),
                    lineno + 1
                )));
            }
            match (
                cols[0].parse::<f64>(),
                cols[1].parse::<f64>(),
                cols[2].parse::<f64>(),
            ) {
                (Ok(x), Ok(y), Ok(v)) => triples.push((x, y, v)),
                _ if lineno == 0 => continue, // header
                _ => {
                    return Err(Error::Config(format!(
                        "{}:{}: bad number",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        let mut xs: Vec<f64> = triples.iter().map(|t| t.0).collect();
        let mut ys: Vec<f64> = triples.iter().map(|t| t.1).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if xs.len() < 2 || ys.len() < 2 || xs.len() * ys.len() != triples.len() {
            return Err(Error::Config(format!(
                "{}: {} points do not fill a {}x{} grid",
                path.display(),
                triples.len(),
                xs.len(),
                ys.len()
            )));
        }
        let mut values = vec![f64::NAN; xs.len() * ys.len()];
        let find = |arr: &[f64], v: f64| arr.iter().position(|&a| (a - v).abs() < 1e-12);
        for (x, y, v) in triples {
            let i = find(&xs, x).unwrap();
            let j = find(&ys, y).unwrap();
            values[j * xs.len() + i] = v;
        }
        Ok(TableField { xs, ys, values })
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let bracket = |arr: &[f64], v: f64| -> (usize, f64) {
            if v <= arr[0] {
                return (0, 0.0);
            }
            if v >= arr[arr.len() - 1] {
                return (arr.len() - 2, 1.0);
            }
            let mut i = 0;
            while arr[i + 1] < v {
                i += 1;
            }
            (i, (v - arr[i]) / (arr[i + 1] - arr[i]))
        };
        let (i, fx) = bracket(&self.xs, p[0]);
        let (j, fy) = bracket(&self.ys, p[1]);
        let nx = self.xs.len();
        let v00 = self.values[j * nx + i];
        let v10 = self.values[j * nx + i + 1];
        let v01 = self.values[(j + 1) * nx + i];
        let v11 = self.values[(j + 1) * nx + i + 1];
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
    }
}

/// A template S1 configuration used by examples and tests.
pub const EXAMPLE_S1_TOML: &str = r#"
[geometry]
ell = 2.0
height = 1.0
eps = 0.25
width = "vanishing"

[geometry.cell]
a1 = -0.5
b1 = 0.5
a2 = 0.25
b2 = 0.75

[scalings]
alpha = -1.0
beta = 1.0
gamma = 1.0
xi = 0.5

[coefficients]
d_l = [1.0, 1.0]
d_r = [0.5, 0.5]
d_m = [1.0, 1.0]
b_l = [0.0, 0.0]
b_r = [0.0, 0.0]
b_m = [0.0, 0.0]

[sources]
u_left = "constant:1.0"
u_right = "zero"

[drift]
coeffs = [0.0, 1.0, -1.0]
delta = 0.1

[time]
t_end = 0.25
dt = 0.0125

[mesh]
edge = 0.04
cell_edge = 0.1
n_sigma = 16
"#;
