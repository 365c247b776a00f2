//! Problem data: coefficients, sources, boundary data, scaling exponents,
//! the affine boundary lift, and the admissibility/classification rules for
//! the scaling choices S1-S4.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Scalar function of time and position.
pub type SpaceTimeFn = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;
/// Scalar function of (time, interface coordinate, cell point).
pub type InterfaceCellFn = Arc<dyn Fn(f64, f64, [f64; 2]) -> f64 + Send + Sync>;
/// Scalar function of (time, vertical coordinate) on a vertical boundary.
pub type TraceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Vector field of time and position.
pub type SpaceTimeVecFn = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;
/// Vector field of (time, position, cell point).
pub type SpaceTimeCellVecFn = Arc<dyn Fn(f64, [f64; 2], [f64; 2]) -> [f64; 2] + Send + Sync>;
/// Scalar field of (time, position, cell point).
pub type SpaceTimeCellFn = Arc<dyn Fn(f64, [f64; 2], [f64; 2]) -> f64 + Send + Sync>;

pub fn zero_fn() -> SpaceTimeFn {
    Arc::new(|_, _| 0.0)
}

pub fn constant_fn(c: f64) -> SpaceTimeFn {
    Arc::new(move |_, _| c)
}

/// Diagonal 2x2 diffusion tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagTensor {
    pub d1: f64,
    pub d2: f64,
}

impl DiagTensor {
    pub fn new(d1: f64, d2: f64) -> Self {
        DiagTensor { d1, d2 }
    }

    pub fn identity() -> Self {
        DiagTensor { d1: 1.0, d2: 1.0 }
    }

    pub fn min_entry(&self) -> f64 {
        self.d1.min(self.d2)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.d1 * v[0], self.d2 * v[1]]
    }
}

/// Cell diffusion tensor, 1-periodic in the vertical cell coordinate.
#[derive(Clone)]
pub enum CellDiag {
    Constant(DiagTensor),
    Varying(Arc<dyn Fn([f64; 2]) -> DiagTensor + Send + Sync>),
}

impl CellDiag {
    pub fn eval(&self, y: [f64; 2]) -> DiagTensor {
        match self {
            CellDiag::Constant(d) => *d,
            CellDiag::Varying(f) => f(y),
        }
    }
}

impl fmt::Debug for CellDiag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellDiag::Constant(d) => write!(f, "CellDiag::Constant({d:?})"),
            CellDiag::Varying(_) => write!(f, "CellDiag::Varying(..)"),
        }
    }
}

/// Cell drift vector, 1-periodic in the vertical cell coordinate.
#[derive(Clone)]
pub enum CellVec {
    Constant([f64; 2]),
    Varying(Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>),
}

impl CellVec {
    pub fn eval(&self, y: [f64; 2]) -> [f64; 2] {
        match self {
            CellVec::Constant(b) => *b,
            CellVec::Varying(f) => f(y),
        }
    }
}

impl fmt::Debug for CellVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellVec::Constant(b) => write!(f, "CellVec::Constant({b:?})"),
            CellVec::Varying(_) => write!(f, "CellVec::Varying(..)"),
        }
    }
}

/// Bulk and layer coefficients.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub d_l: DiagTensor,
    pub d_r: DiagTensor,
    pub d_m: CellDiag,
    pub b_l: [f64; 2],
    pub b_r: [f64; 2],
    pub b_m: CellVec,
}

impl CoefficientSet {
    pub fn isotropic(d: f64) -> Self {
        CoefficientSet {
            d_l: DiagTensor::new(d, d),
            d_r: DiagTensor::new(d, d),
            d_m: CellDiag::Constant(DiagTensor::new(d, d)),
            b_l: [0.0, 0.0],
            b_r: [0.0, 0.0],
            b_m: CellVec::Constant([0.0, 0.0]),
        }
    }

    /// Ellipticity constant: the smallest diagonal entry over all diffusion
    /// tensors, with the cell tensor sampled on a grid over the cell.
    pub fn theta(&self) -> f64 {
        let mut theta = self.d_l.min_entry().min(self.d_r.min_entry());
        match &self.d_m {
            CellDiag::Constant(d) => theta = theta.min(d.min_entry()),
            CellDiag::Varying(f) => {
                for i in 0..=32 {
                    for j in 0..=32 {
                        let y = [-1.0 + 2.0 * i as f64 / 32.0, j as f64 / 32.0];
                        theta = theta.min(f(y).min_entry());
                    }
                }
            }
        }
        theta
    }
}

/// Exponents of the layer scalings: `eps^alpha` on the time derivative and
/// reaction, `eps^beta` on diffusion, `eps^gamma` on the drift, `eps^xi` on
/// the oscillating-boundary production.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingExponents {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub xi: f64,
}

impl ScalingExponents {
    pub fn new(alpha: f64, beta: f64, gamma: f64, xi: f64) -> Self {
        ScalingExponents { alpha, beta, gamma, xi }
    }
}

/// Upscaling regimes reachable from the scaling table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingChoice {
    /// Vanishing width, `alpha = -1`, `beta = 1`: interface with
    /// one-dimensional families of cell problems.
    S1,
    /// Vanishing width, `alpha = -1`, `beta` in `(0,1)`: interface ODE with
    /// capacity `|Z|`.
    S2,
    /// Fixed width, `beta - alpha = 2`: layer of vertical cell problems with
    /// local diffusion (`lambda1 = 1`).
    S3,
    /// Fixed width, `beta - alpha` in `(1, inf) \ {2}`: degenerate layer
    /// dynamics (`lambda1 = 0`).
    S4,
    Unclassified,
}

impl ScalingChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ScalingChoice::S1 => "S1",
            ScalingChoice::S2 => "S2",
            ScalingChoice::S3 => "S3",
            ScalingChoice::S4 => "S4",
            ScalingChoice::Unclassified => "Unclassified",
        }
    }
}

const CLASS_TOL: f64 = 1e-12;

fn feq(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLASS_TOL
}

/// Classifies a scaling quadruple into one of the four discussed choices.
/// Exact-equality tests use a 1e-12 tolerance; the boundary `beta = 1`
/// belongs to S1 only.
pub fn classify_scaling(s: &ScalingExponents) -> Result<ScalingChoice> {
    let (a, b, g, x) = (s.alpha, s.beta, s.gamma, s.xi);
    let s1 = feq(a, -1.0) && feq(b, 1.0) && g >= 1.0 - CLASS_TOL && x >= 0.5 - CLASS_TOL;
    let s2 = feq(a, -1.0)
        && b > CLASS_TOL
        && b < 1.0 - CLASS_TOL
        && g >= b - CLASS_TOL
        && x >= (b - 0.5).min(0.0) - CLASS_TOL;
    let s3 = a > -1.0 + CLASS_TOL
        && feq(b - a, 2.0)
        && g - a >= 1.0 - CLASS_TOL
        && x - a >= 1.0 - CLASS_TOL;
    let s4 = a > -1.0 + CLASS_TOL
        && b - a > 1.0 + CLASS_TOL
        && !feq(b - a, 2.0)
        && g - a >= 1.0 - CLASS_TOL
        && x - a >= 1.0 - CLASS_TOL;

    let matches: Vec<&'static str> = [(s1, "S1"), (s2, "S2"), (s3, "S3"), (s4, "S4")]
        .iter()
        .filter(|(hit, _)| *hit)
        .map(|(_, name)| *name)
        .collect();
    match matches.len() {
        0 => Ok(ScalingChoice::Unclassified),
        1 => Ok(match matches[0] {
            "S1" => ScalingChoice::S1,
            "S2" => ScalingChoice::S2,
            "S3" => ScalingChoice::S3,
            _ => ScalingChoice::S4,
        }),
        _ => Err(Error::AmbiguousClassification(matches)),
    }
}

/// The switches of the fixed-width limit model: `lambda1` keeps the vertical
/// cell diffusion (1 for S3, 0 for S4), `lambda2` keeps the cell drift
/// (1 exactly when `gamma - alpha = 1`, 0 when `gamma - alpha > 1`).
pub fn lambda_switches(s: &ScalingExponents, choice: ScalingChoice) -> Option<(f64, f64)> {
    let lambda2 = if feq(s.gamma - s.alpha, 1.0) { 1.0 } else { 0.0 };
    match choice {
        ScalingChoice::S3 => Some((1.0, lambda2)),
        ScalingChoice::S4 => Some((0.0, lambda2)),
        _ => None,
    }
}

/// Structured record of one admissibility violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: String,
    pub detail: String,
    /// Warnings are reported but do not block a run; the exponent rules are
    /// demoted to warnings for fixed-width classifications.
    pub warning: bool,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.warning { "warning" } else { "violation" };
        write!(f, "[{kind}] {}: {}", self.rule, self.detail)
    }
}

/// Checks the admissibility rules on data and exponents. Never aborts:
/// violations are returned as records. Exponent-rule conflicts are demoted
/// to warnings when the quadruple classifies as S3/S4, where the fixed-width
/// rules replace parts of the vanishing-width set.
pub fn validate_assumptions(coeffs: &CoefficientSet, s: &ScalingExponents) -> Vec<Violation> {
    let mut out = Vec::new();
    let theta = coeffs.theta();
    if !(theta > 0.0) {
        out.push(Violation {
            rule: "ellipticity theta>0".into(),
            detail: format!("smallest diffusion entry is {theta}"),
            warning: false,
        });
    }
    let b_bound = {
        let mut m: f64 = coeffs.b_l[0].abs().max(coeffs.b_l[1].abs());
        m = m.max(coeffs.b_r[0].abs()).max(coeffs.b_r[1].abs());
        for i in 0..=16 {
            for j in 0..=16 {
                let y = [-1.0 + 2.0 * i as f64 / 16.0, j as f64 / 16.0];
                let b = coeffs.b_m.eval(y);
                m = m.max(b[0].abs()).max(b[1].abs());
            }
        }
        m
    };
    if !b_bound.is_finite() {
        out.push(Violation {
            rule: "bounded drift coefficients".into(),
            detail: "a drift coefficient sample is not finite".into(),
            warning: false,
        });
    }

    let fixed_width = matches!(
        classify_scaling(s),
        Ok(ScalingChoice::S3) | Ok(ScalingChoice::S4)
    );
    let mut exponent_rule = |name: &str, ok: bool, detail: String| {
        if !ok {
            out.push(Violation {
                rule: name.into(),
                detail,
                warning: fixed_width,
            });
        }
    };
    let (a, b, g, x) = (s.alpha, s.beta, s.gamma, s.xi);
    exponent_rule("beta>=0", b >= -CLASS_TOL, format!("beta = {b}"));
    exponent_rule("gamma>=0", g >= -CLASS_TOL, format!("gamma = {g}"));
    exponent_rule("gamma>=beta", g >= b - CLASS_TOL, format!("gamma = {g} < beta = {b}"));
    exponent_rule(
        "beta<=xi+1/2",
        b <= x + 0.5 + CLASS_TOL,
        format!("beta = {b} > xi + 1/2 = {}", x + 0.5),
    );
    exponent_rule(
        "alpha+1/2<=beta",
        a + 0.5 <= b + CLASS_TOL,
        format!("alpha + 1/2 = {} > beta = {b}", a + 0.5),
    );
    exponent_rule(
        "alpha+1/2<=xi",
        a + 0.5 <= x + CLASS_TOL,
        format!("alpha + 1/2 = {} > xi = {x}", a + 0.5),
    );
    out
}

/// Trace datum on a vertical boundary: value and the derivatives the lift
/// machinery needs (time, vertical, second vertical).
#[derive(Clone)]
pub struct BoundaryTrace {
    value: TraceFn,
    dt: TraceFn,
    dx2: TraceFn,
    dx2x2: TraceFn,
}

impl BoundaryTrace {
    pub fn new(value: TraceFn, dt: TraceFn, dx2: TraceFn, dx2x2: TraceFn) -> Self {
        BoundaryTrace { value, dt, dx2, dx2x2 }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        BoundaryTrace {
            value: Arc::new(move |_, _| c),
            dt: Arc::new(|_, _| 0.0),
            dx2: Arc::new(|_, _| 0.0),
            dx2x2: Arc::new(|_, _| 0.0),
        }
    }

    /// `a + b*x2`, time-independent.
    pub fn affine(a: f64, b: f64) -> Self {
        BoundaryTrace {
            value: Arc::new(move |_, x2| a + b * x2),
            dt: Arc::new(|_, _| 0.0),
            dx2: Arc::new(move |_, _| b),
            dx2x2: Arc::new(|_, _| 0.0),
        }
    }

    pub fn eval(&self, t: f64, x2: f64) -> f64 {
        (self.value)(t, x2)
    }

    pub fn eval_dt(&self, t: f64, x2: f64) -> f64 {
        (self.dt)(t, x2)
    }

    pub fn eval_dx2(&self, t: f64, x2: f64) -> f64 {
        (self.dx2)(t, x2)
    }

    pub fn eval_dx2x2(&self, t: f64, x2: f64) -> f64 {
        (self.dx2x2)(t, x2)
    }
}

impl fmt::Debug for BoundaryTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundaryTrace(..)")
    }
}

/// Affine lift homogenizing the Dirichlet data:
/// `u_b(t,x) = ((x1 - ell/2)/ell) U_L(t,x2) - ((x1 + ell/2)/ell) U_R(t,x2)`,
/// chosen so that `v = u + u_b` vanishes on both vertical boundaries. For
/// `ell = 2` this is `(x1-1)/2 U_L - (x1+1)/2 U_R`.
#[derive(Clone, Debug)]
pub struct BoundaryLift {
    pub ell: f64,
    pub u_left: BoundaryTrace,
    pub u_right: BoundaryTrace,
}

impl BoundaryLift {
    pub fn new(ell: f64, u_left: BoundaryTrace, u_right: BoundaryTrace) -> Self {
        BoundaryLift { ell, u_left, u_right }
    }

    fn weights(&self, x1: f64) -> (f64, f64) {
        (
            (x1 - self.ell / 2.0) / self.ell,
            -(x1 + self.ell / 2.0) / self.ell,
        )
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> f64 {
        let (wl, wr) = self.weights(x[0]);
        wl * self.u_left.eval(t, x[1]) + wr * self.u_right.eval(t, x[1])
    }

    pub fn eval_dt(&self, t: f64, x: [f64; 2]) -> f64 {
        let (wl, wr) = self.weights(x[0]);
        wl * self.u_left.eval_dt(t, x[1]) + wr * self.u_right.eval_dt(t, x[1])
    }

    pub fn grad(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let (wl, wr) = self.weights(x[0]);
        [
            (self.u_left.eval(t, x[1]) - self.u_right.eval(t, x[1])) / self.ell,
            wl * self.u_left.eval_dx2(t, x[1]) + wr * self.u_right.eval_dx2(t, x[1]),
        ]
    }

    /// Second vertical derivative, the only surviving term of
    /// `div(D grad u_b)` for constant diagonal `D`.
    pub fn dx2x2(&self, t: f64, x: [f64; 2]) -> f64 {
        let (wl, wr) = self.weights(x[0]);
        wl * self.u_left.eval_dx2x2(t, x[1]) + wr * self.u_right.eval_dx2x2(t, x[1])
    }

    pub fn div_d_grad(&self, d: DiagTensor, t: f64, x: [f64; 2]) -> f64 {
        d.d2 * self.dx2x2(t, x)
    }
}

/// Evaluates the lift at a space-time point.
pub fn boundary_lift_eval(lift: &BoundaryLift, t: f64, x: [f64; 2]) -> f64 {
    lift.eval(t, x)
}

/// Volume sources, boundary sources and initial data supplied by the user.
/// The two-scale limit data `f_a0` and `g0_limit` default to the natural
/// restrictions of `f_m`/`g_0` onto the interface when left unset.
#[derive(Clone)]
pub struct SourceData {
    pub f_l: SpaceTimeFn,
    pub f_r: SpaceTimeFn,
    pub f_m: SpaceTimeFn,
    pub g_l: SpaceTimeFn,
    pub g_r: SpaceTimeFn,
    pub g_0: SpaceTimeFn,
    pub h_l: SpaceTimeFn,
    pub h_r: SpaceTimeFn,
    pub h_m: SpaceTimeFn,
    pub u_left: BoundaryTrace,
    pub u_right: BoundaryTrace,
    pub f_a0: Option<InterfaceCellFn>,
    pub g0_limit: Option<InterfaceCellFn>,
}

impl Default for SourceData {
    fn default() -> Self {
        SourceData {
            f_l: zero_fn(),
            f_r: zero_fn(),
            f_m: zero_fn(),
            g_l: zero_fn(),
            g_r: zero_fn(),
            g_0: zero_fn(),
            h_l: zero_fn(),
            h_r: zero_fn(),
            h_m: zero_fn(),
            u_left: BoundaryTrace::zero(),
            u_right: BoundaryTrace::zero(),
            f_a0: None,
            g0_limit: None,
        }
    }
}

impl fmt::Debug for SourceData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SourceData(..)")
    }
}

/// The derived data of the homogenized-Dirichlet formulation, with the
/// printed sign conventions: `f_b = dt(u_b) - div(D grad u_b) + f`,
/// `f_am = dt(u_b) + f_m`, `g_b = D grad u_b` (a vector; its normal
/// component adjusts the flux data), `g_b0 = -D_M grad u_b`. The initial
/// data transforms as `h_b = h + u_b(0, .)`, which is what makes the
/// round trip `u = v - u_b` recover the original field.
pub struct TransformedSources {
    pub f_bl: SpaceTimeFn,
    pub f_br: SpaceTimeFn,
    pub f_am: SpaceTimeFn,
    /// `-div(D_M grad u_b)` with the cell tensor frozen at the sample point;
    /// exact for (piecewise) constant cell tensors.
    pub f_bm: SpaceTimeCellFn,
    pub g_bl: SpaceTimeVecFn,
    pub g_br: SpaceTimeVecFn,
    pub g_b0: SpaceTimeCellVecFn,
    pub h_bl: SpaceTimeFn,
    pub h_br: SpaceTimeFn,
    pub h_bm: SpaceTimeFn,
}

/// Builds the derived source family of the transformed problem.
pub fn derive_transformed_sources(
    lift: &BoundaryLift,
    coeffs: &CoefficientSet,
    sources: &SourceData,
) -> TransformedSources {
    let l = lift.clone();
    let d_l = coeffs.d_l;
    let d_r = coeffs.d_r;
    let d_m = coeffs.d_m.clone();
    let f_l = sources.f_l.clone();
    let f_r = sources.f_r.clone();
    let f_m = sources.f_m.clone();
    let h_l = sources.h_l.clone();
    let h_r = sources.h_r.clone();
    let h_m = sources.h_m.clone();

    let lift1 = l.clone();
    let f_bl: SpaceTimeFn = Arc::new(move |t, x| {
        lift1.eval_dt(t, x) - lift1.div_d_grad(d_l, t, x) + f_l(t, x)
    });
    let lift2 = l.clone();
    let f_br: SpaceTimeFn = Arc::new(move |t, x| {
        lift2.eval_dt(t, x) - lift2.div_d_grad(d_r, t, x) + f_r(t, x)
    });
    let lift3 = l.clone();
    let f_am: SpaceTimeFn = Arc::new(move |t, x| lift3.eval_dt(t, x) + f_m(t, x));
    let lift4 = l.clone();
    let d_m1 = d_m.clone();
    let f_bm = Arc::new(move |t: f64, x: [f64; 2], y: [f64; 2]| {
        -lift4.div_d_grad(d_m1.eval(y), t, x)
    });
    let lift5 = l.clone();
    let g_bl = Arc::new(move |t: f64, x: [f64; 2]| d_l.apply(lift5.grad(t, x)));
    let lift6 = l.clone();
    let g_br = Arc::new(move |t: f64, x: [f64; 2]| d_r.apply(lift6.grad(t, x)));
    let lift7 = l.clone();
    let g_b0 = Arc::new(move |t: f64, x: [f64; 2], y: [f64; 2]| {
        let g = d_m.eval(y).apply(lift7.grad(t, x));
        [-g[0], -g[1]]
    });
    let lift8 = l.clone();
    let h_bl: SpaceTimeFn = Arc::new(move |_, x| h_l(0.0, x) + lift8.eval(0.0, x));
    let lift9 = l.clone();
    let h_br: SpaceTimeFn = Arc::new(move |_, x| h_r(0.0, x) + lift9.eval(0.0, x));
    let lift10 = l.clone();
    let h_bm: SpaceTimeFn = Arc::new(move |_, x| h_m(0.0, x) + lift10.eval(0.0, x));

    TransformedSources {
        f_bl,
        f_br,
        f_am,
        f_bm,
        g_bl,
        g_br,
        g_b0,
        h_bl,
        h_br,
        h_bm,
    }
}
