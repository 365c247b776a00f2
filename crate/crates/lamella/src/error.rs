//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Obstacle rectangle has a reversed or empty side.
    #[error("degenerate obstacle: need a1 < b1 and a2 < b2, got [{a1}, {b1}] x [{a2}, {b2}]")]
    DegenerateObstacle { a1: f64, b1: f64, a2: f64, b2: f64 },

    /// Obstacle is not strictly inside the reference cell.
    #[error("obstacle touches the cell boundary: [{a1}, {b1}] x [{a2}, {b2}] must lie strictly inside (-1,1) x (0,1)")]
    ObstacleTouchesBoundary { a1: f64, b1: f64, a2: f64, b2: f64 },

    /// The strip height is not an integer number of periods.
    #[error("h/eps = {ratio} is not an integer (h = {h}, eps = {eps})")]
    NonIntegerPeriodCount { h: f64, eps: f64, ratio: f64 },

    /// The layer half-width reaches into the Dirichlet boundaries.
    #[error("layer too wide: kappa = {kappa} must be < ell/2 = {half_ell}")]
    LayerTooWide { kappa: f64, half_ell: f64 },

    /// The requested edge length cannot resolve the thinnest region.
    #[error("feature underresolved: target edge length {target} exceeds half the smallest feature size {feature}")]
    FeatureUnderresolved { target: f64, feature: f64 },

    /// A diffusion tensor entry is zero or negative.
    #[error("non-positive diffusion entry {value} at {context}")]
    NonPositiveDiffusion { value: f64, context: String },

    /// A boundary tag was requested that the mesh does not carry.
    #[error("unknown boundary tag {tag} on this mesh")]
    UnknownTag { tag: String },

    /// Iterative linear solver failed to reach the residual tolerance.
    #[error("linear solve failure: residual {residual:.3e} > tol {tol:.3e} after {iters} iterations")]
    LinearSolveFailure { residual: f64, tol: f64, iters: usize },

    /// Picard iteration for the drift did not contract.
    #[error("Picard iteration diverged: update norm {update:.3e} after {iters} iterations")]
    PicardDivergence { update: f64, iters: usize },

    /// Mesh does not match the geometry it is supposed to discretize.
    #[error("geometry/mesh mismatch: {0}")]
    GeometryMeshMismatch(String),

    /// Interface sweep between bulk and cell problems did not converge.
    #[error("interface iteration diverged: residual {residual:.3e} after {sweeps} sweeps")]
    InterfaceIterationDiverged { residual: f64, sweeps: usize },

    /// Two fields were compared on incompatible regions.
    #[error("region mismatch: {0}")]
    RegionMismatch(String),

    /// A parameter sweep needs at least three points.
    #[error("sweep too short: got {got} points, need at least {need}")]
    SweepTooShort { got: usize, need: usize },

    /// Rate fitting needs strictly positive values.
    #[error("non-positive input to rate fit: {0}")]
    NonPositiveInput(f64),

    /// A scaling quadruple matched more than one choice.
    #[error("ambiguous scaling classification: matches {0:?}")]
    AmbiguousClassification(Vec<&'static str>),

    /// Config file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),

    /// I/O failure while writing reports or snapshots.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
