//! Geometry of the perforated strip and its reference cell.
//!
//! The computational domain is a strip `(-ell/2, ell/2) x (0, h)` split into
//! two bulk regions and a thin middle layer of half-width `kappa`. The layer
//! carries a vertical array of `h/eps` rectangular obstacles, one per period,
//! obtained by scaling the obstacle of the reference cell
//! `Z = (-1,1) x (0,1) \ [a1,b1] x [a2,b2]` by `kappa` horizontally and `eps`
//! vertically.

use crate::error::{Error, Result};

/// Snapping tolerance for coordinate dedup and matching.
pub(crate) const GEOM_TOL: f64 = 1e-9;

/// Region label carried by every triangle of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionTag {
    Left,
    Middle,
    Right,
    Cell,
}

/// Boundary and interface labels carried by tagged mesh edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Left Dirichlet boundary `x1 = -ell/2`.
    GammaL,
    /// Right Dirichlet boundary `x1 = +ell/2`.
    GammaR,
    /// Horizontal Neumann boundary of the bulk regions.
    GammaH,
    /// Oscillating boundary: obstacle walls plus the layer's horizontal openings.
    Gamma0,
    /// Internal interface `x1 = -kappa` between left bulk and layer.
    BL,
    /// Internal interface `x1 = +kappa` between layer and right bulk.
    BR,
    /// Limit interface `x1 = 0` of the upscaled models.
    Sigma,
    /// Left edge of the reference cell.
    ZL,
    /// Right edge of the reference cell.
    ZR,
    /// Obstacle boundary inside the reference cell.
    CellObstacle,
    /// Horizontal (periodic) edges of the reference cell.
    CellOuter,
}

impl BoundaryTag {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryTag::GammaL => "GammaL",
            BoundaryTag::GammaR => "GammaR",
            BoundaryTag::GammaH => "GammaH",
            BoundaryTag::Gamma0 => "Gamma0",
            BoundaryTag::BL => "BL",
            BoundaryTag::BR => "BR",
            BoundaryTag::Sigma => "Sigma",
            BoundaryTag::ZL => "ZL",
            BoundaryTag::ZR => "ZR",
            BoundaryTag::CellObstacle => "CellObstacle",
            BoundaryTag::CellOuter => "CellOuter",
        }
    }
}

/// Axis-aligned rectangle `[x0,x1] x [y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 - GEOM_TOL
            && p[0] <= self.x1 + GEOM_TOL
            && p[1] >= self.y0 - GEOM_TOL
            && p[1] <= self.y1 + GEOM_TOL
    }

    /// Strict interior test with tolerance, used for hole removal.
    pub fn contains_strict(&self, p: [f64; 2]) -> bool {
        p[0] > self.x0 + GEOM_TOL
            && p[0] < self.x1 - GEOM_TOL
            && p[1] > self.y0 + GEOM_TOL
            && p[1] < self.y1 - GEOM_TOL
    }
}

/// The reference cell `Z = Y \ Y0` with `Y = (-1,1) x (0,1)` and obstacle
/// `Y0 = [a1,b1] x [a2,b2]` strictly inside `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardCell {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

/// Validates and builds a reference cell description.
pub fn build_standard_cell(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<StandardCell> {
    if !(a1 < b1) || !(a2 < b2) {
        return Err(Error::DegenerateObstacle { a1, b1, a2, b2 });
    }
    if !(-1.0 < a1 && b1 < 1.0 && 0.0 < a2 && b2 < 1.0) {
        return Err(Error::ObstacleTouchesBoundary { a1, b1, a2, b2 });
    }
    Ok(StandardCell { a1, b1, a2, b2 })
}

impl StandardCell {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        build_standard_cell(a1, b1, a2, b2)
    }

    /// Obstacle centered in `Y`, occupying half of each cell dimension.
    pub fn centered() -> Self {
        StandardCell {
            a1: -0.5,
            b1: 0.5,
            a2: 0.25,
            b2: 0.75,
        }
    }

    pub fn obstacle(&self) -> Rect {
        Rect::new(self.a1, self.b1, self.a2, self.b2)
    }

    /// `|Z| = 2 - (b1-a1)(b2-a2)`, the fluid area of the reference cell.
    pub fn measure(&self) -> f64 {
        2.0 - (self.b1 - self.a1) * (self.b2 - self.a2)
    }
}

/// `|Z|` as a free function; this measure weighs the effective interface
/// capacity in the S2 limit model.
pub fn cell_measure(cell: &StandardCell) -> f64 {
    cell.measure()
}

/// Layer width law: collapsing with `eps` or a fixed half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthMode {
    /// `kappa(eps) = eps`; the layer collapses onto the interface in the limit.
    Vanishing,
    /// `kappa(eps) = kappa` fixed; the layer persists with width `2 kappa`.
    Fixed(f64),
}

/// The eps-dependent perforated strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerGeometry {
    pub ell: f64,
    pub h: f64,
    pub eps: f64,
    pub width_mode: WidthMode,
    pub cell: StandardCell,
}

impl LayerGeometry {
    pub fn new(ell: f64, h: f64, eps: f64, width_mode: WidthMode, cell: StandardCell) -> Result<Self> {
        let geom = LayerGeometry {
            ell,
            h,
            eps,
            width_mode,
            cell,
        };
        geom.validate()?;
        Ok(geom)
    }

    fn validate(&self) -> Result<()> {
        if self.ell <= 0.0 || self.h <= 0.0 || self.eps <= 0.0 {
            return Err(Error::GeometryMeshMismatch(format!(
                "ell, h, eps must be positive (got {}, {}, {})",
                self.ell, self.h, self.eps
            )));
        }
        let ratio = self.h / self.eps;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::NonIntegerPeriodCount {
                h: self.h,
                eps: self.eps,
                ratio,
            });
        }
        let kappa = self.kappa();
        if kappa <= 0.0 || kappa >= self.ell / 2.0 {
            return Err(Error::LayerTooWide {
                kappa,
                half_ell: self.ell / 2.0,
            });
        }
        Ok(())
    }

    /// Layer half-width `kappa(eps)`.
    pub fn kappa(&self) -> f64 {
        match self.width_mode {
            WidthMode::Vanishing => self.eps,
            WidthMode::Fixed(kappa) => kappa,
        }
    }

    /// Number of periods `h/eps`.
    pub fn period_count(&self) -> usize {
        (self.h / self.eps).round() as usize
    }

    /// Obstacle `k` occupies `kappa*[a1,b1] x eps*[k+a2, k+b2]`, one per
    /// period, `k = 0, ..., h/eps - 1`.
    pub fn obstacles(&self) -> Vec<Rect> {
        let kappa = self.kappa();
        let c = &self.cell;
        (0..self.period_count())
            .map(|k| {
                Rect::new(
                    kappa * c.a1,
                    kappa * c.b1,
                    self.eps * (k as f64 + c.a2),
                    self.eps * (k as f64 + c.b2),
                )
            })
            .collect()
    }

    /// Maps a strip point to reference-cell coordinates: `y1 = x1/kappa`,
    /// `y2 = (x2/eps) mod 1`. Cell coefficients are sampled through this map.
    pub fn cell_coords(&self, x: [f64; 2]) -> [f64; 2] {
        let y1 = x[0] / self.kappa();
        let y2 = (x[1] / self.eps).rem_euclid(1.0);
        [y1, y2]
    }

    /// Analytic layer area `2 kappa h - (h/eps) * kappa (b1-a1) * eps (b2-a2)`.
    pub fn layer_area(&self) -> f64 {
        let kappa = self.kappa();
        let c = &self.cell;
        2.0 * kappa * self.h
            - self.period_count() as f64 * kappa * (c.b1 - c.a1) * self.eps * (c.b2 - c.a2)
    }
}

/// Boundary or interface segment of a polygonal domain. Vertical segments
/// have `axis = Axis::X` (constant `x = coord`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy)]
pub struct TaggedSegment {
    pub axis: Axis,
    pub coord: f64,
    pub lo: f64,
    pub hi: f64,
    pub tag: BoundaryTag,
    /// Internal interfaces are meshed as edge-aligned lines shared by two
    /// triangles, not as boundary.
    pub interface: bool,
}

impl TaggedSegment {
    fn vertical(x: f64, y_lo: f64, y_hi: f64, tag: BoundaryTag, interface: bool) -> Self {
        TaggedSegment {
            axis: Axis::X,
            coord: x,
            lo: y_lo,
            hi: y_hi,
            tag,
            interface,
        }
    }

    fn horizontal(y: f64, x_lo: f64, x_hi: f64, tag: BoundaryTag, interface: bool) -> Self {
        TaggedSegment {
            axis: Axis::Y,
            coord: y,
            lo: x_lo,
            hi: x_hi,
            tag,
            interface,
        }
    }
}

/// Polygonal domain description: outer rectangle, rectangular holes, tagged
/// boundary/interface segments, and region classification.
#[derive(Debug, Clone)]
pub struct DomainDescription {
    pub outer: Rect,
    pub holes: Vec<Rect>,
    pub segments: Vec<TaggedSegment>,
    pub regions: Vec<(Rect, RegionTag)>,
    /// Smallest region dimension; the triangulator refuses edge lengths above
    /// half of this. Obstacle walls are grid-aligned and resolved regardless.
    pub min_feature: f64,
}

impl DomainDescription {
    pub fn region_of(&self, p: [f64; 2]) -> Option<RegionTag> {
        self.regions
            .iter()
            .find(|(r, _)| r.contains(p))
            .map(|(_, tag)| *tag)
    }

    pub fn hole_count(&self) -> usize {
        self.holes.len()
    }

    /// Fluid area: outer minus holes.
    pub fn area(&self) -> f64 {
        self.outer.area() - self.holes.iter().map(Rect::area).sum::<f64>()
    }
}

/// Builds the perforated strip domain. Holes carry `Gamma0`; the vertical
/// lines `x1 = -kappa` / `x1 = +kappa` are recorded as internal interfaces
/// `BL` / `BR`; the outer boundary splits into `GammaL`, `GammaR`, `GammaH`
/// on the bulk part and `Gamma0` on the layer's horizontal openings.
pub fn build_micro_domain(geom: &LayerGeometry) -> Result<DomainDescription> {
    geom.validate()?;
    let half = geom.ell / 2.0;
    let kappa = geom.kappa();
    let h = geom.h;
    let outer = Rect::new(-half, half, 0.0, h);
    let holes = geom.obstacles();

    let mut segments = vec![
        TaggedSegment::vertical(-half, 0.0, h, BoundaryTag::GammaL, false),
        TaggedSegment::vertical(half, 0.0, h, BoundaryTag::GammaR, false),
        TaggedSegment::vertical(-kappa, 0.0, h, BoundaryTag::BL, true),
        TaggedSegment::vertical(kappa, 0.0, h, BoundaryTag::BR, true),
    ];
    for &y in &[0.0, h] {
        segments.push(TaggedSegment::horizontal(y, -half, -kappa, BoundaryTag::GammaH, false));
        segments.push(TaggedSegment::horizontal(y, -kappa, kappa, BoundaryTag::Gamma0, false));
        segments.push(TaggedSegment::horizontal(y, kappa, half, BoundaryTag::GammaH, false));
    }
    for hole in &holes {
        segments.push(TaggedSegment::vertical(hole.x0, hole.y0, hole.y1, BoundaryTag::Gamma0, false));
        segments.push(TaggedSegment::vertical(hole.x1, hole.y0, hole.y1, BoundaryTag::Gamma0, false));
        segments.push(TaggedSegment::horizontal(hole.y0, hole.x0, hole.x1, BoundaryTag::Gamma0, false));
        segments.push(TaggedSegment::horizontal(hole.y1, hole.x0, hole.x1, BoundaryTag::Gamma0, false));
    }

    let regions = vec![
        (Rect::new(-half, -kappa, 0.0, h), RegionTag::Left),
        (Rect::new(-kappa, kappa, 0.0, h), RegionTag::Middle),
        (Rect::new(kappa, half, 0.0, h), RegionTag::Right),
    ];

    Ok(DomainDescription {
        outer,
        holes,
        segments,
        regions,
        min_feature: kappa,
    })
}

/// Reference-cell domain `Z` with tags `ZL`, `ZR`, `CellOuter`, `CellObstacle`.
pub fn build_cell_domain(cell: &StandardCell) -> DomainDescription {
    let outer = Rect::new(-1.0, 1.0, 0.0, 1.0);
    let hole = cell.obstacle();
    let segments = vec![
        TaggedSegment::vertical(-1.0, 0.0, 1.0, BoundaryTag::ZL, false),
        TaggedSegment::vertical(1.0, 0.0, 1.0, BoundaryTag::ZR, false),
        TaggedSegment::horizontal(0.0, -1.0, 1.0, BoundaryTag::CellOuter, false),
        TaggedSegment::horizontal(1.0, -1.0, 1.0, BoundaryTag::CellOuter, false),
        TaggedSegment::vertical(hole.x0, hole.y0, hole.y1, BoundaryTag::CellObstacle, false),
        TaggedSegment::vertical(hole.x1, hole.y0, hole.y1, BoundaryTag::CellObstacle, false),
        TaggedSegment::horizontal(hole.y0, hole.x0, hole.x1, BoundaryTag::CellObstacle, false),
        TaggedSegment::horizontal(hole.y1, hole.x0, hole.x1, BoundaryTag::CellObstacle, false),
    ];
    let margins = [
        cell.a1 + 1.0,
        1.0 - cell.b1,
        cell.a2,
        1.0 - cell.b2,
        cell.b1 - cell.a1,
        cell.b2 - cell.a2,
    ];
    let min_feature = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    DomainDescription {
        outer,
        holes: vec![hole],
        segments,
        regions: vec![(outer, RegionTag::Cell)],
        min_feature,
    }
}

/// Plain rectangle `(x_lo, x_hi) x (0, h)` with chosen tags on the left and
/// right edges, `GammaH` on top and bottom, and a single region.
pub fn build_rectangle_domain(
    x_lo: f64,
    x_hi: f64,
    h: f64,
    left_tag: BoundaryTag,
    right_tag: BoundaryTag,
    region: RegionTag,
) -> DomainDescription {
    let outer = Rect::new(x_lo, x_hi, 0.0, h);
    let segments = vec![
        TaggedSegment::vertical(x_lo, 0.0, h, left_tag, false),
        TaggedSegment::vertical(x_hi, 0.0, h, right_tag, false),
        TaggedSegment::horizontal(0.0, x_lo, x_hi, BoundaryTag::GammaH, false),
        TaggedSegment::horizontal(h, x_lo, x_hi, BoundaryTag::GammaH, false),
    ];
    DomainDescription {
        outer,
        holes: Vec::new(),
        segments,
        regions: vec![(outer, region)],
        min_feature: (x_hi - x_lo).min(h),
    }
}

/// Full strip with the limit interface `Sigma` at `x1 = 0` meshed as an
/// internal line; left/right halves carry `Left`/`Right` region tags.
pub fn build_two_slab_domain(ell: f64, h: f64) -> DomainDescription {
    let half = ell / 2.0;
    let outer = Rect::new(-half, half, 0.0, h);
    let segments = vec![
        TaggedSegment::vertical(-half, 0.0, h, BoundaryTag::GammaL, false),
        TaggedSegment::vertical(half, 0.0, h, BoundaryTag::GammaR, false),
        TaggedSegment::vertical(0.0, 0.0, h, BoundaryTag::Sigma, true),
        TaggedSegment::horizontal(0.0, -half, half, BoundaryTag::GammaH, false),
        TaggedSegment::horizontal(h, -half, half, BoundaryTag::GammaH, false),
    ];
    let regions = vec![
        (Rect::new(-half, 0.0, 0.0, h), RegionTag::Left),
        (Rect::new(0.0, half, 0.0, h), RegionTag::Right),
    ];
    DomainDescription {
        outer,
        holes: Vec::new(),
        segments,
        regions,
        min_feature: half.min(h),
    }
}
