//! Conforming triangulations of rectilinear domains with tagged boundaries.
//!
//! All domains in this crate are unions of axis-aligned rectangles with
//! axis-aligned rectangular holes, so the triangulator builds a
//! feature-aligned grid: every hole wall, interface line and tag split point
//! becomes a grid line, intervals between features are subdivided to the
//! target edge length, and each grid cell outside the holes is split into two
//! right triangles. The result is a conforming Delaunay triangulation that is
//! deterministic for a given (domain, edge length) pair, resolves every hole,
//! and realizes internal interfaces as unions of mesh edges.

use crate::error::{Error, Result};
use crate::geometry::{Axis, BoundaryTag, DomainDescription, RegionTag, GEOM_TOL};
use std::collections::HashMap;
use std::io::Write;

/// Per-triangle geometry for linear elements: area and constant hat-function
/// gradients.
#[derive(Debug, Clone, Copy)]
pub struct TriGeo {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

/// Edge of the mesh carrying a boundary or interface tag.
#[derive(Debug, Clone, Copy)]
pub struct MeshEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
    /// Adjacent triangle (for boundary edges, the only one).
    pub tri_in: usize,
    /// Second adjacent triangle for internal interface edges.
    pub tri_out: Option<usize>,
}

impl MeshEdge {
    pub fn length(&self, mesh: &TaggedMesh) -> f64 {
        let a = mesh.vertices[self.v[0]];
        let b = mesh.vertices[self.v[1]];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }
}

/// Triangulation with region tags per triangle and tagged boundary and
/// interface edges.
#[derive(Debug, Clone)]
pub struct TaggedMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub tri_region: Vec<RegionTag>,
    pub boundary_edges: Vec<MeshEdge>,
    pub interface_edges: Vec<MeshEdge>,
    tri_geo: Vec<TriGeo>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Two triangle indices per grid cell, -1 for removed (hole) cells.
    cell_tris: Vec<[i64; 2]>,
}

fn push_breakpoint(points: &mut Vec<f64>, v: f64) {
    if !points.iter().any(|&p| (p - v).abs() < GEOM_TOL) {
        points.push(v);
    }
}

/// Subdivides feature intervals to the target length. Intervals spanning a
/// hole side get at least two subdivisions so every hole is resolved by at
/// least eight boundary edges.
fn subdivide(breaks: &[f64], target: f64, hole_spans: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let (p, q) = (w[0], w[1]);
        let len = q - p;
        let mut n = (len / target).ceil().max(1.0) as usize;
        let spans_hole = hole_spans
            .iter()
            .any(|&(lo, hi)| (lo - p).abs() < GEOM_TOL && (hi - q).abs() < GEOM_TOL);
        if spans_hole {
            n = n.max(2);
        }
        out.push(p);
        for i in 1..n {
            out.push(p + len * i as f64 / n as f64);
        }
    }
    out.push(*breaks.last().unwrap());
    out
}

/// Builds a conforming tagged triangulation with edges no longer than
/// `target` away from feature lines.
pub fn triangulate(dom: &DomainDescription, target: f64) -> Result<TaggedMesh> {
    if !(target > 0.0) || target > 0.5 * dom.min_feature + GEOM_TOL {
        return Err(Error::FeatureUnderresolved {
            target,
            feature: dom.min_feature,
        });
    }

    // feature breakpoints
    let mut bx = vec![dom.outer.x0, dom.outer.x1];
    let mut by = vec![dom.outer.y0, dom.outer.y1];
    for hole in &dom.holes {
        push_breakpoint(&mut bx, hole.x0);
        push_breakpoint(&mut bx, hole.x1);
        push_breakpoint(&mut by, hole.y0);
        push_breakpoint(&mut by, hole.y1);
    }
    for seg in &dom.segments {
        match seg.axis {
            Axis::X => {
                push_breakpoint(&mut bx, seg.coord);
                push_breakpoint(&mut by, seg.lo);
                push_breakpoint(&mut by, seg.hi);
            }
            Axis::Y => {
                push_breakpoint(&mut by, seg.coord);
                push_breakpoint(&mut bx, seg.lo);
                push_breakpoint(&mut bx, seg.hi);
            }
        }
    }
    for (rect, _) in &dom.regions {
        push_breakpoint(&mut bx, rect.x0);
        push_breakpoint(&mut bx, rect.x1);
        push_breakpoint(&mut by, rect.y0);
        push_breakpoint(&mut by, rect.y1);
    }
    bx.sort_by(|a, b| a.partial_cmp(b).unwrap());
    by.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let hole_spans_x: Vec<(f64, f64)> = dom.holes.iter().map(|r| (r.x0, r.x1)).collect();
    let hole_spans_y: Vec<(f64, f64)> = dom.holes.iter().map(|r| (r.y0, r.y1)).collect();
    let xs = subdivide(&bx, target, &hole_spans_x);
    let ys = subdivide(&by, target, &hole_spans_y);
    let nx = xs.len();
    let ny = ys.len();

    // grid nodes, dropping those strictly inside a hole
    let mut node_id = vec![usize::MAX; nx * ny];
    let mut vertices = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = [xs[i], ys[j]];
            if dom.holes.iter().any(|h| h.contains_strict(p)) {
                continue;
            }
            node_id[j * nx + i] = vertices.len();
            vertices.push(p);
        }
    }

    // two right triangles per kept grid cell, counterclockwise; the
    // diagonal direction mirrors across x = 0 so that symmetric domains get
    // mirror-symmetric meshes
    let mut triangles = Vec::new();
    let mut tri_region = Vec::new();
    let mut cell_tris = vec![[-1i64; 2]; (nx - 1) * (ny - 1)];
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            if dom.holes.iter().any(|h| h.contains_strict([cx, cy])) {
                continue;
            }
            let region = dom.region_of([cx, cy]).ok_or_else(|| {
                Error::GeometryMeshMismatch(format!("no region covers cell center ({cx}, {cy})"))
            })?;
            let v00 = node_id[j * nx + i];
            let v10 = node_id[j * nx + i + 1];
            let v01 = node_id[(j + 1) * nx + i];
            let v11 = node_id[(j + 1) * nx + i + 1];
            debug_assert!(v00 != usize::MAX && v10 != usize::MAX && v01 != usize::MAX && v11 != usize::MAX);
            cell_tris[j * (nx - 1) + i] = [triangles.len() as i64, triangles.len() as i64 + 1];
            if cx >= 0.0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
            tri_region.push(region);
            tri_region.push(region);
        }
    }

    // edge incidence
    let mut edge_map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            edge_map.entry(key).or_default().push(t);
        }
    }

    let matches_segment = |a: [f64; 2], b: [f64; 2], interface: bool| -> Option<BoundaryTag> {
        for seg in &dom.segments {
            if seg.interface != interface {
                continue;
            }
            let ok = match seg.axis {
                Axis::X => {
                    (a[0] - seg.coord).abs() < GEOM_TOL
                        && (b[0] - seg.coord).abs() < GEOM_TOL
                        && a[1].min(b[1]) >= seg.lo - GEOM_TOL
                        && a[1].max(b[1]) <= seg.hi + GEOM_TOL
                }
                Axis::Y => {
                    (a[1] - seg.coord).abs() < GEOM_TOL
                        && (b[1] - seg.coord).abs() < GEOM_TOL
                        && a[0].min(b[0]) >= seg.lo - GEOM_TOL
                        && a[0].max(b[0]) <= seg.hi + GEOM_TOL
                }
            };
            if ok {
                return Some(seg.tag);
            }
        }
        None
    };

    let mut boundary_edges = Vec::new();
    let mut interface_edges = Vec::new();
    let mut keys: Vec<_> = edge_map.keys().cloned().collect();
    keys.sort_unstable();
    for key in keys {
        let tris = &edge_map[&key];
        let (va, vb) = (vertices[key.0], vertices[key.1]);
        if tris.len() == 1 {
            let tag = matches_segment(va, vb, false).ok_or_else(|| {
                Error::GeometryMeshMismatch(format!(
                    "boundary edge ({:?} - {:?}) matches no tagged segment",
                    va, vb
                ))
            })?;
            boundary_edges.push(MeshEdge {
                v: [key.0, key.1],
                tag,
                tri_in: tris[0],
                tri_out: None,
            });
        } else if tris.len() == 2 {
            if let Some(tag) = matches_segment(va, vb, true) {
                interface_edges.push(MeshEdge {
                    v: [key.0, key.1],
                    tag,
                    tri_in: tris[0],
                    tri_out: Some(tris[1]),
                });
            }
        } else {
            return Err(Error::GeometryMeshMismatch(format!(
                "edge shared by {} triangles",
                tris.len()
            )));
        }
    }

    let tri_geo = triangles
        .iter()
        .map(|tri| {
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let area = 0.5 * det;
            // hat gradients: grad(phi_k) = rot(opposite edge) / (2 area)
            let mut grads = [[0.0; 2]; 3];
            for k in 0..3 {
                let a = p[(k + 1) % 3];
                let b = p[(k + 2) % 3];
                grads[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
            }
            TriGeo { area, grads }
        })
        .collect();

    Ok(TaggedMesh {
        vertices,
        triangles,
        tri_region,
        boundary_edges,
        interface_edges,
        tri_geo,
        xs,
        ys,
        cell_tris,
    })
}

impl TaggedMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn tri_geo(&self, t: usize) -> &TriGeo {
        &self.tri_geo[t]
    }

    pub fn total_area(&self) -> f64 {
        self.tri_geo.iter().map(|g| g.area).sum()
    }

    pub fn region_area(&self, region: RegionTag) -> f64 {
        self.tri_geo
            .iter()
            .zip(&self.tri_region)
            .filter(|(_, r)| **r == region)
            .map(|(g, _)| g.area)
            .sum()
    }

    /// Total length of edges carrying the tag, over boundary and interface
    /// edges alike.
    pub fn tagged_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary_edges
            .iter()
            .chain(&self.interface_edges)
            .filter(|e| e.tag == tag)
            .map(|e| e.length(self))
            .sum()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> Vec<&MeshEdge> {
        self.boundary_edges
            .iter()
            .chain(&self.interface_edges)
            .filter(|e| e.tag == tag)
            .collect()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary_edges
            .iter()
            .chain(&self.interface_edges)
            .any(|e| e.tag == tag)
    }

    /// Vertices lying on edges with the given tag, sorted by index.
    pub fn tagged_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .boundary_edges
            .iter()
            .chain(&self.interface_edges)
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.v)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Centroid of a triangle.
    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let tri = self.triangles[t];
        let mut c = [0.0, 0.0];
        for &v in &tri {
            c[0] += self.vertices[v][0] / 3.0;
            c[1] += self.vertices[v][1] / 3.0;
        }
        c
    }

    /// Outward unit normal of a boundary/interface edge with respect to
    /// `tri_in`.
    pub fn edge_normal(&self, e: &MeshEdge) -> [f64; 2] {
        let a = self.vertices[e.v[0]];
        let b = self.vertices[e.v[1]];
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let mut n = [t[1] / len, -t[0] / len];
        let c = self.centroid(e.tri_in);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        if (mid[0] - c[0]) * n[0] + (mid[1] - c[1]) * n[1] < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    fn grid_index(coords: &[f64], v: f64) -> Option<usize> {
        let n = coords.len();
        if v < coords[0] - GEOM_TOL || v > coords[n - 1] + GEOM_TOL {
            return None;
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if coords[mid] <= v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo.min(n - 2))
    }

    /// Locates the triangle containing `p` and returns barycentric
    /// coordinates. Points inside holes or outside the domain return None.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let i = Self::grid_index(&self.xs, p[0])?;
        let j = Self::grid_index(&self.ys, p[1])?;
        let nx1 = self.xs.len() - 1;
        let mut cells = vec![(i, j)];
        if (p[0] - self.xs[i]).abs() < GEOM_TOL && i > 0 {
            cells.push((i - 1, j));
        }
        if (p[1] - self.ys[j]).abs() < GEOM_TOL && j > 0 {
            cells.push((i, j - 1));
            if (p[0] - self.xs[i]).abs() < GEOM_TOL && i > 0 {
                cells.push((i - 1, j - 1));
            }
        }
        for (ci, cj) in cells {
            for &t in &self.cell_tris[cj * nx1 + ci] {
                if t < 0 {
                    continue;
                }
                let t = t as usize;
                if let Some(bary) = self.barycentric(t, p) {
                    return Some((t, bary));
                }
            }
        }
        None
    }

    fn barycentric(&self, t: usize, p: [f64; 2]) -> Option<[f64; 3]> {
        let tri = self.triangles[t];
        let a = self.vertices[tri[0]];
        let b = self.vertices[tri[1]];
        let c = self.vertices[tri[2]];
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        let l0 = 1.0 - l1 - l2;
        let tol = 1e-10;
        if l0 >= -tol && l1 >= -tol && l2 >= -tol {
            Some([l0, l1, l2])
        } else {
            None
        }
    }

    /// Linear interpolation of a nodal field at `p`.
    pub fn eval(&self, field: &[f64], p: [f64; 2]) -> Option<f64> {
        let (t, bary) = self.locate(p)?;
        let tri = self.triangles[t];
        Some(bary[0] * field[tri[0]] + bary[1] * field[tri[1]] + bary[2] * field[tri[2]])
    }

    /// Pairs of (bottom, top) vertex indices for periodic identification in
    /// the vertical direction. Bottom and top rows share x-breakpoints by
    /// construction.
    pub fn periodic_pairs_y(&self) -> Vec<(usize, usize)> {
        let y0 = self.ys[0];
        let y1 = *self.ys.last().unwrap();
        let mut bottom: Vec<usize> = Vec::new();
        let mut top: Vec<usize> = Vec::new();
        for (idx, v) in self.vertices.iter().enumerate() {
            if (v[1] - y0).abs() < GEOM_TOL {
                bottom.push(idx);
            } else if (v[1] - y1).abs() < GEOM_TOL {
                top.push(idx);
            }
        }
        let cmp_x = |a: &usize, b: &usize| {
            self.vertices[*a][0]
                .partial_cmp(&self.vertices[*b][0])
                .unwrap()
        };
        bottom.sort_by(cmp_x);
        top.sort_by(cmp_x);
        assert_eq!(bottom.len(), top.len(), "periodic rows differ");
        bottom.into_iter().zip(top).collect()
    }

    /// Writes the plain-text mesh snapshot:
    /// header `vertices N` / `triangles M` / `edges K`, then one record per
    /// line (vertex coordinates; triangle vertex ids + region; edge vertex
    /// ids + tag).
    pub fn write_snapshot<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let all_edges: Vec<&MeshEdge> = self
            .boundary_edges
            .iter()
            .chain(&self.interface_edges)
            .collect();
        writeln!(out, "vertices {}", self.vertices.len())?;
        writeln!(out, "triangles {}", self.triangles.len())?;
        writeln!(out, "edges {}", all_edges.len())?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for (tri, region) in self.triangles.iter().zip(&self.tri_region) {
            writeln!(out, "{} {} {} {:?}", tri[0], tri[1], tri[2], region)?;
        }
        for e in all_edges {
            writeln!(out, "{} {} {}", e.v[0], e.v[1], e.tag.name())?;
        }
        Ok(())
    }

    /// Edge count and total length per tag, as CSV rows `tag,count,length`.
    pub fn tag_stats_csv(&self) -> String {
        use std::collections::BTreeMap;
        let mut stats: BTreeMap<&'static str, (usize, f64)> = BTreeMap::new();
        for e in self.boundary_edges.iter().chain(&self.interface_edges) {
            let entry = stats.entry(e.tag.name()).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += e.length(self);
        }
        let mut csv = String::from("tag,count,length\n");
        for (tag, (count, length)) in stats {
            csv.push_str(&format!("{},{},{:.12e}\n", tag, count, length));
        }
        csv
    }
}
