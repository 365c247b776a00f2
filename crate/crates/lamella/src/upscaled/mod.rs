//! Upscaled limit models of the layer problem.
//!
//! Four regimes are implemented, following the scaling classification:
//! S1 couples the bulk diffusion-drift equations through one-dimensional
//! families of cell problems on the reference cell; S2 collapses the layer
//! to an interface ODE with capacity `|Z|`; S3 and S4 keep a fixed-width
//! layer whose microstructure reduces to vertical cell lines with
//! lambda-switched diffusion and drift.

pub mod s1;
pub mod s2;
pub mod s3s4;

pub use s1::{solve_cell_problem_s1, solve_macro_s1, CellProblem, FluxBalance, MacroS1Solution};
pub use s2::{solve_macro_s2, solve_macro_s2_steady, InterfaceOde, MacroS2Solution};
pub use s3s4::{solve_macro_s3s4, MacroS3Solution};

use crate::config::ProblemConfig;
use crate::error::Result;
use crate::fem::{
    assemble_boundary_load, assemble_drift_load, assemble_flux_load, assemble_mass,
    assemble_stiffness, assemble_volume_load, linear_solve, AssembledSystem, Csr, DofMap,
    RegionWeights, Triplets,
};
use crate::geometry::{build_rectangle_domain, BoundaryTag, RegionTag};
use crate::mesh::{triangulate, TaggedMesh};
use crate::problem::{BoundaryLift, DiagTensor, SpaceTimeFn};

/// Piecewise-linear interpolation over sorted sample points, clamped at the
/// ends. Used to move interface data between the Sigma discretization and
/// mesh edges.
pub(crate) fn interp_sorted(xs: &[f64], vals: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return vals[0];
    }
    if x >= xs[xs.len() - 1] {
        return vals[vals.len() - 1];
    }
    let mut k = 0;
    while xs[k + 1] < x {
        k += 1;
    }
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    vals[k] * (1.0 - w) + vals[k + 1] * w
}

/// One bulk half-strip with Dirichlet data on the outer vertical boundary,
/// Neumann data on the horizontal boundary, and a flux condition on the
/// interface edge. The lift enters through its exact volume and gradient
/// loads, which cancels the interface lift terms of the printed flux
/// conditions; the interface datum passed to `step` is therefore the pure
/// cell-side flux.
pub(crate) struct BulkSolver {
    pub mesh: TaggedMesh,
    pub dofs: DofMap,
    #[allow(dead_code)]
    pub region: RegionTag,
    pub iface_tag: BoundaryTag,
    /// +1 if the interface normal of this bulk equals the global interface
    /// normal (left bulk), -1 otherwise (right bulk).
    pub iface_sign: f64,
    pub system: AssembledSystem,
    mass_csr: Csr,
    sys_csr: Csr,
    stiff_csr: Csr,
    dt: f64,
    tol_lin: f64,
    d: DiagTensor,
    b: [f64; 2],
    f: SpaceTimeFn,
    g_h: SpaceTimeFn,
    h0: SpaceTimeFn,
    lift: BoundaryLift,
    drift: crate::drift::Drift,
    drift_weight: f64,
    iface_nodes: Vec<usize>,
    iface_coords: Vec<f64>,
}

impl BulkSolver {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: &ProblemConfig,
        x_lo: f64,
        x_hi: f64,
        outer_tag: BoundaryTag,
        iface_tag: BoundaryTag,
        region: RegionTag,
        iface_on_right: bool,
    ) -> Result<Self> {
        let h = config.geometry.h;
        let (left_tag, right_tag) = if iface_on_right {
            (outer_tag, iface_tag)
        } else {
            (iface_tag, outer_tag)
        };
        let dom = build_rectangle_domain(x_lo, x_hi, h, left_tag, right_tag, region);
        let mesh = triangulate(&dom, config.mesh.edge)?;
        let n = mesh.vertex_count();
        let dofs = DofMap::identity(n);
        let mut dirichlet = vec![false; n];
        for id in mesh.tagged_vertices(outer_tag) {
            dirichlet[id] = true;
        }
        let (d, b, f, g_h, h0) = match region {
            RegionTag::Right => (
                config.coefficients.d_r,
                config.coefficients.b_r,
                config.sources.f_r.clone(),
                config.sources.g_r.clone(),
                config.sources.h_r.clone(),
            ),
            _ => (
                config.coefficients.d_l,
                config.coefficients.b_l,
                config.sources.f_l.clone(),
                config.sources.g_l.clone(),
                config.sources.h_l.clone(),
            ),
        };
        let mass = assemble_mass(&mesh, &dofs, RegionWeights::one());
        let stiffness = assemble_stiffness(&mesh, &dofs, &|_, _| d, RegionWeights::one())?;
        let system = AssembledSystem::new(mass, stiffness, dirichlet);
        let mass_csr = system.mass_csr();
        let stiff_csr = system.stiffness_csr();
        let dt = config.time.dt;
        let sys_csr = system.system_matrix(dt);

        let mut iface_nodes = mesh.tagged_vertices(iface_tag);
        iface_nodes.sort_by(|a, b| {
            mesh.vertices[*a][1]
                .partial_cmp(&mesh.vertices[*b][1])
                .unwrap()
        });
        let iface_coords: Vec<f64> = iface_nodes.iter().map(|&i| mesh.vertices[i][1]).collect();

        Ok(BulkSolver {
            mesh,
            dofs,
            region,
            iface_tag,
            iface_sign: if iface_on_right { 1.0 } else { -1.0 },
            system,
            mass_csr,
            sys_csr,
            stiff_csr,
            dt,
            tol_lin: config.solver.tol_lin,
            d,
            b,
            f,
            g_h,
            h0,
            lift: config.lift(),
            drift: config.drift.clone(),
            drift_weight: 1.0,
            iface_nodes,
            iface_coords,
        })
    }

    pub fn initial(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .mesh
            .vertices
            .iter()
            .map(|&x| (self.h0)(0.0, x) + self.lift.eval(0.0, x))
            .collect();
        self.system.constrain(&mut v);
        v
    }

    /// Volume, lift and horizontal-boundary loads at time `t` (everything
    /// except the interface flux and the drift).
    pub fn base_load(&self, t: f64) -> Result<Vec<f64>> {
        let volume = assemble_volume_load(
            &self.mesh,
            &self.dofs,
            &|_, x| (self.f)(t, x) + self.lift.eval_dt(t, x),
            RegionWeights::one(),
        );
        let lift_flux = assemble_flux_load(
            &self.mesh,
            &self.dofs,
            &|_, x| self.d.apply(self.lift.grad(t, x)),
            RegionWeights::one(),
        );
        let gamma_h = assemble_boundary_load(
            &self.mesh,
            &self.dofs,
            BoundaryTag::GammaH,
            &|x| (self.g_h)(t, x),
            1.0,
        )?;
        Ok((0..self.dofs.ndof)
            .map(|i| volume[i] + lift_flux[i] - gamma_h[i])
            .collect())
    }

    pub fn drift_load(&self, t: f64, iterate: &[f64]) -> Vec<f64> {
        assemble_drift_load(
            &self.mesh,
            &self.dofs,
            iterate,
            &|x| self.lift.eval(t, x),
            &self.drift,
            &|_, _| self.b,
            RegionWeights {
                left: self.drift_weight,
                middle: self.drift_weight,
                right: self.drift_weight,
                cell: self.drift_weight,
            },
        )
    }

    /// One implicit step with interface flux datum `q(xbar)` (the signed
    /// weak load is handled internally: `+int q phi` on a left bulk,
    /// `-int q phi` on a right bulk). The drift is lagged at `prev`.
    pub fn step(
        &self,
        prev: &[f64],
        t: f64,
        base_load: &[f64],
        q_iface: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<f64>> {
        let iface = assemble_boundary_load(
            &self.mesh,
            &self.dofs,
            self.iface_tag,
            &|x| q_iface(x[1]),
            self.iface_sign,
        )?;
        let nvec = self.drift_load(t, prev);
        let mprev = self.mass_csr.matvec(prev);
        let mut rhs: Vec<f64> = (0..self.dofs.ndof)
            .map(|i| mprev[i] / self.dt + base_load[i] + iface[i] + nvec[i])
            .collect();
        self.system.constrain(&mut rhs);
        linear_solve(&self.sys_csr, &rhs, self.tol_lin)
    }

    /// Trace of a nodal field on the interface, interpolated at `queries`.
    pub fn trace(&self, field: &[f64], queries: &[f64]) -> Vec<f64> {
        let vals: Vec<f64> = self.iface_nodes.iter().map(|&i| field[i]).collect();
        queries
            .iter()
            .map(|&q| interp_sorted(&self.iface_coords, &vals, q))
            .collect()
    }

    /// A-posteriori flux transmission residual: the interface flux carried
    /// by the converged bulk field, recovered from the residual functional,
    /// measured against the cell-side flux datum in the same weak
    /// functional (integrals against the interface hat functions), and
    /// normalized to pointwise scale by the lumped trace mass.
    pub fn iface_flux_residual(
        &self,
        prev: &[f64],
        next: &[f64],
        t: f64,
        base_load: &[f64],
        q_iface: &dyn Fn(f64) -> f64,
    ) -> Result<f64> {
        let n = self.dofs.ndof;
        let mv = self.mass_csr.matvec(next);
        let mprev = self.mass_csr.matvec(prev);
        let av = self.stiff_csr.matvec(next);
        let nvec = self.drift_load(t, prev);
        let imposed = crate::fem::assemble_boundary_load(
            &self.mesh,
            &self.dofs,
            self.iface_tag,
            &|x| q_iface(x[1]),
            self.iface_sign,
        )?;
        let mut lumped = vec![0.0; n];
        for e in self.mesh.edges_with_tag(self.iface_tag) {
            let half = 0.5 * e.length(&self.mesh);
            lumped[e.v[0]] += half;
            lumped[e.v[1]] += half;
        }
        let mut worst = 0.0f64;
        for &i in &self.iface_nodes {
            let recovered = (mv[i] - mprev[i]) / self.dt + av[i] - nvec[i] - base_load[i];
            worst = worst.max((recovered - imposed[i]).abs() / lumped[i]);
        }
        Ok(worst)
    }
}

/// Steady variant of a constrained system: solves `A v = load` directly,
/// with an optional Picard loop on the drift.
pub(crate) fn solve_steady_system(
    system: &AssembledSystem,
    load: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    tol_lin: f64,
    max_picard: usize,
    tol_picard: f64,
) -> Result<Vec<f64>> {
    let a = system.steady_matrix();
    let mut v = vec![0.0; system.ndof];
    for _ in 0..max_picard.max(1) {
        let mut rhs = load(&v)?;
        for (i, &fixed) in system.dirichlet.iter().enumerate() {
            if fixed {
                rhs[i] = 0.0;
            }
        }
        let next = linear_solve(&a, &rhs, tol_lin)?;
        let update: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = next;
        if update <= tol_picard * scale.max(1.0) {
            break;
        }
    }
    Ok(v)
}

pub(crate) fn empty_triplets(n: usize) -> Triplets {
    Triplets::new(n)
}
