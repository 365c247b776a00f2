//! S1 limit model: bulk diffusion-drift equations on the two half strips,
//! coupled through a family of heat-type cell problems on the reference
//! cell, one per interface point.
//!
//! Per time step the coupling is resolved by relaxed Gauss-Seidel sweeps:
//! the cell problems take the bulk interface traces as Dirichlet data on
//! the cell's vertical edges (the limit matching conditions), the bulk
//! problems take the cell flux integrals over those edges as interface flux
//! data, and the sweep repeats until the trace update drops below the
//! interface tolerance.

use super::{interp_sorted, BulkSolver};
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, assemble_volume_load, linear_solve, AssembledSystem, Csr,
    DofMap, RegionWeights, TransientField,
};
use crate::geometry::{build_cell_domain, BoundaryTag, RegionTag, StandardCell};
use crate::mesh::{triangulate, TaggedMesh};
use crate::problem::{BoundaryLift, CellDiag, ScalingChoice};
use rayon::prelude::*;

/// Heat-type problem on the reference cell `Z`: Dirichlet data on the left
/// and right edges, natural (zero-flux) condition on the obstacle walls,
/// periodicity in the vertical cell direction.
pub struct CellProblem {
    pub mesh: TaggedMesh,
    dofs: DofMap,
    dirichlet: Vec<bool>,
    mass: Csr,
    stiff: Csr,
    sys: Csr,
    sys_unconstrained: Csr,
    zl_dofs: Vec<usize>,
    zr_dofs: Vec<usize>,
    dt: f64,
    tol_lin: f64,
    /// Fluid area `|Z|` of the meshed cell.
    pub measure: f64,
}

impl CellProblem {
    pub fn new(cell: &StandardCell, edge: f64, d_m: &CellDiag, dt: f64, tol_lin: f64) -> Result<Self> {
        let dom = build_cell_domain(cell);
        let mesh = triangulate(&dom, edge)?;
        Self::from_mesh(mesh, d_m, dt, tol_lin)
    }

    /// Builds the problem on a caller-supplied cell mesh (tags `ZL`, `ZR`
    /// expected; vertical periodicity from the mesh's top/bottom rows).
    pub fn from_mesh(mesh: TaggedMesh, d_m: &CellDiag, dt: f64, tol_lin: f64) -> Result<Self> {
        let dofs = DofMap::periodic_y(&mesh);
        let mut dirichlet = vec![false; dofs.ndof];
        let mut zl_dofs: Vec<usize> = mesh
            .tagged_vertices(BoundaryTag::ZL)
            .iter()
            .map(|&i| dofs.node_to_dof[i])
            .collect();
        zl_dofs.sort_unstable();
        zl_dofs.dedup();
        let mut zr_dofs: Vec<usize> = mesh
            .tagged_vertices(BoundaryTag::ZR)
            .iter()
            .map(|&i| dofs.node_to_dof[i])
            .collect();
        zr_dofs.sort_unstable();
        zr_dofs.dedup();
        for &d in zl_dofs.iter().chain(&zr_dofs) {
            dirichlet[d] = true;
        }
        let d_m = d_m.clone();
        let mass_t = assemble_mass(&mesh, &dofs, RegionWeights::one());
        let stiff_t = assemble_stiffness(&mesh, &dofs, &|_, y| d_m.eval(y), RegionWeights::one())?;
        let system = AssembledSystem::new(mass_t, stiff_t, dirichlet.clone());
        let mass = system.mass_csr();
        let stiff = system.stiffness_csr();
        let sys = system.system_matrix(dt);
        let sys_unconstrained = {
            let mut combined = super::empty_triplets(dofs.ndof);
            combined.add_scaled(&system.mass, 1.0 / dt);
            combined.add_scaled(&system.stiffness, 1.0);
            combined.to_csr(None)
        };
        let measure = mesh.total_area();
        Ok(CellProblem {
            mesh,
            dofs,
            dirichlet,
            mass,
            stiff,
            sys,
            sys_unconstrained,
            zl_dofs,
            zr_dofs,
            dt,
            tol_lin,
            measure,
        })
    }

    pub fn ndof(&self) -> usize {
        self.dofs.ndof
    }

    /// Constant initial state in dof space.
    pub fn constant_state(&self, c: f64) -> Vec<f64> {
        vec![c; self.dofs.ndof]
    }

    /// Nodal initial state from a cell-coordinate profile.
    pub fn state_from(&self, f: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        let nodal: Vec<f64> = self.mesh.vertices.iter().map(|&y| f(y)).collect();
        self.dofs.restrict(&nodal)
    }

    fn source_load(&self, source: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        assemble_volume_load(&self.mesh, &self.dofs, &|_, y| source(y), RegionWeights::one())
    }

    fn dirichlet_vector(&self, trace_l: f64, trace_r: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.dofs.ndof];
        for &d in &self.zl_dofs {
            g[d] = trace_l;
        }
        for &d in &self.zr_dofs {
            g[d] = trace_r;
        }
        g
    }

    /// One implicit Euler step with Dirichlet traces on the vertical edges.
    pub fn step(
        &self,
        prev: &[f64],
        trace_l: f64,
        trace_r: f64,
        source: &dyn Fn([f64; 2]) -> f64,
    ) -> Result<Vec<f64>> {
        let g = self.dirichlet_vector(trace_l, trace_r);
        let f = self.source_load(source);
        let mprev = self.mass.matvec(prev);
        let kg = self.sys_unconstrained.matvec(&g);
        let mut rhs: Vec<f64> = (0..self.dofs.ndof)
            .map(|i| mprev[i] / self.dt + f[i] - kg[i])
            .collect();
        for (i, &fixed) in self.dirichlet.iter().enumerate() {
            if fixed {
                rhs[i] = g[i];
            }
        }
        let mut v = linear_solve(&self.sys, &rhs, self.tol_lin)?;
        for (i, &fixed) in self.dirichlet.iter().enumerate() {
            if fixed {
                v[i] = g[i];
            }
        }
        Ok(v)
    }

    /// Steady solve with Dirichlet traces (used by oracles and tests).
    pub fn steady(&self, trace_l: f64, trace_r: f64, source: &dyn Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
        let g = self.dirichlet_vector(trace_l, trace_r);
        let f = self.source_load(source);
        let kg = self.stiff.matvec(&g);
        let mut rhs: Vec<f64> = (0..self.dofs.ndof).map(|i| f[i] - kg[i]).collect();
        for (i, &fixed) in self.dirichlet.iter().enumerate() {
            if fixed {
                rhs[i] = g[i];
            }
        }
        let amat = {
            // constrained steady matrix from the stored stiffness pattern
            let mut combined = super::empty_triplets(self.dofs.ndof);
            for i in 0..self.stiff.n {
                for k in self.stiff.row_ptr[i]..self.stiff.row_ptr[i + 1] {
                    combined.add(i, self.stiff.col[k], self.stiff.val[k]);
                }
            }
            combined.to_csr(Some(&self.dirichlet))
        };
        let mut v = linear_solve(&amat, &rhs, self.tol_lin)?;
        for (i, &fixed) in self.dirichlet.iter().enumerate() {
            if fixed {
                v[i] = g[i];
            }
        }
        Ok(v)
    }

    /// Edge flux integrals `(q_l, q_r)` with `q_side = int_side D_M grad v .
    /// n` and `n` the rightward interface normal, recovered variationally
    /// from the step residual.
    pub fn fluxes(
        &self,
        prev: &[f64],
        next: &[f64],
        source: &dyn Fn([f64; 2]) -> f64,
    ) -> (f64, f64) {
        let f = self.source_load(source);
        let mnext = self.mass.matvec(next);
        let mprev = self.mass.matvec(prev);
        let av = self.stiff.matvec(next);
        let resid = |i: usize| (mnext[i] - mprev[i]) / self.dt + av[i] - f[i];
        // outward normal on ZL is the negative interface normal
        let q_l: f64 = -self.zl_dofs.iter().map(|&i| resid(i)).sum::<f64>();
        let q_r: f64 = self.zr_dofs.iter().map(|&i| resid(i)).sum::<f64>();
        (q_l, q_r)
    }

    /// Steady-state flux integrals (no mass term).
    pub fn steady_fluxes(&self, state: &[f64], source: &dyn Fn([f64; 2]) -> f64) -> (f64, f64) {
        let f = self.source_load(source);
        let av = self.stiff.matvec(state);
        let resid = |i: usize| av[i] - f[i];
        let q_l: f64 = -self.zl_dofs.iter().map(|&i| resid(i)).sum::<f64>();
        let q_r: f64 = self.zr_dofs.iter().map(|&i| resid(i)).sum::<f64>();
        (q_l, q_r)
    }

    /// Cell average `(1/|Z|) int_Z v dy`.
    pub fn average(&self, state: &[f64]) -> f64 {
        let ones = self.constant_state(1.0);
        let m1 = self.mass.matvec(&ones);
        let total: f64 = state.iter().zip(&m1).map(|(v, m)| v * m).sum();
        total / self.measure
    }

    /// Expands a dof state to nodal values on the cell mesh.
    pub fn nodal(&self, state: &[f64]) -> Vec<f64> {
        self.dofs.expand(state)
    }
}

/// Advances one cell problem over a full time grid with prescribed trace
/// histories; returns the transient field (nodal values).
pub fn solve_cell_problem_s1(
    cell: &CellProblem,
    traces_l: &[f64],
    traces_r: &[f64],
    source: &dyn Fn(f64, [f64; 2]) -> f64,
    initial: &[f64],
    dt: f64,
) -> Result<TransientField> {
    assert_eq!(traces_l.len(), traces_r.len());
    let mut field = TransientField::new();
    field.push(0.0, cell.nodal(initial));
    let mut state = initial.to_vec();
    for (k, (&tl, &tr)) in traces_l.iter().zip(traces_r).enumerate() {
        let t = (k + 1) as f64 * dt;
        state = cell.step(&state, tl, tr, &|y| source(t, y))?;
        field.push(t, cell.nodal(&state));
    }
    Ok(field)
}

/// Interface diagnostics of one time step.
#[derive(Debug, Clone, Copy)]
pub struct FluxBalance {
    pub step: usize,
    pub time: f64,
    pub sweeps: usize,
    /// Final trace update of the Gauss-Seidel sweep (matching residual).
    pub matching_residual: f64,
    /// Max deviation between imposed cell fluxes and the fluxes recovered
    /// from the bulk solves (the flux transmission residual).
    pub flux_residual: f64,
}

/// S1 solution: bulk fields plus one cell field per interface point.
pub struct MacroS1Solution {
    pub bulk_l_mesh: TaggedMesh,
    pub bulk_r_mesh: TaggedMesh,
    pub bulk_l: TransientField,
    pub bulk_r: TransientField,
    pub sigma_points: Vec<f64>,
    pub cell_mesh: TaggedMesh,
    /// One transient nodal field per interface point.
    pub cell_fields: Vec<TransientField>,
    pub cell_measure: f64,
    pub balance: Vec<FluxBalance>,
    pub lift: BoundaryLift,
    pub dt: f64,
}

impl MacroS1Solution {
    /// Cell-averaged layer trace `(1/|Z|) int_Z v_m dy` per interface point
    /// at a time level.
    pub fn layer_averages(&self, cell: &CellProblem, level: usize) -> Vec<f64> {
        self.cell_fields
            .iter()
            .map(|f| cell.average(&cell.dofs.restrict(&f.values[level])))
            .collect()
    }
}

/// Solves the S1 limit model.
pub fn solve_macro_s1(config: &ProblemConfig) -> Result<MacroS1Solution> {
    match config.classify()? {
        ScalingChoice::S1 => {}
        other => {
            return Err(Error::Config(format!(
                "S1 solver requires an S1-classified scaling, got {}",
                other.name()
            )))
        }
    }
    let geom = &config.geometry;
    let half = geom.ell / 2.0;
    let h = geom.h;
    let lift = config.lift();

    let bulk_l = BulkSolver::new(
        config,
        -half,
        0.0,
        BoundaryTag::GammaL,
        BoundaryTag::Sigma,
        RegionTag::Left,
        true,
    )?;
    let bulk_r = BulkSolver::new(
        config,
        0.0,
        half,
        BoundaryTag::GammaR,
        BoundaryTag::Sigma,
        RegionTag::Right,
        false,
    )?;
    let cell = CellProblem::new(
        &geom.cell,
        config.mesh.cell_edge,
        &config.coefficients.d_m,
        config.time.dt,
        config.solver.tol_lin,
    )?;

    let n_sigma = config.mesh.n_sigma.max(2);
    let sigma_points: Vec<f64> = (0..n_sigma)
        .map(|j| (j as f64 + 0.5) * h / n_sigma as f64)
        .collect();

    // two-scale limit sources: defaults restrict the layer data onto the
    // interface
    let f_m = config.sources.f_m.clone();
    let lift_c = lift.clone();
    let f_a0_override = config.sources.f_a0.clone();
    let f_a0 = move |t: f64, xbar: f64, y: [f64; 2]| -> f64 {
        match &f_a0_override {
            Some(f) => f(t, xbar, y),
            None => f_m(t, [0.0, xbar]) + lift_c.eval_dt(t, [0.0, xbar]),
        }
    };
    let h_m = config.sources.h_m.clone();

    // initial states
    let mut vl = bulk_l.initial();
    let mut vr = bulk_r.initial();
    let mut cells: Vec<Vec<f64>> = sigma_points
        .iter()
        .map(|&xbar| cell.constant_state(h_m(0.0, [0.0, xbar]) + lift.eval(0.0, [0.0, xbar])))
        .collect();

    let mut sol = MacroS1Solution {
        bulk_l_mesh: bulk_l.mesh.clone(),
        bulk_r_mesh: bulk_r.mesh.clone(),
        bulk_l: TransientField::new(),
        bulk_r: TransientField::new(),
        sigma_points: sigma_points.clone(),
        cell_mesh: cell.mesh.clone(),
        cell_fields: vec![TransientField::new(); n_sigma],
        cell_measure: cell.measure,
        balance: Vec::new(),
        lift: lift.clone(),
        dt: config.time.dt,
    };
    sol.bulk_l.push(0.0, vl.clone());
    sol.bulk_r.push(0.0, vr.clone());
    for (j, state) in cells.iter().enumerate() {
        sol.cell_fields[j].push(0.0, cell.nodal(state));
    }

    let dt = config.time.dt;
    let relax = config.solver.relax.clamp(0.05, 1.0);
    let tol_iface = config.solver.tol_iface;
    let max_sweeps = config.solver.max_sweeps.max(1);

    for step in 1..=config.time.steps() {
        let t = step as f64 * dt;
        let base_l = bulk_l.base_load(t)?;
        let base_r = bulk_r.base_load(t)?;

        let mut traces_l = bulk_l.trace(&vl, &sigma_points);
        let mut traces_r = bulk_r.trace(&vr, &sigma_points);
        let mut new_vl = vl.clone();
        let mut new_vr = vr.clone();
        let mut new_cells = cells.clone();
        let mut residual = f64::INFINITY;
        let mut sweeps_used = max_sweeps;
        let mut q_l_pts = vec![0.0; n_sigma];
        let mut q_r_pts = vec![0.0; n_sigma];

        for sweep in 1..=max_sweeps {
            // advance every cell problem from the previous time level with
            // the current trace iterate
            let results: Vec<(Vec<f64>, f64, f64)> = (0..n_sigma)
                .into_par_iter()
                .map(|j| {
                    let src = |y: [f64; 2]| f_a0(t, sigma_points[j], y);
                    let next = cell.step(&cells[j], traces_l[j], traces_r[j], &src)?;
                    let (q_l, q_r) = cell.fluxes(&cells[j], &next, &src);
                    Ok((next, q_l, q_r))
                })
                .collect::<Result<Vec<_>>>()?;
            for (j, (state, q_l, q_r)) in results.into_iter().enumerate() {
                new_cells[j] = state;
                q_l_pts[j] = q_l;
                q_r_pts[j] = q_r;
            }

            // advance the bulks with the cell fluxes as interface data
            let q_l_fn = |xbar: f64| interp_sorted(&sigma_points, &q_l_pts, xbar);
            let q_r_fn = |xbar: f64| interp_sorted(&sigma_points, &q_r_pts, xbar);
            new_vl = bulk_l.step(&vl, t, &base_l, &q_l_fn)?;
            new_vr = bulk_r.step(&vr, t, &base_r, &q_r_fn)?;

            let tl_new = bulk_l.trace(&new_vl, &sigma_points);
            let tr_new = bulk_r.trace(&new_vr, &sigma_points);
            residual = tl_new
                .iter()
                .zip(&traces_l)
                .chain(tr_new.iter().zip(&traces_r))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            for j in 0..n_sigma {
                traces_l[j] += relax * (tl_new[j] - traces_l[j]);
                traces_r[j] += relax * (tr_new[j] - traces_r[j]);
            }
            if residual < tol_iface {
                sweeps_used = sweep;
                break;
            }
            if sweep == max_sweeps {
                return Err(Error::InterfaceIterationDiverged {
                    residual,
                    sweeps: max_sweeps,
                });
            }
        }

        // flux transmission residual: cell fluxes vs fluxes carried by the
        // converged bulk solves, in the same weak measurement
        let q_l_fn = |xbar: f64| interp_sorted(&sigma_points, &q_l_pts, xbar);
        let q_r_fn = |xbar: f64| interp_sorted(&sigma_points, &q_r_pts, xbar);
        let flux_residual = bulk_l
            .iface_flux_residual(&vl, &new_vl, t, &base_l, &q_l_fn)?
            .max(bulk_r.iface_flux_residual(&vr, &new_vr, t, &base_r, &q_r_fn)?);

        vl = new_vl;
        vr = new_vr;
        cells = new_cells;
        sol.bulk_l.push(t, vl.clone());
        sol.bulk_r.push(t, vr.clone());
        for (j, state) in cells.iter().enumerate() {
            sol.cell_fields[j].push(t, cell.nodal(state));
        }
        sol.balance.push(FluxBalance {
            step,
            time: t,
            sweeps: sweeps_used,
            matching_residual: residual,
            flux_residual,
        });
    }

    Ok(sol)
}

/// Flux-balance CSV (`step,time,sweeps,matching_residual,flux_residual`).
pub fn flux_balance_csv(balance: &[FluxBalance]) -> String {
    let mut out = String::from("step,time,sweeps,matching_residual,flux_residual\n");
    for b in balance {
        out.push_str(&format!(
            "{},{:.12e},{},{:.3e},{:.3e}\n",
            b.step, b.time, b.sweeps, b.matching_residual, b.flux_residual
        ));
    }
    out
}
