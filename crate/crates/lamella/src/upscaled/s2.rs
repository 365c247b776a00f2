//! S2 limit model: the layer collapses to an interface carrying an ODE with
//! capacity `|Z|`.
//!
//! The interface value is continuous with both bulk traces, so the model is
//! discretized monolithically: one mesh of the full strip with the interface
//! as an internal edge line, the bulk forms assembled per side, and the
//! interface rows augmented by the `|Z|`-weighted trace mass (the discrete
//! `-|Z| dt(v_m)` of the jump relation) and the cell-integrated source
//! `int_Z f_a0 dy`. The flux-jump relation is then encoded variationally
//! and the continuity rows are shared degrees of freedom.

use super::solve_steady_system;
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_load, assemble_drift_load, assemble_edge_mass, assemble_flux_load,
    assemble_mass, assemble_stiffness, assemble_volume_load, linear_solve, AssembledSystem, Csr,
    DofMap, RegionWeights, TransientField,
};
use crate::geometry::{build_two_slab_domain, BoundaryTag, RegionTag};
use crate::mesh::{triangulate, TaggedMesh};
use crate::problem::{BoundaryLift, ScalingChoice};

/// The decoupled interface law: `|Z| dv/dt = J + int_Z f_a0 dy + lift`,
/// where `J` is the bulk flux jump through the interface. Explicit in the
/// data, exact for data linear in time.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceOde {
    pub z_measure: f64,
}

impl InterfaceOde {
    pub fn step(&self, v: f64, jump: f64, f_a0_integral: f64, lift: f64, dt: f64) -> f64 {
        v + dt * (jump + f_a0_integral + lift) / self.z_measure
    }
}

/// S2 solution on the monolithic two-slab mesh.
pub struct MacroS2Solution {
    pub mesh: TaggedMesh,
    pub field: TransientField,
    /// Interface nodes sorted by height.
    pub sigma_nodes: Vec<usize>,
    pub z_measure: f64,
    pub lift: BoundaryLift,
    pub dt: f64,
}

impl MacroS2Solution {
    /// `(xbar, v)` pairs along the interface at a time level.
    pub fn interface_values(&self, level: usize) -> Vec<(f64, f64)> {
        self.sigma_nodes
            .iter()
            .map(|&i| (self.mesh.vertices[i][1], self.field.values[level][i]))
            .collect()
    }

    /// Interface average of the transformed field at a time level.
    pub fn interface_average(&self, level: usize) -> f64 {
        let vals = self.interface_values(level);
        let mut acc = 0.0;
        let mut len = 0.0;
        for w in vals.windows(2) {
            let d = w[1].0 - w[0].0;
            acc += 0.5 * (w[0].1 + w[1].1) * d;
            len += d;
        }
        acc / len
    }
}

struct S2System {
    mesh: TaggedMesh,
    dofs: DofMap,
    system: AssembledSystem,
    mass_csr: Csr,
    sigma_nodes: Vec<usize>,
    z_measure: f64,
}

fn build_s2_system(config: &ProblemConfig) -> Result<S2System> {
    let geom = &config.geometry;
    let dom = build_two_slab_domain(geom.ell, geom.h);
    let mesh = triangulate(&dom, config.mesh.edge)?;
    let n = mesh.vertex_count();
    let dofs = DofMap::identity(n);
    let mut dirichlet = vec![false; n];
    for id in mesh.tagged_vertices(BoundaryTag::GammaL) {
        dirichlet[id] = true;
    }
    for id in mesh.tagged_vertices(BoundaryTag::GammaR) {
        dirichlet[id] = true;
    }
    let z_measure = geom.cell.measure();
    let coeffs = &config.coefficients;
    let mut mass = assemble_mass(&mesh, &dofs, RegionWeights::one());
    mass.add_scaled(
        &assemble_edge_mass(&mesh, &dofs, BoundaryTag::Sigma, z_measure)?,
        1.0,
    );
    let stiffness = assemble_stiffness(
        &mesh,
        &dofs,
        &|region, _| match region {
            RegionTag::Right => coeffs.d_r,
            _ => coeffs.d_l,
        },
        RegionWeights::one(),
    )?;
    let system = AssembledSystem::new(mass, stiffness, dirichlet);
    let mass_csr = system.mass_csr();
    let mut sigma_nodes = mesh.tagged_vertices(BoundaryTag::Sigma);
    sigma_nodes.sort_by(|a, b| {
        mesh.vertices[*a][1]
            .partial_cmp(&mesh.vertices[*b][1])
            .unwrap()
    });
    Ok(S2System {
        mesh,
        dofs,
        system,
        mass_csr,
        sigma_nodes,
        z_measure,
    })
}

fn s2_loads(
    config: &ProblemConfig,
    sys: &S2System,
    lift: &BoundaryLift,
    t: f64,
) -> Result<Vec<f64>> {
    let sources = &config.sources;
    let coeffs = &config.coefficients;
    let z = sys.z_measure;
    let volume = assemble_volume_load(
        &sys.mesh,
        &sys.dofs,
        &|region, x| {
            let f = match region {
                RegionTag::Right => (sources.f_r)(t, x),
                _ => (sources.f_l)(t, x),
            };
            f + lift.eval_dt(t, x)
        },
        RegionWeights::one(),
    );
    let lift_flux = assemble_flux_load(
        &sys.mesh,
        &sys.dofs,
        &|region, x| {
            let d = match region {
                RegionTag::Right => coeffs.d_r,
                _ => coeffs.d_l,
            };
            d.apply(lift.grad(t, x))
        },
        RegionWeights::one(),
    );
    let gamma_h = assemble_boundary_load(
        &sys.mesh,
        &sys.dofs,
        BoundaryTag::GammaH,
        &|x| {
            if x[0] < 0.0 {
                (sources.g_l)(t, x)
            } else {
                (sources.g_r)(t, x)
            }
        },
        1.0,
    )?;
    // cell-integrated interface source: int_Z f_a0(t, xbar, y) dy; the
    // default restricts the layer source onto the interface, where the
    // integral is |Z| times the pointwise value
    let f_a0_override = sources.f_a0.clone();
    let f_m = sources.f_m.clone();
    let cell_rule: Vec<([f64; 2], f64)> = cell_quadrature(config);
    let sigma_src = assemble_boundary_load(
        &sys.mesh,
        &sys.dofs,
        BoundaryTag::Sigma,
        &|x| match &f_a0_override {
            Some(f) => cell_rule.iter().map(|&(y, w)| w * f(t, x[1], y)).sum(),
            None => z * (f_m(t, [0.0, x[1]]) + lift.eval_dt(t, [0.0, x[1]])),
        },
        1.0,
    )?;
    Ok((0..sys.dofs.ndof)
        .map(|i| volume[i] + lift_flux[i] - gamma_h[i] + sigma_src[i])
        .collect())
}

/// Midpoint quadrature over the fluid part of the reference cell, used to
/// integrate override sources over `Z`.
fn cell_quadrature(config: &ProblemConfig) -> Vec<([f64; 2], f64)> {
    let cell = config.geometry.cell;
    let hole = cell.obstacle();
    let n = 24;
    let mut rule = Vec::new();
    for i in 0..2 * n {
        for j in 0..n {
            let y = [
                -1.0 + (i as f64 + 0.5) / n as f64,
                (j as f64 + 0.5) / n as f64,
            ];
            if !hole.contains_strict(y) && !(hole.contains(y)) {
                rule.push((y, 1.0 / (n * n) as f64));
            }
        }
    }
    rule
}

fn s2_drift_load(
    config: &ProblemConfig,
    sys: &S2System,
    lift: &BoundaryLift,
    t: f64,
    iterate: &[f64],
) -> Vec<f64> {
    let coeffs = &config.coefficients;
    assemble_drift_load(
        &sys.mesh,
        &sys.dofs,
        iterate,
        &|x| lift.eval(t, x),
        &config.drift,
        &|region, _| match region {
            RegionTag::Right => coeffs.b_r,
            _ => coeffs.b_l,
        },
        RegionWeights::one(),
    )
}

fn s2_initial(config: &ProblemConfig, sys: &S2System, lift: &BoundaryLift) -> Vec<f64> {
    let sources = &config.sources;
    let mut v: Vec<f64> = sys
        .mesh
        .vertices
        .iter()
        .map(|&x| {
            let f = if x[0] < 0.0 { &sources.h_l } else { &sources.h_r };
            f(0.0, x) + lift.eval(0.0, x)
        })
        .collect();
    // interface nodes carry the cell average of the layer initial state;
    // for interface-restricted data this is h_m + u_b at the interface
    for &i in &sys.sigma_nodes {
        let x = sys.mesh.vertices[i];
        v[i] = (sources.h_m)(0.0, [0.0, x[1]]) + lift.eval(0.0, [0.0, x[1]]);
    }
    sys.system.constrain(&mut v);
    v
}

fn guard_s2(config: &ProblemConfig) -> Result<()> {
    match config.classify()? {
        ScalingChoice::S2 => Ok(()),
        other => Err(Error::Config(format!(
            "S2 solver requires an S2-classified scaling, got {}",
            other.name()
        ))),
    }
}

/// Solves the S2 limit model (transient).
pub fn solve_macro_s2(config: &ProblemConfig) -> Result<MacroS2Solution> {
    guard_s2(config)?;
    solve_s2_inner(config)
}

/// The S2 march without the classification guard; the delta-sweep studies
/// reuse it as the macro limit of drift-dominant configs.
pub(crate) fn solve_s2_inner(config: &ProblemConfig) -> Result<MacroS2Solution> {
    let sys = build_s2_system(config)?;
    let lift = config.lift();
    let dt = config.time.dt;
    let sysmat = sys.system.system_matrix(dt);
    let mut v = s2_initial(config, &sys, &lift);
    let mut field = TransientField::new();
    field.push(0.0, v.clone());
    for step in 1..=config.time.steps() {
        let t = step as f64 * dt;
        let load = s2_loads(config, &sys, &lift, t)?;
        let nvec = s2_drift_load(config, &sys, &lift, t, &v);
        let mprev = sys.mass_csr.matvec(&v);
        let mut rhs: Vec<f64> = (0..sys.dofs.ndof)
            .map(|i| mprev[i] / dt + load[i] + nvec[i])
            .collect();
        sys.system.constrain(&mut rhs);
        v = linear_solve(&sysmat, &rhs, config.solver.tol_lin)?;
        field.push(t, v.clone());
    }
    Ok(MacroS2Solution {
        mesh: sys.mesh,
        field,
        sigma_nodes: sys.sigma_nodes,
        z_measure: sys.z_measure,
        lift,
        dt,
    })
}

/// Steady S2 solve with time-frozen data (evaluated at `t_eval`). With a
/// nonzero drift the steady state is found by Picard iteration.
pub fn solve_macro_s2_steady(config: &ProblemConfig, t_eval: f64) -> Result<MacroS2Solution> {
    guard_s2(config)?;
    let sys = build_s2_system(config)?;
    let lift = config.lift();
    let base = s2_loads(config, &sys, &lift, t_eval)?;
    let v = solve_steady_system(
        &sys.system,
        &|iterate| {
            let nvec = s2_drift_load(config, &sys, &lift, t_eval, iterate);
            Ok((0..sys.dofs.ndof).map(|i| base[i] + nvec[i]).collect())
        },
        config.solver.tol_lin,
        config.solver.max_picard,
        config.solver.tol_picard,
    )?;
    let mut field = TransientField::new();
    field.push(t_eval, v);
    Ok(MacroS2Solution {
        mesh: sys.mesh,
        field,
        sigma_nodes: sys.sigma_nodes,
        z_measure: sys.z_measure,
        lift,
        dt: config.time.dt,
    })
}
