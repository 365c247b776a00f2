//! Manufactured-solution convergence orders of the transformed solver on an
//! un-perforated rectangle: second order in the mesh size (exact time
//! integration for data linear in time), first order in the time step
//! (self-convergence at a fixed mesh).
//!
//! ```bash
//! cargo run --release --example manufactured_order
//! ```

use lamella::config::ProblemConfig;
use lamella::fem::{l2_norm_sq, DofMap};
use lamella::geometry::{build_rectangle_domain, BoundaryTag, RegionTag};
use lamella::mesh::triangulate;
use lamella::micro::solve_micro_on;
use lamella::problem::BoundaryTrace;
use std::f64::consts::PI;
use std::sync::Arc;

const BASE: &str = r#"
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
d_r = [1.0, 1.0]
d_m = [1.0, 1.0]
b_l = [0.0, 0.0]
b_r = [0.0, 0.0]
b_m = [0.0, 0.0]

[drift]
coeffs = [0.0, 1.0, -1.0]
delta = 0.1

[time]
t_end = 0.2
dt = 0.05

[mesh]
edge = 0.1
"#;

// manufactured solution u*(t, x) = a(t) sin(pi x1 / 2) cos(pi x2), which has
// zero Neumann data on the horizontal boundaries
fn exact(a: impl Fn(f64) -> f64 + Copy) -> impl Fn(f64, [f64; 2]) -> f64 + Copy {
    move |t: f64, x: [f64; 2]| a(t) * (PI * x[0] / 2.0).sin() * (PI * x[1]).cos()
}

fn configure(
    cfg: &mut ProblemConfig,
    a: impl Fn(f64) -> f64 + Copy + Send + Sync + 'static,
    da: impl Fn(f64) -> f64 + Copy + Send + Sync + 'static,
) {
    let u = exact(a);
    // f = dt(u*) - div(D grad u*) with D = I: laplacian factor pi^2/4 + pi^2
    let lap = PI * PI / 4.0 + PI * PI;
    cfg.sources.f_l = Arc::new(move |t, x| {
        (PI * x[0] / 2.0).sin() * (PI * x[1]).cos() * (da(t) + a(t) * lap)
    });
    cfg.sources.h_l = Arc::new(move |_, x| u(0.0, x));
    let spatial_l = move |x2: f64| (-PI / 2.0f64).sin() * (PI * x2).cos();
    let spatial_r = move |x2: f64| (PI / 2.0f64).sin() * (PI * x2).cos();
    cfg.sources.u_left = BoundaryTrace::new(
        Arc::new(move |t, x2| a(t) * spatial_l(x2)),
        Arc::new(move |t, x2| da(t) * spatial_l(x2)),
        Arc::new(move |t, x2| -a(t) * PI * (-PI / 2.0f64).sin() * (PI * x2).sin()),
        Arc::new(move |t, x2| -a(t) * PI * PI * spatial_l(x2)),
    );
    cfg.sources.u_right = BoundaryTrace::new(
        Arc::new(move |t, x2| a(t) * spatial_r(x2)),
        Arc::new(move |t, x2| da(t) * spatial_r(x2)),
        Arc::new(move |t, x2| -a(t) * PI * (PI / 2.0f64).sin() * (PI * x2).sin()),
        Arc::new(move |t, x2| -a(t) * PI * PI * spatial_r(x2)),
    );
}

fn run(cfg: &ProblemConfig, edge: f64) -> lamella::Result<(lamella::micro::MicroSolution, f64)> {
    let dom = build_rectangle_domain(
        -1.0,
        1.0,
        1.0,
        BoundaryTag::GammaL,
        BoundaryTag::GammaR,
        RegionTag::Left,
    );
    let mesh = triangulate(&dom, edge)?;
    let sol = solve_micro_on(cfg, mesh)?;
    Ok((sol, edge))
}

fn error_at_final(sol: &lamella::micro::MicroSolution, u: impl Fn(f64, [f64; 2]) -> f64) -> f64 {
    let t = sol.final_time();
    let last = sol.field.len() - 1;
    let uh = sol.physical(last);
    let diff: Vec<f64> = sol
        .mesh
        .vertices
        .iter()
        .zip(&uh)
        .map(|(&x, v)| v - u(t, x))
        .collect();
    let dofs = DofMap::identity(sol.mesh.vertex_count());
    l2_norm_sq(&sol.mesh, &dofs, &diff, None).sqrt()
}

fn main() -> lamella::Result<()> {
    // spatial sweep with data linear in time: implicit Euler is exact there
    let mut cfg = ProblemConfig::from_toml_str(BASE)?;
    configure(&mut cfg, |t| 1.0 + t, |_| 1.0);
    println!("spatial sweep (u* linear in t):");
    println!("{:>8} {:>12} {:>8}", "edge", "L2 error", "order");
    let mut prev: Option<(f64, f64)> = None;
    for edge in [0.2, 0.1, 0.05, 0.025] {
        let (sol, _) = run(&cfg, edge)?;
        let err = error_at_final(&sol, exact(|t| 1.0 + t));
        let order = prev
            .map(|(pe, pr)| (pr / err).log2() / (pe / edge).log2())
            .map(|o| format!("{o:.2}"))
            .unwrap_or_default();
        println!("{edge:>8} {err:>12.4e} {order:>8}");
        prev = Some((edge, err));
    }

    // temporal sweep by self-convergence at a fixed fine mesh
    let mut cfg = ProblemConfig::from_toml_str(BASE)?;
    configure(&mut cfg, |t| (-t).exp(), |t| -(-t).exp());
    println!("\ntemporal sweep (self-convergence at edge 0.05):");
    println!("{:>8} {:>14} {:>8}", "dt", "|u_dt-u_dt/2|", "order");
    let mut sols = Vec::new();
    for dt in [0.05, 0.025, 0.0125, 0.00625] {
        let mut c = cfg.clone();
        c.time.dt = dt;
        let (sol, _) = run(&c, 0.05)?;
        sols.push((dt, sol));
    }
    let mut prev_gap: Option<f64> = None;
    for pair in sols.windows(2) {
        let (dt, fine) = (&pair[0].0, &pair[1].1);
        let coarse = &pair[0].1;
        let diff: Vec<f64> = coarse
            .field
            .last()
            .iter()
            .zip(fine.field.last())
            .map(|(a, b)| a - b)
            .collect();
        let dofs = DofMap::identity(coarse.mesh.vertex_count());
        let gap = l2_norm_sq(&coarse.mesh, &dofs, &diff, None).sqrt();
        let order = prev_gap
            .map(|p| (p / gap).log2())
            .map(|o| format!("{o:.2}"))
            .unwrap_or_default();
        println!("{dt:>8} {gap:>14.4e} {order:>8}");
        prev_gap = Some(gap);
    }
    Ok(())
}
