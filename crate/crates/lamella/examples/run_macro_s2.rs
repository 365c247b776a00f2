//! Solves the S2 limit model, where the layer collapses to an interface
//! carrying an ODE with capacity |Z|. Also checks the decoupled interface
//! law and the steady two-slab transmission value.
//!
//! ```bash
//! cargo run --release --example run_macro_s2
//! ```

use lamella::config::ProblemConfig;
use lamella::problem::BoundaryTrace;
use lamella::upscaled::{solve_macro_s2, solve_macro_s2_steady, InterfaceOde};

const CONFIG: &str = r#"
[geometry]
ell = 2.0
height = 1.0
eps = 0.125
width = "vanishing"

[geometry.cell]
a1 = -0.5
b1 = 0.5
a2 = 0.25
b2 = 0.75

[scalings]
alpha = -1.0
beta = 0.5
gamma = 0.5
xi = 0.0

[coefficients]
d_l = [2.0, 2.0]
d_r = [1.0, 1.0]
d_m = [1.0, 1.0]
b_l = [0.0, 0.0]
b_r = [0.0, 0.0]
b_m = [0.0, 0.0]

[sources]
u_left = "constant:1.0"
u_right = "zero"
f_m = "constant:0.5"

[drift]
coeffs = [0.0, 1.0, -1.0]
delta = 0.1

[time]
t_end = 0.2
dt = 0.02

[mesh]
edge = 0.04
"#;

fn main() -> lamella::Result<()> {
    // decoupled interface law: with zero flux jump and lift, the value
    // integrates the cell-averaged source exactly
    let ode = InterfaceOde { z_measure: 1.5 };
    let mut v = 0.0;
    for _ in 0..10 {
        v = ode.step(v, 0.0, 1.5 * 0.4, 0.0, 0.1);
    }
    println!("decoupled interface law after t = 1 with c0 = 0.4: v = {v:.10} (exact 0.4)");

    let cfg = ProblemConfig::from_toml_str(CONFIG)?;
    let sol = solve_macro_s2(&cfg)?;
    println!(
        "\ntransient S2: mesh {} vertices, |Z| = {}",
        sol.mesh.vertex_count(),
        sol.z_measure
    );
    let last = sol.field.len() - 1;
    println!("interface values at T (transformed / physical):");
    for (xbar, vv) in sol.interface_values(last).iter().step_by(5) {
        let u = vv - sol.lift.eval(*sol.field.times.last().unwrap(), [0.0, *xbar]);
        println!("  xbar = {xbar:>6.3}: v = {vv:+.5}, u = {u:+.5}");
    }

    // steady two-slab transmission: interface value equals the
    // series-resistance formula for piecewise-constant diffusion
    let mut steady_cfg = cfg.clone();
    steady_cfg.sources.f_m = lamella::problem::zero_fn();
    steady_cfg.sources.u_left = BoundaryTrace::constant(1.0);
    steady_cfg.sources.u_right = BoundaryTrace::constant(0.0);
    let steady = solve_macro_s2_steady(&steady_cfg, 0.0)?;
    let (xbar, v) = steady.interface_values(0)[3];
    let u = v - steady.lift.eval(0.0, [0.0, xbar]);
    let expected = 2.0 / 3.0; // (d_l U_L + d_r U_R) / (d_l + d_r)
    println!("\nsteady interface value: u = {u:.8} (series-resistance formula: {expected:.8})");
    Ok(())
}
