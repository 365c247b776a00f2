//! Solves single cell problems on the reference cell: the steady profile
//! between prescribed edge traces, the edge flux integrals, and a transient
//! run with a volume source.
//!
//! ```bash
//! cargo run --release --example cell_problem
//! ```

use lamella::geometry::StandardCell;
use lamella::problem::{CellDiag, DiagTensor};
use lamella::upscaled::{solve_cell_problem_s1, CellProblem};

fn main() -> lamella::Result<()> {
    let cell = StandardCell::centered();
    let d_m = CellDiag::Constant(DiagTensor::identity());
    let dt = 0.05;
    let problem = CellProblem::new(&cell, 0.05, &d_m, dt, 1e-10)?;
    println!(
        "cell mesh: {} vertices, |Z| = {:.6}",
        problem.mesh.vertex_count(),
        problem.measure
    );

    // steady state between traces 0 and 1: the obstacle bends the profile
    let steady = problem.steady(0.0, 1.0, &|_| 0.0)?;
    let (q_l, q_r) = problem.steady_fluxes(&steady, &|_| 0.0);
    println!("steady traces (0, 1): edge fluxes q_l = {q_l:.6}, q_r = {q_r:.6} (equal in steady state)");
    println!("cell average = {:.6}", problem.average(&steady));

    // transient run driven by a unit source, zero traces
    let steps = 20;
    let traces = vec![0.0; steps];
    let initial = problem.constant_state(0.0);
    let field = solve_cell_problem_s1(&problem, &traces, &traces, &|_, _| 1.0, &initial, dt)?;
    println!("\ntransient with unit source, zero traces:");
    for k in [0, 5, 10, 20] {
        let nodal = &field.values[k];
        let max = nodal.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("  t = {:>5.2}: max v = {max:.6}", field.times[k]);
    }
    Ok(())
}
