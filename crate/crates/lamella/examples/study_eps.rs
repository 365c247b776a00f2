//! eps-convergence study: solves the micro problem for a shrinking sequence
//! of scales and compares bulk fields against the S1 limit model. The bulk
//! L2 errors decrease with eps; the scaled energies stay bounded.
//!
//! ```bash
//! cargo run --release --example study_eps
//! ```

use lamella::config::ProblemConfig;
use lamella::problem::ScalingChoice;
use lamella::study::study_eps;
use std::fs;

const CONFIG: &str = r#"
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
d_r = [0.5, 0.5]
d_m = [1.0, 1.0]
b_l = [0.0, 0.0]
b_r = [0.0, 0.0]
b_m = [0.0, 0.0]

[sources]
u_left = "constant:1.0"
u_right = "zero"

[drift]
coeffs = [0.0, 1.0, -1.0]
delta = 0.1

[time]
t_end = 0.2
dt = 0.02

[mesh]
edge = 0.03
cell_edge = 0.05
n_sigma = 16
"#;

fn main() -> lamella::Result<()> {
    let out = std::path::Path::new("target/example_out/study_eps");
    fs::create_dir_all(out)?;

    let cfg = ProblemConfig::from_toml_str(CONFIG)?;
    let report = study_eps(&cfg, &[0.25, 0.125, 0.0625], ScalingChoice::S1)?;

    println!("{:>8} {:>12} {:>12} {:>14} {:>10}", "eps", "err_L", "err_R", "err_layer_avg", "e1");
    for m in &report.members {
        println!(
            "{:>8} {:>12.4e} {:>12.4e} {:>14.4e} {:>10.4}",
            m.value, m.err_l, m.err_r, m.err_layer_avg, m.energy.e1
        );
    }
    if let (Some(rl), Some(rr)) = (report.rate_l, report.rate_r) {
        println!("fitted rates: err_L ~ eps^{rl:.2}, err_R ~ eps^{rr:.2}");
    }

    fs::write(out.join("report.csv"), report.report_csv())?;
    fs::write(out.join("timing.csv"), report.timing_csv())?;
    println!("report written to {}", out.display());
    Ok(())
}
