//! delta-convergence study: distances between the regularized and the
//! non-regularized drift solutions as the mollifier width shrinks, at both
//! the micro level (fixed eps) and the limit-model level, plus the triangle
//! audit linking the four parameter-dependent problems.
//!
//! ```bash
//! cargo run --release --example study_delta
//! ```

use lamella::config::ProblemConfig;
use lamella::study::{study_delta, StudyLevel};
use std::fs;

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
beta = 1.0
gamma = 1.0
xi = 0.5

[coefficients]
d_l = [1.0, 1.0]
d_r = [0.5, 0.5]
d_m = [1.0, 1.0]
b_l = [0.6, 0.2]
b_r = [0.6, 0.2]
b_m = [0.4, 0.3]

[sources]
u_left = "constant:0.9"
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
    let out = std::path::Path::new("target/example_out/study_delta");
    fs::create_dir_all(out)?;
    let cfg = ProblemConfig::from_toml_str(CONFIG)?;
    let deltas = [0.2, 0.1, 0.05, 0.0];

    for (level, name) in [(StudyLevel::Micro, "micro"), (StudyLevel::Macro, "macro (S1)")] {
        let report = study_delta(&cfg, &deltas, level)?;
        println!("{name} level:");
        println!("{:>8} {:>12} {:>12} {:>14}", "delta", "err_L", "err_R", "err_layer");
        for m in &report.members {
            println!(
                "{:>8} {:>12.4e} {:>12.4e} {:>14.4e}",
                m.value, m.err_l, m.err_r, m.err_layer_avg
            );
        }
        let file = if name.starts_with("micro") { "micro.csv" } else { "macro.csv" };
        fs::write(out.join(file), report.report_csv())?;
        println!();
    }
    println!("reports written to {}", out.display());
    Ok(())
}
