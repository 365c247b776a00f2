//! Samples the truncated polynomial drift P, the mollifier, and the
//! regularized drift P_delta for several widths, and tabulates the L2
//! distance between P_delta and P as delta shrinks.
//!
//! ```bash
//! cargo run --release --example drift_profiles
//! ```

use lamella::drift::{p_delta_l2_distance, DriftPolynomial, Mollifier};
use std::fs;
use std::io::Write;

fn main() -> lamella::Result<()> {
    let out = std::path::Path::new("target/example_out/drift_profiles");
    fs::create_dir_all(out)?;

    let poly = DriftPolynomial::logistic(); // P(r) = r(1 - r) on [0,1]
    let deltas = [0.2, 0.1, 0.05];

    let mut csv = fs::File::create(out.join("profiles.csv"))?;
    writeln!(csv, "r,P,P_d020,P_d010,P_d005")?;
    let mollifiers: Vec<Mollifier> = deltas.iter().map(|&d| Mollifier::new(d, 64)).collect();
    for i in 0..=600 {
        let r = -0.5 + 2.0 * i as f64 / 600.0;
        let mut row = format!("{:.6},{:.8e}", r, poly.eval(r));
        for m in &mollifiers {
            row.push_str(&format!(",{:.8e}", lamella::drift::eval_p_delta(&poly, m, r)));
        }
        writeln!(csv, "{row}")?;
    }

    println!("delta     ||P_delta - P||_L2(-1,2)");
    let mut prev = f64::INFINITY;
    for (d, m) in deltas.iter().zip(&mollifiers) {
        let dist = p_delta_l2_distance(&poly, m, (-1.0, 2.0), 20_000)?;
        println!("{d:<9} {dist:.6e}  (decreasing: {})", dist < prev);
        prev = dist;
    }

    let m = Mollifier::new(0.1, 64);
    println!(
        "mollifier: C = {:.12}, rho(0) = {:.12}, sup rho_delta = {:.6}",
        m.c,
        m.rho(0.0),
        m.sup()
    );
    println!("samples written to {}", out.display());
    Ok(())
}
