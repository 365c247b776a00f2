//! Classifies scaling quadruples into the four limit regimes, reports the
//! lambda switches of the fixed-width models, and runs the admissibility
//! rules on a few configurations.
//!
//! ```bash
//! cargo run --release --example classify_scalings
//! ```

use lamella::problem::{
    classify_scaling, lambda_switches, validate_assumptions, CoefficientSet, ScalingExponents,
};

fn main() {
    let table = [
        (-1.0, 1.0, 1.0, 0.5),
        (-1.0, 1.0, 2.0, 1.0),
        (-1.0, 0.5, 0.5, 0.0),
        (-1.0, 0.25, 0.75, 0.5),
        (0.0, 2.0, 1.0, 1.0),
        (0.0, 2.0, 2.0, 1.0),
        (0.0, 3.0, 1.0, 1.0),
        (1.0, 2.5, 2.0, 2.0),
        (0.0, 0.0, 0.0, 0.0),
    ];
    println!("{:>6} {:>6} {:>6} {:>6}  {:<12} {:>8} {:>8}", "alpha", "beta", "gamma", "xi", "choice", "lambda1", "lambda2");
    for (a, b, g, x) in table {
        let s = ScalingExponents::new(a, b, g, x);
        let choice = classify_scaling(&s).expect("unambiguous");
        let (l1, l2) = lambda_switches(&s, choice)
            .map(|(l1, l2)| (format!("{l1}"), format!("{l2}")))
            .unwrap_or_else(|| ("-".into(), "-".into()));
        println!(
            "{a:>6} {b:>6} {g:>6} {x:>6}  {:<12} {l1:>8} {l2:>8}",
            choice.name()
        );
    }

    println!("\nadmissibility of (0, 2, 1, 1), an S3 quadruple with a drift-order conflict:");
    let coeffs = CoefficientSet::isotropic(1.0);
    for v in validate_assumptions(&coeffs, &ScalingExponents::new(0.0, 2.0, 1.0, 1.0)) {
        println!("  {v}");
    }
}
