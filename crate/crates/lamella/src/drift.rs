//! Truncated polynomial drift and its mollified regularization.
//!
//! The drift nonlinearity is a polynomial `P(r) = a0 + a1 r + ... + am r^m`
//! truncated to zero outside `[0,1]`, which makes it bounded but possibly
//! discontinuous at the endpoints. The regularized drift is the convolution
//! `P_delta = rho_delta * P` with the bump mollifier
//! `rho(x) = C exp(1/(x^2-1))` on `|x| < 1`, scaled as
//! `rho_delta(x) = rho(x/delta)/delta` so that the unit mass is preserved.
//! Setting `delta = 0` disables the convolution and evaluates `P` directly,
//! one-sided from inside `[0,1]` at the discontinuities.

use crate::error::Result;

/// Gauss-Legendre nodes and weights on `(-1, 1)`, computed by Newton
/// iteration on the Legendre recurrence. Open rule: no endpoint nodes, which
/// suits the mollifier's flat endpoints.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rule
}

/// Polynomial drift coefficients `a0..am`; evaluation is truncated to zero
/// outside `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPolynomial {
    pub coeffs: Vec<f64>,
}

impl DriftPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "drift polynomial needs coefficients");
        DriftPolynomial { coeffs }
    }

    /// The logistic-type drift `P(r) = r(1-r)` of exclusion dynamics.
    pub fn logistic() -> Self {
        DriftPolynomial::new(vec![0.0, 1.0, -1.0])
    }

    /// `P(r)` for `r` in `[0,1]`, zero otherwise.
    pub fn eval(&self, r: f64) -> f64 {
        if !(0.0..=1.0).contains(&r) {
            return 0.0;
        }
        // Horner
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    /// `sup |P|` over `[0,1]`, by dense sampling.
    pub fn sup_abs(&self) -> f64 {
        (0..=4096)
            .map(|i| self.eval(i as f64 / 4096.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Free-function form of the truncated polynomial evaluation.
pub fn eval_p(poly: &DriftPolynomial, r: f64) -> f64 {
    poly.eval(r)
}

/// Normalized bump mollifier with width `delta`.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub delta: f64,
    /// Normalization making the unscaled bump integrate to one.
    pub c: f64,
    /// Quadrature node count on the support.
    pub nodes: usize,
    rule: Vec<(f64, f64)>,
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 / (x * x - 1.0)).exp()
    } else {
        0.0
    }
}

impl Mollifier {
    pub fn new(delta: f64, nodes: usize) -> Self {
        assert!(delta > 0.0, "mollifier width must be positive");
        let rule = gauss_legendre(nodes.max(8));
        let mass: f64 = rule.iter().map(|&(x, w)| w * bump(x)).sum();
        Mollifier {
            delta,
            c: 1.0 / mass,
            nodes: nodes.max(8),
            rule,
        }
    }

    /// Unscaled mollifier `rho(x) = C exp(1/(x^2-1))` for `|x| < 1`.
    pub fn rho(&self, x: f64) -> f64 {
        self.c * bump(x)
    }

    /// Scaled mollifier `rho_delta(x) = rho(x/delta)/delta`.
    pub fn rho_delta(&self, x: f64) -> f64 {
        self.rho(x / self.delta) / self.delta
    }

    /// `sup rho_delta = rho(0)/delta`.
    pub fn sup(&self) -> f64 {
        self.rho(0.0) / self.delta
    }

    /// Convolution `(rho_delta * f)(r)` by Gauss-Legendre on the support.
    pub fn convolve(&self, f: impl Fn(f64) -> f64, r: f64) -> f64 {
        self.rule
            .iter()
            .map(|&(s, w)| w * self.rho(s) * f(r - self.delta * s))
            .sum()
    }
}

/// Free-function form of the mollifier evaluation (unscaled bump).
pub fn eval_mollifier(moll: &Mollifier, x: f64) -> f64 {
    moll.rho(x)
}

/// Drift evaluation facade: `delta > 0` applies the mollified convolution,
/// `delta = 0` evaluates the truncated polynomial directly.
#[derive(Debug, Clone)]
pub struct Drift {
    pub poly: DriftPolynomial,
    pub mollifier: Option<Mollifier>,
}

impl Drift {
    pub fn new(poly: DriftPolynomial, delta: f64, nodes: usize) -> Self {
        let mollifier = if delta > 0.0 {
            Some(Mollifier::new(delta, nodes))
        } else {
            None
        };
        Drift { poly, mollifier }
    }

    pub fn delta(&self) -> f64 {
        self.mollifier.as_ref().map_or(0.0, |m| m.delta)
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.mollifier {
            Some(m) => eval_p_delta(&self.poly, m, r),
            None => self.poly.eval(r),
        }
    }

    /// Uniform bound `sup |P_delta| <= sup |P|` (convolution with a
    /// probability density).
    pub fn sup_bound(&self) -> f64 {
        self.poly.sup_abs()
    }

    /// Lipschitz constant transfer through the mollifier:
    /// `L = sup rho_delta * 2 sup |P|`. Only defined for `delta > 0`.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.mollifier
            .as_ref()
            .map(|m| m.sup() * 2.0 * self.poly.sup_abs())
    }
}

/// `P_delta(r) = integral of rho_delta(y) P(r-y) dy`, supported on
/// `(-delta, 1+delta)`.
pub fn eval_p_delta(poly: &DriftPolynomial, moll: &Mollifier, r: f64) -> f64 {
    let delta = moll.delta;
    if r <= -delta || r >= 1.0 + delta {
        return 0.0;
    }
    moll.convolve(|s| poly.eval(s), r)
}

/// `||P_delta - P||_{L2(interval)}` by composite Simpson quadrature with `n`
/// panels; the interval must contain the support `(-delta, 1+delta)`.
pub fn p_delta_l2_distance(
    poly: &DriftPolynomial,
    moll: &Mollifier,
    interval: (f64, f64),
    panels: usize,
) -> Result<f64> {
    let (a, b) = interval;
    assert!(
        a <= -moll.delta && b >= 1.0 + moll.delta,
        "integration interval must contain the support of P_delta"
    );
    let n = panels.max(2) * 2; // even subinterval count for Simpson
    let h = (b - a) / n as f64;
    let f = |x: f64| {
        let d = eval_p_delta(poly, moll, x) - poly.eval(x);
        d * d
    };
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    Ok((sum * h / 3.0).sqrt())
}
