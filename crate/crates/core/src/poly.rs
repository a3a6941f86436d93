//! Polynomial parameter curves in λ.

use std::fmt;

/// Maximum supported degree for configuration curves.
pub const MAX_DEGREE: usize = 6;

/// A polynomial `c[0] + c[1] λ + ... + c[n] λⁿ` with coefficients in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    /// `a(λ) = λ`.
    pub fn identity() -> Self {
        Poly {
            coeffs: vec![0.0, 1.0],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Bound on |p'| over [−r, r], usable as a Lipschitz constant.
    pub fn lipschitz_bound(&self, r: f64) -> f64 {
        self.derivative()
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * r.abs().powi(k as i32))
            .sum()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&c| c == 0.0)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| crate::fmt_f64(*c)).collect();
        write!(f, "{}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_direct_sum() {
        let p = Poly::new(vec![1.0, 0.0, 1.0]);
        assert_eq!(p.eval(0.5), 1.25);
        assert_eq!(p.derivative().coeffs(), &[0.0, 2.0]);
        assert_eq!(Poly::constant(3.0).derivative().eval(10.0), 0.0);
    }

    #[test]
    fn lipschitz_bounds_derivative() {
        let p = Poly::new(vec![0.0, 1.0, -2.0, 0.5]);
        let r = 1.5;
        let bound = p.lipschitz_bound(r);
        let dp = p.derivative();
        for k in 0..=100 {
            let x = -r + 2.0 * r * k as f64 / 100.0;
            assert!(dp.eval(x).abs() <= bound + 1e-12);
        }
    }
}
