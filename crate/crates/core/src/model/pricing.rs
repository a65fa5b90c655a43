use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::numeric::{format_rational, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PricingKind {
    /// `C(x) = a·x²`; one coefficient `a`.
    Quadratic,
    /// `C(x) = Σ cᵢ·xⁱ`; coefficients in ascending powers starting at `x⁰`.
    Polynomial,
}

/// Strictly convex price of a slot's total energy, in cents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PricingFunction {
    pub kind: PricingKind,
    pub coefficients: Vec<Q>,
}

impl PricingFunction {
    pub fn quadratic(a: Q) -> Self {
        PricingFunction { kind: PricingKind::Quadratic, coefficients: vec![a] }
    }

    pub fn polynomial(coefficients: Vec<Q>) -> Self {
        PricingFunction { kind: PricingKind::Polynomial, coefficients }
    }

    /// Coefficients of `x⁰, x¹, …` regardless of kind.
    pub fn power_coefficients(&self) -> Vec<Q> {
        match self.kind {
            PricingKind::Quadratic => {
                let a = self.coefficients.first().copied().unwrap_or_else(Q::zero);
                vec![Q::zero(), Q::zero(), a]
            }
            PricingKind::Polynomial => self.coefficients.clone(),
        }
    }

    pub fn degree(&self) -> usize {
        let c = self.power_coefficients();
        c.iter().rposition(|v| !v.is_zero()).unwrap_or(0)
    }

    pub fn eval(&self, x: &Q) -> Q {
        // Horner
        self.power_coefficients()
            .iter()
            .rev()
            .fold(Q::zero(), |acc, c| acc * x + c)
    }

    /// Invariant violations: `C(0) = 0`, non-negative coefficients and a
    /// positive coefficient of degree ≥ 2 (strictly increasing and strictly
    /// convex on `x ≥ 0`).
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kind == PricingKind::Quadratic && self.coefficients.len() != 1 {
            out.push(format!(
                "quadratic pricing takes exactly one coefficient, got {}",
                self.coefficients.len()
            ));
        }
        let c = self.power_coefficients();
        if c.iter().any(|v| v.is_negative()) {
            out.push("pricing coefficients must be non-negative".into());
        }
        if c.first().is_some_and(|c0| !c0.is_zero()) {
            out.push("pricing function must satisfy C(0) = 0".into());
        }
        if !c.iter().skip(2).any(|v| v.is_positive()) {
            out.push("pricing function must be strictly convex (a positive coefficient of degree >= 2)".into());
        }
        if self.degree() > 4 {
            out.push("pricing polynomials above degree 4 are not supported".into());
        }
        out
    }

    /// Second finite difference at `x` with step `h`; positive for a strictly convex C.
    pub fn second_difference(&self, x: &Q, h: &Q) -> Q {
        let two = Q::one() + Q::one();
        self.eval(&(x + h + h)) - two * self.eval(&(x + h)) + self.eval(x)
    }
}

impl fmt::Display for PricingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .power_coefficients()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format_rational(c),
                1 => format!("{}x", format_rational(c)),
                _ => format!("{}x^{i}", format_rational(c)),
            })
            .collect();
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" + "))
        }
    }
}
