//! Exact reference functions built from monomials `Σ c_k t^{γ_k}`, with
//! closed-form ordinary and Caputo derivatives.

use crate::caputo::{check_alpha, gamma};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialSum {
    terms: Vec<(f64, f64)>,
}

impl MonomialSum {
    /// Terms as `(coefficient, power)` pairs; powers must be `>= 0`.
    pub fn new(terms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(_, p)) = terms.iter().find(|(_, p)| !(*p >= 0.0)) {
            return Err(Error::Domain(format!("monomial power must be >= 0, got {p}")));
        }
        Ok(Self { terms })
    }

    /// `t^power`.
    pub fn power(power: f64) -> Result<Self> {
        Self::new(vec![(1.0, power)])
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// `n`-th ordinary derivative.
    pub fn derivative(&self, order: u32, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, p)| {
                let falling = (0..order).fold(1.0, |acc, k| acc * (p - k as f64));
                if falling == 0.0 {
                    0.0
                } else {
                    c * falling * t.powf(p - order as f64)
                }
            })
            .sum()
    }

    /// Caputo derivative of order `alpha` at `t > 0`; constants map to 0.
    pub fn caputo(&self, alpha: f64, t: f64) -> Result<f64> {
        check_alpha(alpha)?;
        if !(t > 0.0) {
            return Err(Error::Domain(format!("evaluation time must be positive, got {t}")));
        }
        Ok(self
            .terms
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|&(c, p)| c * gamma(p + 1.0) / gamma(p + 1.0 - alpha) * t.powf(p - alpha))
            .sum())
    }
}
