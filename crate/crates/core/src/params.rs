//! Physical and regularization parameters.
//!
//! Pressure is `P = A rho^gamma`, viscosities are `mu = alpha rho^delta` and
//! `lambda = beta rho^delta`. `eps` is the artificial viscosity floor of the
//! h-form momentum equation and `eta` lifts the initial pressure variable
//! away from vacuum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "A")]
    pub a_entropy: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    1
}

/// Constants of the reformulated system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Coefficient in front of the Lamé operator, `(A gamma/(gamma-1))^((1-delta)/(gamma-1))`.
    pub a: f64,
    /// Exponent `(delta-1)/(2(gamma-1))`, always negative.
    pub e: f64,
}

impl Params {
    pub fn new(a_entropy: f64, gamma: f64, delta: f64, alpha: f64, beta: f64) -> Self {
        Self {
            a_entropy,
            gamma,
            delta,
            alpha,
            beta,
            eps: 0.0,
            eta: 0.0,
            dim: 1,
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// `A gamma / (gamma - 1)`, the factor mapping `rho^(gamma-1)` to phi.
    pub fn phi_scale(&self) -> f64 {
        self.a_entropy * self.gamma / (self.gamma - 1.0)
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.a_entropy * rho.powf(self.gamma)
    }

    /// Returns every violated constraint; empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let finite = [
            ("A", self.a_entropy),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eps", self.eps),
            ("eta", self.eta),
        ];
        for (name, x) in finite {
            if !x.is_finite() {
                v.push(format!("{name} must be finite (got {x})"));
            }
        }
        if !(self.a_entropy > 0.0) {
            v.push(format!("A must be positive (got {})", self.a_entropy));
        }
        if !(self.gamma > 1.0) {
            v.push(format!("gamma must exceed 1 (got {})", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            v.push(format!("delta must lie in (0,1) (got {})", self.delta));
        }
        if !(self.alpha > 0.0) {
            v.push(format!("alpha must be positive (got {})", self.alpha));
        }
        let lame = 2.0 * self.alpha + 3.0 * self.beta;
        if !(lame >= 0.0) {
            v.push(format!("2α+3β≥0 fails (={lame})"));
        }
        if !(self.eps >= 0.0) {
            v.push(format!("eps must be nonnegative (got {})", self.eps));
        }
        if !(self.eta >= 0.0) {
            v.push(format!("eta must be nonnegative (got {})", self.eta));
        }
        if !(1..=3).contains(&self.dim) {
            v.push(format!("dim must be 1, 2 or 3 (got {})", self.dim));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    pub fn derived(&self) -> Result<DerivedConstants> {
        derive_constants(self)
    }
}

/// Validation result as data: `Ok(())` or the full list of violations.
pub fn validate_params(p: &Params) -> std::result::Result<(), Vec<String>> {
    let v = p.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

pub fn derive_constants(p: &Params) -> Result<DerivedConstants> {
    p.validate()?;
    let e = (p.delta - 1.0) / (2.0 * (p.gamma - 1.0));
    let a = p.phi_scale().powf((1.0 - p.delta) / (p.gamma - 1.0));
    assert!(e < 0.0, "exponent e must be negative for valid parameters");
    Ok(DerivedConstants { a, e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accepts_boundary_lame_combination() {
        let p = Params::new(1.0, 2.0, 0.5, 1.0, -0.5);
        assert!(validate_params(&p).is_ok());
    }

    #[test]
    fn rejects_delta_above_one() {
        let p = Params::new(1.0, 2.0, 1.2, 1.0, 0.0);
        let v = validate_params(&p).unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("delta must lie in (0,1)"));
    }

    #[test]
    fn rejects_negative_lame_combination() {
        let p = Params::new(1.0, 2.0, 0.5, 1.0, -1.0);
        let v = validate_params(&p).unwrap_err();
        assert_eq!(v, vec!["2α+3β≥0 fails (=-1)".to_string()]);
    }

    #[test]
    fn lists_every_violation() {
        let p = Params::new(-1.0, 0.9, 1.5, 0.0, -1.0);
        let v = validate_params(&p).unwrap_err();
        assert_eq!(v.len(), 5, "{v:?}");
    }

    #[test]
    fn derived_constants_examples() {
        let c = derive_constants(&Params::new(1.0, 2.0, 0.5, 1.0, 0.0)).unwrap();
        assert!((c.e + 0.25).abs() < 1e-15);
        assert!((c.a - 2f64.sqrt()).abs() < 1e-12);

        let c = derive_constants(&Params::new(1.0, 1.5, 0.9, 1.0, 0.0)).unwrap();
        assert!((c.e + 0.1).abs() < 1e-15);
        assert!((c.a - 1.245731).abs() < 1e-6);

        let c = derive_constants(&Params::new(2.0, 2.0, 0.5, 1.0, 0.0)).unwrap();
        assert!((c.a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn derive_rejects_invalid() {
        assert!(derive_constants(&Params::new(1.0, 1.0, 0.5, 1.0, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn derived_constants_consistent(
            a_ent in 0.01f64..10.0,
            gamma in 1.01f64..4.0,
            delta in 0.01f64..0.99,
        ) {
            let p = Params::new(a_ent, gamma, delta, 1.0, 0.0);
            let c = derive_constants(&p).unwrap();
            prop_assert!(c.e < 0.0);
            prop_assert!(c.a > 0.0);
            let via_e = p.phi_scale().powf(-2.0 * c.e);
            prop_assert!(((via_e - c.a) / c.a).abs() <= 1e-12);
        }
    }
}
