//! Power-law vacuum profiles `rho0(r) = 1/(1 + r^(2a))` and compactly
//! supported initial velocities.

use serde::{Deserialize, Serialize};

use super::jet::Jet;
use crate::error::{Error, Result};
use crate::field::{PrimitiveState, ScalarField, VectorField};
use crate::grid::Grid;
use crate::params::Params;

/// Radial velocity `u = w(r) x/|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialVelocity {
    /// `w = amplitude (r/R) (1 - (r/R)^2)^4` inside `r < R`.
    Bump { amplitude: f64, radius: f64 },
    /// `u = slope x`, so `grad u = slope I` everywhere.
    Linear { slope: f64 },
}

impl RadialVelocity {
    pub fn jet(&self, r: f64) -> Jet {
        let x = Jet::var(r);
        match *self {
            RadialVelocity::Bump { amplitude, radius } => {
                if r >= radius {
                    return Jet::constant(0.0);
                }
                let s = x.scale(1.0 / radius);
                let base = -(s * s) + 1.0;
                (s * base.powf(4.0)).scale(amplitude)
            }
            RadialVelocity::Linear { slope } => x.scale(slope),
        }
    }

    /// Divergence `w' + (d-1) w/r` as a jet in `r`.
    pub fn div_jet(&self, r: f64, d: usize) -> Jet {
        match *self {
            RadialVelocity::Linear { slope } => Jet::constant(d as f64 * slope),
            RadialVelocity::Bump { .. } => {
                let w = self.jet(r);
                if d == 1 {
                    w.d()
                } else {
                    w.d() + (w / Jet::var(r)).scale((d - 1) as f64)
                }
            }
        }
    }

    /// Radius beyond which the field vanishes, if any.
    pub fn support(&self) -> Option<f64> {
        match *self {
            RadialVelocity::Bump { radius, .. } => Some(radius),
            RadialVelocity::Linear { .. } => None,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            RadialVelocity::Bump { amplitude, radius } => RadialVelocity::Bump {
                amplitude: c * amplitude,
                radius,
            },
            RadialVelocity::Linear { slope } => RadialVelocity::Linear { slope: c * slope },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub a_exp: f64,
    pub velocity: Option<RadialVelocity>,
}

impl RadialProfile {
    pub fn new(a_exp: f64) -> Result<Self> {
        if !(a_exp > 0.0) || !a_exp.is_finite() {
            return Err(Error::InvalidInput(format!("a_exp must be positive (got {a_exp})")));
        }
        Ok(Self { a_exp, velocity: None })
    }

    pub fn with_velocity(mut self, v: RadialVelocity) -> Self {
        self.velocity = Some(v);
        self
    }

    pub fn rho(&self, r: f64) -> f64 {
        1.0 / (1.0 + r.powf(2.0 * self.a_exp))
    }

    pub fn rho_jet(&self, r: f64) -> Jet {
        (Jet::var(r).powf(2.0 * self.a_exp) + 1.0).recip()
    }

    pub fn velocity_jet(&self, r: f64) -> Jet {
        self.velocity.map_or(Jet::constant(0.0), |v| v.jet(r))
    }
}

/// Compactly supported bump `amplitude (1 - |x|^2/R^2)^4 e_1`, three times
/// continuously differentiable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    pub radius: f64,
}

impl Bump {
    pub fn value(&self, x: [f64; 3]) -> f64 {
        let s2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (self.radius * self.radius);
        if s2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - s2).powi(4)
        }
    }

    /// Fails unless the support ball sits strictly inside the box.
    pub fn check_fits(&self, grid: &Grid) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bump radius must be positive (got {})",
                self.radius
            )));
        }
        for (k, ax) in grid.axes().iter().enumerate() {
            if !(ax.lo < -self.radius && ax.lo + ax.length > self.radius) {
                return Err(Error::InvalidInput(format!(
                    "bump support radius {} exceeds the box on axis {k} ([{}, {}])",
                    self.radius,
                    ax.lo,
                    ax.lo + ax.length
                )));
            }
        }
        Ok(())
    }
}

/// Samples `rho0 = 1/(1+|x|^(2a))` and an optional bump velocity along `e_1`.
pub fn make_power_law_init(a_exp: f64, bump: Option<&Bump>, grid: &Grid, p: &Params) -> Result<PrimitiveState> {
    p.validate()?;
    let profile = RadialProfile::new(a_exp)?;
    let rho = ScalarField::from_fn(grid, |x| profile.rho((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()));
    let mut u = VectorField::zeros(grid.dim(), grid.len());
    if let Some(b) = bump {
        b.check_fits(grid)?;
        u[0] = ScalarField::from_fn(grid, |x| b.value(x));
    }
    Ok(PrimitiveState::new(rho, u, 0.0))
}
