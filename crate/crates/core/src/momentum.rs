//! One implicit step of the linearized momentum equation.
//!
//! Only the Lamé term is implicit (theta scheme); convection, pressure and
//! the `psi . Q(v)` / `f . Q(v)` forcing are frozen. Both forms are scaled to
//! a symmetric system `(W I + kappa L) u' = b` before the CG solve:
//!
//! * h-form: `W = 1/(dt a sqrt(h^2+eps^2))`, `kappa = theta`
//! * varphi-form: `W = varphi/dt`, `kappa = theta a`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::krylov::{KrylovConfig, KrylovReport};
use crate::ops::{convective, grad, lame_apply, q_apply, ImplicitLame, Lame};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumForm {
    HForm,
    #[default]
    VarphiForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumStepConfig {
    #[serde(default)]
    pub form: MomentumForm,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub krylov: KrylovConfig,
}

fn default_theta() -> f64 {
    1.0
}

impl Default for MomentumStepConfig {
    fn default() -> Self {
        Self {
            form: MomentumForm::default(),
            theta: default_theta(),
            krylov: KrylovConfig::default(),
        }
    }
}

impl MomentumStepConfig {
    pub fn with_form(mut self, form: MomentumForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::InvalidInput(format!("theta must lie in [0.5, 1] (got {})", self.theta)));
        }
        if !(self.krylov.rtol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Krylov rtol must be positive (got {})",
                self.krylov.rtol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MomentumStep {
    pub u: VectorField,
    pub report: KrylovReport,
}

/// `v . grad v + grad phi`.
fn convection_pressure(v: &VectorField, phi: &ScalarField, grid: &Grid) -> VectorField {
    let c = convective(v, v, grid);
    let gp = grad(phi, grid);
    c.zip_map(&gp, |a, b| a + b)
}

fn check_inputs(u: &VectorField, v: &VectorField, phi: &ScalarField, grid: &Grid, dt: f64) -> Result<()> {
    u.check_shape(grid, "u")?;
    v.check_shape(grid, "v")?;
    phi.check_len(grid, "phi")?;
    u.check_finite("u")?;
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be nonnegative (got {dt})")));
    }
    Ok(())
}

/// h-form step: `u_t + v . grad v + grad phi + a sqrt(h^2+eps^2) L u = psi . Q(v)`.
#[allow(clippy::too_many_arguments)]
pub fn advance_momentum_h(
    u: &VectorField,
    v: &VectorField,
    phi: &ScalarField,
    h: &ScalarField,
    psi: &VectorField,
    p: &Params,
    eps: f64,
    dt: f64,
    grid: &Grid,
    cfg: &MomentumStepConfig,
) -> Result<MomentumStep> {
    cfg.validate()?;
    check_inputs(u, v, phi, grid, dt)?;
    h.check_len(grid, "h")?;
    psi.check_shape(grid, "psi")?;
    h.check_positive("h")?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("eps must be nonnegative (got {eps})")));
    }
    if dt == 0.0 {
        return Ok(MomentumStep { u: u.clone(), report: KrylovReport::default() });
    }
    let a = p.derived()?.a;
    let lame = Lame::from(p);
    let coef = h.map(|h| a * (h * h + eps * eps).sqrt());
    let weight = coef.map(|c| 1.0 / (dt * c));
    let forcing = q_apply(v, lame, grid).left_contract(psi);
    let explicit = convection_pressure(v, phi, grid).zip_map(&forcing, |e, f| e - f);
    let lu = lame_apply(u, lame, grid);
    let th = cfg.theta;
    let rhs = VectorField(
        (0..grid.dim())
            .map(|i| {
                (0..grid.len())
                    .map(|q| weight[q] * (u[i][q] - dt * explicit[i][q]) - (1.0 - th) * lu[i][q])
                    .collect()
            })
            .collect(),
    );
    solve(grid, lame, &weight, th, &rhs, u, cfg)
}

/// varphi-form step: `varphi (u_t + v . grad v + grad phi) + a L u = f . Q(v)`.
#[allow(clippy::too_many_arguments)]
pub fn advance_momentum_varphi(
    u: &VectorField,
    v: &VectorField,
    phi: &ScalarField,
    varphi: &ScalarField,
    f: &VectorField,
    p: &Params,
    dt: f64,
    grid: &Grid,
    cfg: &MomentumStepConfig,
) -> Result<MomentumStep> {
    cfg.validate()?;
    check_inputs(u, v, phi, grid, dt)?;
    varphi.check_len(grid, "varphi")?;
    f.check_shape(grid, "f")?;
    varphi.check_finite("varphi")?;
    if let Some(q) = varphi.iter().position(|&x| x < 0.0) {
        return Err(Error::NonPositive { field: "varphi", node: q, value: varphi[q] });
    }
    if dt == 0.0 {
        return Ok(MomentumStep { u: u.clone(), report: KrylovReport::default() });
    }
    let a = p.derived()?.a;
    let lame = Lame::from(p);
    let weight = varphi.map(|w| w / dt);
    let forcing = q_apply(v, lame, grid).left_contract(f);
    let cp = convection_pressure(v, phi, grid);
    let lu = lame_apply(u, lame, grid);
    let th = cfg.theta;
    let rhs = VectorField(
        (0..grid.dim())
            .map(|i| {
                (0..grid.len())
                    .map(|q| {
                        varphi[q] * (u[i][q] / dt - cp[i][q]) + forcing[i][q] - (1.0 - th) * a * lu[i][q]
                    })
                    .collect()
            })
            .collect(),
    );
    let out = solve(grid, lame, &weight, th * a, &rhs, u, cfg)?;
    Ok(out)
}

fn solve(
    grid: &Grid,
    lame: Lame,
    weight: &ScalarField,
    kappa: f64,
    rhs: &VectorField,
    guess: &VectorField,
    cfg: &MomentumStepConfig,
) -> Result<MomentumStep> {
    let op = ImplicitLame { grid, lame, weight: Some(weight), kappa };
    let s = op.solve(rhs, Some(guess), &cfg.krylov)?;
    s.u.check_finite("u")?;
    Ok(MomentumStep { u: s.u, report: s.report })
}
