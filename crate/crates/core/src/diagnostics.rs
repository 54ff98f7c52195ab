//! Conserved quantities, energy balance, the momentum bounds and norm
//! monitors of a run.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{PrimitiveState, ReformState, ScalarField, VectorField};
use crate::grid::Grid;
use crate::ops::{curl, d1, derivative_magnitude, div, integrate, jacobian, norm, FieldRef, NormSpec};
use crate::params::Params;
use crate::reform::{from_reform, relation_residuals};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conserved {
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub kinetic: f64,
    pub energy: f64,
}

impl Conserved {
    pub fn momentum_norm(&self) -> f64 {
        self.momentum.iter().map(|m| m * m).sum::<f64>().sqrt()
    }
}

/// Mass, momentum, kinetic energy and total energy `E_k + int P/(gamma-1)`.
pub fn conserved_quantities(s: &PrimitiveState, p: &Params, grid: &Grid) -> Conserved {
    let rho = &s.rho;
    let momentum = s
        .u
        .iter()
        .map(|c| integrate(&rho.zip_map(c, |r, u| r * u), grid))
        .collect();
    let speed2 = speed_squared(&s.u);
    let kinetic = 0.5 * integrate(&rho.zip_map(&speed2, |r, w| r * w), grid);
    let internal = integrate(&rho.map(|r| p.pressure(r) / (p.gamma - 1.0)), grid);
    Conserved {
        mass: integrate(rho, grid),
        momentum,
        kinetic,
        energy: kinetic + internal,
    }
}

fn speed_squared(u: &VectorField) -> ScalarField {
    let mut out = ScalarField::zeros(u.nodes());
    for c in u.iter() {
        for (o, x) in out.iter_mut().zip(c.iter()) {
            *o += x * x;
        }
    }
    out
}

/// `sqrt(2 m E_k) - |M|`, nonnegative for every state.
pub fn cauchy_schwarz_check(s: &PrimitiveState, p: &Params, grid: &Grid) -> f64 {
    let c = conserved_quantities(s, p, grid);
    (2.0 * c.mass * c.kinetic).sqrt() - c.momentum_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationForm {
    /// `rho^delta (alpha |grad u|^2 + (alpha+beta) (div u)^2)`
    #[default]
    Gradient,
    /// `rho^delta (2 alpha |D(u)|^2 + beta (div u)^2)`
    Strain,
}

pub fn dissipation_density(s: &PrimitiveState, p: &Params, grid: &Grid, form: DissipationForm) -> ScalarField {
    let j = jacobian(&s.u, grid);
    let dv = div(&s.u, grid);
    let dim = grid.dim();
    ScalarField::from_iter((0..grid.len()).map(|q| {
        let mut grad2 = 0.0;
        let mut strain2 = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                let x = j.get(a, b)[q];
                let y = j.get(b, a)[q];
                grad2 += x * x;
                strain2 += 0.25 * (x + y) * (x + y);
            }
        }
        let w = s.rho[q].powf(p.delta);
        let d2 = dv[q] * dv[q];
        w * match form {
            DissipationForm::Gradient => p.alpha * grad2 + (p.alpha + p.beta) * d2,
            DissipationForm::Strain => 2.0 * p.alpha * strain2 + p.beta * d2,
        }
    }))
}

pub fn dissipation_rate(s: &PrimitiveState, p: &Params, grid: &Grid, form: DissipationForm) -> f64 {
    integrate(&dissipation_density(s, p, grid, form), grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBalance {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// `E(t) + D(t) - E(0)`.
    pub residual: Vec<f64>,
}

/// Energy equality residual with `D` accumulated by the trapezoid rule over
/// the given states.
pub fn energy_equality_residual(traj: &[PrimitiveState], p: &Params, grid: &Grid, form: DissipationForm) -> EnergyBalance {
    let mut out = EnergyBalance {
        t: Vec::new(),
        energy: Vec::new(),
        dissipation: Vec::new(),
        residual: Vec::new(),
    };
    let mut d = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in traj {
        let rate = dissipation_rate(s, p, grid, form);
        if let Some((t0, r0)) = prev {
            d += 0.5 * (s.t - t0) * (r0 + rate);
        }
        prev = Some((s.t, rate));
        let e = conserved_quantities(s, p, grid).energy;
        out.t.push(s.t);
        out.energy.push(e);
        out.dissipation.push(d);
        out.residual.push(e + d - out.energy[0]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonDecaySample {
    pub t: f64,
    pub sup_u: f64,
    pub holds: bool,
    /// `|m(t) - m(0)| / m(0)`.
    pub mass_drift: f64,
    /// `|M(t) - M(0)| / (1 + |M(0)|)`.
    pub momentum_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonDecayReport {
    /// `|M(0)| / m(0)`.
    pub c_u: f64,
    /// True when `C_u <= tol` (e.g. `M(0) = 0`): the bound says nothing.
    pub vacuous: bool,
    pub samples: Vec<NonDecaySample>,
}

impl NonDecayReport {
    pub fn violations(&self) -> impl Iterator<Item = &NonDecaySample> {
        self.samples.iter().filter(|s| !s.holds)
    }
}

pub fn sup_speed(u: &VectorField) -> f64 {
    speed_squared(u).iter().fold(0.0f64, |m, x| m.max(*x)).sqrt()
}

/// Checks `sup |u(t)| >= |M(0)|/m(0) - tol` along a trajectory.
pub fn nondecay_bound(traj: &[PrimitiveState], p: &Params, grid: &Grid, tol: f64) -> NonDecayReport {
    let Some(first) = traj.first() else {
        return NonDecayReport { c_u: 0.0, vacuous: true, samples: Vec::new() };
    };
    let c0 = conserved_quantities(first, p, grid);
    let m0 = c0.momentum_norm();
    let c_u = m0 / c0.mass;
    let samples = traj
        .iter()
        .map(|s| {
            let c = conserved_quantities(s, p, grid);
            let dm: f64 = c
                .momentum
                .iter()
                .zip(&c0.momentum)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let sup_u = sup_speed(&s.u);
            NonDecaySample {
                t: s.t,
                sup_u,
                holds: sup_u >= c_u - tol,
                mass_drift: (c.mass - c0.mass).abs() / c0.mass,
                momentum_drift: dm / (1.0 + m0),
            }
        })
        .collect();
    NonDecayReport { c_u, vacuous: c_u <= tol, samples }
}

/// Effective viscous flux `(2 alpha + beta) div u - P(rho)` and vorticity.
pub fn effective_flux(s: &PrimitiveState, p: &Params, grid: &Grid) -> (ScalarField, VectorField) {
    let dv = div(&s.u, grid);
    let f = dv.zip_map(&s.rho, |d, r| (2.0 * p.alpha + p.beta) * d - p.pressure(r));
    (f, curl(&s.u, grid))
}

/// `|h grad^2 u|_2 + |grad(h grad^2 u)|_2`.
fn weighted_hessian_h1(u: &VectorField, h: &ScalarField, grid: &Grid) -> f64 {
    let dim = grid.dim();
    let mut l2 = 0.0;
    let mut d = 0.0;
    for c in u.iter() {
        for i in 0..dim {
            let di = d1(c, grid, i);
            for j in 0..dim {
                let w = d1(&di, grid, j).zip_map(h, |x, h| h * x);
                l2 += w.iter().map(|x| x * x).sum::<f64>();
                for k in 0..dim {
                    d += d1(&w, grid, k).iter().map(|x| x * x).sum::<f64>();
                }
            }
        }
    }
    let dv = grid.cell_volume();
    (l2 * dv).sqrt() + (d * dv).sqrt()
}

/// Norms of the regular-solution class, by name.
pub fn regularity_monitors(r: &ReformState, grid: &Grid) -> Result<Vec<(String, f64)>> {
    let phi = FieldRef::from(&r.phi);
    let psi = FieldRef::from(&r.psi);
    let u = FieldRef::from(&r.u);
    let vp = FieldRef::from(&r.varphi);
    let f = FieldRef::from(&r.f);
    let grad_u = derivative_magnitude(u, 1, grid)?;
    let sqrt_h_grad_u = grad_u.zip_map(&r.h, |g, h| g * h.sqrt());
    let mut out = vec![
        ("phi L2".to_string(), norm(phi, &NormSpec::Lp(2.0), grid)?),
        ("phi D1".to_string(), norm(phi, &NormSpec::Dk { k: 1, r: 2.0 }, grid)?),
        ("phi D2".to_string(), norm(phi, &NormSpec::Dk { k: 2, r: 2.0 }, grid)?),
        ("phi D3".to_string(), norm(phi, &NormSpec::Dk { k: 3, r: 2.0 }, grid)?),
        ("phi H3".to_string(), norm(phi, &NormSpec::Hs(3), grid)?),
        (
            "psi D1+D2".to_string(),
            norm(psi, &NormSpec::Dk { k: 1, r: 2.0 }, grid)? + norm(psi, &NormSpec::Dk { k: 2, r: 2.0 }, grid)?,
        ),
        ("u H3".to_string(), norm(u, &NormSpec::Hs(3), grid)?),
        ("sqrt(h) grad u L2".to_string(), norm(FieldRef::from(&sqrt_h_grad_u), &NormSpec::Lp(2.0), grid)?),
        ("h grad2 u H1".to_string(), weighted_hessian_h1(&r.u, &r.h, grid)),
        ("varphi Linf".to_string(), norm(vp, &NormSpec::Lp(f64::INFINITY), grid)?),
        ("varphi D1 L6".to_string(), norm(vp, &NormSpec::Dk { k: 1, r: 6.0 }, grid)?),
        ("varphi D2 L3".to_string(), norm(vp, &NormSpec::Dk { k: 2, r: 3.0 }, grid)?),
        ("f Linf".to_string(), norm(f, &NormSpec::Lp(f64::INFINITY), grid)?),
        ("f L6".to_string(), norm(f, &NormSpec::Lp(6.0), grid)?),
        ("f D1 L3".to_string(), norm(f, &NormSpec::Dk { k: 1, r: 3.0 }, grid)?),
        ("f D2 L2".to_string(), norm(f, &NormSpec::Dk { k: 2, r: 2.0 }, grid)?),
    ];
    out.shrink_to_fit();
    Ok(out)
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub kinetic: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub energy_residual: f64,
    pub sup_u: f64,
    pub c_u: f64,
    pub min_rho: f64,
    /// Norm monitors followed by relation residuals.
    pub monitors: Vec<(String, f64)>,
}

impl DiagnosticsRecord {
    /// Column names; the momentum columns follow the grid dimension.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "m".to_string()];
        for axis in ["x", "y", "z"].iter().take(self.momentum.len()) {
            h.push(format!("M_{axis}"));
        }
        for c in ["Ek", "E", "D", "energy_residual", "sup_u", "Cu", "min_rho"] {
            h.push(c.to_string());
        }
        h.extend(self.monitors.iter().map(|(n, _)| n.clone()));
        h
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.t, self.mass];
        v.extend(&self.momentum);
        v.extend([
            self.kinetic,
            self.energy,
            self.dissipation,
            self.energy_residual,
            self.sup_u,
            self.c_u,
            self.min_rho,
        ]);
        v.extend(self.monitors.iter().map(|(_, x)| *x));
        v
    }
}

/// Accumulates the dissipation integral at every inner step and produces
/// records on demand.
#[derive(Debug, Clone)]
pub struct DiagnosticsTracker {
    params: Params,
    form: DissipationForm,
    monitors: bool,
    e0: f64,
    c_u: f64,
    dissipation: f64,
    last: (f64, f64),
}

impl DiagnosticsTracker {
    pub fn new(initial: &PrimitiveState, p: &Params, grid: &Grid, form: DissipationForm) -> Self {
        let c = conserved_quantities(initial, p, grid);
        Self {
            params: *p,
            form,
            monitors: true,
            e0: c.energy,
            c_u: c.momentum_norm() / c.mass,
            dissipation: 0.0,
            last: (initial.t, dissipation_rate(initial, p, grid, form)),
        }
    }

    /// Disables the (costly) norm monitors.
    pub fn without_monitors(mut self) -> Self {
        self.monitors = false;
        self
    }

    pub fn dissipation(&self) -> f64 {
        self.dissipation
    }

    pub fn c_u(&self) -> f64 {
        self.c_u
    }

    /// Adds the trapezoid increment up to state `s`.
    pub fn advance(&mut self, s: &PrimitiveState, grid: &Grid) {
        let rate = dissipation_rate(s, &self.params, grid, self.form);
        let (t0, r0) = self.last;
        self.dissipation += 0.5 * (s.t - t0) * (r0 + rate);
        self.last = (s.t, rate);
    }

    pub fn record(&self, r: &ReformState, grid: &Grid) -> Result<DiagnosticsRecord> {
        let p = &self.params;
        let s = from_reform(r, p)?;
        let c = conserved_quantities(&s, p, grid);
        let mut monitors = if self.monitors { regularity_monitors(r, grid)? } else { Vec::new() };
        let rel = relation_residuals(r, p, grid)?;
        monitors.extend([
            ("rel psi_grad_h".to_string(), rel.psi_grad_h),
            ("rel f_psi_varphi".to_string(), rel.f_psi_varphi),
            ("rel h_varphi".to_string(), rel.h_varphi),
            ("rel curl_psi".to_string(), rel.curl_psi),
        ]);
        Ok(DiagnosticsRecord {
            t: r.t,
            mass: c.mass,
            momentum: c.momentum,
            kinetic: c.kinetic,
            energy: c.energy,
            dissipation: self.dissipation,
            energy_residual: c.energy + self.dissipation - self.e0,
            sup_u: sup_speed(&s.u),
            c_u: self.c_u,
            min_rho: s.rho.min(),
            monitors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::reform::to_reform;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn example(n: usize) -> (Grid, Params, PrimitiveState) {
        let g = Grid::periodic_1d(n, 1.0).unwrap();
        let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
        let rho = ScalarField::constant(n, 1.0);
        let u = VectorField(vec![ScalarField::from_fn(&g, |x| 0.5 + 0.1 * (2.0 * PI * x[0]).sin())]);
        (g, p, PrimitiveState::new(rho, u, 0.0))
    }

    #[test]
    fn conserved_quantities_of_example_state() {
        let (g, p, s) = example(64);
        let c = conserved_quantities(&s, &p, &g);
        assert!((c.mass - 1.0).abs() < 1e-12);
        assert!((c.momentum[0] - 0.5).abs() < 1e-12);
        assert!((c.kinetic - 0.1275).abs() < 1e-12);
        assert!((c.energy - 1.1275).abs() < 1e-12);
        let margin = cauchy_schwarz_check(&s, &p, &g);
        assert!((margin - (0.255f64.sqrt() - 0.5)).abs() < 1e-12, "{margin}");
    }

    #[test]
    fn constant_velocity_is_the_equality_case() {
        let g = Grid::periodic_1d(32, 1.0).unwrap();
        let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos());
        let s = PrimitiveState::new(rho.clone(), VectorField(vec![ScalarField::constant(32, -0.7)]), 0.0);
        assert!(cauchy_schwarz_check(&s, &p, &g).abs() < 1e-14);
        let s0 = PrimitiveState::new(rho, VectorField::zeros(1, 32), 0.0);
        let c = conserved_quantities(&s0, &p, &g);
        assert_eq!(c.kinetic, 0.0);
        assert_eq!(c.momentum[0], 0.0);
        assert_eq!(cauchy_schwarz_check(&s0, &p, &g), 0.0);
    }

    #[test]
    fn odd_velocity_has_zero_momentum() {
        let g = Grid::far_field(1, 40, 2.0).unwrap();
        let p = Params::new(1.0, 1.5, 0.5, 1.0, 0.0);
        let rho = ScalarField::from_fn(&g, |x| (-x[0] * x[0]).exp());
        let u = VectorField(vec![ScalarField::from_fn(&g, |x| x[0].powi(3))]);
        let s = PrimitiveState::new(rho, u, 0.0);
        assert!(conserved_quantities(&s, &p, &g).momentum[0].abs() < 1e-14);
        let r = nondecay_bound(&[s], &p, &g, 1e-12);
        assert!(r.vacuous);
        assert!(r.c_u.abs() < 1e-13);
    }

    #[test]
    fn nondecay_of_example_and_injected_defect() {
        let (g, p, s) = example(64);
        let mut zeroed = s.clone();
        zeroed.t = 0.5;
        zeroed.u[0] = ScalarField::zeros(64);
        let r = nondecay_bound(&[s, zeroed], &p, &g, 1e-12);
        assert!((r.c_u - 0.5).abs() < 1e-12);
        assert!(r.samples[0].holds);
        assert!((r.samples[0].sup_u - 0.6).abs() < 1e-3);
        let bad: Vec<_> = r.violations().collect();
        assert_eq!(bad.len(), 1);
        assert!(bad[0].momentum_drift > 0.3);
    }

    #[test]
    fn effective_flux_examples() {
        let g = Grid::periodic_1d(256, 1.0).unwrap();
        let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
        let s = PrimitiveState::new(
            ScalarField::constant(256, 1.0),
            VectorField(vec![ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin())]),
            0.0,
        );
        let (f, w) = effective_flux(&s, &p, &g);
        let exact = ScalarField::from_fn(&g, |x| 2.0 * 2.0 * PI * (2.0 * PI * x[0]).cos() - 1.0);
        assert!(f.zip_map(&exact, |a, b| a - b).max_abs() < 2e-3);
        assert_eq!(w[0].max_abs(), 0.0);

        let g2 = Grid::far_field(2, 16, 1.0).unwrap();
        let rho = ScalarField::from_fn(&g2, |x| 1.0 + 0.1 * x[0]);
        let rot = VectorField::from_fn(&g2, |x| [-x[1], x[0], 0.0]);
        let s = PrimitiveState::new(rho.clone(), rot, 0.0);
        let (f, w) = effective_flux(&s, &p, &g2);
        for q in 0..g2.len() {
            assert!((f[q] + p.pressure(rho[q])).abs() < 1e-12);
            assert!((w[0][q] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_energy_residual_vanishes() {
        let g = Grid::periodic_1d(32, 1.0).unwrap();
        let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
        let traj: Vec<_> = (0..5)
            .map(|k| PrimitiveState::new(ScalarField::constant(32, 1.3), VectorField::zeros(1, 32), 0.1 * k as f64))
            .collect();
        let b = energy_equality_residual(&traj, &p, &g, DissipationForm::Gradient);
        assert!(b.residual.iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn dissipation_forms_agree_in_1d() {
        let (g, p, s) = example(64);
        let a = dissipation_rate(&s, &p, &g, DissipationForm::Gradient);
        let b = dissipation_rate(&s, &p, &g, DissipationForm::Strain);
        assert!((a - b).abs() < 1e-12 * a);
        // rho = 1: (2 alpha + beta) |u_x|^2 = 2 * 0.01 * 4 pi^2 / 2
        assert!((a - 0.04 * PI * PI).abs() < 1e-2 * a);
    }

    #[test]
    fn constant_state_monitors() {
        let g = Grid::uniform(2, 8, 0.0, 1.0, Boundary::Periodic).unwrap();
        let p = Params::new(1.0, 1.5, 0.5, 1.0, 0.0).with_dim(2);
        let s = PrimitiveState::new(ScalarField::constant(64, 2.0), VectorField::zeros(2, 64), 0.0);
        let r = to_reform(&s, &p, &g).unwrap();
        let m = regularity_monitors(&r, &g).unwrap();
        let get = |n: &str| m.iter().find(|(k, _)| k == n).unwrap().1;
        assert!(get("phi D1").abs() < 1e-12);
        assert!(get("f D1 L3").abs() < 1e-12);
        assert!((get("phi L2") - r.phi[0]).abs() < 1e-12);
        assert!((get("varphi Linf") - r.varphi[0]).abs() < 1e-12);
    }

    #[test]
    fn u_monitors_scale_linearly() {
        let g = Grid::periodic_1d(32, 1.0).unwrap();
        let p = Params::new(1.0, 1.5, 0.5, 1.0, 0.0);
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin());
        let u = VectorField(vec![ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos())]);
        let r1 = to_reform(&PrimitiveState::new(rho.clone(), u.clone(), 0.0), &p, &g).unwrap();
        let r2 = to_reform(&PrimitiveState::new(rho, u.scaled(-3.0), 0.0), &p, &g).unwrap();
        let m1 = regularity_monitors(&r1, &g).unwrap();
        let m2 = regularity_monitors(&r2, &g).unwrap();
        for name in ["u H3", "sqrt(h) grad u L2", "h grad2 u H1"] {
            let a = m1.iter().find(|(k, _)| k == name).unwrap().1;
            let b = m2.iter().find(|(k, _)| k == name).unwrap().1;
            assert!((b - 3.0 * a).abs() < 1e-12 * b, "{name}");
        }
    }

    #[test]
    fn tracker_accumulates_trapezoid() {
        let (g, p, s) = example(32);
        let mut t = DiagnosticsTracker::new(&s, &p, &g, DissipationForm::Gradient);
        let rate = dissipation_rate(&s, &p, &g, DissipationForm::Gradient);
        let mut s1 = s.clone();
        s1.t = 0.2;
        t.advance(&s1, &g);
        assert!((t.dissipation() - 0.2 * rate).abs() < 1e-14);
        let r = to_reform(&s1, &p, &g).unwrap();
        let rec = t.record(&r, &g).unwrap();
        assert_eq!(rec.header().len(), rec.values().len());
        assert_eq!(&rec.header()[..3], &["t", "m", "M_x"]);
        assert!((rec.energy_residual - 0.2 * rate).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cauchy_schwarz_margin_nonnegative(
            rho in proptest::collection::vec(1e-3f64..10.0, 4..40),
            seed in proptest::collection::vec(-5.0f64..5.0, 40),
        ) {
            let n = rho.len();
            let g = Grid::periodic_1d(n, 1.7).unwrap();
            let p = Params::new(1.0, 1.4, 0.5, 1.0, 0.0);
            let u = VectorField(vec![ScalarField(seed[..n].to_vec())]);
            let s = PrimitiveState::new(ScalarField(rho), u, 0.0);
            let c = conserved_quantities(&s, &p, &g);
            prop_assert!(cauchy_schwarz_check(&s, &p, &g) >= -1e-12 * (1.0 + c.momentum_norm()));
        }
    }
}
