//! Maps between `(rho, u)` and the reformulated unknowns
//! `(phi, u, psi, h, varphi, f)`, plus residuals of the algebraic relations
//! tying them together.
//!
//! With `a` and `e` from [`DerivedConstants`]:
//! `phi = A gamma/(gamma-1) rho^(gamma-1)`, `h = phi^(2e)`, `varphi = 1/h`,
//! `psi = delta/(delta-1) grad rho^(delta-1) = a delta/(delta-1) grad h`,
//! `f = varphi psi = a delta grad log rho`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{PrimitiveState, ReformState, ScalarField, VectorField};
use crate::grid::Grid;
use crate::ops::{curl_residual, grad, norm, FieldRef, NormSpec};
use crate::params::{DerivedConstants, Params};

fn check_finite(f: &ScalarField, field: &'static str) -> Result<()> {
    f.check_finite(field)
}

/// `phi` from density.
pub fn phi_of_rho(rho: &ScalarField, p: &Params) -> ScalarField {
    let c = p.phi_scale();
    rho.map(|r| c * r.powf(p.gamma - 1.0))
}

/// Density from `phi`.
pub fn rho_of_phi(phi: &ScalarField, p: &Params) -> ScalarField {
    let c = p.phi_scale();
    phi.map(|x| (x / c).powf(1.0 / (p.gamma - 1.0)))
}

/// `(h, varphi) = (phi^(2e), phi^(-2e))`.
pub fn h_varphi_of_phi(phi: &ScalarField, c: &DerivedConstants) -> (ScalarField, ScalarField) {
    (phi.map(|x| x.powf(2.0 * c.e)), phi.map(|x| x.powf(-2.0 * c.e)))
}

/// `psi = a delta/(delta-1) grad h`.
pub fn psi_of_h(h: &ScalarField, p: &Params, c: &DerivedConstants, grid: &Grid) -> VectorField {
    grad(h, grid).scaled(c.a * p.delta / (p.delta - 1.0))
}

pub fn to_reform(s: &PrimitiveState, p: &Params, grid: &Grid) -> Result<ReformState> {
    let c = p.derived()?;
    s.validate(grid)?;
    let phi = phi_of_rho(&s.rho, p);
    check_finite(&phi, "phi")?;
    let (h, varphi) = h_varphi_of_phi(&phi, &c);
    check_finite(&h, "h")?;
    check_finite(&varphi, "varphi")?;
    let power = s.rho.map(|r| r.powf(p.delta - 1.0));
    check_finite(&power, "rho^(delta-1)")?;
    let psi = grad(&power, grid).scaled(p.delta / (p.delta - 1.0));
    psi.check_finite("psi")?;
    let f = psi.weighted(&varphi);
    f.check_finite("f")?;
    Ok(ReformState {
        phi,
        u: s.u.clone(),
        psi,
        h,
        varphi,
        f,
        t: s.t,
    })
}

pub fn from_reform(r: &ReformState, p: &Params) -> Result<PrimitiveState> {
    p.validate()?;
    r.phi.check_positive("phi")?;
    let rho = rho_of_phi(&r.phi, p);
    check_finite(&rho, "rho")?;
    Ok(PrimitiveState::new(rho, r.u.clone(), r.t))
}

/// L2 residuals of the relations between reformulated variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelationResiduals {
    /// `psi - a delta/(delta-1) grad h`
    pub psi_grad_h: f64,
    /// `h varphi - 1`
    pub h_varphi: f64,
    /// `f - varphi psi`
    pub f_psi_varphi: f64,
    /// `f - 2 a e delta/(delta-1) grad phi / phi`
    pub f_grad_log_phi: f64,
    /// Antisymmetric part of `grad psi`.
    pub curl_psi: f64,
    /// Antisymmetric part of `grad f`.
    pub curl_f: f64,
    /// `psi - delta/(delta-1) grad rho^(delta-1)` with `rho` recovered from `phi`.
    pub psi_primitive: f64,
}

impl RelationResiduals {
    pub fn max(&self) -> f64 {
        [
            self.psi_grad_h,
            self.h_varphi,
            self.f_psi_varphi,
            self.f_grad_log_phi,
            self.curl_psi,
            self.curl_f,
            self.psi_primitive,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn l2_vec(v: &VectorField, grid: &Grid) -> f64 {
    norm(FieldRef::Vector(v), &NormSpec::Lp(2.0), grid).unwrap_or(f64::NAN)
}

fn l2_curl(w: &VectorField, grid: &Grid) -> f64 {
    let parts = curl_residual(w, grid);
    if parts.is_empty() {
        return 0.0;
    }
    l2_vec(&VectorField(parts), grid)
}

pub fn relation_residuals(r: &ReformState, p: &Params, grid: &Grid) -> Result<RelationResiduals> {
    let c = p.derived()?;
    r.validate(grid)?;
    let psi_h = psi_of_h(&r.h, p, &c, grid);
    let hv = r.h.zip_map(&r.varphi, |h, v| h * v - 1.0);
    let f_pv = r.psi.weighted(&r.varphi);
    let k = 2.0 * c.a * c.e * p.delta / (p.delta - 1.0);
    let inv_phi = r.phi.map(|x| 1.0 / x);
    let f_log = grad(&r.phi, grid).weighted(&inv_phi).scaled(k);
    let rho = rho_of_phi(&r.phi, p);
    let psi_prim = grad(&rho.map(|x| x.powf(p.delta - 1.0)), grid).scaled(p.delta / (p.delta - 1.0));
    Ok(RelationResiduals {
        psi_grad_h: l2_vec(&r.psi.axpy(-1.0, &psi_h), grid),
        h_varphi: norm(FieldRef::Scalar(&hv), &NormSpec::Lp(2.0), grid)?,
        f_psi_varphi: l2_vec(&r.f.axpy(-1.0, &f_pv), grid),
        f_grad_log_phi: l2_vec(&r.f.axpy(-1.0, &f_log), grid),
        curl_psi: l2_curl(&r.psi, grid),
        curl_f: l2_curl(&r.f, grid),
        psi_primitive: l2_vec(&r.psi.axpy(-1.0, &psi_prim), grid),
    })
}

/// Checks that a reformulated state is physically meaningful before it is
/// used as data.
pub fn ensure_consistent(r: &ReformState, p: &Params, grid: &Grid, tol: f64) -> Result<RelationResiduals> {
    let res = relation_residuals(r, p, grid)?;
    if res.h_varphi > tol {
        return Err(Error::InvalidInput(format!(
            "h varphi - 1 residual {:e} exceeds {tol:e}",
            res.h_varphi
        )));
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use proptest::prelude::*;

    fn params() -> Params {
        Params::new(1.0, 2.0, 0.5, 1.0, 0.0)
    }

    #[test]
    fn constant_density() {
        let g = Grid::periodic_1d(8, 1.0).unwrap();
        let s = PrimitiveState::new(ScalarField::constant(8, 1.0), VectorField::zeros(1, 8), 0.0);
        let r = to_reform(&s, &params(), &g).unwrap();
        assert!(r.phi.iter().all(|&x| (x - 2.0).abs() < 1e-15));
        assert!(r.h.iter().all(|&x| (x - 0.5f64.sqrt()).abs() < 1e-15));
        assert!(r.varphi.iter().all(|&x| (x - 2f64.sqrt()).abs() < 1e-15));
        assert_eq!(r.psi[0].max_abs(), 0.0);
        assert_eq!(r.f[0].max_abs(), 0.0);
        assert!(relation_residuals(&r, &params(), &g).unwrap().max() <= 1e-12);
    }

    #[test]
    fn gaussian_psi_matches_symbolic() {
        let err = |n: usize| {
            let g = Grid::far_field(1, n, 2.0).unwrap();
            let rho = ScalarField::from_fn(&g, |x| (-x[0] * x[0]).exp());
            let s = PrimitiveState::new(rho, VectorField::zeros(1, n), 0.0);
            let r = to_reform(&s, &params(), &g).unwrap();
            let exact = ScalarField::from_fn(&g, |x| -x[0] * (0.5 * x[0] * x[0]).exp());
            r.psi[0].zip_map(&exact, |a, b| a - b).max_abs() / exact.max_abs()
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 0.05);
        assert!((e1 / e2).log2() > 1.8);
    }

    #[test]
    fn from_reform_examples() {
        let p = params();
        let r = ReformState {
            phi: ScalarField::constant(4, 2.0),
            u: VectorField::zeros(1, 4),
            psi: VectorField::zeros(1, 4),
            h: ScalarField::constant(4, 1.0),
            varphi: ScalarField::constant(4, 1.0),
            f: VectorField::zeros(1, 4),
            t: 0.0,
        };
        let s = from_reform(&r, &p).unwrap();
        assert!(s.rho.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let p3 = Params::new(0.7, 1.4, 0.5, 1.0, 0.0);
        let r3 = ReformState {
            phi: ScalarField::constant(4, p3.phi_scale()),
            ..r
        };
        assert!(from_reform(&r3, &p3).unwrap().rho.iter().all(|&x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn rejects_nonpositive() {
        let g = Grid::periodic_1d(4, 1.0).unwrap();
        let s = PrimitiveState::new(ScalarField(vec![1.0, 0.0, 1.0, 1.0]), VectorField::zeros(1, 4), 0.0);
        assert!(matches!(to_reform(&s, &params(), &g), Err(Error::NonPositive { node: 1, .. })));
    }

    #[test]
    fn overflow_is_an_error() {
        let g = Grid::periodic_1d(4, 1.0).unwrap();
        let s = PrimitiveState::new(ScalarField(vec![1.0, 1e-320, 1.0, 1.0]), VectorField::zeros(1, 4), 0.0);
        let p = Params::new(1.0, 3.0, 0.1, 1.0, 0.0);
        assert!(to_reform(&s, &p, &g).is_err());
    }

    #[test]
    fn smooth_state_residuals() {
        let g = Grid::uniform(2, 32, 0.0, 1.0, Boundary::Periodic).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let rho = ScalarField::from_fn(&g, |x| 1.5 + (tau * x[0]).sin() * (tau * x[1]).cos());
        let s = PrimitiveState::new(rho, VectorField::zeros(2, g.len()), 0.0);
        let r = to_reform(&s, &params(), &g).unwrap();
        let res = relation_residuals(&r, &params(), &g).unwrap();
        assert!(res.h_varphi <= 1e-12 && res.f_psi_varphi <= 1e-12);
        assert!(res.psi_grad_h <= 1e-10 && res.curl_psi <= 1e-10);
        assert!(res.f_grad_log_phi < 0.1);
    }

    #[test]
    fn injected_defect_detected() {
        let g = Grid::periodic_1d(16, 1.0).unwrap();
        let rho = ScalarField::from_fn(&g, |x| 2.0 + (6.0 * x[0]).cos());
        let s = PrimitiveState::new(rho, VectorField::zeros(1, 16), 0.0);
        let mut r = to_reform(&s, &params(), &g).unwrap();
        r.psi[0][5] += 1.0;
        let res = relation_residuals(&r, &params(), &g).unwrap();
        assert!((res.psi_grad_h - g.cell_volume().sqrt()).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn round_trip(vals in proptest::collection::vec(0.01f64..100.0, 8), gamma in 1.1f64..3.0, delta in 0.05f64..0.95) {
            let g = Grid::periodic_1d(8, 1.0).unwrap();
            let p = Params::new(1.3, gamma, delta, 1.0, 0.0);
            let s = PrimitiveState::new(ScalarField(vals), VectorField::zeros(1, 8), 0.0);
            let r = to_reform(&s, &p, &g).unwrap();
            let back = from_reform(&r, &p).unwrap();
            for (a, b) in back.rho.iter().zip(s.rho.iter()) {
                prop_assert!(((a - b) / b).abs() <= 1e-12);
            }
            let again = to_reform(&back, &p, &g).unwrap();
            for (a, b) in again.varphi.iter().zip(r.varphi.iter()) {
                prop_assert!(((a - b) / b).abs() <= 1e-12);
            }
        }

        #[test]
        fn phi_monotone_in_rho(a in 0.01f64..10.0, b in 0.01f64..10.0) {
            let p = params();
            let f = phi_of_rho(&ScalarField(vec![a, b]), &p);
            prop_assert_eq!(a < b, f[0] < f[1]);
        }
    }
}
