//! Preconditioned conjugate gradients for the symmetric systems of the
//! implicit momentum step and the Lamé solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrylovConfig {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub preconditioner: Preconditioner,
}

fn default_rtol() -> f64 {
    1e-10
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            rtol: default_rtol(),
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Final true relative residual `|b - A x| / |b|`.
    pub residual: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`.
///
/// `project`, when given, is applied to the right-hand side, the residuals
/// and the iterate; it must be the orthogonal projector onto the range of
/// `A` for singular systems.
pub fn pcg(
    apply: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: Option<&[f64]>,
    diag: Option<&[f64]>,
    project: Option<&dyn Fn(&mut [f64])>,
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, KrylovReport)> {
    let n = b.len();
    let max_iter = cfg.max_iter.unwrap_or(10 * n).max(1);
    let proj = |v: &mut [f64]| {
        if let Some(p) = project {
            p(v)
        }
    };
    let mut rhs = b.to_vec();
    proj(&mut rhs);
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    proj(&mut x);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            KrylovReport {
                iterations: 0,
                residual: 0.0,
                history: vec![0.0],
            },
        ));
    }
    let use_diag = match cfg.preconditioner {
        Preconditioner::Jacobi => diag,
        Preconditioner::None => None,
    };
    let precond = |r: &[f64], z: &mut [f64]| match use_diag {
        Some(d) => {
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                *zi = if *di > 0.0 { ri / di } else { *ri };
            }
        }
        None => z.copy_from_slice(r),
    };

    let mut ax = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    // Restarts recompute the true residual so the reported value is honest.
    for _restart in 0..4 {
        apply(&x, &mut ax);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        proj(&mut r);
        let rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
        if rel <= cfg.rtol {
            return Ok((
                x,
                KrylovReport {
                    iterations,
                    residual: rel,
                    history,
                },
            ));
        }
        if iterations >= max_iter {
            break;
        }
        let mut z = vec![0.0; n];
        precond(&r, &mut z);
        proj(&mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        while iterations < max_iter {
            apply(&p, &mut ap);
            proj(&mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            iterations += 1;
            let rel = dot(&r, &r).sqrt() / bnorm;
            history.push(rel);
            if !rel.is_finite() {
                break;
            }
            if rel <= 0.5 * cfg.rtol {
                break;
            }
            precond(&r, &mut z);
            proj(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        proj(&mut x);
    }
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    proj(&mut r);
    let rel = dot(&r, &r).sqrt() / bnorm;
    if rel <= cfg.rtol {
        return Ok((
            x,
            KrylovReport {
                iterations,
                residual: rel,
                history,
            },
        ));
    }
    Err(Error::KrylovNonConvergence {
        iterations,
        residual: rel,
        history,
    })
}
