//! Truncated Taylor series in one variable, used to differentiate radial
//! profiles exactly through the chain rule.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ORDER: usize = 5;

/// Coefficients `c_k = f^(k)(r0) / k!` for `k < ORDER`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; ORDER]);

impl Jet {
    pub fn constant(c: f64) -> Self {
        let mut j = [0.0; ORDER];
        j[0] = c;
        Jet(j)
    }

    /// The independent variable at `r0`.
    pub fn var(r0: f64) -> Self {
        let mut j = [0.0; ORDER];
        j[0] = r0;
        j[1] = 1.0;
        Jet(j)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `k`-th derivative at the expansion point.
    pub fn deriv(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.0[k] * fact
    }

    /// Jet of the derivative; the top coefficient is lost.
    pub fn d(&self) -> Self {
        let mut j = [0.0; ORDER];
        for k in 0..ORDER - 1 {
            j[k] = (k + 1) as f64 * self.0[k + 1];
        }
        Jet(j)
    }

    pub fn scale(&self, c: f64) -> Self {
        Jet(self.0.map(|x| c * x))
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    /// `f^p`. Integer powers also work at `f(r0) = 0`.
    pub fn powf(&self, p: f64) -> Self {
        let f = &self.0;
        if p.fract() == 0.0 && p >= 0.0 && p <= 16.0 {
            let mut out = Jet::constant(1.0);
            for _ in 0..p as usize {
                out = out * *self;
            }
            return out;
        }
        let mut h = [0.0; ORDER];
        h[0] = f[0].powf(p);
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * f[j] * h[k - j];
            }
            h[k] = s / (k as f64 * f[0]);
        }
        Jet(h)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut j = self.0;
        for (a, b) in j.iter_mut().zip(o.0) {
            *a += b;
        }
        Jet(j)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut j = [0.0; ORDER];
        for (k, slot) in j.iter_mut().enumerate() {
            *slot = (0..=k).map(|i| self.0[i] * o.0[k - i]).sum();
        }
        Jet(j)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        let mut j = self.0;
        j[0] += c;
        Jet(j)
    }
}
