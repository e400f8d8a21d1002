//! Second-order forward-mode differentiation of scalar closed forms.
//!
//! A [`Jet`] carries a value together with its first and second derivative
//! with respect to a single parameter. Composing closed-form expressions on
//! jets yields derivatives exact to rounding, which is what the analytic
//! generating curves use to feed the curvature formulas.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, d1: 0.0, d2: 0.0 }
    }

    /// The independent variable evaluated at `v`.
    pub const fn var(v: f64) -> Self {
        Self { v, d1: 1.0, d2: 0.0 }
    }

    /// Compose with a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    pub fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Self {
            v: f,
            d1: df * self.d1,
            d2: ddf * self.d1 * self.d1 + df * self.d2,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn exp_m1(self) -> Self {
        let e = self.v.exp();
        self.chain(self.v.exp_m1(), e, e)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(self, k: i32) -> Self {
        match k {
            0 => Self::constant(1.0),
            1 => self,
            _ => {
                let kf = k as f64;
                self.chain(
                    self.v.powi(k),
                    kf * self.v.powi(k - 1),
                    kf * (kf - 1.0) * self.v.powi(k - 2),
                )
            }
        }
    }

    /// `(e^w - 1) / w`, continuous through `w = 0`.
    pub fn exprel(self) -> Self {
        let (f, df, ddf) = exprel_derivs(self.v);
        self.chain(f, df, ddf)
    }
}

/// Value, first and second derivative of `(e^w - 1)/w`.
pub fn exprel_derivs(w: f64) -> (f64, f64, f64) {
    if w.abs() < 0.1 {
        // sum_k w^k/(k+1)!
        let mut f = 0.0;
        let mut df = 0.0;
        let mut ddf = 0.0;
        let mut fact = 1.0; // (k+1)!
        for k in 0..20 {
            fact *= (k + 1) as f64;
            let kf = k as f64;
            f += w.powi(k) / fact;
            if k >= 1 {
                df += kf * w.powi(k - 1) / fact;
            }
            if k >= 2 {
                ddf += kf * (kf - 1.0) * w.powi(k - 2) / fact;
            }
        }
        (f, df, ddf)
    } else {
        let e = w.exp();
        let em1 = w.exp_m1();
        let f = em1 / w;
        let df = (w * e - em1) / (w * w);
        let ddf = (w * w * e - 2.0 * (w * e - em1)) / (w * w * w);
        (f, df, ddf)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let q = self.v / o.v;
        let d1 = (self.d1 - q * o.d1) / o.v;
        let d2 = (self.d2 - 2.0 * d1 * o.d1 - q * o.d2) / o.v;
        Jet { v: q, d1, d2 }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        Jet { v: self.v + c, ..self }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        Jet { v: self.v - c, ..self }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet {
            v: self.v * c,
            d1: self.d1 * c,
            d2: self.d2 * c,
        }
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self * (1.0 / c)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        -j + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, j: Jet) -> Jet {
        j.recip() * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> (f64, f64) {
        let h = 1e-4;
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        (d1, d2)
    }

    #[test]
    fn composite_matches_finite_differences() {
        let g = |u: Jet| (u.sin() * u.cosh() + 3.0).sqrt() / (2.0 + u.cos().powi(2));
        let gf = |u: f64| (u.sin() * u.cosh() + 3.0).sqrt() / (2.0 + u.cos().powi(2));
        for &x in &[-1.3, 0.0, 0.4, 2.1] {
            let j = g(Jet::var(x));
            let (d1, d2) = fd(gf, x);
            assert!((j.v - gf(x)).abs() < 1e-15);
            assert!((j.d1 - d1).abs() < 1e-7, "{} vs {}", j.d1, d1);
            assert!((j.d2 - d2).abs() < 1e-5, "{} vs {}", j.d2, d2);
        }
    }

    #[test]
    fn exprel_is_smooth_across_branch() {
        for &w in &[-0.1000001, -0.0999999, 0.0999999, 0.1000001] {
            let (f, df, ddf) = exprel_derivs(w);
            assert!((f - w.exp_m1() / w).abs() < 1e-15);
            let (d1, d2) = fd(|x| x.exp_m1() / x, w);
            assert!((df - d1).abs() < 1e-7);
            assert!((ddf - d2).abs() < 1e-5);
        }
        assert_eq!(exprel_derivs(0.0), (1.0, 0.5, 1.0 / 3.0));
    }
}
