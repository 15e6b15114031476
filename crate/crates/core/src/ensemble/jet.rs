//! Truncated Taylor arithmetic (value and derivatives up to order 4).

use std::ops::{Add, Mul, Neg, Sub};

pub const ORDER: usize = 5;

/// Normalized Taylor coefficients: `c[k] = f^(k)(x) / k!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub c: [f64; ORDER],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = v;
        Jet { c }
    }

    pub fn variable(x: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = x;
        c[1] = 1.0;
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Derivatives f, f', f'', f''', f''''.
    pub fn derivatives(&self) -> [f64; ORDER] {
        let mut d = self.c;
        let mut fact = 1.0;
        for (k, dk) in d.iter_mut().enumerate().skip(1) {
            fact *= k as f64;
            *dk *= fact;
        }
        d
    }

    pub fn scale(self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= s);
        Jet { c }
    }

    pub fn exp(self) -> Self {
        let mut h = [0.0; ORDER];
        h[0] = self.c[0].exp();
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * h[k - j];
            }
            h[k] = s / k as f64;
        }
        Jet { c: h }
    }

    pub fn recip(self) -> Self {
        let mut g = [0.0; ORDER];
        let f0 = self.c[0];
        g[0] = 1.0 / f0;
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.c[j] * g[k - j];
            }
            g[k] = -s / f0;
        }
        Jet { c: g }
    }

    pub fn powi(self, n: u32) -> Self {
        let mut r = Jet::constant(1.0);
        for _ in 0..n {
            r = r * self;
        }
        r
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(o.c) {
            *a += b;
        }
        Jet { c }
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
        let mut c = [0.0; ORDER];
        for i in 0..ORDER {
            for j in 0..ORDER - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        let mut c = self.c;
        c[0] += o;
        Jet { c }
    }
}

/// Smooth cutoff: 1 on |s| <= 1, 0 on |s| >= 2, C-infinity in between.
pub fn cutoff(s: Jet) -> Jet {
    let a = if s.c[0] < 0.0 { -s } else { s };
    let av = a.c[0];
    if av <= 1.0 {
        return Jet::constant(1.0);
    }
    if av >= 2.0 {
        return Jet::constant(0.0);
    }
    let e = (Jet::constant(2.0) - a).recip() - (a + (-1.0)).recip();
    if e.c[0] > 600.0 {
        return Jet::constant(0.0);
    }
    if e.c[0] < -600.0 {
        return Jet::constant(1.0);
    }
    (e.exp() + 1.0).recip()
}

pub fn cutoff_value(s: f64) -> f64 {
    cutoff(Jet::constant(s)).c[0]
}
