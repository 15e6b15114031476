//! Modified Bessel functions I_n and K_n of integer order and complex
//! argument, returned in log-scaled form.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64 as C;
use serde::Serialize;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE: f64 = 1e250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Series,
    BoundedOrderAsymptotic,
    UniformLargeOrder,
    /// Steed continued fraction for K_0, K_1 followed by upward recurrence.
    ContinuedFraction,
}

/// `value * exp(log_scale)`; `value` has unit modulus unless the function vanishes.
#[derive(Debug, Clone, Copy)]
pub struct BesselEval {
    pub value: C,
    pub log_scale: f64,
    pub regime: Regime,
}

impl BesselEval {
    fn normalized(value: C, log_scale: f64, regime: Regime) -> Self {
        let m = value.norm();
        if m == 0.0 || !m.is_finite() {
            return BesselEval { value, log_scale, regime };
        }
        BesselEval {
            value: value / m,
            log_scale: log_scale + m.ln(),
            regime,
        }
    }

    fn from_ln(ln_value: C, regime: Regime) -> Self {
        BesselEval {
            value: C::from_polar(1.0, ln_value.im),
            log_scale: ln_value.re,
            regime,
        }
    }

    /// Plain complex value (may overflow for large arguments).
    pub fn to_complex(&self) -> C {
        self.value * self.log_scale.exp()
    }

    /// Complex logarithm (principal argument of `value`).
    pub fn ln(&self) -> C {
        self.value.ln() + self.log_scale
    }

    pub fn is_zero(&self) -> bool {
        self.value.norm() == 0.0
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn series_threshold(nu: u32) -> f64 {
    let n = nu as f64;
    12f64.max(n * n / 3.0)
}

/// Sum of `a + b` where each is given as (value, log_scale).
fn log_add(a: (C, f64), b: (C, f64)) -> (C, f64) {
    let s = a.1.max(b.1);
    if !s.is_finite() {
        return if a.1 > b.1 { a } else { b };
    }
    (a.0 * (a.1 - s).exp() + b.0 * (b.1 - s).exp(), s)
}

/// I_nu(z).
pub fn bessel_i(nu: u32, z: C) -> Result<BesselEval> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return invalid("non-finite Bessel argument");
    }
    if z.norm() == 0.0 {
        let v = if nu == 0 { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
        return Ok(BesselEval { value: v, log_scale: 0.0, regime: Regime::Series });
    }
    if z.norm() <= series_threshold(nu) {
        Ok(i_series(nu, z))
    } else {
        Ok(i_hankel(nu, z))
    }
}

/// I_nu(z) evaluated in a prescribed regime, bypassing automatic selection.
/// The uniform regime uses two correction terms.
pub fn bessel_i_in(nu: u32, z: C, regime: Regime) -> Result<BesselEval> {
    if z.norm() == 0.0 || !(z.re.is_finite() && z.im.is_finite()) {
        return invalid("forced regimes need a finite nonzero argument");
    }
    match regime {
        Regime::Series => Ok(i_series(nu, z)),
        Regime::BoundedOrderAsymptotic => Ok(i_hankel(nu, z)),
        Regime::UniformLargeOrder => Ok(bessel_uniform_large_order(nu, z / nu.max(1) as f64, 2)?.0),
        Regime::ContinuedFraction => invalid("the continued fraction is only used for K_nu"),
    }
}

/// K_nu(z) evaluated in a prescribed regime, bypassing automatic selection.
pub fn bessel_k_in(nu: u32, z: C, regime: Regime) -> Result<BesselEval> {
    if z.norm() == 0.0 || !(z.re.is_finite() && z.im.is_finite()) {
        return invalid("forced regimes need a finite nonzero argument");
    }
    match regime {
        Regime::Series => Ok(BesselEval::normalized(k_series(nu, z), 0.0, Regime::Series)),
        Regime::ContinuedFraction if z.re > 0.0 && z.norm() >= 2.0 => Ok(k_recurrence(nu, z, false)),
        Regime::ContinuedFraction => Err(Error::Domain("continued fraction needs Re z > 0 and |z| >= 2".into())),
        Regime::BoundedOrderAsymptotic => Ok(k_hankel(nu, z)),
        Regime::UniformLargeOrder => Ok(bessel_uniform_large_order(nu, z / nu.max(1) as f64, 2)?.1),
    }
}

/// K_nu(z), principal branch with the cut on the negative real axis.
pub fn bessel_k(nu: u32, z: C) -> Result<BesselEval> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return invalid("non-finite Bessel argument");
    }
    if z.norm() == 0.0 {
        return Err(Error::Domain("K_nu has a pole at the origin".into()));
    }
    if z.norm() > series_threshold(nu) {
        return Ok(k_hankel(nu, z));
    }
    if z.re < 0.0 {
        // Analytic continuation across the imaginary axis.
        let zr = -z;
        let k = k_right_half(nu, zr);
        let i = i_series(nu, zr);
        let sign = if nu.is_multiple_of(2) { 1.0 } else { -1.0 };
        let ipi = if z.im >= 0.0 { C::new(0.0, -PI) } else { C::new(0.0, PI) };
        let (v, s) = log_add((k.value * sign, k.log_scale), (i.value * ipi, i.log_scale));
        return Ok(BesselEval::normalized(v, s, k.regime));
    }
    Ok(k_right_half(nu, z))
}

fn i_series(nu: u32, z: C) -> BesselEval {
    let q = z * z / 4.0;
    let mut term = C::new(1.0, 0.0);
    let mut sum = term;
    let mut shift = 0.0;
    let zabs = z.norm();
    let mut k = 1u32;
    loop {
        term *= q / ((k as f64) * ((k + nu) as f64));
        sum += term;
        if sum.norm() > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            shift += RESCALE.ln();
        }
        if (k as f64) > zabs && term.norm() <= 1e-17 * sum.norm() {
            break;
        }
        if k > 100_000 {
            break;
        }
        k += 1;
    }
    let ln_pref = (z / 2.0).ln() * nu as f64 - ln_factorial(nu);
    let value = sum * C::from_polar(1.0, ln_pref.im);
    BesselEval::normalized(value, ln_pref.re + shift, Regime::Series)
}

/// Asymptotic sum of a_k(nu)/z^k with optional alternating signs, truncated
/// at the smallest term.
fn hankel_sum(nu: u32, z: C, alternating: bool) -> C {
    let mu = 4.0 * (nu as f64) * (nu as f64);
    let mut term = C::new(1.0, 0.0);
    let mut sum = term;
    let mut prev = f64::INFINITY;
    for k in 1..200u32 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (8.0 * k as f64 * z);
        let m = next.norm();
        if m > prev {
            break;
        }
        prev = m;
        term = next;
        if alternating && k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        if m <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn i_hankel(nu: u32, z: C) -> BesselEval {
    if z.im < 0.0 {
        let e = i_hankel(nu, z.conj());
        return BesselEval { value: e.value.conj(), ..e };
    }
    let ell = z.re.abs();
    let pref = (2.0 * PI * z).sqrt().inv();
    let grow = (z - ell).exp() * hankel_sum(nu, z, true);
    let phase = C::new(0.0, (nu as f64 + 0.5) * PI).exp();
    let decay = (-z - ell).exp() * phase * hankel_sum(nu, z, false);
    BesselEval::normalized(pref * (grow + decay), ell, Regime::BoundedOrderAsymptotic)
}

fn k_hankel(nu: u32, z: C) -> BesselEval {
    let pref = (C::new(PI, 0.0) / (2.0 * z)).sqrt();
    let value = pref * C::from_polar(1.0, -z.im) * hankel_sum(nu, z, false);
    BesselEval::normalized(value, -z.re, Regime::BoundedOrderAsymptotic)
}

/// K_nu for Re z >= 0 and moderate |z|.
fn k_right_half(nu: u32, z: C) -> BesselEval {
    k_recurrence(nu, z, z.norm() <= 2.0)
}

/// K_0, K_1 from the ascending series or Steed's fraction, then upward recurrence.
fn k_recurrence(nu: u32, z: C, series: bool) -> BesselEval {
    let (k0, k1, scale, regime) = if series {
        (k_series(0, z), k_series(1, z), 0.0, Regime::Series)
    } else {
        let (a, b) = k01_steed(z);
        (a, b, -z.re, Regime::ContinuedFraction)
    };
    if nu == 0 {
        return BesselEval::normalized(k0, scale, regime);
    }
    let mut prev = k0;
    let mut cur = k1;
    let mut shift = scale;
    for n in 1..nu {
        let next = prev + cur * (2.0 * n as f64) / z;
        prev = cur;
        cur = next;
        if cur.norm() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            shift += RESCALE.ln();
        }
    }
    BesselEval::normalized(cur, shift, regime)
}

fn digamma_int(n: u32) -> f64 {
    // psi(n) for integer n >= 1
    -EULER_GAMMA + (1..n).map(|k| 1.0 / k as f64).sum::<f64>()
}

/// Ascending series for K_n (integer n), unscaled; intended for |z| <= 2.
fn k_series(n: u32, z: C) -> C {
    let h = z / 2.0;
    let q = h * h;
    let mut finite = C::new(0.0, 0.0);
    if n > 0 {
        let mut pw = C::new(1.0, 0.0);
        for k in 0..n {
            let coef = (ln_factorial(n - k - 1) - ln_factorial(k)).exp();
            finite += pw * coef;
            pw *= -q;
        }
        finite *= 0.5 * h.powi(-(n as i32));
    }
    let i_n = i_series(n, z).to_complex();
    let sign = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
    let log_part = h.ln() * i_n * sign;
    let mut tail = C::new(0.0, 0.0);
    let mut pw = C::new(1.0, 0.0);
    for k in 0..200u32 {
        let coef = (digamma_int(k + 1) + digamma_int(n + k + 1))
            * (-(ln_factorial(k) + ln_factorial(n + k))).exp();
        let t = pw * coef;
        tail += t;
        if k > 2 && t.norm() < 1e-18 * tail.norm().max(1e-300) {
            break;
        }
        pw *= q;
    }
    let tsign = if n.is_multiple_of(2) { 0.5 } else { -0.5 };
    tail *= h.powi(n as i32) * tsign;
    finite + log_part + tail
}

/// Steed's continued fraction for K_0 and K_1, scaled by exp(z).
fn k01_steed(x: C) -> (C, C) {
    let one = C::new(1.0, 0.0);
    let mut b = 2.0 * (one + x);
    let mut d = b.inv();
    let mut h = d;
    let mut delh = d;
    let mut q1 = C::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = C::new(a1, 0.0);
    let mut c = a1;
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 1..20_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += qnew * c;
        b += 2.0;
        d = (b + d * a).inv();
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            break;
        }
    }
    h *= a1;
    let k0 = (C::new(PI, 0.0) / (2.0 * x)).sqrt() * C::from_polar(1.0, -x.im) / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Uniform large-order expansion: returns (I_nu(nu*zeta), K_nu(nu*zeta))
/// with `terms` correction terms (0, 1 or 2).
pub fn bessel_uniform_large_order(nu: u32, zeta: C, terms: usize) -> Result<(BesselEval, BesselEval)> {
    if nu < 10 {
        return invalid(format!("uniform expansion needs nu >= 10, got {nu}"));
    }
    if terms > 2 {
        return invalid("at most two correction terms are implemented");
    }
    if zeta.norm() == 0.0 || zeta.arg().abs() > PI / 2.0 - 1e-3 {
        return Err(Error::Domain(format!("argument {zeta} outside |arg| < pi/2")));
    }
    let n = nu as f64;
    let one = C::new(1.0, 0.0);
    let sq = (one + zeta * zeta).sqrt();
    let t = sq.inv();
    let phi = sq + (zeta / (one + sq)).ln();
    let u1 = (3.0 * t - 5.0 * t.powi(3)) / 24.0;
    let u2 = (81.0 * t.powi(2) - 462.0 * t.powi(4) + 385.0 * t.powi(6)) / 1152.0;
    let mut ci = one;
    let mut ck = one;
    if terms >= 1 {
        ci += u1 / n;
        ck -= u1 / n;
    }
    if terms >= 2 {
        ci += u2 / (n * n);
        ck += u2 / (n * n);
    }
    let quarter = sq.sqrt().ln();
    let ln_i = phi * n - 0.5 * (2.0 * PI * n).ln() - quarter + ci.ln();
    let ln_k = 0.5 * (PI / (2.0 * n)).ln() - phi * n - quarter + ck.ln();
    Ok((
        BesselEval::from_ln(ln_i, Regime::UniformLargeOrder),
        BesselEval::from_ln(ln_k, Regime::UniformLargeOrder),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: C, b: C) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn i0_at_origin() {
        let e = bessel_i(0, C::new(0.0, 0.0)).unwrap();
        assert_eq!(e.to_complex(), C::new(1.0, 0.0));
    }

    #[test]
    fn known_real_values() {
        // Tabulated values.
        let i0 = bessel_i(0, C::new(1.0, 0.0)).unwrap().to_complex();
        assert!((i0.re - 1.266_065_877_752_008_4).abs() < 1e-15);
        let k0 = bessel_k(0, C::new(1.0, 0.0)).unwrap().to_complex();
        assert!((k0.re - 0.421_024_438_240_708_3).abs() < 1e-14);
        let k1 = bessel_k(1, C::new(3.0, 0.0)).unwrap().to_complex();
        assert!((k1.re - 0.040_156_431_128_194_18).abs() < 1e-15);
    }

    #[test]
    fn k_continuity_across_series_and_fraction() {
        let z1 = C::new(1.999_999_9, 0.3);
        let z2 = C::new(2.000_000_1, 0.3);
        let a = bessel_k(1, z1).unwrap().to_complex();
        let b = bessel_k(1, z2).unwrap().to_complex();
        assert!(rel(a, b) < 1e-6);
    }

    #[test]
    fn conjugate_symmetry() {
        let z = C::new(15.0, 7.0);
        let a = bessel_i(3, z).unwrap().to_complex();
        let b = bessel_i(3, z.conj()).unwrap().to_complex();
        assert!(rel(a, b.conj()) < 1e-13);
    }

    #[test]
    fn uniform_rejects_bad_sector() {
        assert!(bessel_uniform_large_order(50, C::new(-1.0, 0.1), 2).is_err());
        assert!(bessel_uniform_large_order(5, C::new(1.0, 0.0), 2).is_err());
    }

    #[test]
    fn scaled_values_do_not_overflow() {
        let e = bessel_i(0, C::new(1e6, 0.0)).unwrap();
        assert!(e.value.norm().is_finite() && (e.log_scale - 1e6).abs() < 20.0);
        let k = bessel_k(0, C::new(1e6, 3.0)).unwrap();
        assert!(k.value.norm().is_finite() && (k.log_scale + 1e6).abs() < 20.0);
    }
}
