//! Deformed-Wishart correlation kernel: contour-integral evaluation,
//! conjugation, saddle points and adapted contours, the decomposed kernels,
//! and comparison with the sine kernel.

mod brute;
mod contour;
mod critical;
mod decomp;
mod raw;
mod sine;

pub use brute::{brute_force_correlations, deformed_wishart_density, transition_density, BruteForce};
pub use contour::{
    build_contours, circle_contours, rectangle_contours, ArcShape, ContourLabel, ContourPath, KernelContours,
    Node, PathPiece,
};
pub use critical::{
    critical_points_empirical, critical_points_limit, limit_exponent_derivatives, CriticalFamily,
    CriticalKind, CriticalPoints, Exponent,
};
pub use decomp::{
    divided_difference_g, eval_kernel_bessel_replaced, eval_kernel_decomposed, eval_kernel_decomposed_with, theta,
    theta1, EndpointForm, KernelDecomposition,
};
pub use raw::{eval_kernel_raw, eval_kernel_raw_scaled, KERNEL_NORMALIZATION};
pub use sine::{sine_limit_check, SineRow};

use crate::error::{invalid, Result};
use num_complex::Complex64 as C;
use serde::Serialize;
use std::f64::consts::PI;

/// Parameters of a kernel evaluation at the 1/4 variance scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleConfig {
    pub n: usize,
    pub lambda: f64,
    pub a: f64,
    /// S = a^2 / N.
    pub s: f64,
    pub nu: u32,
    /// Limit ratio p/N used by the limiting exponent.
    pub gamma: f64,
    pub u_star: f64,
    /// Conjugation constant; `None` until fixed from a critical point.
    pub b: Option<f64>,
    pub zeta: f64,
    /// Bulk margin epsilon.
    pub eps: f64,
    /// The endpoints x_1 sit at Re = eps / endpoint_divisor.
    pub endpoint_divisor: f64,
    /// Distance between the offset w-lines and the z-contour crossing, in units of sqrt(S).
    pub offset: f64,
    /// Relative tolerance of the node-doubling loop.
    pub tol: f64,
}

impl SaddleConfig {
    /// a^2 = N^(lambda - 1), S = a^2 / N.
    pub fn new(n: usize, lambda: f64, nu: u32, gamma: f64, u_star: f64) -> Result<Self> {
        if n == 0 {
            return invalid("N must be positive");
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return invalid(format!("lambda must lie in (0,1), got {lambda}"));
        }
        let a2 = (n as f64).powf(lambda - 1.0);
        Self::build(n, lambda, a2, nu, gamma, u_star)
    }

    /// Explicit S (so a^2 = N S); lambda is derived where defined.
    pub fn with_scale(n: usize, s: f64, nu: u32, gamma: f64, u_star: f64) -> Result<Self> {
        if n == 0 || !(s > 0.0) {
            return invalid("need N >= 1 and S > 0");
        }
        let a2 = n as f64 * s;
        let lambda = if n > 1 { 1.0 + a2.ln() / (n as f64).ln() } else { f64::NAN };
        Self::build(n, lambda, a2, nu, gamma, u_star)
    }

    fn build(n: usize, lambda: f64, a2: f64, nu: u32, gamma: f64, u_star: f64) -> Result<Self> {
        if !(gamma >= 1.0) {
            return invalid(format!("gamma must be >= 1, got {gamma}"));
        }
        Ok(SaddleConfig {
            n,
            lambda,
            a: a2.sqrt(),
            s: a2 / n as f64,
            nu,
            gamma,
            u_star,
            b: None,
            zeta: 0.01,
            eps: 0.1,
            endpoint_divisor: 180.0,
            offset: 0.5,
            tol: 1e-7,
        })
    }

    pub fn a2(&self) -> f64 {
        self.a * self.a
    }

    /// Coefficient of ln w in the exponent: S nu when gamma > 1, else 0.
    pub(crate) fn log_coefficient(&self) -> f64 {
        if self.gamma > 1.0 {
            self.s * self.nu as f64
        } else {
            0.0
        }
    }
}

/// Entry variance of W at which the kernel is formulated.
pub const KERNEL_ENTRY_VARIANCE: f64 = 0.25;

/// Spectrum of W W^*/N for entries with E|W_ij|^2 = `entry_variance`,
/// rescaled to the kernel's entry variance.
pub fn to_kernel_scale(eigs: &[f64], entry_variance: f64) -> Vec<f64> {
    let f = KERNEL_ENTRY_VARIANCE / entry_variance;
    eigs.iter().map(|e| e * f).collect()
}

/// sin(pi (x - y)) / (pi (x - y)), equal to 1 on the diagonal.
pub fn sine_kernel(x: f64, y: f64) -> f64 {
    let d = PI * (x - y);
    if d.abs() < 1e-8 {
        1.0 - d * d / 6.0
    } else {
        d.sin() / d
    }
}

/// K^b(u, v) = K(u, v) exp(2b (sqrt v - sqrt u) / S), applied to the logarithm.
pub fn conjugate_kernel(k: C, u: f64, v: f64, b: f64, s: f64) -> C {
    if k.norm() == 0.0 {
        return k;
    }
    let shift = 2.0 * b * (v.sqrt() - u.sqrt()) / s;
    if shift == 0.0 {
        return k;
    }
    C::from_polar((k.norm().ln() + shift).exp(), k.arg())
}

/// A complex number held as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: C,
    pub log_scale: f64,
}

impl Scaled {
    pub fn zero() -> Self {
        Scaled { mantissa: C::new(0.0, 0.0), log_scale: f64::NEG_INFINITY }
    }

    pub fn from_ln(l: C) -> Self {
        if l.re == f64::NEG_INFINITY {
            return Self::zero();
        }
        Scaled { mantissa: C::from_polar(1.0, l.im), log_scale: l.re }
    }

    pub fn to_complex(self) -> C {
        if self.mantissa.norm() == 0.0 {
            return C::new(0.0, 0.0);
        }
        self.mantissa * self.log_scale.exp()
    }

    pub fn plus(self, o: Scaled) -> Scaled {
        if o.mantissa.norm() == 0.0 {
            return self;
        }
        if self.mantissa.norm() == 0.0 {
            return o;
        }
        let m = self.log_scale.max(o.log_scale);
        Scaled {
            mantissa: self.mantissa * (self.log_scale - m).exp() + o.mantissa * (o.log_scale - m).exp(),
            log_scale: m,
        }
    }

    pub fn times(self, c: C) -> Scaled {
        Scaled { mantissa: self.mantissa * c, log_scale: self.log_scale }
    }

    pub fn shift(self, by: f64) -> Scaled {
        Scaled { mantissa: self.mantissa, log_scale: self.log_scale + by }
    }

    pub fn norm(self) -> f64 {
        self.to_complex().norm()
    }

    /// ln |value|, without overflow.
    pub fn ln_norm(self) -> f64 {
        let m = self.mantissa.norm();
        if m == 0.0 {
            f64::NEG_INFINITY
        } else {
            m.ln() + self.log_scale
        }
    }
}

/// e^x - 1 without cancellation near 0.
pub(crate) fn expm1(x: C) -> C {
    let h = (0.5 * x.im).sin();
    C::new(x.re.exp_m1() * x.im.cos() - 2.0 * h * h, x.re.exp() * x.im.sin())
}

/// (e^x - 1) / x, continuous at 0.
pub(crate) fn exprel(x: C) -> C {
    if x.norm() < 1e-12 {
        C::new(1.0, 0.0) + x / 2.0
    } else {
        expm1(x) / x
    }
}
