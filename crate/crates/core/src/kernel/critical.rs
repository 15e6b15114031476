//! Exponent of the kernel integrand and its critical points, for the
//! empirical spectrum and for the limiting law.

use super::SaddleConfig;
use crate::error::{Error, Result};
use crate::mp::{mp_density, mp_stieltjes_ratio, MpParams};
use num_complex::Complex64 as C;
use serde::Serialize;
use std::f64::consts::PI;

/// Variance of the entries in the kernel's normalization (MP support [0, 1] at gamma = 1).
pub(crate) const SIGMA2: f64 = super::KERNEL_ENTRY_VARIANCE;

/// f(w) = w^2 - 2 sqrt(u) w + S sum ln(w^2 - y_i) + c ln w.
#[derive(Debug, Clone)]
pub struct Exponent {
    pub eigs: Vec<f64>,
    pub s: f64,
    pub root_u: f64,
    /// Coefficient c of ln w (S nu in the gamma > 1 setting, otherwise 0).
    pub log_coef: f64,
}

impl Exponent {
    pub fn new(eigs: &[f64], s: f64, u: f64, log_coef: f64) -> Self {
        Exponent { eigs: eigs.to_vec(), s, root_u: u.sqrt(), log_coef }
    }

    pub fn from_config(eigs: &[f64], cfg: &SaddleConfig, u: f64) -> Self {
        Self::new(eigs, cfg.s, u, cfg.log_coefficient())
    }

    /// The same exponent at another spectral point.
    pub fn at(&self, u: f64) -> Self {
        Exponent { root_u: u.sqrt(), ..self.clone() }
    }

    pub fn value(&self, w: C) -> C {
        let w2 = w * w;
        let logs: C = self.eigs.iter().map(|&y| (w2 - y).ln()).sum();
        let mut f = w2 - 2.0 * self.root_u * w + self.s * logs;
        if self.log_coef != 0.0 {
            f += self.log_coef * w.ln();
        }
        f
    }

    pub fn d1(&self, w: C) -> C {
        let w2 = w * w;
        let sum: C = self.eigs.iter().map(|&y| 1.0 / (w2 - y)).sum();
        let mut d = 2.0 * w - 2.0 * self.root_u + 2.0 * self.s * w * sum;
        if self.log_coef != 0.0 {
            d += self.log_coef / w;
        }
        d
    }

    pub fn d2(&self, w: C) -> C {
        let w2 = w * w;
        let sum: C = self
            .eigs
            .iter()
            .map(|&y| {
                let q = w2 - y;
                (w2 + y) / (q * q)
            })
            .sum();
        let mut d = C::new(2.0, 0.0) - 2.0 * self.s * sum;
        if self.log_coef != 0.0 {
            d -= self.log_coef / w2;
        }
        d
    }

    /// w - F(w) where F(w) = sqrt(u) - S sum w / (w^2 - y_i) - c / (2w).
    fn fixed_point_map(&self, w: C) -> C {
        let w2 = w * w;
        let sum: C = self.eigs.iter().map(|&y| w / (w2 - y)).sum();
        let mut f = C::new(self.root_u, 0.0) - self.s * sum;
        if self.log_coef != 0.0 {
            f -= self.log_coef / (2.0 * w);
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    Limit,
    Empirical,
}

/// The conjugate pair of critical points near sqrt(u) and f'' at the upper one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoints {
    pub w_plus: C,
    pub w_minus: C,
    pub second_derivative: C,
    pub kind: CriticalKind,
    /// |f'(w)| for the limit, |w - F(w)| for the empirical exponent.
    pub residual: f64,
    pub iterations: usize,
}

/// (f'(w), f''(w)) for the limiting exponent, where the eigenvalue sum is
/// replaced by its law: f'(w) = 2w - 2 sqrt(u) - 2 a^2 w m(w^2) + a^2 (gamma - 1) / w.
pub fn limit_exponent_derivatives(w: C, u: f64, a2: f64, gamma: f64) -> Result<(C, C)> {
    let z = w * w;
    let m = mp_stieltjes_ratio(gamma, SIGMA2, z)?;
    let dm = -(SIGMA2 * m * m + m) / (2.0 * SIGMA2 * z * m + z + SIGMA2 * (1.0 - gamma));
    let c = a2 * (gamma - 1.0);
    let d1 = 2.0 * w - 2.0 * u.sqrt() - 2.0 * a2 * w * m + c / w;
    let d2 = C::new(2.0, 0.0) - 2.0 * a2 * m - 4.0 * a2 * z * dm - c / z;
    Ok((d1, d2))
}

fn limit_start(u: f64, a2: f64, gamma: f64) -> Result<C> {
    let law = MpParams::new(gamma, SIGMA2)?;
    let r = u.sqrt();
    let rho = mp_density(&law, u);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("u = {u} lies outside the bulk of the limiting law")));
    }
    let re = if gamma > 1.0 { r * (1.0 - 2.0 * a2) } else { r };
    Ok(C::new(re.max(0.5 * r), a2 * PI * r * rho))
}

fn newton_in_upper_half<F>(mut w: C, what: &'static str, tol: f64, mut derivs: F) -> Result<(C, f64, usize)>
where
    F: FnMut(C) -> Result<(C, C)>,
{
    for it in 0..100 {
        let (d1, d2) = derivs(w)?;
        if d1.norm() <= tol {
            return Ok((w, d1.norm(), it));
        }
        let mut step = d1 / d2;
        let mut next = w - step;
        while !(next.im > 0.0 && next.re > 0.0) {
            step *= 0.5;
            next = w - step;
            if step.norm() < 1e-300 {
                return Err(Error::Domain(format!("{what}: Newton left the first quadrant")));
            }
        }
        w = next;
        if step.norm() <= 1e-15 * w.norm() {
            let r = derivs(w)?.0.norm();
            return Ok((w, r, it + 1));
        }
    }
    let r = derivs(w)?.0.norm();
    Err(Error::NoConvergence { what, iterations: 100, residual: r })
}

/// Critical points of the limiting exponent at u (Newton from the small-a expansion).
pub fn critical_points_limit(u: f64, a: f64, gamma: f64) -> Result<CriticalPoints> {
    let a2 = a * a;
    let start = limit_start(u, a2, gamma)?;
    let (w, residual, iterations) =
        newton_in_upper_half(start, "limit critical point", 1e-14, |w| limit_exponent_derivatives(w, u, a2, gamma))?;
    let (_, f2) = limit_exponent_derivatives(w, u, a2, gamma)?;
    Ok(CriticalPoints {
        w_plus: w,
        w_minus: w.conj(),
        second_derivative: f2,
        kind: CriticalKind::Limit,
        residual,
        iterations,
    })
}

fn empirical_from(ex: &Exponent, start: C) -> Result<CriticalPoints> {
    const TOL: f64 = 1e-12;
    let mut w = start;
    let mut best = (start, (start - ex.fixed_point_map(start)).norm());
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let next = ex.fixed_point_map(w);
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        w = next;
        let r = (w - ex.fixed_point_map(w)).norm();
        if r < best.1 {
            best = (w, r);
        }
        if r < TOL {
            break;
        }
    }
    let (mut w, mut residual) = best;
    if residual >= TOL {
        // Not a contraction here: polish with Newton on f'.
        let (wn, _, it) = newton_in_upper_half(w, "empirical critical point", 1e-14, |w| Ok((ex.d1(w), ex.d2(w))))?;
        w = wn;
        iterations += it;
        residual = (w - ex.fixed_point_map(w)).norm();
    }
    if residual >= TOL {
        return Err(Error::NoConvergence { what: "empirical critical point", iterations, residual });
    }
    if !(w.im > 0.0) {
        return Err(Error::Domain(format!("empirical critical point {w} is not in the upper half-plane")));
    }
    Ok(CriticalPoints {
        w_plus: w,
        w_minus: w.conj(),
        second_derivative: ex.d2(w),
        kind: CriticalKind::Empirical,
        residual,
        iterations,
    })
}

/// Critical points of the empirical exponent at u by fixed-point iteration
/// started from the limiting critical point (Newton if that does not contract).
pub fn critical_points_empirical(eigs: &[f64], cfg: &SaddleConfig, u: f64) -> Result<CriticalPoints> {
    let lim = critical_points_limit(u, cfg.a, cfg.gamma)?;
    let ex = Exponent::from_config(eigs, cfg, u);
    empirical_from(&ex, lim.w_plus)
}

/// The curve t -> w_c(t) of upper critical points over the bulk.
#[derive(Debug, Clone)]
pub struct CriticalFamily {
    pub kind: CriticalKind,
    exponent: Exponent,
    a: f64,
    gamma: f64,
}

impl CriticalFamily {
    pub fn new(kind: CriticalKind, eigs: &[f64], cfg: &SaddleConfig) -> Self {
        CriticalFamily { kind, exponent: Exponent::from_config(eigs, cfg, 0.0), a: cfg.a, gamma: cfg.gamma }
    }

    /// w_c(t) and dw_c/dt = 1 / (sqrt(t) f''(w_c(t))).
    pub fn point(&self, t: f64) -> Result<(C, C)> {
        let lim = critical_points_limit(t, self.a, self.gamma)?;
        let (w, f2) = match self.kind {
            CriticalKind::Limit => (lim.w_plus, lim.second_derivative),
            CriticalKind::Empirical => {
                let cp = empirical_from(&self.exponent.at(t), lim.w_plus)?;
                (cp.w_plus, cp.second_derivative)
            }
        };
        Ok((w, 1.0 / (t.sqrt() * f2)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_differences() {
        let ex = Exponent::new(&[0.1, 0.4, 0.7], 0.05, 0.3, 0.02);
        let w = C::new(0.6, 0.2);
        let h = 1e-5;
        let fd1 = (ex.value(w + h) - ex.value(w - h)) / (2.0 * h);
        let fd2 = (ex.d1(w + h) - ex.d1(w - h)) / (2.0 * h);
        assert!((fd1 - ex.d1(w)).norm() < 1e-8);
        assert!((fd2 - ex.d2(w)).norm() < 1e-8);
    }

    #[test]
    fn limit_point_solves_equation() {
        let cp = critical_points_limit(0.4, 0.3, 1.0).unwrap();
        let (d1, _) = limit_exponent_derivatives(cp.w_plus, 0.4, 0.09, 1.0).unwrap();
        assert!(d1.norm() < 1e-13);
        assert!(cp.w_plus.im > 0.0);
    }
}
