//! Correlation functions of the deformed-Wishart eigenvalue density for
//! N <= 2 by direct quadrature, as an independent check of the kernel.

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::specfun::bessel_i;
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use serde::Serialize;

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// (1/S) e^{-(y+x)/S} I_nu(2 sqrt(yx)/S) (x/y)^{nu/2}, the density of one
/// eigenvalue moving from y.
pub fn transition_density(y: f64, x: f64, s: f64, nu: u32) -> Result<f64> {
    if !(s > 0.0) || y < 0.0 {
        return invalid("transition density needs S > 0 and y >= 0");
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    let n = nu as f64;
    if y == 0.0 {
        if x == 0.0 {
            return Ok(if nu == 0 { 1.0 / s } else { 0.0 });
        }
        return Ok((-s.ln() - x / s + n * (x / s).ln() - ln_factorial(nu)).exp());
    }
    if x == 0.0 {
        return Ok(if nu == 0 { (-y / s).exp() / s } else { 0.0 });
    }
    let i = bessel_i(nu, C::new(2.0 * (y * x).sqrt() / s, 0.0))?;
    let ln_i = i.log_scale + i.value.re.ln();
    Ok((-s.ln() - (y + x) / s + ln_i + 0.5 * n * (x.ln() - y.ln())).exp())
}

fn vandermonde(v: &[f64]) -> f64 {
    let mut p = 1.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            p *= v[i] - v[j];
        }
    }
    p
}

/// V(x) / V(y) det(transition_density(y_i, x_j)).
pub fn deformed_wishart_density(eigs: &[f64], xs: &[f64], s: f64, nu: u32) -> Result<f64> {
    let n = eigs.len();
    if xs.len() != n || n == 0 {
        return invalid("need as many points as eigenvalues");
    }
    let vy = vandermonde(eigs);
    if vy == 0.0 {
        return invalid("eigenvalues must be distinct");
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = transition_density(eigs[i], xs[j], s, nu)?;
        }
    }
    Ok(vandermonde(xs) / vy * m.determinant())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForce {
    /// Integral of the joint density (should be 1).
    pub normalization: f64,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

/// R^(1) at `points` and R^(2) at `pairs` for N <= 2, after checking that
/// the symmetrized joint density (the determinantal formula divided by N!)
/// integrates to 1 within 1e-6.
pub fn brute_force_correlations(
    eigs: &[f64],
    s: f64,
    nu: u32,
    points: &[f64],
    pairs: &[(f64, f64)],
) -> Result<BruteForce> {
    let n = eigs.len();
    if n == 0 || n > 2 {
        return invalid(format!("brute force supports N = 1 or 2, got {n}"));
    }
    let top = eigs.iter().fold(0.0f64, |m, &y| m.max(y));
    let reach = top.sqrt() + (80.0 * s).sqrt() + (2.0 * nu as f64 + 4.0) * s.sqrt();
    let mut breaks = vec![0.0];
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    breaks.extend(sorted.iter().copied().filter(|&y| y > 0.0));
    breaks.push(reach * reach);
    breaks.dedup();
    let tol = 1e-12;
    let (normalization, r1, r2) = if n == 1 {
        let y = eigs[0];
        let norm = quad::adaptive_with_breaks(|x| transition_density(y, x, s, nu).unwrap_or(f64::NAN), &breaks, tol)?;
        let r1 = points.iter().map(|&x| transition_density(y, x, s, nu)).collect::<Result<Vec<_>>>()?;
        (norm, r1, vec![0.0; pairs.len()])
    } else {
        // the determinantal formula integrates to N! = 2 over the whole quadrant
        let f = |a: f64, b: f64| 0.5 * deformed_wishart_density(eigs, &[a, b], s, nu).unwrap_or(f64::NAN);
        let marginal = |x: f64| quad::adaptive_with_breaks(|l| f(x, l), &breaks, tol);
        let norm = quad::adaptive_with_breaks(|x| marginal(x).unwrap_or(f64::NAN), &breaks, 1e-10)?;
        let r1 = points.iter().map(|&x| marginal(x).map(|v| 2.0 * v)).collect::<Result<Vec<_>>>()?;
        let r2 = pairs.iter().map(|&(a, b)| 2.0 * f(a, b)).collect();
        (norm, r1, r2)
    };
    if !((normalization - 1.0).abs() < 1e-6) {
        return Err(Error::Domain(format!(
            "joint density integrates to {normalization}; integration domain too small"
        )));
    }
    Ok(BruteForce { normalization, r1, r2 })
}
