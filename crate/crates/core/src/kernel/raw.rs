//! Direct evaluation of the double contour integral defining K_N(u, v; H).
//!
//! Gamma is symmetric under z -> -conj(z) and the integrand is odd-times-odd
//! under z -> -z, so the left half equals the right half. The w-line sits
//! left of z when Re z exceeds the crossing abscissa and right of it
//! otherwise; moving it past the pole w = z leaves the residue
//! 2z K_nu(2z sqrt(v)/S) I_nu(2z sqrt(u)/S), which is entire in Re z > 0 and
//! is integrated along the straight segment between the two crossings.

use super::contour::{KernelContours, Node};
use super::{SaddleConfig, Scaled};
use crate::error::{invalid, Error, Result};
use crate::specfun::{bessel_i, bessel_k};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Overall constant multiplying the contour integral; fixed against direct
/// integration of the eigenvalue density at N = 1 and N = 2.
pub const KERNEL_NORMALIZATION: f64 = 0.5;

pub(crate) const MIN_ORDER: usize = 16;
pub(crate) const MAX_ORDER: usize = 1024;
pub(crate) const CANCELLATION_FLOOR: f64 = 1e-11;
/// Largest number of (z, w) node pairs in one pass.
pub(crate) const PAIR_BUDGET: f64 = 4e8;

fn ln_e(w: C, eigs: &[f64], s: f64, nu: u32, root_v: f64) -> Result<C> {
    let k = bessel_k(nu, 2.0 * w * root_v / s)?;
    if k.is_zero() {
        return Ok(C::new(f64::NEG_INFINITY, 0.0));
    }
    let w2 = w * w;
    let logs: C = eigs.iter().map(|&y| (w2 - y).ln()).sum();
    Ok(w2 / s + k.ln() + logs + nu as f64 * w.ln())
}

fn ln_g(z: C, eigs: &[f64], s: f64, nu: u32, root_u: f64) -> Result<C> {
    let i = bessel_i(nu, 2.0 * z * root_u / s)?;
    if i.is_zero() {
        return Ok(C::new(f64::NEG_INFINITY, 0.0));
    }
    let z2 = z * z;
    let logs: C = eigs.iter().map(|&y| (z2 - y).ln()).sum();
    Ok(-z2 / s + i.ln() - logs - nu as f64 * z.ln())
}

/// (ln value, node) pairs normalized by their largest real part.
pub(crate) struct Weighted {
    pub values: Vec<C>,
    pub scale: f64,
}

pub(crate) fn exponentiate(nodes: &[Node], logs: &[C]) -> Weighted {
    let scale = logs.iter().map(|l| l.re).filter(|r| r.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let values = nodes
        .iter()
        .zip(logs)
        .map(|(n, l)| if l.re == f64::NEG_INFINITY { C::new(0.0, 0.0) } else { (l - scale).exp() * n.dz })
        .collect();
    Weighted { values, scale }
}

fn pass(eigs: &[f64], u: f64, v: f64, cfg: &SaddleConfig, c: &KernelContours, order: usize) -> Result<(Scaled, f64)> {
    let s = cfg.s;
    let (ru, rv) = (u.sqrt(), v.sqrt());
    let d = c.line_offset(cfg);
    let x0 = c.split_re;
    let zs = c.gamma.nodes(order, c.panel_len, true)?;
    let left = c.line_nodes(x0 - d, order)?;
    let right = c.line_nodes(x0 + d, order)?;
    if (zs.len() as f64) * (left.len() as f64) > PAIR_BUDGET {
        return Err(Error::QuadratureBudget { last: f64::NAN, previous: f64::NAN });
    }
    let lg: Vec<C> = zs.par_iter().map(|n| ln_g(n.z, eigs, s, cfg.nu, ru)).collect::<Result<_>>()?;
    let ll: Vec<C> = left.par_iter().map(|n| ln_e(n.z, eigs, s, cfg.nu, rv)).collect::<Result<_>>()?;
    let lr: Vec<C> = right.par_iter().map(|n| ln_e(n.z, eigs, s, cfg.nu, rv)).collect::<Result<_>>()?;
    let g = exponentiate(&zs, &lg);
    let el = exponentiate(&left, &ll);
    let er = exponentiate(&right, &lr);
    let e_scale = el.scale.max(er.scale);
    let (fl, fr) = ((el.scale - e_scale).exp(), (er.scale - e_scale).exp());
    let main: C = zs
        .par_iter()
        .zip(&g.values)
        .map(|(zn, gz)| {
            if gz.norm() == 0.0 {
                return C::new(0.0, 0.0);
            }
            let z = zn.z;
            let (line, vals, f) = if z.re > x0 { (&left, &el.values, fl) } else { (&right, &er.values, fr) };
            let inner: C = line
                .iter()
                .zip(vals)
                .map(|(wn, e)| {
                    let w = wn.z;
                    e * (4.0 * w * z / (w * w - z * z))
                })
                .sum();
            gz * inner * f
        })
        .sum();
    let main = Scaled { mantissa: main, log_scale: e_scale + g.scale };

    let (lo, hi) = c.crossing;
    let seg = super::contour::ContourPath {
        pieces: vec![super::contour::PathPiece {
            shape: super::contour::ArcShape::Line { from: lo, to: hi },
            axis: false,
        }],
        label: super::contour::ContourLabel::Upsilon,
    };
    let rs = seg.nodes(order, c.panel_len, true)?;
    let lres: Vec<C> = rs
        .par_iter()
        .map(|n| {
            let z = n.z;
            let k = bessel_k(cfg.nu, 2.0 * z * rv / s)?;
            let i = bessel_i(cfg.nu, 2.0 * z * ru / s)?;
            if k.is_zero() || i.is_zero() {
                return Ok(C::new(f64::NEG_INFINITY, 0.0));
            }
            Ok((2.0 * z).ln() + k.ln() + i.ln())
        })
        .collect::<Result<_>>()?;
    let r = exponentiate(&rs, &lres);
    let res = Scaled { mantissa: r.values.iter().sum::<C>() * C::new(0.0, 2.0 * PI), log_scale: r.scale };

    // 2 (halves of Gamma) times 1 / (2 i^2 pi^2 S^2)
    let pref = 2.0 * KERNEL_NORMALIZATION / (-2.0 * PI * PI * s * s);
    let terms = main.ln_norm().max(res.ln_norm()) + pref.abs().ln();
    Ok((main.plus(res).times(C::new(pref, 0.0)), terms))
}

/// K_N(u, v; H) in scaled form, refining the per-panel node count until the
/// relative change drops below `cfg.tol`.
pub fn eval_kernel_raw_scaled(eigs: &[f64], u: f64, v: f64, cfg: &SaddleConfig, contours: &KernelContours) -> Result<Scaled> {
    if !(u > 0.0 && v > 0.0) {
        return invalid(format!("kernel needs u, v > 0, got ({u}, {v})"));
    }
    if eigs.len() != cfg.n {
        return invalid(format!("spectrum has {} eigenvalues, config expects {}", eigs.len(), cfg.n));
    }
    refine(cfg.tol, |order| pass(eigs, u, v, cfg, contours, order))
}

/// Node doubling MIN_ORDER -> MAX_ORDER until consecutive estimates agree.
/// Each pass also returns the log-size of its largest term; changes below
/// `CANCELLATION_FLOOR` times that size count as converged.
pub(crate) fn refine<F: FnMut(usize) -> Result<(Scaled, f64)>>(tol: f64, mut f: F) -> Result<Scaled> {
    let mut order = MIN_ORDER;
    let mut prev = f(order)?.0;
    loop {
        let next_order = order * 2;
        if next_order > MAX_ORDER {
            return Err(Error::QuadratureBudget { last: prev.norm(), previous: f64::NAN });
        }
        let (cur, terms) = match f(next_order) {
            Ok(c) => c,
            Err(Error::QuadratureBudget { .. }) => {
                return Err(Error::QuadratureBudget { last: prev.norm(), previous: f64::NAN });
            }
            Err(e) => return Err(e),
        };
        let diff = cur.plus(prev.times(C::new(-1.0, 0.0))).ln_norm();
        if diff < tol.ln() + cur.ln_norm() || diff < CANCELLATION_FLOOR.ln() + terms {
            return Ok(cur);
        }
        if next_order == MAX_ORDER {
            return Err(Error::QuadratureBudget { last: cur.norm(), previous: prev.norm() });
        }
        prev = cur;
        order = next_order;
    }
}

/// K_N(u, v; H).
pub fn eval_kernel_raw(eigs: &[f64], u: f64, v: f64, cfg: &SaddleConfig, contours: &KernelContours) -> Result<C> {
    Ok(eval_kernel_raw_scaled(eigs, u, v, cfg, contours)?.to_complex())
}
