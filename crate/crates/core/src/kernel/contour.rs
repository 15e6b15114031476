//! Integration contours for the kernel: the closed contour Gamma around the
//! spectrum (stored as its right half), the vertical w-lines, and quadrature
//! nodes along them.

use super::critical::{CriticalFamily, CriticalKind, CriticalPoints, Exponent, SIGMA2};
use super::SaddleConfig;
use crate::error::{Error, Result};
use crate::mp::MpParams;
use crate::quad;
use num_complex::Complex64 as C;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum ArcShape {
    Line { from: C, to: C },
    /// Arc of the circle |z| = radius between two angles.
    Circle { radius: f64, from_angle: f64, to_angle: f64 },
    /// Critical-point curve between two spectral parameters, optionally conjugated.
    Family { family: Arc<CriticalFamily>, from_t: f64, to_t: f64, conjugate: bool },
}

impl ArcShape {
    /// Position and derivative at parameter tau in [0, 1].
    pub fn point(&self, tau: f64) -> Result<(C, C)> {
        match self {
            ArcShape::Line { from, to } => Ok((from + (to - from) * tau, to - from)),
            ArcShape::Circle { radius, from_angle, to_angle } => {
                let th = from_angle + (to_angle - from_angle) * tau;
                let z = C::from_polar(*radius, th);
                Ok((z, C::new(0.0, to_angle - from_angle) * z))
            }
            ArcShape::Family { family, from_t, to_t, conjugate } => {
                let t = from_t + (to_t - from_t) * tau;
                let (w, dw) = family.point(t)?;
                let dw = dw * (to_t - from_t);
                Ok(if *conjugate { (w.conj(), dw.conj()) } else { (w, dw) })
            }
        }
    }

    fn restrict(&self, t0: f64, t1: f64) -> Result<ArcShape> {
        Ok(match self {
            ArcShape::Line { .. } => ArcShape::Line { from: self.point(t0)?.0, to: self.point(t1)?.0 },
            ArcShape::Circle { radius, from_angle, to_angle } => ArcShape::Circle {
                radius: *radius,
                from_angle: from_angle + (to_angle - from_angle) * t0,
                to_angle: from_angle + (to_angle - from_angle) * t1,
            },
            ArcShape::Family { family, from_t, to_t, conjugate } => ArcShape::Family {
                family: family.clone(),
                from_t: from_t + (to_t - from_t) * t0,
                to_t: from_t + (to_t - from_t) * t1,
                conjugate: *conjugate,
            },
        })
    }

    fn samples(&self, k: usize) -> Result<Vec<C>> {
        (0..=k).map(|i| Ok(self.point(i as f64 / k as f64)?.0)).collect()
    }

    fn length(&self) -> Result<f64> {
        let s = self.samples(32)?;
        Ok(s.windows(2).map(|p| (p[1] - p[0]).norm()).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourLabel {
    /// Right half of the closed contour around the spectrum.
    GammaRight,
    /// The part of it between the two endpoints near the imaginary axis.
    GammaOne,
    /// Vertical line through the crossing point.
    Upsilon,
}

#[derive(Debug, Clone)]
pub struct PathPiece {
    pub shape: ArcShape,
    /// Short segment joining the imaginary axis to an endpoint.
    pub axis: bool,
}

/// Quadrature node: position and weight times the path derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub z: C,
    pub dz: C,
}

#[derive(Debug, Clone)]
pub struct ContourPath {
    pub pieces: Vec<PathPiece>,
    pub label: ContourLabel,
}

impl ContourPath {
    pub fn start(&self) -> Result<C> {
        Ok(self.pieces[0].shape.point(0.0)?.0)
    }

    pub fn end(&self) -> Result<C> {
        Ok(self.pieces[self.pieces.len() - 1].shape.point(1.0)?.0)
    }

    /// Gauss–Legendre nodes, `order` per panel, with panels no longer than
    /// `panel_len`; axis pieces are skipped unless `with_axis`.
    pub fn nodes(&self, order: usize, panel_len: f64, with_axis: bool) -> Result<Vec<Node>> {
        let rule = quad::gauss_legendre(order);
        let mut out = Vec::new();
        for piece in self.pieces.iter().filter(|p| with_axis || !p.axis) {
            let panels = ((piece.shape.length()? / panel_len).ceil() as usize).max(1);
            for k in 0..panels {
                let a = k as f64 / panels as f64;
                let b = (k + 1) as f64 / panels as f64;
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    let tau = a + (b - a) * 0.5 * (x + 1.0);
                    let (z, dz) = piece.shape.point(tau)?;
                    out.push(Node { z, dz: dz * (w * 0.5 * (b - a)) });
                }
            }
        }
        Ok(out)
    }

    /// Points along the path, `per_piece` intervals on each piece.
    pub fn sample(&self, per_piece: usize) -> Result<Vec<C>> {
        let mut out = Vec::new();
        for p in &self.pieces {
            let s = p.shape.samples(per_piece)?;
            if out.is_empty() {
                out.extend(s);
            } else {
                out.extend(s.into_iter().skip(1));
            }
        }
        Ok(out)
    }

    /// The sub-path without axis pieces.
    pub fn without_axis(&self) -> ContourPath {
        ContourPath {
            pieces: self.pieces.iter().filter(|p| !p.axis).cloned().collect(),
            label: ContourLabel::GammaOne,
        }
    }

    /// Split every piece where its real part crosses `x0`; returns the crossings in path order.
    fn split_at(&mut self, x0: f64) -> Result<Vec<C>> {
        let mut pieces = Vec::new();
        let mut crossings = Vec::new();
        for p in &self.pieces {
            let k = 64;
            let mut cuts = vec![0.0];
            let mut prev = p.shape.point(0.0)?.0.re - x0;
            for i in 1..=k {
                let tau = i as f64 / k as f64;
                let cur = p.shape.point(tau)?.0.re - x0;
                if (prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0) {
                    let (mut lo, mut hi) = ((i - 1) as f64 / k as f64, tau);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        let v = p.shape.point(mid)?.0.re - x0;
                        if v * prev > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let t = 0.5 * (lo + hi);
                    crossings.push(p.shape.point(t)?.0);
                    cuts.push(t);
                }
                prev = cur;
            }
            cuts.push(1.0);
            for c in cuts.windows(2) {
                if c[1] > c[0] {
                    pieces.push(PathPiece { shape: p.shape.restrict(c[0], c[1])?, axis: p.axis });
                }
            }
        }
        self.pieces = pieces;
        Ok(crossings)
    }
}

/// Contour data for one kernel evaluation.
#[derive(Debug, Clone)]
pub struct KernelContours {
    /// Right half of Gamma, from the lower to the upper imaginary-axis point.
    pub gamma: ContourPath,
    /// Where Gamma crosses Re z = `split_re` (lower, upper).
    pub crossing: (C, C),
    pub split_re: f64,
    /// Half-height of the vertical w-lines.
    pub line_half_height: f64,
    /// Endpoints joining Gamma_1 to the axis pieces (lower, upper).
    pub endpoints: Option<(C, C)>,
    pub family: Option<CriticalKind>,
    /// Maximal panel length along every path.
    pub panel_len: f64,
}

impl KernelContours {
    fn finish(mut gamma: ContourPath, x0: f64, eigs: &[f64], cfg: &SaddleConfig, v: f64) -> Result<Self> {
        check_enclosure(&gamma, eigs)?;
        let cuts = gamma.split_at(x0)?;
        if cuts.len() != 2 {
            return Err(Error::ContourIntersection(format!(
                "Gamma crosses Re z = {x0} {} times, expected 2",
                cuts.len()
            )));
        }
        let (lo, hi) = if cuts[0].im < cuts[1].im { (cuts[0], cuts[1]) } else { (cuts[1], cuts[0]) };
        let root_s = cfg.s.sqrt();
        let ex = Exponent::from_config(eigs, cfg, v);
        let reach = hi.im.abs().max(lo.im.abs());
        let line_half_height = line_height(&ex, x0, reach, root_s);
        Ok(KernelContours {
            gamma,
            crossing: (lo, hi),
            split_re: x0,
            line_half_height,
            endpoints: None,
            family: None,
            panel_len: 0.5 * root_s,
        })
    }

    /// Offset of the two w-lines from `split_re`.
    pub fn line_offset(&self, cfg: &SaddleConfig) -> f64 {
        cfg.offset * cfg.s.sqrt()
    }

    /// Nodes on the vertical line Re w = x, |Im w| <= half height, with
    /// panel breaks at 0 and at the heights of the crossings.
    pub fn line_nodes(&self, x: f64, order: usize) -> Result<Vec<Node>> {
        let t = self.line_half_height;
        let h = self.crossing.1.im.abs().min(t);
        let mut breaks = vec![-t, -h, 0.0, h, t];
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let path = ContourPath {
            pieces: breaks
                .windows(2)
                .map(|p| PathPiece { shape: ArcShape::Line { from: C::new(x, p[0]), to: C::new(x, p[1]) }, axis: false })
                .collect(),
            label: ContourLabel::Upsilon,
        };
        path.nodes(order, self.panel_len, true)
    }
}

/// Height where e^{Re f_v / S} on the line Re w = x0 has dropped by e^45 below its
/// maximum over |Im w| <= reach.
fn line_height(ex: &Exponent, x0: f64, reach: f64, root_s: f64) -> f64 {
    let re = |t: f64| ex.value(C::new(x0, t)).re / ex.s;
    let steps = 64;
    let mut top = f64::NEG_INFINITY;
    for i in 0..=steps {
        top = top.max(re(reach * i as f64 / steps as f64));
    }
    let mut t = reach + root_s;
    let step = 0.5 * root_s;
    while re(t) > top - 45.0 && t < 1e3 {
        t += step;
    }
    t
}

fn winding(path: &[C], p: C) -> f64 {
    let mut total = 0.0;
    for k in 0..path.len() {
        let a = path[k] - p;
        let b = path[(k + 1) % path.len()] - p;
        total += (b / a).arg();
    }
    total / (2.0 * PI)
}

/// The closed symmetric contour must wind once around every +-sqrt(y_i) and keep clear of them.
fn check_enclosure(right: &ContourPath, eigs: &[f64]) -> Result<()> {
    let half = right.sample(400)?;
    let mut closed = half.clone();
    closed.extend(half.iter().rev().skip(1).map(|z| -z.conj()));
    closed.pop();
    for &y in eigs {
        let r = y.max(0.0).sqrt();
        for pole in [C::new(r, 0.0), C::new(-r, 0.0)] {
            let dist = closed.iter().map(|z| (z - pole).norm()).fold(f64::INFINITY, f64::min);
            if dist < 1e-8 {
                return Err(Error::ContourIntersection(format!("contour passes within {dist:e} of {pole}")));
            }
            let n = winding(&closed, pole).round() as i64;
            if n != 1 {
                return Err(Error::ContourIntersection(format!("winding number {n} around {pole}")));
            }
        }
    }
    Ok(())
}

/// Bulk of the kernel's limiting law as (lower, upper) edges.
fn bulk_edges(gamma: f64) -> Result<(f64, f64)> {
    let law = MpParams::new(gamma, SIGMA2)?;
    Ok((law.u_minus, law.u_plus))
}

fn family_path(fam: &Arc<CriticalFamily>, t_lo: f64, t_hi: f64) -> Result<(C, C)> {
    for i in 0..=16 {
        let t = t_lo + (t_hi - t_lo) * i as f64 / 16.0;
        let (w, _) = fam.point(t)?;
        if !(w.im > 0.0) {
            return Err(Error::Domain(format!("critical point below the real axis at t = {t}")));
        }
    }
    Ok((fam.point(t_lo)?.0, fam.point(t_hi)?.0))
}

/// Saddle-adapted contour: Gamma follows the critical points w_c(t) over the
/// bulk (and their conjugates), closes to the right along rays truncated where
/// the integrand has decayed, and joins the imaginary axis at Re = eps / divisor.
pub fn build_contours(cp: &CriticalPoints, eigs: &[f64], cfg: &SaddleConfig, u: f64, v: f64) -> Result<KernelContours> {
    let (lo_edge, hi_edge) = bulk_edges(cfg.gamma)?;
    let t_lo = lo_edge + 0.5 * cfg.eps;
    let t_hi = hi_edge - 0.5 * cfg.eps;
    if !(u > t_lo && u < t_hi) {
        return Err(Error::Domain(format!("u = {u} is outside the bulk window ({t_lo}, {t_hi})")));
    }
    let mut chosen = None;
    for kind in [CriticalKind::Empirical, CriticalKind::Limit] {
        let fam = Arc::new(CriticalFamily::new(kind, eigs, cfg));
        if let Ok(ends) = family_path(&fam, t_lo, t_hi) {
            chosen = Some((fam, ends));
            break;
        }
    }
    let (fam, (w_lo, w_hi)) =
        chosen.ok_or_else(|| Error::Domain("no critical-point family over the bulk".into()))?;
    let h1 = w_lo.im;
    let x1 = cfg.eps / cfg.endpoint_divisor;
    let x1_minus = C::new(x1, -h1);
    let x1_plus = C::new(x1, h1);
    let h2 = w_hi.im;
    let right = ray_length(&Exponent::from_config(eigs, cfg, u), w_hi, cp, eigs, cfg.s.sqrt());
    let line = |from: C, to: C, axis: bool| PathPiece { shape: ArcShape::Line { from, to }, axis };
    let fam_piece = |from_t: f64, to_t: f64, conjugate: bool| PathPiece {
        shape: ArcShape::Family { family: fam.clone(), from_t, to_t, conjugate },
        axis: false,
    };
    let pieces = vec![
        line(C::new(0.0, -h1), x1_minus, true),
        line(x1_minus, w_lo.conj(), false),
        fam_piece(t_lo, t_hi, true),
        line(w_hi.conj(), C::new(right, -h2), false),
        line(C::new(right, -h2), C::new(right, h2), false),
        line(C::new(right, h2), w_hi, false),
        fam_piece(t_hi, t_lo, false),
        line(w_lo, x1_plus, false),
        line(x1_plus, C::new(0.0, h1), true),
    ];
    let gamma = ContourPath { pieces, label: ContourLabel::GammaRight };
    let mut k = KernelContours::finish(gamma, cp.w_plus.re, eigs, cfg, v)?;
    k.endpoints = Some((x1_minus, x1_plus));
    k.family = Some(fam.kind);
    Ok(k)
}

/// Distance to the right along Im z = Im w_hi until Re f_u has risen by 50 S
/// above its value at the saddle, and past every sqrt(y_i).
fn ray_length(ex: &Exponent, w_hi: C, cp: &CriticalPoints, eigs: &[f64], root_s: f64) -> f64 {
    let base = ex.value(cp.w_plus).re;
    let top = eigs.iter().fold(0.0f64, |m, &y| m.max(y.max(0.0).sqrt()));
    let mut x = w_hi.re;
    let step = 0.5 * root_s;
    while x < 1e3 && (x < top + root_s || (ex.value(C::new(x, w_hi.im)).re - base) / ex.s < 50.0) {
        x += step;
    }
    x
}

fn generic_split(cfg: &SaddleConfig, u: f64, v: f64) -> f64 {
    (0.5 * (u + v)).sqrt().max(2.0 * cfg.offset * cfg.s.sqrt())
}

/// Rectangle [0, right] x [-height, height] (right half), for small-N checks.
pub fn rectangle_contours(eigs: &[f64], cfg: &SaddleConfig, u: f64, v: f64, height: f64, right: f64) -> Result<KernelContours> {
    let line = |from: C, to: C| PathPiece { shape: ArcShape::Line { from, to }, axis: false };
    let pieces = vec![
        line(C::new(0.0, -height), C::new(right, -height)),
        line(C::new(right, -height), C::new(right, height)),
        line(C::new(right, height), C::new(0.0, height)),
    ];
    let gamma = ContourPath { pieces, label: ContourLabel::GammaRight };
    KernelContours::finish(gamma, generic_split(cfg, u, v), eigs, cfg, v)
}

/// Circle |z| = radius (right half), for small-N checks.
pub fn circle_contours(eigs: &[f64], cfg: &SaddleConfig, u: f64, v: f64, radius: f64) -> Result<KernelContours> {
    let pieces = vec![PathPiece {
        shape: ArcShape::Circle { radius, from_angle: -0.5 * PI, to_angle: 0.5 * PI },
        axis: false,
    }];
    let gamma = ContourPath { pieces, label: ContourLabel::GammaRight };
    KernelContours::finish(gamma, generic_split(cfg, u, v), eigs, cfg, v)
}
