//! The conjugated kernel split into the two pieces that survive once the
//! Bessel functions are replaced by their exponential asymptotics, both in
//! the direct form (with the pole 1/(w - z)) and in the form rewritten by
//! integration by parts (pole-free double integral plus endpoint terms).

use super::contour::{KernelContours, Node};
use super::critical::Exponent;
use super::raw::{exponentiate, refine, KERNEL_NORMALIZATION};
use super::{exprel, SaddleConfig, Scaled};
use crate::error::{invalid, Result};
use num_complex::Complex64 as C;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelDecomposition {
    pub k1: C,
    pub k2: C,
    pub k1_main: C,
    pub k1_endpoints: C,
    pub k2_main: C,
    pub k2_endpoints: C,
}

impl KernelDecomposition {
    pub fn total(&self) -> C {
        self.k1 + self.k2
    }
}

/// ln((e^x - 1) / x) without overflow.
fn ln_exprel(x: C) -> C {
    if x.norm() < 1e-4 {
        exprel(x).ln()
    } else if x.re > 0.0 {
        x + (1.0 - (-x).exp()).ln() - x.ln()
    } else {
        super::expm1(x).ln() - x.ln()
    }
}

/// theta(w, b) = -(e^X - 1) / (X S) with X = 2 (w - b)(sqrt u - sqrt v) / S; tends to -1/S at u = v.
pub fn theta(w: C, b: f64, u: f64, v: f64, s: f64) -> C {
    let x = 2.0 * (w - b) * (u.sqrt() - v.sqrt()) / s;
    -exprel(x) / s
}

fn ln_theta(w: C, b: f64, u: f64, v: f64, s: f64) -> C {
    let x = 2.0 * (w - b) * (u.sqrt() - v.sqrt()) / s;
    C::new(-s.ln(), PI) + ln_exprel(x)
}

/// theta^1(z, b) = -(e^Y - 1) / (Y S) with Y = -2 (z - b)(sqrt u + sqrt v) / S.
pub fn theta1(z: C, b: f64, u: f64, v: f64, s: f64) -> C {
    let y = -2.0 * (z - b) * (u.sqrt() + v.sqrt()) / s;
    -exprel(y) / s
}

fn ln_theta1(z: C, b: f64, u: f64, v: f64, s: f64) -> C {
    let y = -2.0 * (z - b) * (u.sqrt() + v.sqrt()) / s;
    C::new(-s.ln(), PI) + ln_exprel(y)
}

/// g(w, z) = (w - b)(f'(w) - f'(z)) / (w - z) + f'(z), with the midpoint
/// second derivative when w and z nearly coincide.
pub fn divided_difference_g(ex: &Exponent, w: C, z: C, b: f64) -> C {
    g_from(ex, w, z, ex.d1(w), ex.d1(z), b)
}

fn g_from(ex: &Exponent, w: C, z: C, dw: C, dz: C, b: f64) -> C {
    let diff = if (w - z).norm() < 1e-8 { ex.d2(0.5 * (w + z)) } else { (dw - dz) / (w - z) };
    (w - b) * diff + dz
}

/// Extra terms g^1 (and the large-order correction when `psi` != 0).
fn g_extra(w: C, z: C, b: f64, nu: f64, s: f64, psi: f64) -> C {
    let wz = w * z;
    let mut g = nu * b * s / wz + (s * b / (2.0 * wz)) * (w - z) / (w + z);
    if psi != 0.0 {
        g += s * psi * (1.0 / wz - b * (w + z) / (wz * wz));
    }
    g
}

struct Setup<'a> {
    eigs: &'a [f64],
    u: f64,
    v: f64,
    b: f64,
    s: f64,
    nu: f64,
    /// Coefficient of (1/w - 1/z) in the large-order exponent; 0 for bounded order.
    psi: f64,
    fu: Exponent,
    fv: Exponent,
    x1: (C, C),
    root4: f64,
}

impl<'a> Setup<'a> {
    fn new(eigs: &'a [f64], u: f64, v: f64, cfg: &SaddleConfig, c: &KernelContours) -> Result<Self> {
        if !(u > 0.0 && v > 0.0) {
            return invalid(format!("kernel needs u, v > 0, got ({u}, {v})"));
        }
        let b = match cfg.b {
            Some(b) => b,
            None => return invalid("conjugation constant b is not set"),
        };
        let x1 = match c.endpoints {
            Some(e) => e,
            None => return invalid("contours carry no endpoints; use build_contours"),
        };
        let psi = if cfg.gamma > 1.0 {
            let g1 = cfg.gamma - 1.0;
            g1 * g1 * cfg.n as f64 * cfg.a2() / (4.0 * cfg.u_star)
        } else {
            0.0
        };
        Ok(Setup {
            eigs,
            u,
            v,
            b,
            s: cfg.s,
            nu: cfg.nu as f64,
            psi,
            fu: Exponent::new(eigs, cfg.s, u, 0.0),
            fv: Exponent::new(eigs, cfg.s, v, 0.0),
            x1,
            root4: (u * v).powf(0.25),
        })
    }

    /// ln(c / (4 i^2 pi^2)) with c the kernel normalization.
    fn ln_pi2(&self) -> C {
        C::new(KERNEL_NORMALIZATION.ln() - (4.0 * PI * PI).ln(), PI)
    }
}

fn sum_double<F>(ws: &[Node], wl: &[C], zs: &[Node], zl: &[C], coupling: F) -> Scaled
where
    F: Fn(usize, usize) -> C + Sync,
{
    use rayon::prelude::*;
    let a = exponentiate(ws, wl);
    let bz = exponentiate(zs, zl);
    let total: C = (0..zs.len())
        .into_par_iter()
        .map(|j| {
            if bz.values[j].norm() == 0.0 {
                return C::new(0.0, 0.0);
            }
            let inner: C = (0..ws.len()).map(|i| a.values[i] * coupling(i, j)).sum();
            inner * bz.values[j]
        })
        .sum();
    Scaled { mantissa: total, log_scale: a.scale + bz.scale }
}

fn sum_single<F: Fn(usize) -> C>(ws: &[Node], wl: &[C], weight: F) -> Scaled {
    let a = exponentiate(ws, wl);
    let total: C = (0..ws.len()).map(|i| a.values[i] * weight(i)).sum();
    Scaled { mantissa: total, log_scale: a.scale }
}

/// Endpoint terms of the rewritten kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointForm {
    /// Obtained by moving the endpoints under z -> b + beta (z - b): weight
    /// (w + x)/((w - x) sqrt(w) sqrt(x)), with +(x^- - b) and -(x^+ - b).
    /// The rewritten kernel then equals the direct form exactly.
    Derived,
    /// Weight (w + x)/(sqrt(w) sqrt(x)) with -(x^- - b) and +(x^+ - b).
    AsPrinted,
}

fn endpoint_signs(st: &Setup, form: EndpointForm) -> [(C, f64); 2] {
    let s = match form {
        EndpointForm::Derived => -1.0,
        EndpointForm::AsPrinted => 1.0,
    };
    [(st.x1.0, -s), (st.x1.1, s)]
}

fn endpoint_weight(w: C, x: C, form: EndpointForm) -> C {
    let base = (w + x) / (w.sqrt() * x.sqrt());
    match form {
        EndpointForm::Derived => base / (w - x),
        EndpointForm::AsPrinted => base,
    }
}

struct Parts {
    main: Scaled,
    ends: Scaled,
}

/// The rewritten K^{1,b}: pole-free double integral plus the two endpoint terms.
fn k1_pass(st: &Setup, c: &KernelContours, form: EndpointForm, order: usize) -> Result<Parts> {
    let ws = c.line_nodes(c.split_re, order)?;
    let zs = c.gamma.without_axis().nodes(order, c.panel_len, false)?;
    let (b, s, nu, psi) = (st.b, st.s, st.nu, st.psi);
    let lw = |w: C| st.fu.value(w) / s + nu * w.ln() + ln_theta(w, b, st.u, st.v, s) + psi / w;
    let lz = |z: C| -st.fu.value(z) / s - nu * z.ln() - psi / z;
    let wl: Vec<C> = ws.iter().map(|n| lw(n.z)).collect();
    let zl: Vec<C> = zs.iter().map(|n| lz(n.z)).collect();
    let dw: Vec<C> = ws.iter().map(|n| st.fu.d1(n.z)).collect();
    let dz: Vec<C> = zs.iter().map(|n| st.fu.d1(n.z)).collect();
    let main = sum_double(&ws, &wl, &zs, &zl, |i, j| {
        let (w, z) = (ws[i].z, zs[j].z);
        let g = g_from(&st.fu, w, z, dw[i], dz[j], b) + g_extra(w, z, b, nu, s, psi);
        (w + z) / (w.sqrt() * z.sqrt()) * g
    });
    let main = main.times(C::new(1.0 / (st.root4 * s), 0.0));
    let main = scale_ln(main, st.ln_pi2());
    let mut ends = Scaled::zero();
    for (x1, sign) in endpoint_signs(st, form) {
        let t = sum_single(&ws, &wl, |i| endpoint_weight(ws[i].z, x1, form));
        let t = scale_ln(t, lz(x1) + st.ln_pi2()).times(sign * (x1 - b) / st.root4);
        ends = ends.plus(t);
    }
    Ok(Parts { main, ends })
}

/// The rewritten K^{2,b} for bounded order, before the phase e^{i nu pi + i pi / 2}.
fn k2_bounded_pass(st: &Setup, c: &KernelContours, form: EndpointForm, order: usize) -> Result<Parts> {
    let ws = c.line_nodes(c.split_re, order)?;
    let zs = c.gamma.without_axis().nodes(order, c.panel_len, false)?;
    let (b, s, nu) = (st.b, st.s, st.nu);
    let lw = |w: C| st.fv.value(w) / s + nu * w.ln();
    let lz = |z: C| -st.fv.value(z) / s - nu * z.ln() + ln_theta1(z, b, st.u, st.v, s);
    let wl: Vec<C> = ws.iter().map(|n| lw(n.z)).collect();
    let zl: Vec<C> = zs.iter().map(|n| lz(n.z)).collect();
    let dw: Vec<C> = ws.iter().map(|n| st.fv.d1(n.z)).collect();
    let dz: Vec<C> = zs.iter().map(|n| st.fv.d1(n.z)).collect();
    let shift = -4.0 * b * st.u.sqrt() / s;
    let main = sum_double(&ws, &wl, &zs, &zl, |i, j| {
        let (w, z) = (ws[i].z, zs[j].z);
        let g = g_from(&st.fv, w, z, dw[i], dz[j], b) + g_extra(w, z, b, nu, s, 0.0);
        (w + z) / (w.sqrt() * z.sqrt()) * g
    });
    let main = scale_ln(main.times(C::new(1.0 / (st.root4 * s), 0.0)), st.ln_pi2()).shift(shift);
    let mut ends = Scaled::zero();
    for (x1, sign) in endpoint_signs(st, form) {
        let t = sum_single(&ws, &wl, |i| endpoint_weight(ws[i].z, x1, form));
        let t = scale_ln(t, lz(x1) + st.ln_pi2()).times(sign * (x1 - b) / st.root4).shift(shift);
        ends = ends.plus(t);
    }
    Ok(Parts { main, ends })
}

fn scale_ln(x: Scaled, l: C) -> Scaled {
    Scaled { mantissa: x.mantissa * C::from_polar(1.0, l.im), log_scale: x.log_scale + l.re }
}

/// Which direct piece to evaluate.
#[derive(Clone, Copy)]
enum Direct {
    /// e^{+2z sqrt(u)/S} with (w + z)/(w - z).
    First,
    /// e^{-2z sqrt(u)/S} with (w + z)/(w - z) (bounded order).
    SecondBounded,
    /// e^{+2z sqrt(u)/S} with (w - z)/(w + z) (large order).
    SecondLarge,
}

/// One Bessel-replaced double integral, conjugated, with Upsilon moved to the
/// crossing abscissa (offset lines as in the raw kernel, plus the residue).
fn direct_pass(st: &Setup, cfg: &SaddleConfig, c: &KernelContours, which: Direct, order: usize) -> Result<(Scaled, f64)> {
    let (s, nu, psi) = (st.s, st.nu, st.psi);
    let (ru, rv) = (st.u.sqrt(), st.v.sqrt());
    let zsign = if matches!(which, Direct::SecondBounded) { -1.0 } else { 1.0 };
    let d = c.line_offset(cfg);
    let x0 = c.split_re;
    let zs = c.gamma.without_axis().nodes(order, c.panel_len, false)?;
    let left = c.line_nodes(x0 - d, order)?;
    let right = c.line_nodes(x0 + d, order)?;
    let logs = |x: C| -> C { st.eigs.iter().map(|&y| (x * x - y).ln()).sum() };
    let lw = |w: C| (w * w - 2.0 * w * rv) / s + logs(w) + nu * w.ln() - 0.5 * w.ln() + psi / w;
    let lz = |z: C| (-z * z + zsign * 2.0 * z * ru) / s - logs(z) - nu * z.ln() - 0.5 * z.ln() - psi / z;
    let zl: Vec<C> = zs.iter().map(|n| lz(n.z)).collect();
    let ll: Vec<C> = left.iter().map(|n| lw(n.z)).collect();
    let lr: Vec<C> = right.iter().map(|n| lw(n.z)).collect();
    let pair = |w: C, z: C| match which {
        Direct::SecondLarge => (w - z) / (w + z),
        _ => (w + z) / (w - z),
    };
    let (zr, zlft): (Vec<usize>, Vec<usize>) = (0..zs.len()).partition(|&j| zs[j].z.re > x0);
    let pick = |idx: &[usize]| -> (Vec<Node>, Vec<C>) { (idx.iter().map(|&j| zs[j]).collect(), idx.iter().map(|&j| zl[j]).collect()) };
    let (zn_r, zl_r) = pick(&zr);
    let (zn_l, zl_l) = pick(&zlft);
    let a = sum_double(&left, &ll, &zn_r, &zl_r, |i, j| pair(left[i].z, zn_r[j].z));
    let bsum = sum_double(&right, &lr, &zn_l, &zl_l, |i, j| pair(right[i].z, zn_l[j].z));
    let mut total = a.plus(bsum);
    if !matches!(which, Direct::SecondLarge) {
        let (lo, hi) = c.crossing;
        let k = 2.0 * (zsign * ru - rv) / s;
        let span = hi - lo;
        // 2 pi i * integral of 2 e^{k z} from lo to hi
        let ln_res = k * lo + (span * exprel(k * span)).ln() + C::new((4.0 * PI).ln(), 0.5 * PI);
        total = total.plus(Scaled::from_ln(ln_res));
    }
    let terms = total.ln_norm().max(a.ln_norm()).max(bsum.ln_norm());
    let mut ln_pref = st.ln_pi2() - (s * st.root4).ln() + 2.0 * st.b * (rv - ru) / s;
    match which {
        Direct::SecondBounded => ln_pref += C::new(0.0, PI * nu + 0.5 * PI),
        Direct::SecondLarge => ln_pref += C::new(0.0, PI),
        Direct::First => {}
    }
    Ok((scale_ln(total, ln_pref), terms + ln_pref.re))
}

/// K^{1,b} + K^{2,b} in the rewritten form (pole-free main term plus endpoint
/// terms). At gamma > 1 the second piece is kept in direct form.
pub fn eval_kernel_decomposed(eigs: &[f64], u: f64, v: f64, cfg: &SaddleConfig, contours: &KernelContours) -> Result<KernelDecomposition> {
    eval_kernel_decomposed_with(eigs, u, v, cfg, contours, EndpointForm::Derived)
}

pub fn eval_kernel_decomposed_with(
    eigs: &[f64],
    u: f64,
    v: f64,
    cfg: &SaddleConfig,
    contours: &KernelContours,
    form: EndpointForm,
) -> Result<KernelDecomposition> {
    let st = Setup::new(eigs, u, v, cfg, contours)?;
    let mut last1 = None;
    let k1 = refine(cfg.tol, |order| {
        let p = k1_pass(&st, contours, form, order)?;
        let t = p.main.plus(p.ends);
        let terms = p.main.ln_norm().max(p.ends.ln_norm());
        last1 = Some((p.main, p.ends));
        Ok((t, terms))
    })?;
    let (m1, e1) = last1.expect("at least one pass");
    let (k2, m2, e2) = if cfg.gamma > 1.0 {
        let k2 = refine(cfg.tol, |order| direct_pass(&st, cfg, contours, Direct::SecondLarge, order))?;
        (k2, k2, Scaled::zero())
    } else {
        let mut last2 = None;
        let k2 = refine(cfg.tol, |order| {
            let p = k2_bounded_pass(&st, contours, form, order)?;
            let t = p.main.plus(p.ends);
            let terms = p.main.ln_norm().max(p.ends.ln_norm());
            last2 = Some((p.main, p.ends));
            Ok((t, terms))
        })?;
        let (m2, e2) = last2.expect("at least one pass");
        let phase = C::from_polar(1.0, PI * st.nu + 0.5 * PI);
        (k2.times(phase), m2.times(phase), e2.times(phase))
    };
    Ok(KernelDecomposition {
        k1: k1.to_complex(),
        k2: k2.to_complex(),
        k1_main: m1.to_complex(),
        k1_endpoints: e1.to_complex(),
        k2_main: m2.to_complex(),
        k2_endpoints: e2.to_complex(),
    })
}

/// K^{1,b} and K^{2,b} in their direct form, before integration by parts;
/// the rewritten form must agree with it exactly.
pub fn eval_kernel_bessel_replaced(eigs: &[f64], u: f64, v: f64, cfg: &SaddleConfig, contours: &KernelContours) -> Result<KernelDecomposition> {
    let st = Setup::new(eigs, u, v, cfg, contours)?;
    let k1 = refine(cfg.tol, |order| direct_pass(&st, cfg, contours, Direct::First, order))?.to_complex();
    let second = if cfg.gamma > 1.0 { Direct::SecondLarge } else { Direct::SecondBounded };
    let k2 = refine(cfg.tol, |order| direct_pass(&st, cfg, contours, second, order))?.to_complex();
    Ok(KernelDecomposition {
        k1,
        k2,
        k1_main: k1,
        k1_endpoints: C::new(0.0, 0.0),
        k2_main: k2,
        k2_endpoints: C::new(0.0, 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_limit_is_minus_inverse_scale() {
        let s = 0.01;
        let t = theta(C::new(0.6, 0.1), 0.6, 0.4, 0.4, s);
        assert!((t * s + 1.0).norm() < 1e-12);
        let t = theta(C::new(0.6, 0.1), 0.5, 0.4, 0.4 + 1e-9, s);
        assert!((t * s + 1.0).norm() < 1e-6);
    }

    #[test]
    fn log_forms_match_values() {
        let (u, v, s, b) = (0.4, 0.43, 0.02, 0.6);
        for w in [C::new(0.6, 0.2), C::new(0.1, -0.3), C::new(2.0, 1.0)] {
            assert!((ln_theta(w, b, u, v, s).exp() - theta(w, b, u, v, s)).norm() < 1e-9 * theta(w, b, u, v, s).norm());
            assert!((ln_theta1(w, b, u, v, s).exp() - theta1(w, b, u, v, s)).norm() < 1e-9 * theta1(w, b, u, v, s).norm());
        }
    }

    #[test]
    fn divided_difference_at_coincidence() {
        let ex = Exponent::new(&[0.2, 0.5], 0.05, 0.3, 0.0);
        let w = C::new(0.55, 0.12);
        let b = 0.5;
        let exact = (w - b) * ex.d2(w) + ex.d1(w);
        assert!((divided_difference_g(&ex, w, w, b) - exact).norm() < 1e-9);
        assert!((divided_difference_g(&ex, w, w + 1e-6, b) - exact).norm() < 1e-5);
    }
}
