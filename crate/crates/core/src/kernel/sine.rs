//! Rescaled conjugated kernel against the sine kernel.

use super::contour::build_contours;
use super::critical::{critical_points_empirical, SIGMA2};
use super::raw::eval_kernel_raw_scaled;
use super::{sine_kernel, SaddleConfig};
use crate::error::{invalid, Result};
use crate::mp::{mp_density, MpParams};
use num_complex::Complex64 as C;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SineRow {
    pub tau: f64,
    pub u: f64,
    pub v: f64,
    /// K_N^b(u, v).
    pub kernel: C,
    /// K_N^b(u, v) / (N rho(u)).
    pub rescaled: C,
    pub target: f64,
    /// |rescaled - target| / |target|, or the absolute error where the target vanishes.
    pub error: f64,
    pub relative: bool,
}

/// (1 / (N rho(u))) K_N^b(u, u + tau / (N rho(u))) at u = u_*, with b the real
/// part of the empirical critical point at u_*.
pub fn sine_limit_check(eigs: &[f64], cfg: &SaddleConfig, tau_grid: &[f64]) -> Result<Vec<SineRow>> {
    let u = cfg.u_star;
    let law = MpParams::new(cfg.gamma, SIGMA2)?;
    let rho = mp_density(&law, u);
    if !(rho > 0.0 && rho.is_finite()) {
        return invalid(format!("u_* = {u} is not in the bulk"));
    }
    let scale = cfg.n as f64 * rho;
    let cp = critical_points_empirical(eigs, cfg, u)?;
    let mut cfg = *cfg;
    let b = cp.w_plus.re;
    cfg.b = Some(b);
    let contours = build_contours(&cp, eigs, &cfg, u, u)?;
    tau_grid
        .iter()
        .map(|&tau| {
            let v = u + tau / scale;
            let k = eval_kernel_raw_scaled(eigs, u, v, &cfg, &contours)?;
            let kb = k.shift(2.0 * b * (v.sqrt() - u.sqrt()) / cfg.s).to_complex();
            let rescaled = kb / scale;
            let target = sine_kernel(tau, 0.0);
            let relative = target.abs() > 1e-12;
            let err = (rescaled - target).norm();
            Ok(SineRow {
                tau,
                u,
                v,
                kernel: kb,
                rescaled,
                target,
                error: if relative { err / target.abs() } else { err },
                relative,
            })
        })
        .collect()
}
