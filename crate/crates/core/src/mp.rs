//! Marčenko–Pastur limit law and the Stieltjes concentration experiment.

use crate::ensemble::{derive_seed, form_covariance, sample_matrix, EnsembleDims, EntryLaw};
use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::spectral::{empirical_stieltjes, hermitian_eigenvalues};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpParams {
    pub gamma: f64,
    pub sigma2: f64,
    pub u_minus: f64,
    pub u_plus: f64,
}

impl MpParams {
    pub fn new(gamma: f64, sigma2: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return invalid(format!("gamma must be positive, got {gamma}"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return invalid(format!("sigma2 must be positive, got {sigma2}"));
        }
        let r = gamma.sqrt();
        Ok(MpParams {
            gamma,
            sigma2,
            u_minus: sigma2 * (1.0 - r) * (1.0 - r),
            u_plus: sigma2 * (1.0 + r) * (1.0 + r),
        })
    }

    /// Whether the density blows up at the lower edge (gamma = 1).
    pub fn hard_edge(&self) -> bool {
        self.u_minus == 0.0
    }

    /// Bulk window [u_- + eps, u_+ - eps] with eps = frac * (u_+ - u_-).
    pub fn bulk(&self, frac: f64) -> (f64, f64) {
        let eps = frac * (self.u_plus - self.u_minus);
        (self.u_minus + eps, self.u_plus - eps)
    }
}

/// Density of the law; infinite at x = 0 when the lower edge is hard.
pub fn mp_density(p: &MpParams, x: f64) -> f64 {
    if x < p.u_minus || x > p.u_plus {
        return 0.0;
    }
    if x == 0.0 {
        return if p.hard_edge() { f64::INFINITY } else { 0.0 };
    }
    ((p.u_plus - x) * (x - p.u_minus)).max(0.0).sqrt() / (2.0 * PI * x * p.sigma2)
}

/// Cumulative distribution via the substitution x = centre - half cos(theta),
/// which removes the edge square roots (and the 1/x pole at a hard edge).
pub fn mp_cdf(p: &MpParams, x: f64) -> f64 {
    if x <= p.u_minus {
        return 0.0;
    }
    if x >= p.u_plus {
        return 1.0;
    }
    let half = 0.5 * (p.u_plus - p.u_minus);
    let centre = 0.5 * (p.u_plus + p.u_minus);
    let theta_max = ((centre - x) / half).clamp(-1.0, 1.0).acos();
    let integrand = |th: f64| {
        let s = (0.5 * th).sin();
        let one_minus_cos = 2.0 * s * s;
        let one_plus_cos = 2.0 - one_minus_cos;
        let denom = p.u_minus / half + one_minus_cos;
        half * one_minus_cos * one_plus_cos / (2.0 * PI * p.sigma2 * denom)
    };
    let rule = quad::gauss_legendre(64).mapped(0.0, theta_max);
    let v: f64 = rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w * integrand(*t)).sum();
    v.clamp(0.0, 1.0)
}

/// Stieltjes transform of the law with ratio `ratio` and variance `sigma2`:
/// the root of sigma2 z m^2 + (z + sigma2 (1 - ratio)) m + 1 = 0 with Im m > 0.
pub fn mp_stieltjes_ratio(ratio: f64, sigma2: f64, z: C) -> Result<C> {
    if z.im <= 0.0 {
        return invalid("Stieltjes transform needs Im z > 0");
    }
    let bcoef = z + sigma2 * (1.0 - ratio);
    let disc = (bcoef * bcoef - 4.0 * sigma2 * z).sqrt();
    let denom = 2.0 * sigma2 * z;
    let mut m = (-bcoef + disc) / denom;
    if m.im <= 0.0 {
        m = (-bcoef - disc) / denom;
    }
    if m.im <= 0.0 || !m.re.is_finite() {
        return Err(Error::Domain(format!("no Herglotz root at z = {z}")));
    }
    Ok(m)
}

pub fn mp_stieltjes(p: &MpParams, z: C) -> Result<C> {
    mp_stieltjes_ratio(p.gamma, p.sigma2, z)
}

/// |1 + z m - ratio + ratio / (1 + sigma2 m)|.
pub fn self_consistent_residual(m: C, z: C, ratio: f64, sigma2: f64) -> Result<f64> {
    let d = 1.0 + sigma2 * m;
    if d.norm() == 0.0 {
        return invalid("1 + sigma2 m vanishes");
    }
    Ok((1.0 + z * m - ratio + ratio / d).norm())
}

/// sup_x |F_N(x) - F(x)| for the empirical distribution of `eigs`,
/// checked on both sides of every jump.
pub fn kolmogorov_distance(p: &MpParams, eigs: &[f64]) -> f64 {
    let mut asc = eigs.to_vec();
    asc.sort_by(|a, b| a.total_cmp(b));
    let n = asc.len() as f64;
    asc.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = mp_cdf(p, x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct MpCheck {
    /// Kolmogorov distance per trial.
    pub distances: Vec<f64>,
    pub mean_distance: f64,
    pub median_distance: f64,
    pub params: MpParams,
}

/// Kolmogorov distance between the spectrum of Y Y^*/N (entries rescaled to
/// E|Y_ij|^2 = sigma2) and the law at ratio p/N, over independent trials.
pub fn mp_check_experiment(law: &EntryLaw, dims: EnsembleDims, sigma2: f64, trials: usize, seed: u64) -> Result<MpCheck> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let params = MpParams::new(dims.p as f64 / dims.n as f64, sigma2)?;
    let scale = sigma2 / law.entry_variance();
    let distances: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let y = sample_matrix(law, dims, derive_seed(seed, t as u64))?;
            let mut h = form_covariance(&y);
            h.scale_mut(scale);
            Ok(kolmogorov_distance(&params, &hermitian_eigenvalues(&h)?))
        })
        .collect::<Result<_>>()?;
    let mean_distance = distances.iter().sum::<f64>() / trials as f64;
    let median_distance = median(&distances);
    Ok(MpCheck { distances, mean_distance, median_distance, params })
}

/// Evenly spaced bulk grid of `points` over [u_- + eps, u_+ - eps].
pub fn bulk_grid(p: &MpParams, frac: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = p.bulk(frac);
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub delta: f64,
    pub exceed_freq: f64,
    pub median_sup_err: f64,
    pub n: usize,
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationTable {
    pub sup_errors: Vec<f64>,
    pub median_sup_err: f64,
    pub rows: Vec<TailRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sup over `u_grid` of |m_N(u + i eta) - m_MP(u + i eta)| for H = W W^*/N,
/// with the comparison law taken at ratio p/N and variance `sigma2`, over
/// independent trials; tail table over `delta_grid`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_experiment(
    law: &EntryLaw,
    dims: EnsembleDims,
    sigma2: f64,
    eta: f64,
    u_grid: &[f64],
    delta_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ConcentrationTable> {
    if eta <= 0.0 {
        return invalid("eta must be positive");
    }
    let ratio = dims.p as f64 / dims.n as f64;
    let scale = (sigma2 / law.entry_variance()).sqrt();
    let sup_errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let y = sample_matrix(law, dims, derive_seed(seed, t as u64))?;
            let mut h = form_covariance(&y);
            h.scale_mut(scale * scale);
            let eigs = hermitian_eigenvalues(&h)?;
            let mut sup = 0.0f64;
            for &u in u_grid {
                let z = C::new(u, eta);
                let mn = empirical_stieltjes(&eigs, z)?;
                let mm = mp_stieltjes_ratio(ratio, sigma2, z)?;
                sup = sup.max((mn - mm).norm());
            }
            Ok(sup)
        })
        .collect::<Result<Vec<_>>>()?;
    let med = median(&sup_errors);
    let rows = delta_grid
        .iter()
        .map(|&delta| TailRow {
            delta,
            exceed_freq: sup_errors.iter().filter(|&&e| e > delta).count() as f64 / trials as f64,
            median_sup_err: med,
            n: dims.n,
            eta,
        })
        .collect();
    Ok(ConcentrationTable { sup_errors, median_sup_err: med, rows })
}
