//! Local eigenvalue statistics, the spacing function, and the Monte-Carlo
//! harness for the two-point and spacing limits.

use crate::ensemble::{
    derive_seed, gauss_divisible_sample, sample_matrix, EnsembleDims, EntryLaw, GaussDivisibleParams,
    MatrixSample,
};
use crate::error::{invalid, Result};
use crate::fredholm::{spacing_cdf, two_point_limit};
use crate::mp::{mp_density, MpParams};
use crate::quad;
use crate::spectral::{hermitian_eigenvalues, Spectrum};
use crate::ensemble::form_covariance;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Bounded symmetric test functions with compact support.
#[derive(Clone)]
pub enum TestFunction {
    Zero,
    /// Indicator of the closed cube [lo, hi]^m.
    Box { lo: f64, hi: f64 },
    /// Product of exp(1 - 1/(1 - (x/r)^2)) bumps.
    Bump { radius: f64 },
    Custom { f: CustomFn, radius: f64 },
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Zero => write!(f, "Zero"),
            TestFunction::Box { lo, hi } => write!(f, "Box[{lo}, {hi}]"),
            TestFunction::Bump { radius } => write!(f, "Bump(r = {radius})"),
            TestFunction::Custom { radius, .. } => write!(f, "Custom(r = {radius})"),
        }
    }
}

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

impl TestFunction {
    pub fn eval(&self, xs: &[f64]) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Box { lo, hi } => {
                if xs.iter().all(|x| x >= lo && x <= hi) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Bump { radius } => xs.iter().map(|x| bump(x / radius)).product(),
            TestFunction::Custom { f, .. } => f(xs),
        }
    }

    /// Every argument outside [-radius, radius] makes f vanish.
    pub fn support_radius(&self) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Box { lo, hi } => lo.abs().max(hi.abs()),
            TestFunction::Bump { radius } | TestFunction::Custom { radius, .. } => *radius,
        }
    }

    fn integration_box(&self) -> (f64, f64) {
        match self {
            TestFunction::Box { lo, hi } => (*lo, *hi),
            _ => {
                let r = self.support_radius();
                (-r, r)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalStatRequest {
    pub m: usize,
    pub f: TestFunction,
    pub u: f64,
    pub rho_n: f64,
}

impl LocalStatRequest {
    pub fn new(m: usize, f: TestFunction, u: f64, rho_n: f64) -> Result<Self> {
        if !(m == 2 || m == 3) {
            return invalid(format!("local statistics are implemented for m = 2, 3, got {m}"));
        }
        if !(rho_n > 0.0) {
            return invalid("rho_N must be positive");
        }
        if !f.support_radius().is_finite() {
            return invalid("test function needs a finite support radius");
        }
        Ok(LocalStatRequest { m, f, u, rho_n })
    }
}

/// N rho^MP_{gamma,1}(u).
pub fn unfolding_scale(n: usize, gamma: f64, u: f64) -> Result<f64> {
    let p = MpParams::new(gamma, 1.0)?;
    Ok(n as f64 * mp_density(&p, u))
}

fn tuple_sum(points: &[f64], req: &LocalStatRequest) -> f64 {
    let k = points.len();
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if j == i {
                continue;
            }
            if req.m == 2 {
                total += req.f.eval(&[points[i], points[j]]);
            } else {
                for l in 0..k {
                    if l != i && l != j {
                        total += req.f.eval(&[points[i], points[j], points[l]]);
                    }
                }
            }
        }
    }
    total
}

/// Sum of f(rho_N (lambda_i1 - u), ...) over ordered tuples of distinct
/// indices; only eigenvalues inside the support of f are enumerated.
pub fn local_statistic(eigs: &[f64], req: &LocalStatRequest) -> f64 {
    let r = req.f.support_radius();
    let points: Vec<f64> = eigs
        .iter()
        .map(|l| req.rho_n * (l - req.u))
        .filter(|x| x.abs() <= r)
        .collect();
    tuple_sum(&points, req)
}

/// The same sum over all tuples, without pruning.
pub fn local_statistic_unpruned(eigs: &[f64], req: &LocalStatRequest) -> f64 {
    let points: Vec<f64> = eigs.iter().map(|l| req.rho_n * (l - req.u)).collect();
    tuple_sum(&points, req)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpacingRequest {
    pub s: f64,
    pub u: f64,
    pub t_n: f64,
    pub rho_n: f64,
}

impl SpacingRequest {
    /// Default window t_N = sqrt(N).
    pub fn with_default_window(s: f64, u: f64, n: usize, rho_n: f64) -> Self {
        SpacingRequest { s, u, t_n: (n as f64).sqrt(), rho_n }
    }
}

/// Indices j (ascending order) with |lambda_j - u| <= t_N / rho_N.
pub fn window_count(eigs: &[f64], req: &SpacingRequest) -> usize {
    let half = req.t_n / req.rho_n;
    eigs.iter().filter(|&&l| (l - req.u).abs() <= half).count()
}

/// (1 / 2t_N) #{ j : lambda_{j+1} - lambda_j <= s / rho_N, |lambda_j - u| <= t_N / rho_N }
/// on the ascending ordering, closed inequalities.
pub fn spacing_function(eigs: &[f64], req: &SpacingRequest) -> f64 {
    let mut asc = eigs.to_vec();
    asc.sort_by(|a, b| a.total_cmp(b));
    let gap_max = req.s / req.rho_n;
    let half = req.t_n / req.rho_n;
    let count = asc
        .windows(2)
        .filter(|w| w[1] - w[0] <= gap_max && (w[0] - req.u).abs() <= half)
        .count();
    count as f64 / (2.0 * req.t_n)
}

/// Pairwise (tree) summation; the result depends only on the order of `v`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample for one trial with entries rescaled to E|Y_ij|^2 = 1.
fn normalized_sample(
    law: &EntryLaw,
    dims: EnsembleDims,
    gd: Option<GaussDivisibleParams>,
    seed: u64,
) -> Result<MatrixSample> {
    let (mut y, var) = match gd {
        Some(gd) => (gauss_divisible_sample(law, gd, dims, seed)?, law.entry_variance() + gd.a * gd.a),
        None => (sample_matrix(law, dims, seed)?, law.entry_variance()),
    };
    y.data.scale_mut(var.sqrt().recip());
    Ok(y)
}

fn trial_eigenvalues(
    law: &EntryLaw,
    dims: EnsembleDims,
    gd: Option<GaussDivisibleParams>,
    seed: u64,
    trial: usize,
) -> Result<Vec<f64>> {
    let y = normalized_sample(law, dims, gd, derive_seed(seed, trial as u64))?;
    hermitian_eigenvalues(&form_covariance(&y))
}

/// Spectrum of one normalized trial (for inspection and export).
pub fn trial_spectrum(law: &EntryLaw, dims: EnsembleDims, gd: Option<GaussDivisibleParams>, seed: u64, trial: usize) -> Result<Spectrum> {
    Ok(Spectrum { eigs: trial_eigenvalues(law, dims, gd, seed, trial)?, dims })
}

/// Double integral of f(x, y) (1 - sinc^2(x - y)) by composite Gauss–Legendre.
pub fn two_point_theory(f: &TestFunction) -> f64 {
    let (lo, hi) = f.integration_box();
    if !(hi > lo) {
        return 0.0;
    }
    let panels = ((hi - lo).ceil() as usize * 4).max(4);
    let rule = quad::composite_gauss_legendre(lo, hi, panels, 12);
    let mut rows = Vec::with_capacity(rule.len());
    for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
        let row: Vec<f64> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(y, wy)| wy * f.eval(&[*x, *y]) * two_point_limit(*x, *y))
            .collect();
        rows.push(wx * pairwise_sum(&row));
    }
    pairwise_sum(&rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPointSummary {
    pub per_trial: Vec<f64>,
    pub mc_mean: f64,
    pub se: f64,
    pub theory: f64,
    pub u: f64,
    pub rho_n: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Monte-Carlo mean of S_N^(2)(f, u, rho_N) with rho_N = N rho^MP_{gamma,1}(u)
/// (gamma = p/N), against the sine-kernel two-point limit.
#[allow(clippy::too_many_arguments)]
pub fn run_two_point_experiment(
    law: &EntryLaw,
    dims: EnsembleDims,
    gd: Option<GaussDivisibleParams>,
    u: f64,
    f: &TestFunction,
    trials: usize,
    seed: u64,
) -> Result<TwoPointSummary> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let gamma = dims.p as f64 / dims.n as f64;
    let rho_n = unfolding_scale(dims.n, gamma, u)?;
    let req = LocalStatRequest::new(2, f.clone(), u, rho_n)?;
    let per_trial: Vec<f64> = if matches!(f, TestFunction::Zero) {
        vec![0.0; trials]
    } else {
        (0..trials)
            .into_par_iter()
            .map(|t| Ok(local_statistic(&trial_eigenvalues(law, dims, gd, seed, t)?, &req)))
            .collect::<Result<_>>()?
    };
    let (mc_mean, se) = mean_and_se(&per_trial);
    Ok(TwoPointSummary { per_trial, mc_mean, se, theory: two_point_theory(f), u, rho_n, trials, seed })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpacingRow {
    pub s: f64,
    pub empirical: f64,
    pub theory: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpacingTable {
    pub rows: Vec<SpacingRow>,
    pub sup_distance: f64,
    pub t_n: f64,
    pub rho_n: f64,
}

/// Monte-Carlo mean of the spacing function over `s_grid` against the Gaudin
/// distribution function, with t_N = sqrt(N).
pub fn run_spacing_experiment(
    law: &EntryLaw,
    dims: EnsembleDims,
    u: f64,
    s_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SpacingTable> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let gamma = dims.p as f64 / dims.n as f64;
    let rho_n = unfolding_scale(dims.n, gamma, u)?;
    let t_n = (dims.n as f64).sqrt();
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let eigs = trial_eigenvalues(law, dims, None, seed, t)?;
            Ok(s_grid
                .iter()
                .map(|&s| spacing_function(&eigs, &SpacingRequest { s, u, t_n, rho_n }))
                .collect())
        })
        .collect::<Result<_>>()?;
    let theory: Vec<f64> = s_grid.par_iter().map(|&s| spacing_cdf(s)).collect();
    let rows: Vec<SpacingRow> = s_grid
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let col: Vec<f64> = per_trial.iter().map(|r| r[i]).collect();
            let empirical = pairwise_sum(&col) / trials as f64;
            SpacingRow { s, empirical, theory: theory[i], abs_err: (empirical - theory[i]).abs() }
        })
        .collect();
    let sup_distance = rows.iter().fold(0.0f64, |a, r| a.max(r.abs_err));
    Ok(SpacingTable { rows, sup_distance, t_n, rho_n })
}
