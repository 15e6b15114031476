//! Subcommand bodies. Each resolves its knobs, writes its artifacts and
//! returns the check outcome against the acceptance thresholds.

use crate::config::{ExperimentConfig, Resolver};
use crate::output::{Artifacts, CheckOutcome};
use anyhow::{anyhow, bail, Result};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use rmtlab::ensemble::ou1d::{chi2_divergence_1d, ou_semigroup_1d, ou_taylor_apply, truncate_center_density};
use rmtlab::ensemble::{
    form_covariance, sample_matrix, write_matrix_binary, EnsembleDims, EntryLaw, GaussDivisibleParams, Potential,
};
use rmtlab::fredholm::{default_order, gap_probability, spacing_cdf, spacing_density, DEFAULT_STEP};
use rmtlab::kernel::{
    build_contours, critical_points_empirical, eval_kernel_decomposed, eval_kernel_raw_scaled, sine_kernel,
    sine_limit_check, to_kernel_scale, SaddleConfig, KERNEL_ENTRY_VARIANCE,
};
use rmtlab::mp::{bulk_grid, concentration_experiment, kolmogorov_distance, median, mp_check_experiment, mp_density, MpParams};
use rmtlab::specfun::{bessel_i, bessel_i_in, bessel_k, bessel_k_in, Regime};
use rmtlab::spectral::{hermitian_eigenvalues, Spectrum};
use rmtlab::stats::{run_spacing_experiment, run_two_point_experiment, TestFunction};
use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::BufWriter;

pub struct Outcome {
    pub results: Value,
    pub check: CheckOutcome,
}

fn outcome(results: Value, passed: bool, criterion: String) -> Outcome {
    Outcome { results, check: CheckOutcome { passed, criterion } }
}

fn entry_law(r: &mut Resolver) -> Result<EntryLaw> {
    let cfg = r.cfg;
    let name = r.get("law", &cfg.law, "gaussian".to_string());
    Ok(match name.as_str() {
        "gaussian" => EntryLaw::Gaussian,
        "two-point" => EntryLaw::TwoPoint,
        "potential" => {
            let v = cfg.v.clone().ok_or_else(|| anyhow!("law `potential` needs key `v`"))?;
            r.record("v", &v);
            let k = r.get("k", &cfg.k, 1);
            let standardize = r.get("standardize", &cfg.standardize, true);
            EntryLaw::potential(Potential::parse(&v)?, k, standardize)
        }
        other => bail!("unknown law `{other}` (expected gaussian, potential or two-point)"),
    })
}

fn ensemble_dims(r: &mut Resolver, n: usize, gamma: f64) -> Result<EnsembleDims> {
    let cfg = r.cfg;
    let n = r.get("n", &cfg.n, n);
    let dims = match cfg.p {
        Some(p) => EnsembleDims::new(n, p)?,
        None => EnsembleDims::from_gamma(n, cfg.gamma.unwrap_or(gamma))?,
    };
    r.record("p", &dims.p);
    r.record("gamma", &dims.gamma_target);
    Ok(dims)
}

fn grid(r: &mut Resolver, max: f64, step: f64) -> Result<Vec<f64>> {
    let cfg = r.cfg;
    if let Some(g) = &cfg.s_grid {
        r.record("s_grid", g);
        return Ok(g.clone());
    }
    let max = r.get("s_max", &cfg.s_max, max);
    let step = r.get("s_step", &cfg.s_step, step);
    if !(step > 0.0) || !(max >= 0.0) {
        bail!("need s_step > 0 and s_max >= 0");
    }
    let count = (max / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * step).collect())
}

fn kernel_eigs(law: &EntryLaw, dims: EnsembleDims, seed: u64) -> Result<Vec<f64>> {
    let y = sample_matrix(law, dims, seed)?;
    Ok(to_kernel_scale(&hermitian_eigenvalues(&form_covariance(&y))?, law.entry_variance()))
}

fn saddle_config(r: &mut Resolver, dims: EnsembleDims, u_star: f64) -> Result<SaddleConfig> {
    let cfg = r.cfg;
    let lambda = r.get("lambda", &cfg.lambda, 0.6);
    let mut sc = SaddleConfig::new(dims.n, lambda, dims.nu() as u32, dims.p as f64 / dims.n as f64, u_star)?;
    sc.endpoint_divisor = r.get("endpoint_divisor", &cfg.endpoint_divisor, sc.endpoint_divisor);
    Ok(sc)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

pub fn sample_spectrum(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let law = entry_law(r)?;
    let dims = ensemble_dims(r, 200, 1.0)?;
    let seed = r.get("seed", &cfg.seed, 0);
    let sigma2 = r.get("sigma2", &cfg.sigma2, 1.0);
    let export = r.get("export_matrix", &cfg.export_matrix, false);
    let tol = r.get("tolerance", &cfg.tolerance, 0.05);
    let y = sample_matrix(&law, dims, seed)?;
    let mut h = form_covariance(&y);
    h.scale_mut(sigma2 / law.entry_variance());
    let spec = Spectrum::new(hermitian_eigenvalues(&h)?, dims);
    spec.write_csv(BufWriter::new(File::create(art.path("csv"))?))?;
    if export {
        write_matrix_binary(&y, BufWriter::new(File::create(art.path("bin"))?))?;
    }
    let params = MpParams::new(dims.p as f64 / dims.n as f64, sigma2)?;
    let ks = kolmogorov_distance(&params, &spec.eigs);
    art.write_gnuplot(
        "stats data using 1 nooutput\nbw = (STATS_max - STATS_min) / 40\nbin(x) = bw * floor(x / bw) + bw / 2\n\
         set style fill solid 0.5\nplot data using (bin($1)):(1.0 / (STATS_records * bw)) smooth freq with boxes title 'eigenvalue density'",
    )?;
    let results = json!({
        "count": spec.len(),
        "largest": spec.eigs.first(),
        "smallest": spec.eigs.last(),
        "support": [params.u_minus, params.u_plus],
        "ks_distance": ks,
    });
    Ok(outcome(results, ks < tol, format!("Kolmogorov distance {ks:.4e} < {tol}")))
}

#[derive(Serialize)]
struct KsRow {
    trial: usize,
    ks_distance: f64,
}

pub fn mp_check(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let law = entry_law(r)?;
    let dims = ensemble_dims(r, 1000, 2.0)?;
    let sigma2 = r.get("sigma2", &cfg.sigma2, 1.0);
    let trials = r.get("trials", &cfg.trials, 10);
    let seed = r.get("seed", &cfg.seed, 21);
    let tol = r.get("tolerance", &cfg.tolerance, 0.05);
    let res = mp_check_experiment(&law, dims, sigma2, trials, seed)?;
    let rows: Vec<KsRow> = res.distances.iter().enumerate().map(|(trial, &ks_distance)| KsRow { trial, ks_distance }).collect();
    art.write_csv(&rows)?;
    art.write_gnuplot("set xlabel 'trial'\nplot data using 1:2 with linespoints")?;
    let results = json!({
        "mean_distance": res.mean_distance,
        "median_distance": res.median_distance,
        "support": [res.params.u_minus, res.params.u_plus],
    });
    let m = res.mean_distance;
    Ok(outcome(results, m < tol, format!("mean Kolmogorov distance {m:.4e} < {tol}")))
}

pub fn concentration(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let law = entry_law(r)?;
    let dims = ensemble_dims(r, 400, 1.0)?;
    let sigma2 = r.get("sigma2", &cfg.sigma2, 1.0);
    let eta = r.get("eta", &cfg.eta, 0.1);
    let points = r.get("grid_points", &cfg.grid_points, 40);
    let frac = r.get("bulk_frac", &cfg.bulk_frac, 0.05);
    let deltas = r.get("delta_grid", &cfg.delta_grid, vec![0.02, 0.05, 0.1, 0.2]);
    let trials = r.get("trials", &cfg.trials, 50);
    let seed = r.get("seed", &cfg.seed, 12);
    let params = MpParams::new(dims.p as f64 / dims.n as f64, sigma2)?;
    let u_grid = bulk_grid(&params, frac, points);
    let table = concentration_experiment(&law, dims, sigma2, eta, &u_grid, &deltas, trials, seed)?;
    art.write_csv(&table.rows)?;
    art.write_gnuplot("set logscale x\nset xlabel 'delta'\nplot data using 1:2 with linespoints")?;
    let freqs: Vec<f64> = table.rows.iter().map(|row| row.exceed_freq).collect();
    let pass = freqs.windows(2).all(|w| w[1] <= w[0]) && freqs.first() > freqs.last();
    let results = json!({
        "median_sup_err": table.median_sup_err,
        "sup_errors": table.sup_errors,
        "u_grid": [u_grid.first(), u_grid.last()],
    });
    Ok(outcome(results, pass, "exceedance frequencies non-increasing in delta and first > last".into()))
}

#[derive(Serialize)]
struct KernelRow {
    u: f64,
    v: f64,
    #[serde(rename = "re_K")]
    re_k: f64,
    #[serde(rename = "im_K")]
    im_k: f64,
    rescaled: f64,
    sine_target: f64,
    rel_err: f64,
}

pub fn kernel_eval(r: &mut Resolver, art: &Artifacts, check: bool) -> Result<Outcome> {
    let cfg = r.cfg;
    let law = entry_law(r)?;
    let dims = ensemble_dims(r, 8, 1.0)?;
    let seed = r.get("seed", &cfg.seed, 1);
    let u_star = r.get("u_star", &cfg.u_star, 0.4);
    let mut sc = saddle_config(r, dims, u_star)?;
    let u_grid = r.get("u_grid", &cfg.u_grid, vec![u_star]);
    let taus = r.get("tau_grid", &cfg.tau_grid, vec![0.0, 0.25, 0.5, 1.0]);
    if let Some(v) = &cfg.v_grid {
        r.record("v_grid", v);
    }
    let tol = r.get("tolerance", &cfg.tolerance, 0.05);

    let eigs = kernel_eigs(&law, dims, seed)?;
    let cp = critical_points_empirical(&eigs, &sc, u_star)?;
    let b = cp.w_plus.re;
    sc.b = Some(b);
    let unit = MpParams::new(sc.gamma, KERNEL_ENTRY_VARIANCE)?;
    let mut pairs = Vec::new();
    for &u in &u_grid {
        let scale = sc.n as f64 * mp_density(&unit, u);
        if !(scale > 0.0 && scale.is_finite()) {
            bail!("u = {u} is not in the bulk");
        }
        match &cfg.v_grid {
            Some(vs) => pairs.extend(vs.iter().map(|&v| (u, v, scale))),
            None => pairs.extend(taus.iter().map(|&t| (u, u + t / scale, scale))),
        }
    }
    let evals: Vec<(KernelRow, Option<f64>)> = pairs
        .par_iter()
        .map(|&(u, v, scale)| -> Result<_> {
            let contours = build_contours(&cp, &eigs, &sc, u, v)?;
            let raw = eval_kernel_raw_scaled(&eigs, u, v, &sc, &contours)?;
            let kb = raw.shift(2.0 * b * (v.sqrt() - u.sqrt()) / sc.s).to_complex();
            let rescaled = kb / scale;
            let target = sine_kernel((v - u) * scale, 0.0);
            let err = (rescaled - target).norm();
            let rel_err = if target.abs() > 1e-12 { err / target.abs() } else { err };
            let gap = if check {
                let d = eval_kernel_decomposed(&eigs, u, v, &sc, &contours)?;
                Some((d.total() - kb).norm() / kb.norm())
            } else {
                None
            };
            let row = KernelRow { u, v, re_k: kb.re, im_k: kb.im, rescaled: rescaled.re, sine_target: target, rel_err };
            Ok((row, gap))
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = evals.iter().filter_map(|e| e.1).collect();
    let rows: Vec<KernelRow> = evals.into_iter().map(|e| e.0).collect();
    art.write_csv(&rows)?;
    art.write_gnuplot("set xlabel 'v'\nplot data using 2:5 with points title 'rescaled kernel', data using 2:6 with lines title 'sine kernel'")?;
    let worst_gap = gaps.iter().cloned().fold(0.0f64, f64::max);
    let results = json!({
        "conjugation_b": b,
        "scale_s": sc.s,
        "w_plus": [cp.w_plus.re, cp.w_plus.im],
        "max_rel_err": rows.iter().map(|row| row.rel_err).fold(0.0f64, f64::max),
        "decomposition_rel_gap": if check { Some(worst_gap) } else { None },
    });
    Ok(outcome(results, worst_gap < tol, format!("decomposed vs direct kernel relative gap {worst_gap:.4e} < {tol}")))
}

#[derive(Serialize)]
struct SineTrendRow {
    n: usize,
    tau: f64,
    median_rel_err: f64,
    min_rel_err: f64,
    max_rel_err: f64,
}

pub fn sine_limit(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let law = entry_law(r)?;
    let sizes = r.get("sizes", &cfg.sizes, vec![16, 32, 64]);
    let gamma = r.get("gamma", &cfg.gamma, 1.0);
    let lambda = r.get("lambda", &cfg.lambda, 0.6);
    let u_star = r.get("u_star", &cfg.u_star, 0.5);
    let replicates = r.get("replicates", &cfg.replicates, 5);
    let seed = r.get("seed", &cfg.seed, 1);
    let taus = r.get("tau_grid", &cfg.tau_grid, vec![0.25, 0.5]);
    let divisor = cfg.endpoint_divisor;
    if let Some(d) = divisor {
        r.record("endpoint_divisor", &d);
    }
    let slack = r.get("tolerance", &cfg.tolerance, 0.0);
    if sizes.is_empty() || replicates == 0 {
        bail!("need at least one size and one replicate");
    }
    let jobs: Vec<(usize, u64)> = sizes.iter().flat_map(|&n| (0..replicates as u64).map(move |i| (n, seed + i))).collect();
    let errors: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(n, s)| -> Result<Vec<f64>> {
            let dims = EnsembleDims::from_gamma(n, gamma)?;
            let mut sc = SaddleConfig::new(n, lambda, dims.nu() as u32, dims.p as f64 / n as f64, u_star)?;
            if let Some(d) = divisor {
                sc.endpoint_divisor = d;
            }
            Ok(sine_limit_check(&kernel_eigs(&law, dims, s)?, &sc, &taus)?.iter().map(|row| row.error).collect())
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (si, &n) in sizes.iter().enumerate() {
        for (ti, &tau) in taus.iter().enumerate() {
            let e: Vec<f64> = (0..replicates).map(|i| errors[si * replicates + i][ti]).collect();
            rows.push(SineTrendRow {
                n,
                tau,
                median_rel_err: median(&e),
                min_rel_err: e.iter().cloned().fold(f64::INFINITY, f64::min),
                max_rel_err: e.iter().cloned().fold(0.0, f64::max),
            });
        }
    }
    art.write_csv(&rows)?;
    art.write_gnuplot("set logscale xy\nset xlabel 'N'\nplot data using 1:3 with points title 'median relative error'")?;
    let pass = (0..taus.len()).all(|ti| {
        let m: Vec<f64> = (0..sizes.len()).map(|si| rows[si * taus.len() + ti].median_rel_err).collect();
        m.windows(2).all(|w| w[1] <= w[0] + slack)
    });
    let per_replicate: Vec<Value> = jobs
        .iter()
        .zip(&errors)
        .map(|(&(n, s), e)| json!({ "n": n, "seed": s, "rel_err": e }))
        .collect();
    Ok(outcome(json!({ "per_replicate": per_replicate }), pass, format!("median errors non-increasing in N (slack {slack})")))
}

#[derive(Serialize)]
struct FredholmRow {
    s: f64,
    #[serde(rename = "E")]
    e: f64,
    p: f64,
    cdf: f64,
}

pub fn fredholm(r: &mut Resolver, art: &Artifacts, check: bool) -> Result<Outcome> {
    let cfg = r.cfg;
    let s_grid = grid(r, 3.0, 0.05)?;
    let order = cfg.order;
    r.record("order", &order);
    let tol = r.get("tolerance", &cfg.tolerance, 1e-3);
    let pick = |s: f64| order.unwrap_or_else(|| default_order(s));
    let rows: Vec<FredholmRow> = s_grid
        .par_iter()
        .map(|&s| FredholmRow { s, e: gap_probability(s, pick(s)), p: spacing_density(s, DEFAULT_STEP), cdf: spacing_cdf(s) })
        .collect();
    art.write_csv(&rows)?;
    art.write_gnuplot("set xlabel 's'\nplot data using 1:2 with lines, data using 1:3 with lines, data using 1:4 with lines")?;
    if !check {
        return Ok(outcome(json!({ "rows": rows.len() }), true, "not evaluated outside check mode".into()));
    }
    let e0 = gap_probability(0.0, pick(0.0));
    let node_gap = s_grid
        .par_iter()
        .map(|&s| (gap_probability(s, pick(s)) - gap_probability(s, 2 * pick(s))).abs())
        .reduce(|| 0.0, f64::max);
    let mass = simpson(|w| spacing_density(w, DEFAULT_STEP), 0.0, 10.0, 400);
    let mean = simpson(|w| w * spacing_density(w, DEFAULT_STEP), 0.0, 10.0, 400);
    let p0 = spacing_density(0.0, DEFAULT_STEP).abs();
    let pass = e0 == 1.0 && node_gap < 1e-10 && (mass - 1.0).abs() < tol && (mean - 1.0).abs() < tol && p0 < 2e-3;
    let results = json!({ "e0": e0, "node_doubling_gap": node_gap, "mass": mass, "mean": mean, "p0": p0 });
    Ok(outcome(
        results,
        pass,
        format!("E(0) = 1, node doubling gap < 1e-10, mass and mean within {tol} of 1, p(0) < 2e-3"),
    ))
}

pub fn spacing(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let law = entry_law(r)?;
    let dims = ensemble_dims(r, 500, 1.0)?;
    let u = r.get("u", &cfg.u, 2.0);
    let s_grid = grid(r, 3.0, 0.1)?;
    let trials = r.get("trials", &cfg.trials, 200);
    let seed = r.get("seed", &cfg.seed, 9);
    let tol = r.get("tolerance", &cfg.tolerance, 0.05);
    let table = run_spacing_experiment(&law, dims, u, &s_grid, trials, seed)?;
    art.write_csv(&table.rows)?;
    art.write_gnuplot("set xlabel 's'\nplot data using 1:2 with points, data using 1:3 with lines")?;
    let d = table.sup_distance;
    let results = json!({ "sup_distance": d, "t_n": table.t_n, "rho_n": table.rho_n });
    Ok(outcome(results, d < tol, format!("sup distance {d:.4e} < {tol}")))
}

#[derive(Serialize)]
struct TwoPointRow {
    trial: usize,
    s2: f64,
    mean: f64,
    se: f64,
    theory: f64,
}

pub fn two_point(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let law = entry_law(r)?;
    let dims = ensemble_dims(r, 500, 1.0)?;
    let u = r.get("u", &cfg.u, 2.0);
    let trials = r.get("trials", &cfg.trials, 500);
    let seed = r.get("seed", &cfg.seed, 8);
    let f = match r.get("function", &cfg.function, "box".to_string()).as_str() {
        "box" => TestFunction::Box { lo: r.get("box_lo", &cfg.box_lo, 0.0), hi: r.get("box_hi", &cfg.box_hi, 1.0) },
        "bump" => TestFunction::Bump { radius: r.get("radius", &cfg.radius, 1.0) },
        other => bail!("unknown test function `{other}` (expected box or bump)"),
    };
    let gd = if r.get("gauss_divisible", &cfg.gauss_divisible, false) {
        Some(GaussDivisibleParams::new(r.get("lambda", &cfg.lambda, 0.6), dims.n)?)
    } else {
        None
    };
    let rel = r.get("tolerance", &cfg.tolerance, 0.1);
    let res = run_two_point_experiment(&law, dims, gd, u, &f, trials, seed)?;
    let (mut sum, mut sq) = (0.0, 0.0);
    let rows: Vec<TwoPointRow> = res
        .per_trial
        .iter()
        .enumerate()
        .map(|(i, &s2)| {
            sum += s2;
            sq += s2 * s2;
            let k = (i + 1) as f64;
            let mean = sum / k;
            let se = if i == 0 { f64::NAN } else { ((sq - k * mean * mean).max(0.0) / (k - 1.0) / k).sqrt() };
            TwoPointRow { trial: i, s2, mean, se, theory: res.theory }
        })
        .collect();
    art.write_csv(&rows)?;
    art.write_gnuplot("set xlabel 'trials'\nplot data using 1:3:4 with yerrorlines title 'running mean', data using 1:5 with lines title 'theory'")?;
    let bound = (3.0 * res.se).max(rel * res.theory.abs());
    let gap = (res.mc_mean - res.theory).abs();
    let results = json!({
        "mc_mean": res.mc_mean,
        "se": res.se,
        "theory": res.theory,
        "rho_n": res.rho_n,
        "u": res.u,
        "trials": res.trials,
        "test_function": format!("{f:?}"),
    });
    Ok(outcome(results, gap <= bound, format!("|mc_mean - theory| = {gap:.4e} <= max(3 se, {rel} |theory|) = {bound:.4e}")))
}

#[derive(Serialize)]
struct BesselRow {
    nu: u32,
    re_z: f64,
    im_z: f64,
    quantity: &'static str,
    routes: &'static str,
    rel_diff: f64,
}

fn ratio_err(a: C, b: C) -> f64 {
    ((a - b).exp() - 1.0).norm()
}

pub fn bessel_check(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let orders = r.get("orders", &cfg.orders, vec![0, 1, 2, 3]);
    let radii = r.get("radii", &cfg.radii, vec![15.0, 22.0, 30.0, 40.0]);
    let angles = r.get("angles", &cfg.angles, vec![-0.6, 0.0, 0.6]);
    let large = r.get("large_orders", &cfg.large_orders, vec![60, 90, 120]);
    let ratios = r.get("ratios", &cfg.ratios, vec![0.4, 0.7, 1.0]);
    let tol = r.get("tolerance", &cfg.tolerance, 1e-7);
    const WRONSKIAN_TOL: f64 = 1e-8;
    let mut rows = Vec::new();
    let mut push = |nu, z: C, quantity, routes, rel_diff| rows.push(BesselRow { nu, re_z: z.re, im_z: z.im, quantity, routes, rel_diff });
    for &nu in &orders {
        for &rad in &radii {
            for &a in &angles {
                let z = C::from_polar(rad, a);
                let s = bessel_i_in(nu, z, Regime::Series)?.ln();
                let h = bessel_i_in(nu, z, Regime::BoundedOrderAsymptotic)?.ln();
                push(nu, z, "I", "series/bounded-order", ratio_err(s, h));
                let f = bessel_k_in(nu, z, Regime::ContinuedFraction)?.ln();
                let h = bessel_k_in(nu, z, Regime::BoundedOrderAsymptotic)?.ln();
                push(nu, z, "K", "fraction/bounded-order", ratio_err(f, h));
                let w = (bessel_i(nu, z)?.ln() + bessel_k(nu + 1, z)?.ln()).exp()
                    + (bessel_i(nu + 1, z)?.ln() + bessel_k(nu, z)?.ln()).exp();
                push(nu, z, "W", "wronskian", (w * z - 1.0).norm());
            }
        }
    }
    for &nu in &large {
        for &m in &ratios {
            let z = C::new(m * nu as f64, 0.0);
            let ui = bessel_i_in(nu, z, Regime::UniformLargeOrder)?.ln();
            let si = bessel_i_in(nu, z, Regime::Series)?.ln();
            push(nu, z, "I", "uniform/series", ratio_err(ui, si));
            let uk = bessel_k_in(nu, z, Regime::UniformLargeOrder)?.ln();
            let fk = bessel_k_in(nu, z, Regime::ContinuedFraction)?.ln();
            push(nu, z, "K", "uniform/fraction", ratio_err(uk, fk));
        }
    }
    art.write_csv(&rows)?;
    art.write_gnuplot("set logscale y\nset ylabel 'relative difference'\nplot data using 0:6 with points")?;
    let worst = |w: bool| rows.iter().filter(|row| (row.quantity == "W") == w).map(|row| row.rel_diff).fold(0.0f64, f64::max);
    let (overlap, wronskian) = (worst(false), worst(true));
    let results = json!({ "max_overlap": overlap, "max_wronskian": wronskian });
    Ok(outcome(
        results,
        overlap < tol && wronskian < WRONSKIAN_TOL,
        format!("regime overlap {overlap:.2e} < {tol:e}, Wronskian {wronskian:.2e} < {WRONSKIAN_TOL:e}"),
    ))
}

#[derive(Serialize)]
struct OuRow {
    t: f64,
    chi2: f64,
    log2_ratio: f64,
    taylor_min: f64,
}

pub fn ou_approx(r: &mut Resolver, art: &Artifacts) -> Result<Outcome> {
    let cfg = r.cfg;
    let v = r.get("v", &cfg.v, "x^2/10".to_string());
    let lambda = r.get("lambda", &cfg.lambda, 0.5);
    let k = r.get("k", &cfg.k, 1);
    let n = r.get("n", &cfg.n, 100);
    let t = r.get("t", &cfg.t, 2f64.powi(-8));
    let halvings = r.get("halvings", &cfg.halvings, 4);
    let half_width = r.get("tolerance", &cfg.tolerance, 1.0);
    const RESIDUAL_TOL: f64 = 1e-10;
    let tr = truncate_center_density(&Potential::parse(&v)?, lambda, k, n)?;
    let dens = tr.density();
    let chi2 = |t: f64| -> Result<f64> {
        let g = ou_taylor_apply(&dens, t).density;
        Ok(chi2_divergence_1d(&ou_semigroup_1d(&g, t)?, &dens)?)
    };
    let times: Vec<f64> = (0..=halvings).rev().map(|j| t * 2f64.powi(j as i32)).collect();
    let rows: Vec<OuRow> = times
        .par_iter()
        .map(|&t| -> Result<OuRow> {
            let (d, d_half) = (chi2(t)?, chi2(t / 2.0)?);
            Ok(OuRow { t, chi2: d, log2_ratio: (d / d_half).log2(), taylor_min: ou_taylor_apply(&dens, t).min_value })
        })
        .collect::<Result<_>>()?;
    art.write_csv(&rows)?;
    art.write_gnuplot("set logscale xy\nset xlabel 't'\nplot data using 1:2 with linespoints title 'chi-square divergence'")?;
    let ratio = rows.last().map(|row| row.log2_ratio).unwrap_or(f64::NAN);
    let res = tr.mass_residual.abs().max(tr.mean_residual.abs());
    let (lo, hi) = (6.0 - half_width, 6.0 + half_width);
    let results = json!({
        "log2_ratio_at_t": ratio,
        "truncation_residual": res,
        "c_n": tr.params.c_n,
        "d_n": tr.params.d_n,
        "window": tr.params.window(),
    });
    Ok(outcome(
        results,
        (lo..=hi).contains(&ratio) && res < RESIDUAL_TOL,
        format!("log2 D(t)/D(t/2) = {ratio:.3} in [{lo}, {hi}], truncation residual {res:.2e} < {RESIDUAL_TOL:e}"),
    ))
}

/// Dispatch by subcommand name.
pub fn run<'a>(name: &str, cfg: &'a ExperimentConfig, art: &Artifacts, check: bool) -> Result<(Resolver<'a>, Outcome)> {
    let mut r = Resolver::new(cfg);
    let out = match name {
        "sample-spectrum" => sample_spectrum(&mut r, art)?,
        "mp-check" => mp_check(&mut r, art)?,
        "concentration" => concentration(&mut r, art)?,
        "kernel-eval" => kernel_eval(&mut r, art, check)?,
        "sine-limit" => sine_limit(&mut r, art)?,
        "fredholm" => fredholm(&mut r, art, check)?,
        "spacing" => spacing(&mut r, art)?,
        "two-point" => two_point(&mut r, art)?,
        "bessel-check" => bessel_check(&mut r, art)?,
        "ou-approx" => ou_approx(&mut r, art)?,
        other => bail!("unknown command `{other}`"),
    };
    Ok((r, out))
}
