//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with the measured quantity and its pinned tolerance.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmtlab::ensemble::ou1d::{chi2_divergence_1d, ou_semigroup_1d, ou_taylor_apply, truncate_center_density};
use rmtlab::ensemble::{derive_seed, form_covariance, sample_matrix, EnsembleDims, EntryLaw, Potential};
use rmtlab::fredholm::{gap_probability, spacing_density, DEFAULT_STEP};
use rmtlab::kernel::*;
use rmtlab::mp::{bulk_grid, concentration_experiment, median, mp_check_experiment, mp_stieltjes, self_consistent_residual, MpParams};
use rmtlab::specfun::*;
use rmtlab::spectral::{hermitian_eigenvalues, interlacing_check, resolvent_identity_residual};
use rmtlab::stats::{run_spacing_experiment, run_two_point_experiment, TestFunction};
use rmtlab::Complex64 as C;
use std::io::Write;

/// Written straight to stderr so the line shows up even when output is captured.
fn report(id: u32, title: &str, pass: bool, detail: String) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance {id:>2}] {tag} {title}: {detail}");
    pass
}

fn gaussian(n: usize, p: usize, seed: u64) -> rmtlab::ensemble::MatrixSample {
    sample_matrix(&EntryLaw::Gaussian, EnsembleDims::new(n, p).unwrap(), seed).unwrap()
}

fn kernel_spectrum(n: usize, seed: u64) -> Vec<f64> {
    to_kernel_scale(&hermitian_eigenvalues(&form_covariance(&gaussian(n, n, seed))).unwrap(), 1.0)
}

fn box_kernel(eigs: &[f64], cfg: &SaddleConfig, u: f64, v: f64) -> C {
    let top = eigs.iter().chain([u, v].iter()).fold(0.0f64, |m, &y| m.max(y));
    let c = rectangle_contours(eigs, cfg, u, v, 0.2, top.sqrt() + 0.5).unwrap();
    eval_kernel_raw(eigs, u, v, cfg, &c).unwrap()
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn criterion_01_exact_identities() {
    const RESOLVENT_TOL: f64 = 1e-9;
    const CONJUGATION_TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let worst_resolvent = (0..100)
        .map(|i| {
            let z = C::new(rng.gen_range(-1.0..5.0), rng.gen_range(0.05..2.0));
            resolvent_identity_residual(&gaussian(8, 12, derive_seed(11, i)), z).unwrap()
        })
        .fold(0.0f64, f64::max);
    let mut interlacing = true;
    let mut worst_gap = 0;
    for i in 0..50 {
        let w = gaussian(8, 12, derive_seed(12, i));
        for k in 1..=12 {
            let r = interlacing_check(&w, k).unwrap();
            interlacing &= r.holds && r.max_cdf_gap <= 1;
            worst_gap = worst_gap.max(r.max_cdf_gap);
        }
    }
    let eigs = [0.2, 0.5];
    let cfg = SaddleConfig::with_scale(2, 0.05, 0, 1.0, 0.4).unwrap();
    let xs = [0.3, 0.42];
    let k = Matrix2::from_fn(|i, j| box_kernel(&eigs, &cfg, xs[i], xs[j]));
    let det = k.determinant();
    let worst_conj = [0.3, 0.7, -1.2, 2.5]
        .iter()
        .map(|&b| {
            let kb = Matrix2::from_fn(|i, j| conjugate_kernel(k[(i, j)], xs[i], xs[j], b, cfg.s));
            (kb.determinant() - det).norm() / det.norm()
        })
        .fold(0.0f64, f64::max);
    let pass = worst_resolvent < RESOLVENT_TOL && interlacing && worst_conj < CONJUGATION_TOL;
    assert!(report(
        1,
        "exact identities",
        pass,
        format!(
            "resolvent max {worst_resolvent:.2e} (< {RESOLVENT_TOL:e}), interlacing {interlacing} (max gap {worst_gap} <= 1), conjugation max rel {worst_conj:.2e} (< {CONJUGATION_TOL:e})"
        )
    ));
}

#[test]
fn criterion_02_mp_law() {
    const KS_TOL: f64 = 0.05;
    let law = EntryLaw::Gaussian;
    let main = mp_check_experiment(&law, EnsembleDims::from_gamma(1000, 2.0).unwrap(), 1.0, 10, 21).unwrap();
    let medians: Vec<f64> = [100usize, 400, 1600]
        .iter()
        .map(|&n| mp_check_experiment(&law, EnsembleDims::from_gamma(n, 2.0).unwrap(), 1.0, 5, 22).unwrap().median_distance)
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let pass = main.mean_distance < KS_TOL && decreasing;
    assert!(report(
        2,
        "MP law",
        pass,
        format!(
            "mean KS at N=1000 {:.4} (< {KS_TOL}), medians N=100/400/1600 {:.4}/{:.4}/{:.4} strictly decreasing {decreasing}",
            main.mean_distance, medians[0], medians[1], medians[2]
        )
    ));
}

#[test]
fn criterion_03_self_consistency() {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let gamma = rng.gen_range(1.0..4.0);
        let sigma2 = rng.gen_range(0.25..2.0);
        let z = C::new(rng.gen_range(-2.0..15.0), rng.gen_range(1e-3..5.0));
        let p = MpParams::new(gamma, sigma2).unwrap();
        let m = mp_stieltjes(&p, z).unwrap();
        worst = worst.max(self_consistent_residual(m, z, gamma, sigma2).unwrap());
    }
    assert!(report(3, "self-consistent equation", worst < TOL, format!("max residual {worst:.2e} (< {TOL:e})")));
}

#[test]
fn criterion_04_fredholm() {
    const NODE_TOL: f64 = 1e-10;
    const MOMENT_TOL: f64 = 1e-3;
    const REPULSION_TOL: f64 = 2e-3;
    let e0 = gap_probability(0.0, 40);
    let node_gap = (1..=12)
        .map(|i| {
            let s = 0.25 * i as f64;
            (gap_probability(s, 40) - gap_probability(s, 80)).abs()
        })
        .fold(0.0f64, f64::max);
    let mass = simpson(|w| spacing_density(w, DEFAULT_STEP), 0.0, 10.0, 400);
    let mean = simpson(|w| w * spacing_density(w, DEFAULT_STEP), 0.0, 10.0, 400);
    let p0 = spacing_density(0.0, DEFAULT_STEP).abs();
    let pass = e0 == 1.0
        && node_gap < NODE_TOL
        && (mass - 1.0).abs() < MOMENT_TOL
        && (mean - 1.0).abs() < MOMENT_TOL
        && p0 < REPULSION_TOL;
    assert!(report(
        4,
        "Fredholm determinant and spacing density",
        pass,
        format!(
            "E(0) = {e0}, m=40 vs 80 max {node_gap:.2e} (< {NODE_TOL:e}), mass {mass:.6}, mean {mean:.6} (within {MOMENT_TOL:e}), p(0) {p0:.2e} (< {REPULSION_TOL:e})"
        )
    ));
}

#[test]
fn criterion_05_kernel_oracle() {
    const NORM_TOL: f64 = 1e-8;
    const PAIR_TOL: f64 = 1e-3;
    const TRACE_TOL: f64 = 1e-3;
    const CONTOUR_TOL: f64 = 1e-6;
    let s = 0.05;
    let one = brute_force_correlations(&[0.3], s, 0, &[], &[]).unwrap();
    let norm_err = (one.normalization - 1.0).abs();

    let eigs2 = [0.2, 0.5];
    let cfg2 = SaddleConfig::with_scale(2, s, 0, 1.0, 0.4).unwrap();
    let pairs = [(0.15, 0.5), (0.3, 0.35), (0.6, 0.25)];
    let brute = brute_force_correlations(&eigs2, s, 0, &[], &pairs).unwrap();
    let pair_err = pairs
        .iter()
        .zip(&brute.r2)
        .map(|(&(a, b), r2)| {
            let m = Matrix2::new(
                box_kernel(&eigs2, &cfg2, a, a),
                box_kernel(&eigs2, &cfg2, a, b),
                box_kernel(&eigs2, &cfg2, b, a),
                box_kernel(&eigs2, &cfg2, b, b),
            );
            ((m.determinant().re - r2) / r2).abs()
        })
        .fold(0.0f64, f64::max);

    let spectra: [&[f64]; 4] = [&[0.3], &[0.2, 0.5], &[0.15, 0.4, 0.7], &[0.1, 0.3, 0.55, 0.8]];
    let trace_err = spectra
        .iter()
        .map(|eigs| {
            let cfg = SaddleConfig::with_scale(eigs.len(), s, 0, 1.0, 0.4).unwrap();
            let t = simpson(|x| box_kernel(eigs, &cfg, x.max(1e-9), x.max(1e-9)).re, 0.0, 3.0, 120);
            (t - eigs.len() as f64).abs()
        })
        .fold(0.0f64, f64::max);

    let eigs = [0.55, 0.25];
    let cfg = SaddleConfig::with_scale(2, s, 0, 1.0, 0.4).unwrap();
    let (u, v) = (0.4, 0.42);
    let cp = critical_points_empirical(&eigs, &cfg, u).unwrap();
    let saddle = eval_kernel_raw(&eigs, u, v, &cfg, &build_contours(&cp, &eigs, &cfg, u, v).unwrap()).unwrap();
    let circle = eval_kernel_raw(&eigs, u, v, &cfg, &circle_contours(&eigs, &cfg, u, v, 0.9).unwrap()).unwrap();
    let rect = box_kernel(&eigs, &cfg, u, v);
    let contour_err = ((saddle - circle).norm() / circle.norm()).max((rect - circle).norm() / circle.norm());

    let pass = norm_err < NORM_TOL && pair_err < PAIR_TOL && trace_err < TRACE_TOL && contour_err < CONTOUR_TOL;
    assert!(report(
        5,
        "kernel against direct quadrature",
        pass,
        format!(
            "N=1 normalization err {norm_err:.2e} (< {NORM_TOL:e}), N=2 pair rel err {pair_err:.2e} (< {PAIR_TOL:e}), trace err N<=4 {trace_err:.2e} (< {TRACE_TOL:e}), contour rel {contour_err:.2e} (< {CONTOUR_TOL:e})"
        )
    ));
}

#[test]
fn criterion_06_kernel_decomposition() {
    const TOL: f64 = 0.05;
    let (n, u_star) = (8, 0.4);
    let eigs = kernel_spectrum(n, 1);
    let mut cfg = SaddleConfig::new(n, 0.6, 0, 1.0, u_star).unwrap();
    let cp = critical_points_empirical(&eigs, &cfg, u_star).unwrap();
    let b = cp.w_plus.re;
    cfg.b = Some(b);
    let mut errs = Vec::new();
    for (u, v) in [(0.4, 0.4), (0.4, 0.43), (0.42, 0.38)] {
        let c = build_contours(&cp, &eigs, &cfg, u, v).unwrap();
        let kb = conjugate_kernel(eval_kernel_raw(&eigs, u, v, &cfg, &c).unwrap(), u, v, b, cfg.s);
        let d = eval_kernel_decomposed(&eigs, u, v, &cfg, &c).unwrap();
        errs.push((d.total() - kb).norm() / kb.norm());
    }
    let worst = errs.iter().cloned().fold(0.0f64, f64::max);
    assert!(report(
        6,
        "decomposed kernel at N=8",
        worst < TOL,
        format!("relative errors {:.4}/{:.4}/{:.4} (< {TOL})", errs[0], errs[1], errs[2])
    ));
}

#[test]
fn criterion_07_sine_limit() {
    let taus = [0.25, 0.5];
    let sizes = [16usize, 32, 64];
    let mut medians = vec![Vec::new(); taus.len()];
    for &n in &sizes {
        let cfg = SaddleConfig::new(n, 0.6, 0, 1.0, 0.5).unwrap();
        let rows: Vec<Vec<f64>> = (1..=5)
            .map(|seed| sine_limit_check(&kernel_spectrum(n, seed), &cfg, &taus).unwrap().iter().map(|r| r.error).collect())
            .collect();
        for (i, m) in medians.iter_mut().enumerate() {
            m.push(median(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()));
        }
    }
    let pass = medians.iter().all(|m| m.windows(2).all(|w| w[1] <= w[0]));
    let detail = taus
        .iter()
        .zip(&medians)
        .map(|(t, m)| format!("tau {t}: {:.4}/{:.4}/{:.4}", m[0], m[1], m[2]))
        .collect::<Vec<_>>()
        .join(", ");
    assert!(report(7, "sine-kernel trend over N=16/32/64", pass, format!("{detail} (non-increasing medians)")));
}

#[test]
fn criterion_08_two_point_limit() {
    const SE_FACTOR: f64 = 3.0;
    const REL: f64 = 0.10;
    let f = TestFunction::Box { lo: 0.0, hi: 1.0 };
    let r = run_two_point_experiment(&EntryLaw::Gaussian, EnsembleDims::new(500, 500).unwrap(), None, 2.0, &f, 500, 8).unwrap();
    let tol = (SE_FACTOR * r.se).max(REL * r.theory.abs());
    let gap = (r.mc_mean - r.theory).abs();
    assert!(report(
        8,
        "two-point statistic at N=500",
        gap <= tol,
        format!("mc mean {:.4} (se {:.4}), theory {:.4}, |diff| {gap:.4} <= max(3 se, 10%) = {tol:.4}", r.mc_mean, r.se, r.theory)
    ));
}

#[test]
fn criterion_09_spacing_distribution() {
    const TOL: f64 = 0.05;
    let grid: Vec<f64> = (0..=30).map(|i| 0.1 * i as f64).collect();
    let big = run_spacing_experiment(&EntryLaw::Gaussian, EnsembleDims::new(500, 500).unwrap(), 2.0, &grid, 200, 9).unwrap();
    let small = run_spacing_experiment(&EntryLaw::Gaussian, EnsembleDims::new(100, 100).unwrap(), 2.0, &grid, 200, 9).unwrap();
    let pass = big.sup_distance < TOL && big.sup_distance <= small.sup_distance;
    assert!(report(
        9,
        "spacing distribution at N=500",
        pass,
        format!("sup distance {:.4} (< {TOL}), N=100 {:.4} >= N=500", big.sup_distance, small.sup_distance)
    ));
}

#[test]
fn criterion_10_bessel() {
    const OVERLAP_TOL: f64 = 1e-7;
    const WRONSKIAN_TOL: f64 = 1e-8;
    const UNIFORM_TOL: f64 = 1e-6;
    let rel = |a: C, b: C| ((a - b).exp() - 1.0).norm();
    let mut overlap = 0.0f64;
    for nu in 0..4u32 {
        for r in [15.0, 22.0, 30.0, 40.0] {
            for a in [-0.6, 0.0, 0.6] {
                let z = C::from_polar(r, a);
                let s = bessel_i_in(nu, z, Regime::Series).unwrap().ln();
                let h = bessel_i_in(nu, z, Regime::BoundedOrderAsymptotic).unwrap().ln();
                let kf = bessel_k_in(nu, z, Regime::ContinuedFraction).unwrap().ln();
                let kh = bessel_k_in(nu, z, Regime::BoundedOrderAsymptotic).unwrap().ln();
                overlap = overlap.max(rel(s, h)).max(rel(kf, kh));
            }
        }
    }
    for nu in [60u32, 90, 120] {
        for m in [0.4, 0.7, 1.0] {
            let z = C::new(m * nu as f64, 0.0);
            let ui = bessel_i_in(nu, z, Regime::UniformLargeOrder).unwrap().ln();
            let si = bessel_i_in(nu, z, Regime::Series).unwrap().ln();
            let uk = bessel_k_in(nu, z, Regime::UniformLargeOrder).unwrap().ln();
            let fk = bessel_k_in(nu, z, Regime::ContinuedFraction).unwrap().ln();
            overlap = overlap.max(rel(ui, si)).max(rel(uk, fk));
        }
    }
    let mut wronskian = 0.0f64;
    for (nu, z) in [(0u32, C::new(20.0, 5.0)), (2, C::new(10.0, 3.0)), (1, C::new(0.7, 0.2)), (5, C::new(3.0, -4.0)), (3, C::new(55.0, 10.0))] {
        let w = (bessel_i(nu, z).unwrap().ln() + bessel_k(nu + 1, z).unwrap().ln()).exp()
            + (bessel_i(nu + 1, z).unwrap().ln() + bessel_k(nu, z).unwrap().ln()).exp();
        wronskian = wronskian.max((w * z - 1.0).norm());
    }
    // positive-term series for ln I_50(50), summed in log space
    let lg = |n: u32| (2..=n).map(|k| (k as f64).ln()).sum::<f64>();
    let terms: Vec<f64> = (0..400u32).map(|k| (2 * k + 50) as f64 * 25f64.ln() - lg(k) - lg(k + 50)).collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exact = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    let uniform = bessel_uniform_large_order(50, C::new(1.0, 0.0), 2).unwrap().0.ln().re;
    let uniform_err = (uniform - exact).exp() - 1.0;
    let pass = overlap < OVERLAP_TOL && wronskian < WRONSKIAN_TOL && uniform_err.abs() < UNIFORM_TOL;
    assert!(report(
        10,
        "Bessel functions",
        pass,
        format!(
            "regime overlap {overlap:.2e} (< {OVERLAP_TOL:e}), Wronskian {wronskian:.2e} (< {WRONSKIAN_TOL:e}), uniform nu=50 rel {:.2e} (< {UNIFORM_TOL:e})",
            uniform_err.abs()
        )
    ));
}

#[test]
fn criterion_11_chi2_scaling() {
    const RESIDUAL_TOL: f64 = 1e-10;
    const LO: f64 = 5.0;
    const HI: f64 = 7.0;
    // the exponent is approached slowly; see the decisions ledger for the choice of t
    let t = 2f64.powi(-8);
    let pot = Potential::parse("x^2/10").unwrap();
    let tr = truncate_center_density(&pot, 0.5, 1, 100).unwrap();
    let v = tr.density();
    let d = |t: f64| {
        let g = ou_taylor_apply(&v, t).density;
        chi2_divergence_1d(&ou_semigroup_1d(&g, t).unwrap(), &v).unwrap()
    };
    let ratio = (d(t) / d(t / 2.0)).log2();
    let res = tr.mass_residual.abs().max(tr.mean_residual.abs());
    let pass = (LO..=HI).contains(&ratio) && res < RESIDUAL_TOL;
    assert!(report(
        11,
        "chi-square scaling in one dimension",
        pass,
        format!("log2 D(t)/D(t/2) at t = 2^-8: {ratio:.3} (in [{LO}, {HI}]), truncation residual {res:.2e} (< {RESIDUAL_TOL:e})")
    ));
}

#[test]
fn criterion_12_concentration() {
    let p = MpParams::new(1.0, 1.0).unwrap();
    let grid = bulk_grid(&p, 0.1, 40);
    let deltas = [0.02, 0.05, 0.1, 0.2];
    let run = |n: usize| {
        concentration_experiment(&EntryLaw::Gaussian, EnsembleDims::new(n, n).unwrap(), 1.0, 0.1, &grid, &deltas, 50, 12).unwrap()
    };
    let (small, big) = (run(100), run(400));
    let freqs: Vec<f64> = big.rows.iter().map(|r| r.exceed_freq).collect();
    let monotone = freqs.windows(2).all(|w| w[1] <= w[0]) && freqs.first() > freqs.last();
    let pass = big.median_sup_err < small.median_sup_err && monotone;
    assert!(report(
        12,
        "concentration of the Stieltjes transform",
        pass,
        format!(
            "median sup error N=100 {:.4} > N=400 {:.4}; exceedance at N=400 {freqs:?} decreasing {monotone}",
            small.median_sup_err, big.median_sup_err
        )
    ));
}
