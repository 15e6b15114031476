use nalgebra::{DMatrix, Matrix2};
use rmtlab::ensemble::{form_covariance, sample_matrix, EnsembleDims, EntryLaw};
use rmtlab::kernel::*;
use rmtlab::mp::{mp_density, MpParams};
use rmtlab::spectral::hermitian_eigenvalues;
use rmtlab::Complex64 as C;
use std::f64::consts::PI;

fn small_config(n: usize, s: f64) -> SaddleConfig {
    SaddleConfig::with_scale(n, s, 0, 1.0, 0.4).unwrap()
}

/// Kernel on a low rectangle around the poles; tall contours pick up
/// factors e^{|Im z|^2 / S} that cancel.
fn box_kernel(eigs: &[f64], cfg: &SaddleConfig, u: f64, v: f64) -> C {
    let top = eigs.iter().chain([u, v].iter()).fold(0.0f64, |m, &y| m.max(y));
    let c = rectangle_contours(eigs, cfg, u, v, 0.2, top.sqrt() + 0.5).unwrap();
    eval_kernel_raw(eigs, u, v, cfg, &c).unwrap()
}

/// Spectrum of a Gaussian sample at the kernel's variance scale.
fn kernel_spectrum(n: usize, seed: u64) -> Vec<f64> {
    let y = sample_matrix(&EntryLaw::Gaussian, EnsembleDims::new(n, n).unwrap(), seed).unwrap();
    to_kernel_scale(&hermitian_eigenvalues(&form_covariance(&y)).unwrap(), 1.0)
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
fn one_point_density_matches_direct_quadrature() {
    let eigs = [0.3];
    let cfg = small_config(1, 0.05);
    let xs = [0.1, 0.3, 0.45, 0.8];
    let brute = brute_force_correlations(&eigs, cfg.s, 0, &xs, &[]).unwrap();
    assert!((brute.normalization - 1.0).abs() < 1e-8);
    for (x, r1) in xs.iter().zip(&brute.r1) {
        let k = box_kernel(&eigs, &cfg, *x, *x);
        assert!(((k.re - r1) / r1).abs() < 1e-4, "x {x}: {} vs {r1}", k.re);
        assert!(k.im.abs() < 1e-6 * r1);
    }
}

#[test]
fn two_point_determinant_matches_direct_quadrature() {
    let eigs = [0.2, 0.5];
    let cfg = small_config(2, 0.05);
    let pairs = [(0.15, 0.5), (0.3, 0.35), (0.6, 0.25)];
    let brute = brute_force_correlations(&eigs, cfg.s, 0, &[], &pairs).unwrap();
    for ((x1, x2), r2) in pairs.iter().zip(&brute.r2) {
        let m = Matrix2::new(
            box_kernel(&eigs, &cfg, *x1, *x1),
            box_kernel(&eigs, &cfg, *x1, *x2),
            box_kernel(&eigs, &cfg, *x2, *x1),
            box_kernel(&eigs, &cfg, *x2, *x2),
        );
        let det = m.determinant();
        assert!(((det.re - r2) / r2).abs() < 1e-3, "({x1}, {x2}): {det} vs {r2}");
    }
}

#[test]
fn repeated_points_have_zero_pair_density() {
    let eigs = [0.2, 0.5];
    let cfg = small_config(2, 0.05);
    let brute = brute_force_correlations(&eigs, cfg.s, 0, &[], &[(0.4, 0.4)]).unwrap();
    assert!(brute.r2[0].abs() < 1e-12);
    let k = box_kernel(&eigs, &cfg, 0.4, 0.4);
    let m = Matrix2::new(k, k, k, k);
    assert!(m.determinant().norm() < 1e-12 * k.norm_sqr());
}

#[test]
fn diagonal_integrates_to_n() {
    for eigs in [vec![0.3], vec![0.2, 0.5]] {
        let cfg = small_config(eigs.len(), 0.05);
        let trace = simpson(|x| box_kernel(&eigs, &cfg, x.max(1e-9), x.max(1e-9)).re, 0.0, 3.0, 120);
        assert!((trace - eigs.len() as f64).abs() < 1e-3, "N = {}: {trace}", eigs.len());
    }
}

#[test]
fn diagonal_is_nonnegative() {
    let eigs = [0.2, 0.5];
    let cfg = small_config(2, 0.05);
    for i in 1..=24 {
        let x = 0.05 * i as f64;
        assert!(box_kernel(&eigs, &cfg, x, x).re >= -1e-8, "x {x}");
    }
}

#[test]
fn circle_and_saddle_contours_agree() {
    let eigs = [0.55, 0.25];
    let cfg = small_config(2, 0.05);
    let (u, v) = (0.4, 0.42);
    let cp = critical_points_empirical(&eigs, &cfg, u).unwrap();
    let saddle = build_contours(&cp, &eigs, &cfg, u, v).unwrap();
    let a = eval_kernel_raw(&eigs, u, v, &cfg, &saddle).unwrap();
    let circle = circle_contours(&eigs, &cfg, u, v, 0.9).unwrap();
    let b = eval_kernel_raw(&eigs, u, v, &cfg, &circle).unwrap();
    let c = box_kernel(&eigs, &cfg, u, v);
    assert!((a - b).norm() < 1e-6 * b.norm(), "{a} vs {b}");
    assert!((c - b).norm() < 1e-6 * b.norm(), "{c} vs {b}");
}

#[test]
fn conjugation_leaves_determinants_unchanged() {
    let eigs = [0.2, 0.5];
    let cfg = small_config(2, 0.05);
    let xs = [0.3, 0.42];
    let k = DMatrix::from_fn(2, 2, |i, j| box_kernel(&eigs, &cfg, xs[i], xs[j]));
    let det = k.determinant();
    for b in [0.0, 0.3, 0.7, -1.2] {
        let kb = DMatrix::from_fn(2, 2, |i, j| conjugate_kernel(k[(i, j)], xs[i], xs[j], b, cfg.s));
        assert!((kb.determinant() - det).norm() < 1e-12 * det.norm(), "b {b}");
    }
    assert_eq!(conjugate_kernel(k[(0, 1)], xs[0], xs[1], 0.0, cfg.s), k[(0, 1)]);
}

#[test]
fn limit_critical_point_tends_to_root_u() {
    let cp = critical_points_limit(0.5, 1e-6, 1.0).unwrap();
    assert!((cp.w_plus - C::new(0.5f64.sqrt(), 0.0)).norm() < 1e-6);
}

#[test]
fn limit_critical_point_imaginary_part_scales_as_a_squared() {
    let (u, a) = (0.5, 0.1);
    let big = critical_points_limit(u, a, 1.0).unwrap();
    let small = critical_points_limit(u, a / 2.0, 1.0).unwrap();
    let ratio = big.w_plus.im / small.w_plus.im;
    assert!((ratio / 4.0 - 1.0).abs() < 0.05, "{ratio}");
    // leading term a^2 pi sqrt(u) rho(u) of the limiting law at variance 1/4
    let rho = mp_density(&MpParams::new(1.0, KERNEL_ENTRY_VARIANCE).unwrap(), u);
    let lead = a * a * PI * u.sqrt() * rho;
    assert!((big.w_plus.im - lead).abs() < 10.0 * a.powi(4));
    assert_eq!(big.w_minus, big.w_plus.conj());
}

#[test]
fn limit_critical_point_residual_for_rectangular_shape() {
    let cp = critical_points_limit(0.75, 0.1, 2.0).unwrap();
    assert!(cp.residual < 1e-12);
    let (d1, _) = limit_exponent_derivatives(cp.w_plus, 0.75, 0.01, 2.0).unwrap();
    assert!(d1.norm() < 1e-12);
    assert!(cp.w_plus.im > 0.0);
}

/// Roots of the monic cubic x^3 + c2 x^2 + c1 x + c0 as eigenvalues of its companion matrix.
fn cubic_roots(c2: f64, c1: f64, c0: f64) -> Vec<C> {
    let m = nalgebra::Matrix3::new(0.0, 0.0, -c0, 1.0, 0.0, -c1, 0.0, 1.0, -c2);
    m.complex_eigenvalues().iter().copied().collect()
}

#[test]
fn single_eigenvalue_critical_point_is_a_cubic_root() {
    let (y, u, a2) = (0.25, 0.5, 0.1);
    let cfg = SaddleConfig::with_scale(1, a2, 0, 1.0, u).unwrap();
    let cp = critical_points_empirical(&[y], &cfg, u).unwrap();
    // (w - r)(w^2 - y) + a^2 w = w^3 - r w^2 + (a^2 - y) w + r y
    let r = u.sqrt();
    let root = cubic_roots(-r, a2 - y, r * y).into_iter().find(|z| z.im > 1e-9).unwrap();
    assert!((cp.w_plus - root).norm() < 1e-10, "{} vs {root}", cp.w_plus);
    assert!(cp.residual < 1e-12);
    assert_eq!(cp.w_minus, cp.w_plus.conj());
}

#[test]
fn constant_spectrum_reduces_to_one_eigenvalue() {
    let (c, u, a2) = (0.3, 0.45, 0.08);
    let one = critical_points_empirical(&[c], &SaddleConfig::with_scale(1, a2, 0, 1.0, u).unwrap(), u).unwrap();
    let five = critical_points_empirical(&[c; 5], &SaddleConfig::with_scale(5, a2 / 5.0, 0, 1.0, u).unwrap(), u).unwrap();
    assert!((one.w_plus - five.w_plus).norm() < 1e-12);
}

#[test]
fn empirical_critical_point_approaches_the_limit() {
    let (u, lambda) = (0.5, 0.6);
    let dist = |n: usize| {
        let cfg = SaddleConfig::new(n, lambda, 0, 1.0, u).unwrap();
        let lim = critical_points_limit(u, cfg.a, 1.0).unwrap();
        let mut d: Vec<f64> = (1..=5)
            .map(|seed| (critical_points_empirical(&kernel_spectrum(n, seed), &cfg, u).unwrap().w_plus - lim.w_plus).norm())
            .collect();
        d.sort_by(f64::total_cmp);
        d[2]
    };
    let (d100, d400) = (dist(100), dist(400));
    assert!(d400 < d100, "{d100} {d400}");
}

fn winding(closed: &[C], p: C) -> f64 {
    (0..closed.len()).map(|k| ((closed[(k + 1) % closed.len()] - p) / (closed[k] - p)).arg()).sum::<f64>() / (2.0 * PI)
}

fn saddle_setup(n: usize, seed: u64) -> (Vec<f64>, SaddleConfig, CriticalPoints, KernelContours) {
    let eigs = kernel_spectrum(n, seed);
    let cfg = SaddleConfig::new(n, 0.6, 0, 1.0, 0.5).unwrap();
    let cp = critical_points_empirical(&eigs, &cfg, 0.5).unwrap();
    let c = build_contours(&cp, &eigs, &cfg, 0.5, 0.5).unwrap();
    (eigs, cfg, cp, c)
}

#[test]
fn saddle_contour_winds_once_around_every_pole() {
    let (eigs, _, _, c) = saddle_setup(16, 2);
    let half = c.gamma.sample(400).unwrap();
    let mut closed = half.clone();
    closed.extend(half.iter().rev().skip(1).map(|z| -z.conj()));
    closed.pop();
    for y in eigs {
        for p in [C::new(y.sqrt(), 0.0), C::new(-y.sqrt(), 0.0)] {
            assert!((winding(&closed, p) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn exponent_is_extremal_at_the_critical_points() {
    let (eigs, cfg, cp, _) = saddle_setup(16, 3);
    let ex = Exponent::from_config(&eigs, &cfg, 0.5);
    let w = cp.w_plus;
    // along the vertical line through the critical points
    let vertical: Vec<f64> = (0..=400).map(|i| ex.value(C::new(w.re, 2.0 * w.im * i as f64 / 400.0)).re).collect();
    let top = vertical.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((vertical[200] - top).abs() < 1e-12 * top.abs().max(1.0));
    // along the curve of critical points over the bulk
    let fam = CriticalFamily::new(CriticalKind::Empirical, &eigs, &cfg);
    let ts: Vec<f64> = (0..=40).map(|i| 0.2 + 0.6 * i as f64 / 40.0).collect();
    let along: Vec<f64> = ts.iter().map(|&t| ex.value(fam.point(t).unwrap().0).re).collect();
    let argmin = (0..along.len()).min_by(|&i, &j| along[i].total_cmp(&along[j])).unwrap();
    assert_eq!(argmin, 20);
}

#[test]
fn divided_difference_matches_derivative_at_coincidence() {
    let eigs = kernel_spectrum(8, 4);
    let ex = Exponent::new(&eigs, 0.05, 0.5, 0.0);
    let b = 0.7;
    for w in [C::new(0.7, 0.1), C::new(0.4, 0.3), C::new(1.1, -0.2)] {
        let exact = (w - b) * ex.d2(w) + ex.d1(w);
        assert!((divided_difference_g(&ex, w, w, b) - exact).norm() < 1e-9 * exact.norm().max(1.0));
    }
}

#[test]
fn theta_tends_to_minus_inverse_scale_at_coincidence() {
    let s = 0.02;
    for w in [C::new(0.7, 0.1), C::new(0.2, -0.4)] {
        assert!((theta(w, 0.7, 0.5, 0.5, s) * s + 1.0).norm() < 1e-10);
        let y = -4.0 * (w - 0.7) * 0.5f64.sqrt() / s;
        let direct = -(y.exp() - 1.0) / (y * s);
        assert!((theta1(w, 0.7, 0.5, 0.5, s) - direct).norm() < 1e-10 * direct.norm());
    }
}

#[test]
fn rewritten_decomposition_equals_direct_form() {
    let (eigs, mut cfg, cp, c) = saddle_setup(8, 5);
    cfg.b = Some(cp.w_plus.re);
    let v = 0.5 + 0.3 / (8.0 * mp_density(&MpParams::new(1.0, KERNEL_ENTRY_VARIANCE).unwrap(), 0.5));
    let c = if v == 0.5 { c } else { build_contours(&cp, &eigs, &cfg, 0.5, v).unwrap() };
    let rewritten = eval_kernel_decomposed(&eigs, 0.5, v, &cfg, &c).unwrap();
    let direct = eval_kernel_bessel_replaced(&eigs, 0.5, v, &cfg, &c).unwrap();
    assert!((rewritten.k1 - direct.k1).norm() < 1e-6 * direct.k1.norm());
    assert!((rewritten.k2 - direct.k2).norm() < 1e-6 * direct.total().norm());
}

#[test]
fn sine_kernel_reference_values() {
    assert_eq!(sine_kernel(0.4, 0.4), 1.0);
    assert!(sine_kernel(1.3, 0.3).abs() < 1e-15);
    assert!((sine_kernel(0.5, 0.0) - 2.0 / PI).abs() < 1e-15);
    assert_eq!(sine_kernel(0.2, 0.9), sine_kernel(0.9, 0.2));
}

#[test]
fn sine_check_reports_absolute_error_at_zeros() {
    let eigs = kernel_spectrum(16, 1);
    let cfg = SaddleConfig::new(16, 0.6, 0, 1.0, 0.5).unwrap();
    let rows = sine_limit_check(&eigs, &cfg, &[0.0, 0.5, 1.0]).unwrap();
    assert!(rows[0].relative && rows[1].relative && !rows[2].relative);
    assert!(rows[2].target.abs() < 1e-15);
    assert!((rows[2].error - rows[2].rescaled.norm()).abs() < 1e-15);
    // the diagonal carries the local density, which is within a few tens of percent at this size
    assert!(rows[0].error < 0.5, "{}", rows[0].error);
}
