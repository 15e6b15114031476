//! Random matrix sampling and the 1-D Ornstein–Uhlenbeck regularization.

pub mod jet;
pub mod ou1d;
pub mod potential;

pub use ou1d::{
    chi2_divergence_1d, ou_semigroup_1d, ou_taylor_apply, truncate_center_density, Density1d,
    TaylorApplied, TruncatedDensity, TruncationParams,
};
pub use potential::Potential;

use crate::error::{invalid, Error, Result};
use crate::quad;
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{Read, Write};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnsembleDims {
    pub n: usize,
    pub p: usize,
    pub gamma_target: f64,
}

impl EnsembleDims {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return invalid("dimensions must be positive");
        }
        if p < n {
            return invalid(format!("need p >= n, got n = {n}, p = {p}"));
        }
        Ok(EnsembleDims { n, p, gamma_target: p as f64 / n as f64 })
    }

    /// p = round(gamma * n).
    pub fn from_gamma(n: usize, gamma: f64) -> Result<Self> {
        if gamma < 1.0 {
            return invalid(format!("gamma must be >= 1, got {gamma}"));
        }
        let p = (gamma * n as f64).round() as usize;
        let mut d = Self::new(n, p)?;
        d.gamma_target = gamma;
        Ok(d)
    }

    pub fn nu(&self) -> usize {
        self.p - self.n
    }
}

/// Moments of a tilted component law and the rejection envelope.
#[derive(Debug, Clone, Copy)]
pub struct TiltMoments {
    pub mass: f64,
    pub mean: f64,
    pub var: f64,
    pub envelope: f64,
}

type MomentCache = std::sync::Arc<OnceLock<std::result::Result<TiltMoments, String>>>;

#[derive(Debug, Clone)]
pub enum EntryLaw {
    /// Re and Im i.i.d. N(0, 1/2).
    Gaussian,
    /// Re and Im i.i.d. with density proportional to e^{-V} against N(0, 1/2).
    /// With `standardize`, samples are centred and rescaled to variance 1/2.
    Potential {
        potential: Potential,
        k: u32,
        standardize: bool,
        moments: MomentCache,
    },
    /// Re and Im i.i.d. uniform on {-1/sqrt 2, 1/sqrt 2}.
    TwoPoint,
}

impl EntryLaw {
    pub fn potential(potential: Potential, k: u32, standardize: bool) -> Self {
        EntryLaw::Potential { potential, k, standardize, moments: MomentCache::default() }
    }

    pub fn tilt_moments(&self) -> Result<Option<TiltMoments>> {
        match self {
            EntryLaw::Potential { potential, moments, .. } => {
                let r = moments.get_or_init(|| compute_tilt(potential).map_err(|e| e.to_string()));
                match r {
                    Ok(m) => Ok(Some(*m)),
                    Err(e) => Err(Error::NonNormalizable(e.clone())),
                }
            }
            _ => Ok(None),
        }
    }

    /// Per-component variance of the law (1/2 for the built-in normalized laws).
    pub fn component_variance(&self) -> Result<f64> {
        match self {
            EntryLaw::Gaussian | EntryLaw::TwoPoint => Ok(0.5),
            EntryLaw::Potential { standardize, .. } => {
                let m = self.tilt_moments()?.expect("tilted law");
                Ok(if *standardize { 0.5 } else { m.var })
            }
        }
    }

    /// E|Y_ij|^2 = twice the component variance (mean assumed zero for laws used in experiments).
    pub fn entry_variance(&self) -> f64 {
        self.component_variance().map(|v| 2.0 * v).unwrap_or(1.0)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, tilt: Option<TiltMoments>) -> f64 {
        match self {
            EntryLaw::Gaussian => {
                let g: f64 = rng.sample(StandardNormal);
                g * std::f64::consts::FRAC_1_SQRT_2
            }
            EntryLaw::TwoPoint => {
                if rng.gen::<bool>() {
                    std::f64::consts::FRAC_1_SQRT_2
                } else {
                    -std::f64::consts::FRAC_1_SQRT_2
                }
            }
            EntryLaw::Potential { potential, standardize, .. } => {
                let m = tilt.expect("moments computed");
                let x = loop {
                    let g: f64 = rng.sample(StandardNormal);
                    let x = g * std::f64::consts::FRAC_1_SQRT_2;
                    let accept = (-potential.eval(x)).exp() / m.envelope;
                    if rng.gen::<f64>() < accept {
                        break x;
                    }
                };
                if *standardize {
                    (x - m.mean) * (0.5 / m.var).sqrt()
                } else {
                    x
                }
            }
        }
    }
}

fn compute_tilt(potential: &Potential) -> Result<TiltMoments> {
    // Envelope by grid scan; the proposal N(0,1/2) has mass < 1e-27 beyond |x| = 8.
    let span = 8.0;
    let steps = 16_000;
    let mut envelope: f64 = 0.0;
    let mut edge_weight: f64 = 0.0;
    let mut peak_weight: f64 = 0.0;
    for i in 0..=steps {
        let x = -span + 2.0 * span * i as f64 / steps as f64;
        let e = (-potential.eval(x)).exp();
        envelope = envelope.max(e);
        let w = e * (-x * x).exp();
        peak_weight = peak_weight.max(w);
        if i == 0 || i == steps {
            edge_weight = edge_weight.max(w);
        }
    }
    if !envelope.is_finite() || envelope == 0.0 || edge_weight > 1e-12 * peak_weight {
        return Err(Error::NonNormalizable(format!(
            "e^(-V) is not dominated by the Gaussian base on [-{span}, {span}]"
        )));
    }
    let f = |x: f64| (-potential.eval(x)).exp();
    let mass = quad::gaussian_half_expectation(f, &[], 1e-13)?;
    let m1 = quad::gaussian_half_expectation(|x| x * f(x), &[], 1e-13)? / mass;
    let m2 = quad::gaussian_half_expectation(|x| x * x * f(x), &[], 1e-13)? / mass;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::NonNormalizable("zero or infinite normalizer".into()));
    }
    // The envelope must bound the ratio; pad the grid maximum slightly.
    Ok(TiltMoments { mass, mean: m1, var: m2 - m1 * m1, envelope: envelope * (1.0 + 1e-9) })
}

/// N x p complex data matrix with provenance.
#[derive(Debug, Clone)]
pub struct MatrixSample {
    pub data: DMatrix<C>,
    pub dims: EnsembleDims,
    pub seed: u64,
}

/// SplitMix64 mixing of a seed with an index; used for independent sub-seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B3_E50F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Each component (seed, i, j, re/im) reads its own ChaCha stream, so the
/// result does not depend on evaluation order.
pub fn sample_matrix(law: &EntryLaw, dims: EnsembleDims, seed: u64) -> Result<MatrixSample> {
    let tilt = law.tilt_moments()?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let data = DMatrix::from_fn(dims.n, dims.p, |i, j| {
        let entry = ((i as u64) << 33) | ((j as u64) << 1);
        let mut re_rng = base.clone();
        re_rng.set_stream(entry);
        let mut im_rng = base.clone();
        im_rng.set_stream(entry + 1);
        C::new(law.draw(&mut re_rng, tilt), law.draw(&mut im_rng, tilt))
    });
    Ok(MatrixSample { data, dims, seed })
}

/// M = Y Y^* / N, with the lower triangle filled as the conjugate mirror.
pub fn form_covariance(y: &MatrixSample) -> DMatrix<C> {
    covariance_of(&y.data, y.dims.n as f64)
}

pub(crate) fn covariance_of(y: &DMatrix<C>, norm: f64) -> DMatrix<C> {
    let n = y.nrows();
    let a = y.map(|z| z.re);
    let b = y.map(|z| z.im);
    let re = &a * a.transpose() + &b * b.transpose();
    let im = &b * a.transpose() - &a * b.transpose();
    let mut m = DMatrix::<C>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C::new(re[(j, j)] / norm, 0.0);
        for i in 0..j {
            let v = C::new(re[(i, j)] / norm, im[(i, j)] / norm);
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GaussDivisibleParams {
    pub lambda: f64,
    pub a: f64,
    pub s_scale: f64,
}

impl GaussDivisibleParams {
    /// a^2 = N^(lambda - 1), S = a^2 / N.
    pub fn new(lambda: f64, n: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return invalid(format!("lambda must lie in (0,1), got {lambda}"));
        }
        let nf = n as f64;
        let a2 = nf.powf(lambda - 1.0);
        Ok(GaussDivisibleParams { lambda, a: a2.sqrt(), s_scale: a2 / nf })
    }

    /// Explicit amplitude (a = 0 allowed); lambda recorded as NaN.
    pub fn with_amplitude(a: f64, n: usize) -> Self {
        GaussDivisibleParams { lambda: f64::NAN, a, s_scale: a * a / n as f64 }
    }
}

/// Y = W + a X with W from `w_law` and X complex standard Gaussian, independent.
pub fn gauss_divisible_sample(
    w_law: &EntryLaw,
    gd: GaussDivisibleParams,
    dims: EnsembleDims,
    seed: u64,
) -> Result<MatrixSample> {
    let w = sample_matrix(w_law, dims, derive_seed(seed, 0x57))?;
    if gd.a == 0.0 {
        return Ok(MatrixSample { seed, ..w });
    }
    let x = sample_matrix(&EntryLaw::Gaussian, dims, derive_seed(seed, 0x58))?;
    let data = w.data + x.data * C::new(gd.a, 0.0);
    Ok(MatrixSample { data, dims, seed })
}

/// Entrywise OU flow: e^{-t/2} (H + sqrt(e^t - 1) X) with fresh Gaussian X.
pub fn ou_evolve(h: &MatrixSample, t: f64, seed: u64) -> Result<MatrixSample> {
    if !(t >= 0.0) {
        return invalid(format!("OU time must be non-negative, got {t}"));
    }
    if t == 0.0 {
        return Ok(h.clone());
    }
    let x = sample_matrix(&EntryLaw::Gaussian, h.dims, seed)?;
    let damp = (-0.5 * t).exp();
    let noise = (-t).exp_m1().abs().sqrt();
    let data = h.data.map(|z| z * damp) + x.data * C::new(noise, 0.0);
    Ok(MatrixSample { data, dims: h.dims, seed: h.seed })
}

/// Binary export: u64 N, u64 p (little endian), then row-major (re, im) f64 pairs.
pub fn write_matrix_binary<W: Write>(y: &MatrixSample, mut out: W) -> std::io::Result<()> {
    out.write_all(&(y.dims.n as u64).to_le_bytes())?;
    out.write_all(&(y.dims.p as u64).to_le_bytes())?;
    for i in 0..y.dims.n {
        for j in 0..y.dims.p {
            let z = y.data[(i, j)];
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut input: R) -> Result<DMatrix<C>> {
    let mut buf8 = [0u8; 8];
    let mut read_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut buf8).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(u64::from_le_bytes(buf8))
    };
    let n = read_u64(&mut input)? as usize;
    let p = read_u64(&mut input)? as usize;
    let mut data = vec![0u8; n * p * 16];
    input.read_exact(&mut data).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(DMatrix::from_fn(n, p, |i, j| {
        let off = (i * p + j) * 16;
        let re = f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
        let im = f64::from_le_bytes(data[off + 8..off + 16].try_into().unwrap());
        C::new(re, im)
    }))
}
