//! Hermitian eigenvalues, empirical Stieltjes transforms, and the exact
//! rank-one identities (resolvent, interlacing, quadratic forms).

use crate::ensemble::{covariance_of, form_covariance, EnsembleDims, MatrixSample};
use crate::error::{invalid, Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C;
use std::io::Write;

/// Eigenvalues sorted descending, with the dimensions of the data they came from.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Spectrum {
    pub eigs: Vec<f64>,
    pub dims: EnsembleDims,
}

impl Spectrum {
    pub fn new(mut eigs: Vec<f64>, dims: EnsembleDims) -> Self {
        eigs.sort_by(|a, b| b.total_cmp(a));
        Spectrum { eigs, dims }
    }

    /// Spectrum of Y Y^* / N.
    pub fn of_sample(y: &MatrixSample) -> Result<Self> {
        Ok(Spectrum { eigs: hermitian_eigenvalues(&form_covariance(y))?, dims: y.dims })
    }

    pub fn len(&self) -> usize {
        self.eigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigs.is_empty()
    }

    pub fn ascending(&self) -> Vec<f64> {
        self.eigs.iter().rev().copied().collect()
    }

    pub fn stieltjes(&self, z: C) -> Result<C> {
        empirical_stieltjes(&self.eigs, z)
    }

    /// One eigenvalue per line under the header `lambda`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda")?;
        for e in &self.eigs {
            writeln!(out, "{e:.17e}")?;
        }
        Ok(())
    }
}

fn check_hermitian(m: &DMatrix<C>) -> Result<()> {
    if !m.is_square() {
        return invalid("matrix is not square");
    }
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-12 * scale {
                return invalid(format!("matrix is not Hermitian at ({i}, {j})"));
            }
        }
    }
    Ok(())
}

/// Descending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C>) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let vals = m.symmetric_eigenvalues();
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::Eigen(i));
    }
    let mut eigs: Vec<f64> = vals.iter().copied().collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    Ok(eigs)
}

/// Descending eigenvalues and, on request, the matching orthonormal
/// eigenvectors as columns.
pub fn hermitian_eigen(m: &DMatrix<C>, want_vectors: bool) -> Result<(Vec<f64>, Option<DMatrix<C>>)> {
    if !want_vectors {
        return Ok((hermitian_eigenvalues(m)?, None));
    }
    check_hermitian(m)?;
    let n = m.nrows();
    let dec = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::Eigen(n))?;
    if let Some(i) = dec.eigenvalues.iter().position(|v| !v.is_finite()) {
        return Err(Error::Eigen(i));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[b].total_cmp(&dec.eigenvalues[a]));
    let vals = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| dec.eigenvectors[(r, order[c])]);
    Ok((vals, Some(vecs)))
}

/// (1/N) sum 1/(lambda_i - z).
pub fn empirical_stieltjes(eigs: &[f64], z: C) -> Result<C> {
    if !(z.im > 0.0) {
        return invalid("Stieltjes transform needs Im z > 0");
    }
    if eigs.is_empty() {
        return invalid("empty spectrum");
    }
    let s: C = eigs.iter().map(|&l| 1.0 / (l - z)).sum();
    Ok(s / eigs.len() as f64)
}

/// Number of eigenvalues in the closed interval [lo, hi].
pub fn counting_function(eigs: &[f64], lo: f64, hi: f64) -> usize {
    eigs.iter().filter(|&&l| l >= lo && l <= hi).count()
}

fn column_over_root_n(w: &MatrixSample, k: usize) -> DVector<C> {
    w.data.column(k).into_owned() / C::new((w.dims.n as f64).sqrt(), 0.0)
}

/// H - C_k C_k^* with C_k the k-th column of W / sqrt(N) (k is 0-based).
fn reduced_covariance(w: &MatrixSample, k: usize) -> DMatrix<C> {
    let mut others = w.data.clone().remove_column(k);
    if others.ncols() == 0 {
        others = DMatrix::zeros(w.dims.n, 1);
    }
    covariance_of(&others, w.dims.n as f64)
}

/// |1 + z m_N(z) - p/N + (1/N) sum_k 1/(1 + C_k^* R^(k)(z) C_k)|, with m_N
/// from the spectrum of H and each quadratic form from an LU solve.
pub fn resolvent_identity_residual(w: &MatrixSample, z: C) -> Result<f64> {
    if !(z.im > 0.0) {
        return invalid("resolvent identity needs Im z > 0");
    }
    let n = w.dims.n;
    let p = w.dims.p;
    let h = form_covariance(w);
    let m = empirical_stieltjes(&hermitian_eigenvalues(&h)?, z)?;
    let mut sum = C::new(0.0, 0.0);
    for k in 0..p {
        let c = column_over_root_n(w, k);
        let mut a = &h - &c * c.adjoint();
        for i in 0..n {
            a[(i, i)] -= z;
        }
        let x = a.lu().solve(&c).ok_or_else(|| Error::Domain(format!("singular reduced resolvent at column {k}")))?;
        let q = c.dotc(&x);
        sum += 1.0 / (1.0 + q);
    }
    let lhs = 1.0 + z * m;
    let rhs = p as f64 / n as f64 - sum / n as f64;
    Ok((lhs - rhs).norm())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InterlacingReport {
    pub holds: bool,
    /// First index (0-based) where the chain y_1 >= y_1^(k) >= y_2 >= ... breaks.
    pub violation: Option<usize>,
    /// Largest |N F_N(x) - N F_N^(k)(x)| after allowing the slack.
    pub max_cdf_gap: usize,
}

/// Interlacing between H and H - C_k C_k^* (k is 1-based), with slack
/// 1e-10 max(1, ||H||).
pub fn interlacing_check(w: &MatrixSample, k: usize) -> Result<InterlacingReport> {
    if k == 0 || k > w.dims.p {
        return invalid(format!("column index {k} outside 1..={}", w.dims.p));
    }
    let y = hermitian_eigenvalues(&form_covariance(w))?;
    let yk = hermitian_eigenvalues(&reduced_covariance(w, k - 1))?;
    let slack = 1e-10 * y[0].abs().max(1.0);
    let n = y.len();
    let mut violation = None;
    for i in 0..n {
        let below_next = i + 1 == n || yk[i] >= y[i + 1] - slack;
        if !(y[i] >= yk[i] - slack && below_next) {
            violation = Some(i);
            break;
        }
    }
    let count = |eigs: &[f64], x: f64| eigs.iter().filter(|&&l| l <= x).count() as i64;
    let mut gap = 0i64;
    for &x in y.iter().chain(yk.iter()) {
        gap = gap.max(count(&yk, x) - count(&y, x + slack));
        gap = gap.max(count(&y, x - slack) - count(&yk, x));
    }
    let gap = gap.max(0) as usize;
    Ok(InterlacingReport { holds: violation.is_none() && gap <= 1, violation, max_cdf_gap: gap })
}

/// Column k of W / sqrt(N) with the spectrum of H - C_k C_k^* and the
/// weights xi_i = |<v_i^(k), sqrt(N) C_k>|^2.
#[derive(Debug, Clone)]
pub struct ColumnData {
    /// 1-based column index.
    pub k: usize,
    pub column: DVector<C>,
    pub reduced: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ColumnData {
    pub fn new(w: &MatrixSample, k: usize) -> Result<Self> {
        if k == 0 || k > w.dims.p {
            return invalid(format!("column index {k} outside 1..={}", w.dims.p));
        }
        let column = column_over_root_n(w, k - 1);
        let (reduced, vecs) = hermitian_eigen(&reduced_covariance(w, k - 1), true)?;
        let vecs = vecs.expect("requested eigenvectors");
        let scaled = w.data.column(k - 1);
        let weights = (0..reduced.len()).map(|i| vecs.column(i).dotc(&scaled).norm_sqr()).collect();
        Ok(ColumnData { k, column, reduced, weights })
    }

    /// Synthetic data: a fixed reduced spectrum with prescribed weights.
    pub fn from_parts(reduced: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if reduced.len() != weights.len() {
            return invalid("reduced spectrum and weights differ in length");
        }
        let column = DVector::from_element(reduced.len(), C::new(0.0, 0.0));
        Ok(ColumnData { k: 0, column, reduced, weights })
    }

    /// N ||C_k||^2, which the weights must sum to.
    pub fn column_energy(&self) -> f64 {
        self.column.norm_squared() * self.reduced.len() as f64
    }
}

/// X = (1/N) sum_i (xi_i / sigma2 - 1) / (y_i^(k) - z).
pub fn quadratic_form_statistic(cd: &ColumnData, sigma2: f64, z: C) -> Result<C> {
    if !(z.im > 0.0) {
        return invalid("quadratic form statistic needs Im z > 0");
    }
    if !(sigma2 > 0.0) {
        return invalid("sigma2 must be positive");
    }
    let n = cd.reduced.len() as f64;
    let s: C = cd
        .reduced
        .iter()
        .zip(&cd.weights)
        .map(|(&y, &xi)| (xi / sigma2 - 1.0) / (y - z))
        .sum();
    Ok(s / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let m = DMatrix::<C>::identity(5, 5);
        assert_eq!(hermitian_eigenvalues(&m).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<C>::identity(2, 2);
        m[(0, 1)] = C::new(0.0, 1.0);
        assert!(hermitian_eigenvalues(&m).is_err());
    }

    #[test]
    fn stieltjes_arithmetic() {
        let m = empirical_stieltjes(&[1.0], C::new(0.0, 2.0)).unwrap();
        assert!((m - C::new(0.2, 0.4)).norm() < 1e-15);
        assert!(empirical_stieltjes(&[1.0], C::new(0.0, -1.0)).is_err());
    }

    #[test]
    fn counting_closed_interval() {
        assert_eq!(counting_function(&[3.0, 2.0, 1.0], 1.5, 3.0), 2);
        assert_eq!(counting_function(&[3.0, 2.0, 1.0], 4.0, 5.0), 0);
    }

    #[test]
    fn synthetic_centred_weights_vanish() {
        let cd = ColumnData::from_parts(vec![0.3, 0.2, 0.1], vec![0.25; 3]).unwrap();
        let x = quadratic_form_statistic(&cd, 0.25, C::new(0.2, 0.1)).unwrap();
        assert_eq!(x, C::new(0.0, 0.0));
    }
}
