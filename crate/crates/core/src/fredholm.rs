//! Sine-kernel Fredholm determinant on (0, s), the Gaudin spacing density
//! and its distribution function.

use crate::kernel::sine_kernel;
use crate::quad;
use nalgebra::DMatrix;

/// Gauss–Legendre nodes and weights on (0, s).
#[derive(Debug, Clone)]
pub struct NystromGrid {
    pub s: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl NystromGrid {
    pub fn new(s: f64, order: usize) -> Self {
        let rule = quad::gauss_legendre(order).mapped(0.0, s);
        NystromGrid { s, nodes: rule.nodes, weights: rule.weights, order }
    }

    /// det(delta_ij - sqrt(w_i w_j) K(x_i, x_j)).
    pub fn determinant(&self) -> f64 {
        let m = self.order;
        let root: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let a = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d - root[i] * root[j] * sine_kernel(self.nodes[i], self.nodes[j])
        });
        a.determinant()
    }
}

/// Node count used when none is given: enough for the band-limited kernel on (0, s).
pub fn default_order(s: f64) -> usize {
    40 + 4 * s.abs().ceil() as usize
}

/// E(s) = det(I - K) on L^2(0, s). The map s -> det(I - s w_j K(s t_i, s t_j))
/// with t on (0, 1) is entire in s, so negative s is accepted and gives its
/// analytic continuation (used by the difference stencils at s = 0).
pub fn gap_probability(s: f64, order: usize) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    if s > 0.0 {
        return NystromGrid::new(s, order).determinant();
    }
    let rule = quad::gauss_legendre(order).mapped(0.0, 1.0);
    let t = &rule.nodes;
    let a = DMatrix::from_fn(order, order, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - s * rule.weights[j] * sine_kernel(s * t[i], s * t[j])
    });
    a.determinant()
}

fn second_difference(s: f64, h: f64, order: usize) -> f64 {
    let e = |x: f64| gap_probability(x, order);
    (-e(s + 2.0 * h) + 16.0 * e(s + h) - 30.0 * e(s) + 16.0 * e(s - h) - e(s - 2.0 * h)) / (12.0 * h * h)
}

fn first_difference(s: f64, h: f64, order: usize) -> f64 {
    let e = |x: f64| gap_probability(x, order);
    (-e(s + 2.0 * h) + 8.0 * e(s + h) - 8.0 * e(s - h) + e(s - 2.0 * h)) / (12.0 * h)
}

/// p(s) = E''(s): five-point central difference at steps h and 2h, combined
/// by Richardson extrapolation.
pub fn spacing_density(s: f64, h: f64) -> f64 {
    let order = default_order(s + 4.0 * h);
    let fine = second_difference(s, h, order);
    let coarse = second_difference(s, 2.0 * h, order);
    (16.0 * fine - coarse) / 15.0
}

pub const DEFAULT_STEP: f64 = 1e-3;

/// Integral of p over (0, s) by composite Gauss–Legendre quadrature.
pub fn spacing_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let panels = (2.0 * s).ceil() as usize;
    let rule = quad::composite_gauss_legendre(0.0, s, panels, 12);
    rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * spacing_density(*x, DEFAULT_STEP)).sum()
}

/// E'(s) - E'(0), the same quantity through the first derivative.
pub fn spacing_cdf_from_derivative(s: f64) -> f64 {
    let d = |x: f64| {
        let order = default_order(x + 4.0 * DEFAULT_STEP);
        let fine = first_difference(x, DEFAULT_STEP, order);
        let coarse = first_difference(x, 2.0 * DEFAULT_STEP, order);
        (16.0 * fine - coarse) / 15.0
    };
    d(s) - d(0.0)
}

/// 1 - (sin(pi (x - y)) / (pi (x - y)))^2.
pub fn two_point_limit(x: f64, y: f64) -> f64 {
    let k = sine_kernel(x, y);
    1.0 - k * k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_interval() {
        assert_eq!(gap_probability(0.0, 40), 1.0);
        assert_eq!(spacing_cdf(0.0), 0.0);
    }

    #[test]
    fn continuation_agrees_with_symmetric_form() {
        let s = 1.3;
        let rule = quad::gauss_legendre(40).mapped(0.0, 1.0);
        let a = DMatrix::from_fn(40, 40, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d - s * rule.weights[j] * sine_kernel(s * rule.nodes[i], s * rule.nodes[j])
        });
        assert!((a.determinant() - gap_probability(s, 40)).abs() < 1e-13);
    }

    #[test]
    fn two_point_values() {
        assert_eq!(two_point_limit(0.3, 0.3), 0.0);
        assert!((two_point_limit(1.0, 0.0) - 1.0).abs() < 1e-15);
    }
}
