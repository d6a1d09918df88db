//! Chebyshev collocation on Gauss-Lobatto points.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Collocation grid on `N + 1` Chebyshev extreme points, affinely mapped to
/// `[lo, hi]`.
///
/// Nodes are stored in the canonical order `x_j = cos(jπ/N)`, so they
/// decrease from `hi` to `lo`. Derivative matrices act on node values and
/// already include the affine Jacobian.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    n: usize,
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    cgl_weights: Vec<f64>,
    cc_weights: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    /// Boundary values `(w_0, w_N)` as linear functions of interior values
    /// under `(D1 w)_0 = (D1 w)_N = 0`; shape `2 × (N-1)`.
    boundary_map: DMatrix<f64>,
    /// Second-derivative matrix on interior nodes with the Neumann closure
    /// folded in; shape `(N-1) × (N-1)`.
    neumann_d2: DMatrix<f64>,
}

impl ChebGrid {
    pub fn new(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need N >= 2, got {n}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidGrid(format!("invalid interval ({lo}, {hi})")));
        }
        let np = n + 1;
        let canonical: Vec<f64> = (0..np).map(|j| cheb_node(j, n)).collect();
        let scale = 2.0 / (hi - lo);

        // Differentiation matrix on [-1, 1] with the negative-sum diagonal.
        let c = |j: usize| {
            let cj = if j == 0 || j == n { 2.0 } else { 1.0 };
            if j % 2 == 0 {
                cj
            } else {
                -cj
            }
        };
        let mut d1 = DMatrix::<f64>::zeros(np, np);
        for i in 0..np {
            let mut row_sum = 0.0;
            for j in 0..np {
                if i != j {
                    let value = c(i) / c(j) / (canonical[i] - canonical[j]);
                    d1[(i, j)] = value;
                    row_sum += value;
                }
            }
            d1[(i, i)] = -row_sum;
        }
        d1 *= scale;
        let d2 = &d1 * &d1;

        let nodes = canonical
            .iter()
            .map(|x| lo + 0.5 * (x + 1.0) * (hi - lo))
            .collect();
        let half_length = 0.5 * (hi - lo);
        let cgl_weights = (0..np)
            .map(|j| {
                let cj = if j == 0 || j == n { 2.0 } else { 1.0 };
                PI / (cj * n as f64)
            })
            .collect();
        let cc_weights = clenshaw_curtis(n)
            .into_iter()
            .map(|w| w * half_length)
            .collect();

        // Neumann closure: solve the 2x2 system for the boundary values.
        let m = n - 1;
        let det = d1[(0, 0)] * d1[(n, n)] - d1[(0, n)] * d1[(n, 0)];
        let mut boundary_map = DMatrix::<f64>::zeros(2, m);
        for k in 0..m {
            let j = k + 1;
            let r0 = -d1[(0, j)];
            let r1 = -d1[(n, j)];
            boundary_map[(0, k)] = (d1[(n, n)] * r0 - d1[(0, n)] * r1) / det;
            boundary_map[(1, k)] = (d1[(0, 0)] * r1 - d1[(n, 0)] * r0) / det;
        }
        let mut neumann_d2 = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for k in 0..m {
                neumann_d2[(i, k)] = d2[(i + 1, k + 1)]
                    + d2[(i + 1, 0)] * boundary_map[(0, k)]
                    + d2[(i + 1, n)] * boundary_map[(1, k)];
            }
        }

        Ok(Self {
            n,
            lo,
            hi,
            nodes,
            cgl_weights,
            cc_weights,
            d1,
            d2,
            boundary_map,
            neumann_d2,
        })
    }

    /// Polynomial degree `N`; the grid has `N + 1` nodes.
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interior_len(&self) -> usize {
        self.n - 1
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Gauss-Lobatto weights for the Chebyshev weight `1/sqrt(1-x^2)` on the
    /// reference interval.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.cgl_weights
    }

    /// Clenshaw-Curtis weights for plain `∫ f dx` over the mapped interval.
    pub fn integration_weights(&self) -> &[f64] {
        &self.cc_weights
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    pub fn neumann_d2(&self) -> &DMatrix<f64> {
        &self.neumann_d2
    }

    pub fn boundary_map(&self) -> &DMatrix<f64> {
        &self.boundary_map
    }

    /// `∫ f dx` over the mapped interval.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.cc_weights).map(|(v, w)| v * w).sum()
    }

    /// Boundary values implied by the Neumann closure for given interior values.
    pub fn boundary_values(&self, interior: &[f64]) -> (f64, f64) {
        let (mut left, mut right) = (0.0, 0.0);
        for (k, v) in interior.iter().enumerate() {
            left += self.boundary_map[(0, k)] * v;
            right += self.boundary_map[(1, k)] * v;
        }
        (left, right)
    }

    /// Full node vector from interior values, boundary values filled by the closure.
    pub fn extend(&self, interior: &[f64], full: &mut [f64]) {
        let (left, right) = self.boundary_values(interior);
        full[0] = left;
        full[1..self.n].copy_from_slice(interior);
        full[self.n] = right;
    }

    /// Applies `D1` to full node values.
    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.d1 * v).as_slice().to_vec()
    }

    /// Applies `D2` to full node values.
    pub fn second_derivative(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.d2 * v).as_slice().to_vec()
    }
}

fn cheb_node(j: usize, n: usize) -> f64 {
    // Symmetric evaluation keeps x_{N-j} = -x_j exactly and the midpoint at 0.
    if 2 * j == n {
        0.0
    } else if 2 * j < n {
        (j as f64 * PI / n as f64).cos()
    } else {
        -(((n - j) as f64) * PI / n as f64).cos()
    }
}

/// Clenshaw-Curtis weights on `[-1, 1]` for the Chebyshev extreme points.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let theta = |j: usize| j as f64 * PI / nf;
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
    }
    for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
        let mut v = 1.0;
        if n % 2 == 0 {
            for k in 1..n / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta(j)).cos() / (4.0 * kf * kf - 1.0);
            }
            v -= (nf * theta(j)).cos() / (nf * nf - 1.0);
        } else {
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta(j)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        *wj = 2.0 * v / nf;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_grids_have_cosine_nodes() {
        let g = ChebGrid::new(2, -1.0, 1.0).unwrap();
        assert_eq!(g.nodes(), &[1.0, 0.0, -1.0]);
        let g = ChebGrid::new(4, -1.0, 1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in g.nodes().iter().zip([1.0, h, 0.0, -h, -1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(ChebGrid::new(1, -1.0, 1.0).is_err());
        assert!(ChebGrid::new(8, 1.0, 1.0).is_err());
    }

    #[test]
    fn nodes_decrease_across_mapped_interval() {
        let g = ChebGrid::new(17, 0.0, PI).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[1] < w[0]));
        assert_abs_diff_eq!(g.nodes()[0], PI, epsilon = 1e-15);
        assert_abs_diff_eq!(g.nodes()[17], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn second_derivative_exact_on_low_polynomials() {
        let g = ChebGrid::new(12, -1.0, 1.0).unwrap();
        let x = g.nodes().to_vec();
        let ones = vec![1.0; x.len()];
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        let d_one = g.second_derivative(&ones);
        let d_x = g.second_derivative(&x);
        let d_sq = g.second_derivative(&sq);
        for i in 1..12 {
            assert_abs_diff_eq!(d_one[i], 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(d_x[i], 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(d_sq[i], 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn mapped_derivative_includes_jacobian() {
        let g = ChebGrid::new(10, 0.0, PI).unwrap();
        let sq: Vec<f64> = g.nodes().iter().map(|v| v * v).collect();
        let d = g.derivative(&sq);
        for (i, x) in g.nodes().iter().enumerate() {
            assert_abs_diff_eq!(d[i], 2.0 * x, epsilon = 1e-10);
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        for n in [7, 8] {
            let g = ChebGrid::new(n, 0.0, 2.0).unwrap();
            let cube: Vec<f64> = g.nodes().iter().map(|x| x * x * x).collect();
            assert_abs_diff_eq!(g.integrate(&cube), 4.0, epsilon = 1e-12);
            let total: f64 = g.quadrature_weights().iter().sum();
            assert_abs_diff_eq!(total, PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn neumann_closure_zeroes_endpoint_slopes() {
        let g = ChebGrid::new(16, 0.0, PI).unwrap();
        let interior: Vec<f64> = g.nodes()[1..16].iter().map(|x| x.sin() + 0.3 * x).collect();
        let mut full = vec![0.0; 17];
        g.extend(&interior, &mut full);
        let d = g.derivative(&full);
        assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d[16], 0.0, epsilon = 1e-10);
        let constant = vec![2.5; 15];
        let (l, r) = g.boundary_values(&constant);
        assert_abs_diff_eq!(l, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 2.5, epsilon = 1e-12);
    }
}
