//! Tridiagonal operators and the Thomas algorithm.

use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals. `sub[0]` and `sup[n-1]` are unused
/// and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub sub: Vec<f64>,
    pub main: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalOperator {
    /// `coef · L` where `L` is the second difference on `n` nodes of spacing
    /// `h` with ghost-point Neumann rows `(-2, 2) / h^2`.
    pub fn neumann_laplacian(n: usize, h: f64, coef: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let s = coef / (h * h);
        let mut sub = vec![s; n];
        let main = vec![-2.0 * s; n];
        let mut sup = vec![s; n];
        sub[0] = 0.0;
        sup[n - 1] = 0.0;
        sup[0] = 2.0 * s;
        sub[n - 1] = 2.0 * s;
        Ok(Self { sub, main, sup })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            main: vec![1.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    /// `alpha I + beta self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        Self {
            sub: self.sub.iter().map(|x| beta * x).collect(),
            main: self.main.iter().map(|x| alpha + beta * x).collect(),
            sup: self.sup.iter().map(|x| beta * x).collect(),
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.main[i] * x[i];
            if i > 0 {
                acc += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.sub[i] + self.main[i] + self.sup[i]
    }

    /// Forward-elimination factors for repeated solves.
    pub fn factor(&self) -> Result<ThomasFactor> {
        let n = self.len();
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let pivot = if i == 0 {
                self.main[0]
            } else {
                self.main[i] - self.sub[i] * prev
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::ZeroPivot(i));
            }
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = self.sup[i] * inv_pivot[i];
            prev = upper[i];
        }
        Ok(ThomasFactor {
            sub: self.sub.clone(),
            upper,
            inv_pivot,
        })
    }
}

/// LU factors of a tridiagonal matrix without pivoting.
#[derive(Debug, Clone)]
pub struct ThomasFactor {
    sub: Vec<f64>,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ThomasFactor {
    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.sub[i] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.upper[i] * x[i + 1];
        }
    }
}

pub fn thomas_solve(op: &TridiagonalOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != op.len() {
        return Err(Error::InvalidArgument(format!(
            "rhs has {} entries, system has {}",
            rhs.len(),
            op.len()
        )));
    }
    let factor = op.factor()?;
    let mut x = rhs.to_vec();
    factor.solve_in_place(&mut x);
    Ok(x)
}
