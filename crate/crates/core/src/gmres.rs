//! Restarted GMRES with right preconditioning.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Krylov dimension before a restart.
    pub restart: usize,
    /// Relative residual target `‖b - Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 30,
            tol: 1e-10,
            max_restarts: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    pub restarts: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b`, starting from the contents of `x`.
///
/// `apply` computes `A v`; `precondition` applies an approximate inverse
/// `M^{-1} v`, and the method iterates on `A M^{-1}`.
pub fn gmres<A, P>(
    apply: A,
    precondition: P,
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
) -> Result<GmresStats>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let m = cfg.restart.max(1).min(n.max(1));
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresStats {
            iterations: 0,
            restarts: 0,
            relative_residual: 0.0,
        });
    }

    let mut basis = vec![vec![0.0; n]; m + 1];
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut work = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let mut rel = f64::INFINITY;

    for restart in 0..=cfg.max_restarts {
        // r = b - A x
        apply(x, &mut work);
        for i in 0..n {
            basis[0][i] = b[i] - work[i];
        }
        let beta = norm(&basis[0]);
        rel = beta / b_norm;
        if !rel.is_finite() {
            return Err(Error::NonFinite("GMRES residual"));
        }
        if rel <= cfg.tol {
            return Ok(GmresStats {
                iterations: total,
                restarts: restart,
                relative_residual: rel,
            });
        }
        basis[0].iter_mut().for_each(|v| *v /= beta);
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut k_used = 0;
        for k in 0..m {
            precondition(&basis[k], &mut z);
            apply(&z, &mut work);
            // Modified Gram-Schmidt.
            for j in 0..=k {
                let h = dot(&work, &basis[j]);
                hess[j][k] = h;
                for i in 0..n {
                    work[i] -= h * basis[j][i];
                }
            }
            let h_next = norm(&work);
            hess[k + 1][k] = h_next;
            if h_next > 0.0 {
                for i in 0..n {
                    basis[k + 1][i] = work[i] / h_next;
                }
            }
            for j in 0..k {
                let tmp = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = tmp;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = cs[k] * hess[k][k] + sn[k] * hess[k + 1][k];
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / b_norm;
            if rel <= cfg.tol || h_next == 0.0 {
                break;
            }
        }

        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        work.iter_mut().for_each(|v| *v = 0.0);
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                work[i] += yj * basis[j][i];
            }
        }
        precondition(&work, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
        if rel <= cfg.tol {
            return Ok(GmresStats {
                iterations: total,
                restarts: restart,
                relative_residual: rel,
            });
        }
    }
    Err(Error::LinearSolveStall {
        residual: rel,
        restarts: cfg.max_restarts,
    })
}
