//! Dense symmetric eigensolver for the small operator matrices used in this
//! crate (dimensions stay below ~50).
//!
//! Cyclic Jacobi with the Numerical-Recipes rotation update: deterministic,
//! free of external linear-algebra backends, and accurate to a few ulps of
//! the matrix norm at these sizes.

use ndarray::{Array1, Array2};

use crate::error::{Result, RotorError};

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a real symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second array. Ties keep the pre-sort (rotation) order,
/// so the output is deterministic.
pub fn symmetric_eigen(mat: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = mat.nrows();
    if n == 0 || mat.ncols() != n {
        return Err(RotorError::InvalidInput(format!(
            "expected a nonempty square matrix, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    let asym = mat
        .iter()
        .zip(mat.t().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let scale = mat.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
    if asym > 1e-12 * scale.max(1.0) {
        return Err(RotorError::InvalidInput(
            "matrix is not symmetric".to_string(),
        ));
    }

    let mut a = mat.clone();
    let mut v: Array2<f64> = Array2::eye(n);

    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[[p, q]] * a[[p, q]];
                }
            }
            s.sqrt()
        };
        if off <= f64::EPSILON * scale.max(f64::MIN_POSITIVE) * n as f64 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                // Skip rotations that cannot change anything at working
                // precision; zeroing the entry keeps the sweep monotone.
                if apq.abs() <= f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()) {
                    a[[p, q]] = 0.0;
                    a[[q, p]] = 0.0;
                    continue;
                }
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[[p, p]] = app - t * apq;
                a[[q, q]] = aqq + t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[[r, p]];
                        let arq = a[[r, q]];
                        a[[r, p]] = arp - s * (arq + tau * arp);
                        a[[p, r]] = a[[r, p]];
                        a[[r, q]] = arq + s * (arp - tau * arq);
                        a[[q, r]] = a[[r, q]];
                    }
                }
                for r in 0..n {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = vrp - s * (vrq + tau * vrp);
                    v[[r, q]] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    if !converged {
        // One more off-diagonal check after the final sweep.
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(RotorError::Numeric(
                "jacobi eigensolver failed to converge".to_string(),
            ));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[[i, i]]
            .partial_cmp(&a[[j, j]])
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[[r, col]] = v[[r, i]];
        }
    }
    Ok((eigenvalues, eigenvectors))
}
