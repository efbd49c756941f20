//! Dense complex linear algebra for the small per-frequency systems.
//!
//! Demixing matrices are N x N with N rarely above 4, so a plain LU
//! factorization with partial pivoting beats pulling in a LAPACK backend.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factorization with partial pivoting, stored in place.
///
/// After `factorize`, `lu` holds L (unit diagonal, below) and U (on and
/// above the diagonal); `pivots[k]` is the row swapped into position k.
pub struct Lu {
    lu: Array2<Complex64>,
    pivots: Vec<usize>,
}

impl Lu {
    pub fn factorize(a: ArrayView2<Complex64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "LU requires a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut lu = a.to_owned();
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = lu[[k, k]].norm_sqr();
            for r in (k + 1)..n {
                let mag = lu[[r, k]].norm_sqr();
                if mag > best {
                    best = mag;
                    p = r;
                }
            }
            pivots[k] = p;
            if p != k {
                for c in 0..n {
                    let tmp = lu[[k, c]];
                    lu[[k, c]] = lu[[p, c]];
                    lu[[p, c]] = tmp;
                }
            }
            let piv = lu[[k, k]];
            if piv == Complex64::new(0.0, 0.0) {
                // Singular to working precision; callers decide how to react.
                continue;
            }
            for r in (k + 1)..n {
                let factor = lu[[r, k]] / piv;
                lu[[r, k]] = factor;
                for c in (k + 1)..n {
                    let sub = factor * lu[[k, c]];
                    lu[[r, c]] -= sub;
                }
            }
        }
        Ok(Lu { lu, pivots })
    }

    pub fn is_singular(&self) -> bool {
        (0..self.lu.nrows()).any(|k| self.lu[[k, k]] == Complex64::new(0.0, 0.0))
    }

    /// log |det A|; `-inf` when the matrix is singular to working precision.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.lu.nrows())
            .map(|k| self.lu[[k, k]].norm().ln())
            .sum()
    }

    /// Solves A x = b for one right-hand side.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.lu.nrows();
        if b.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "rhs length {} does not match matrix order {}",
                b.len(),
                n
            )));
        }
        if self.is_singular() {
            return Err(Error::SingularMatrix { bin: 0 });
        }
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            for r in (k + 1)..n {
                let sub = self.lu[[r, k]] * x[k];
                x[r] -= sub;
            }
        }
        for k in (0..n).rev() {
            for c in (k + 1)..n {
                let sub = self.lu[[k, c]] * x[c];
                x[k] -= sub;
            }
            x[k] /= self.lu[[k, k]];
        }
        Ok(x)
    }
}

/// Solves A x = b.
pub fn solve(a: ArrayView2<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    Lu::factorize(a)?.solve(b)
}

/// Matrix inverse via LU on the columns of the identity.
pub fn inverse(a: ArrayView2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    let lu = Lu::factorize(a)?;
    let mut inv = Array2::zeros((n, n));
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        e[c] = Complex64::new(1.0, 0.0);
        let col = lu.solve(&e)?;
        e[c] = Complex64::new(0.0, 0.0);
        for r in 0..n {
            inv[[r, c]] = col[r];
        }
    }
    Ok(inv)
}

/// log |det A|; `-inf` for singular input.
pub fn log_abs_det(a: ArrayView2<Complex64>) -> Result<f64> {
    Ok(Lu::factorize(a)?.log_abs_det())
}

/// Moore-Penrose pseudo-inverse of a full-row-rank N x M matrix (N <= M):
/// A+ = A^H (A A^H)^(-1).
pub fn right_pseudo_inverse(a: ArrayView2<Complex64>) -> Result<Array2<Complex64>> {
    let (n, m) = (a.nrows(), a.ncols());
    if n > m {
        return Err(Error::ShapeMismatch(format!(
            "right pseudo-inverse needs rows <= cols, got {}x{}",
            n, m
        )));
    }
    let mut gram = Array2::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m {
                acc += a[[r, j]] * a[[c, j]].conj();
            }
            gram[[r, c]] = acc;
        }
    }
    let gram_inv = inverse(gram.view())?;
    let mut pinv = Array2::zeros((m, n));
    for r in 0..m {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += a[[j, r]].conj() * gram_inv[[j, c]];
            }
            pinv[[r, c]] = acc;
        }
    }
    Ok(pinv)
}
