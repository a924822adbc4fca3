//! Dense complex LU factorization with partial pivoting, for the direct
//! solver path (grids up to 32x32; 1024 unknowns factor in well under a
//! second and one factorization serves all transmitters).

use num_complex::Complex64;

use crate::error::{Error, Result};

pub struct LuFactors {
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    n: usize,
}

/// Factor `a` (row-major `n x n`, consumed) as `P A = L U`.
pub fn lu_factor(mut a: Vec<Complex64>, n: usize) -> Result<LuFactors> {
    debug_assert_eq!(a.len(), n * n);
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        // Partial pivot on magnitude.
        let mut pivot_row = col;
        let mut pivot_mag = a[col * n + col].norm_sqr();
        for row in col + 1..n {
            let mag = a[row * n + col].norm_sqr();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag == 0.0 || !pivot_mag.is_finite() {
            return Err(Error::Solver {
                message: format!("singular system at column {col}"),
                residual: f64::INFINITY,
                iterations: 0,
            });
        }
        if pivot_row != col {
            perm.swap(col, pivot_row);
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
        }
        let inv_pivot = a[col * n + col].inv();
        for row in col + 1..n {
            let factor = a[row * n + col] * inv_pivot;
            a[row * n + col] = factor;
            if factor != Complex64::ZERO {
                let (top, bottom) = a.split_at_mut(row * n);
                let pivot_row_slice = &top[col * n + col + 1..col * n + n];
                let target = &mut bottom[col + 1..n];
                for (t, p) in target.iter_mut().zip(pivot_row_slice) {
                    *t -= factor * p;
                }
            }
        }
    }
    Ok(LuFactors { lu: a, perm, n })
}

impl LuFactors {
    /// Solve `A x = b` using the stored factors.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Shape(format!("lu solve: rhs length {} vs n {n}", b.len())));
        }
        // Forward substitution on the permuted RHS.
        let mut x: Vec<Complex64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for row in 1..n {
            let mut acc = x[row];
            for col in 0..row {
                acc -= self.lu[row * n + col] * x[col];
            }
            x[row] = acc;
        }
        // Back substitution.
        for row in (0..n).rev() {
            let mut acc = x[row];
            for col in row + 1..n {
                acc -= self.lu[row * n + col] * x[col];
            }
            x[row] = acc / self.lu[row * n + row];
        }
        Ok(x)
    }
}
