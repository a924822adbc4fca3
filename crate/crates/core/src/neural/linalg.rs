//! Flat-slice matrix kernels used by the layers.
//!
//! Three GEMM variants cover every forward/backward product without
//! materializing transposes:
//! - `matmul_nt`: C[M,N] = A[M,K] * B[N,K]^T   (rows dotted with rows)
//! - `matmul_nn`: C[M,N] = A[M,K] * B[K,N]
//! - `matmul_tn`: C[M,N] = A[K,M]^T * B[K,N]
//!
//! Loops are arranged so the innermost dimension walks contiguous memory,
//! which is what the auto-vectorizer needs; training throughput depends
//! directly on these kernels.

/// C[M,N] = A[M,K] * B[N,K]^T. `B` row-major `[N, K]`.
pub fn matmul_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        let cr = &mut c[i * n..(i + 1) * n];
        // Process output columns in pairs to reuse the loaded A row.
        let mut j = 0;
        while j + 2 <= n {
            let b0 = &b[j * k..(j + 1) * k];
            let b1 = &b[(j + 1) * k..(j + 2) * k];
            let (mut s0, mut s1) = (0.0, 0.0);
            for t in 0..k {
                let av = ar[t];
                s0 += av * b0[t];
                s1 += av * b1[t];
            }
            cr[j] = s0;
            cr[j + 1] = s1;
            j += 2;
        }
        if j < n {
            let br = &b[j * k..(j + 1) * k];
            cr[j] = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        }
    }
}

/// C[M,N] = A[M,K] * B[K,N]. Accumulates along K with contiguous B rows.
pub fn matmul_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    c.fill(0.0);
    for i in 0..m {
        let cr = &mut c[i * n..(i + 1) * n];
        for t in 0..k {
            let av = a[i * k + t];
            if av == 0.0 {
                continue;
            }
            let br = &b[t * n..(t + 1) * n];
            for (cv, bv) in cr.iter_mut().zip(br) {
                *cv += av * bv;
            }
        }
    }
}

/// C[M,N] += A[K,M]^T * B[K,N] when `accumulate`, else overwrites.
pub fn matmul_tn(a: &[f64], b: &[f64], c: &mut [f64], k: usize, m: usize, n: usize, accumulate: bool) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if !accumulate {
        c.fill(0.0);
    }
    for t in 0..k {
        let ar = &a[t * m..(t + 1) * m];
        let br = &b[t * n..(t + 1) * n];
        for i in 0..m {
            let av = ar[i];
            if av == 0.0 {
                continue;
            }
            let cr = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in cr.iter_mut().zip(br) {
                *cv += av * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for t in 0..k {
                    c[i * n + j] += a[i * k + t] * b[t * n + j];
                }
            }
        }
        c
    }

    fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let mut t = vec![0.0; x.len()];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = x[r * cols + c];
            }
        }
        t
    }

    #[test]
    fn gemm_variants_agree_with_naive() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let want = naive(&a, &b, m, k, n);

        let mut c = vec![0.0; m * n];
        matmul_nn(&a, &b, &mut c, m, k, n);
        assert!(c.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));

        let bt = transpose(&b, k, n); // [n, k]
        let mut c2 = vec![0.0; m * n];
        matmul_nt(&a, &bt, &mut c2, m, k, n);
        assert!(c2.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));

        let at = transpose(&a, m, k); // [k, m]
        let mut c3 = vec![0.0; m * n];
        matmul_tn(&at, &b, &mut c3, k, m, n, false);
        assert!(c3.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));

        // Accumulating variant adds on top.
        matmul_tn(&at, &b, &mut c3, k, m, n, true);
        assert!(c3.iter().zip(&want).all(|(x, y)| (x - 2.0 * y).abs() < 1e-12));
    }
}
