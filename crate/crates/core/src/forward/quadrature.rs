//! Adaptive quadrature of the true square-cell integrals
//! `k0^2 \int_cell G(r_obs, r') dr'`, used as the independent oracle for the
//! equal-area-disk closed forms (and shipped so `validate-solver` can rerun
//! the comparison on any configuration).
//!
//! Observation points outside the cell use tensor-product Gauss-Legendre
//! rules with recursive cell subdivision. The self-cell integrand is
//! log-singular at the center, so it is reduced exactly in the radial
//! direction (`d/dx [x H1(x)] = x H0(x)`) leaving a smooth 1-D integral over
//! the polar angle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::Point2;
use crate::special::hankel2_0;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' at x.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn quad_square(
    k0: f64,
    obs: Point2,
    cx: f64,
    cy: f64,
    half: f64,
    nodes: &[f64],
    weights: &[f64],
) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for (i, &xi) in nodes.iter().enumerate() {
        let x = cx + half * xi;
        for (j, &yj) in nodes.iter().enumerate() {
            let y = cy + half * yj;
            let rho = (obs.x - x).hypot(obs.y - y);
            acc += weights[i] * weights[j] * hankel2_0(k0 * rho);
        }
    }
    // Jacobian of the [-1,1]^2 -> cell map.
    acc * half * half
}

struct Patch {
    cx: f64,
    cy: f64,
    half: f64,
    /// Refined estimate (sum over the four children).
    value: Complex64,
    /// |coarse - refined|, the local error surrogate.
    err: f64,
}

fn make_patch(k0: f64, obs: Point2, cx: f64, cy: f64, half: f64, nodes: &[f64], weights: &[f64]) -> Patch {
    let coarse = quad_square(k0, obs, cx, cy, half, nodes, weights);
    let h2 = half / 2.0;
    let mut fine = Complex64::ZERO;
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        fine += quad_square(k0, obs, cx + sx * h2, cy + sy * h2, h2, nodes, weights);
    }
    Patch {
        cx,
        cy,
        half,
        value: fine,
        err: (fine - coarse).norm(),
    }
}

/// Globally adaptive quadrature: keep splitting the patch with the largest
/// local error until the summed error estimate meets the relative tolerance.
/// Splitting by global (not per-patch) error is what makes log-singular
/// corners converge instead of chasing a vanishing local value.
fn adaptive_square(
    k0: f64,
    obs: Point2,
    cx: f64,
    cy: f64,
    half: f64,
    nodes: &[f64],
    weights: &[f64],
    tol: f64,
    max_patches: usize,
) -> Result<Complex64> {
    let mut patches = vec![make_patch(k0, obs, cx, cy, half, nodes, weights)];
    loop {
        let total: Complex64 = patches.iter().map(|p| p.value).sum();
        let err: f64 = patches.iter().map(|p| p.err).sum();
        if err <= tol * total.norm().max(1e-300) {
            return Ok(total);
        }
        if patches.len() >= max_patches {
            return Err(Error::Oracle(format!(
                "cell quadrature failed to converge ({} patches, residual {:.3e})",
                patches.len(),
                err / total.norm().max(1e-300)
            )));
        }
        let worst = patches
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.total_cmp(&b.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let p = patches.swap_remove(worst);
        let h2 = p.half / 2.0;
        for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            patches.push(make_patch(k0, obs, p.cx + sx * h2, p.cy + sy * h2, h2, nodes, weights));
        }
    }
}

/// `k0^2 \int_cell G(obs, r') dr'` over the square cell centered at
/// `cell_center` with side `cell_side`, observation strictly outside.
pub fn cell_integral_quadrature(
    k0: f64,
    cell_center: Point2,
    cell_side: f64,
    obs: Point2,
    rel_tol: f64,
) -> Result<Complex64> {
    let (nodes, weights) = gauss_legendre(12);
    let integral = adaptive_square(
        k0,
        obs,
        cell_center.x,
        cell_center.y,
        cell_side / 2.0,
        &nodes,
        &weights,
        rel_tol,
        4000,
    )?;
    // k0^2 * (1/4j) * integral of H0^(2)
    Ok(k0 * k0 / (4.0 * J) * integral)
}

/// Self-cell integral over the true square by direct 2-D adaptive
/// quadrature. The integrand is log-singular at the cell center, so the cell
/// is split into its four quadrants (singularity at one corner of each) and
/// the adaptive subdivision concentrates there; Gauss nodes never touch the
/// corner. Deliberately a different route from the production self-term
/// evaluation (exact radial reduction in [`super::green`]), so the two can
/// cross-check each other.
pub fn self_integral_quadrature(k0: f64, cell_side: f64, rel_tol: f64) -> Result<Complex64> {
    let (nodes, weights) = gauss_legendre(12);
    let h = cell_side / 2.0;
    let q = h / 2.0;
    let mut acc = Complex64::ZERO;
    // Quadrant centers; the shared corner (the singularity) is the origin.
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        acc += adaptive_square(
            k0,
            Point2::new(0.0, 0.0),
            sx * q,
            sy * q,
            q,
            &nodes,
            &weights,
            rel_tol / 4.0,
            8000,
        )?;
    }
    Ok(k0 * k0 / (4.0 * J) * acc)
}
