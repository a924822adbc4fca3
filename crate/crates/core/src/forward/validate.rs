//! Solver validation checks: closed forms against quadrature, the full
//! pipeline against the analytic cylinder series, reciprocity, and
//! dense/FFT path agreement. The CLI `validate-solver` subcommand runs
//! these and prints one pass/fail line per check.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fft_solver::BttbOperator;
use super::green::{green_domain_matrix, green_receiver_matrix};
use super::mie::mie_scattered_field;
use super::quadrature::{cell_integral_quadrature, self_integral_quadrature};
use super::{
    incident_field, plane_wave_incident, scattered_field, solve_total_field, SolveMethod,
    SolverOptions,
};
use crate::error::Result;
use crate::scene::{
    make_array_layout, make_grid, sample_scatterer, image_to_contrast, ArrayLayout, CellGrid,
    Point2, SceneConfig, ShapeConfig,
};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    /// Measured residual/error for the check.
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Default frequencies the quadrature comparison runs at.
pub const DEFAULT_FREQUENCIES: [f64; 4] = [60e6, 80e6, 100e6, 120e6];

/// Closed-form entries against adaptive square-cell quadrature on a 4x4
/// grid, every domain and receiver entry, at one frequency.
///
/// The test grid uses electrically small cells (0.04 m at 60-120 MHz,
/// under lambda/60); there the equal-area-disk substitution itself is
/// accurate to a few 1e-5, well inside the 1e-4 gate, so the comparison
/// isolates formula errors. At production cell sizes the substitution's
/// intrinsic deviation grows as (k0 * side)^2 — see
/// `disk_substitution_error_at_production_cells` in the tests.
pub fn check_quadrature(freq_hz: f64) -> Result<CheckResult> {
    let cfg = SceneConfig {
        domain_side_m: 0.16,
        grid_n: 4,
        antenna_radius_m: 0.5,
        frequencies_hz: vec![freq_hz],
        ..Default::default()
    };
    let grid = make_grid(&cfg)?;
    let k0 = cfg.wavenumber(freq_hz);
    let gd = green_domain_matrix(&grid, k0)?;
    let n = grid.centers.len();
    let mut worst = 0.0f64;
    for m in 0..n {
        for c in 0..n {
            let closed = gd.entry(m, c);
            let oracle = if m == c {
                self_integral_quadrature(k0, grid.cell_side_m, 1e-9)?
            } else {
                cell_integral_quadrature(k0, grid.centers[c], grid.cell_side_m, grid.centers[m], 1e-9)?
            };
            let rel = (closed - oracle).norm() / oracle.norm();
            worst = worst.max(rel);
        }
    }
    // Receiver entries from 8 positions on the antenna circle.
    let layout = ArrayLayout {
        tx_positions: vec![],
        rx_positions: (0..8)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / 8.0 + 0.2;
                Point2::new(0.5 * th.cos(), 0.5 * th.sin())
            })
            .collect(),
    };
    let gr = green_receiver_matrix(&grid, &layout, k0)?;
    for m in 0..layout.rx_positions.len() {
        for c in 0..n {
            let closed = gr.entry(m, c);
            let oracle = cell_integral_quadrature(
                k0,
                grid.centers[c],
                grid.cell_side_m,
                layout.rx_positions[m],
                1e-9,
            )?;
            let rel = (closed - oracle).norm() / oracle.norm();
            worst = worst.max(rel);
        }
    }
    Ok(CheckResult::new(
        format!("quadrature {:.0} MHz", freq_hz / 1e6),
        worst,
        1e-4,
    ))
}

/// Per-cell contrast of a centered circular cylinder with sub-cell fill
/// fractions (16x16 supersampling); used by the analytic-oracle comparison
/// so staircasing does not mask solver errors.
pub fn cylinder_contrast(grid: &CellGrid, radius_m: f64, tau: f64) -> Vec<f64> {
    const SS: usize = 16;
    let side = grid.cell_side_m;
    let r2 = radius_m * radius_m;
    grid.centers
        .iter()
        .map(|c| {
            // Cells fully inside/outside skip the supersampling.
            let dist = c.norm();
            let half_diag = side * std::f64::consts::SQRT_2 / 2.0;
            if dist + half_diag <= radius_m {
                return tau;
            }
            if dist - half_diag >= radius_m {
                return 0.0;
            }
            let mut hits = 0usize;
            for i in 0..SS {
                let x = c.x - side / 2.0 + (i as f64 + 0.5) * side / SS as f64;
                for j in 0..SS {
                    let y = c.y - side / 2.0 + (j as f64 + 0.5) * side / SS as f64;
                    if x * x + y * y <= r2 {
                        hits += 1;
                    }
                }
            }
            tau * hits as f64 / (SS * SS) as f64
        })
        .collect()
}

/// Full solver chain against the analytic cylinder series: relative L2
/// error of the complex receiver fields.
pub fn check_mie_case(grid_n: usize, freq_hz: f64, threshold: f64) -> Result<CheckResult> {
    let cfg = SceneConfig {
        grid_n,
        frequencies_hz: vec![freq_hz],
        ..Default::default()
    };
    let grid = make_grid(&cfg)?;
    let layout = make_array_layout(&cfg)?;
    let k0 = cfg.wavenumber(freq_hz);
    let radius = 1.0;
    let tau = cylinder_contrast(&grid, radius, cfg.tau());
    let gd = green_domain_matrix(&grid, k0)?;
    let gr = green_receiver_matrix(&grid, &layout, k0)?;
    let e_inc = plane_wave_incident(&grid, k0, 0.0);
    let opts = SolverOptions {
        method: if grid_n <= 32 {
            SolveMethod::DenseDirect
        } else {
            SolveMethod::IterativeFft
        },
        ..Default::default()
    };
    let e_tot = solve_total_field(&gd, &tau, &e_inc, &opts)?;
    let e_sca = scattered_field(&gr, &e_tot, &tau)?;
    let oracle = mie_scattered_field(radius, cfg.eps_r_scatterer, k0, 0.0, &layout.rx_positions)?;
    let num: f64 = e_sca
        .values
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = oracle.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(CheckResult::new(
        format!("mie cylinder {grid_n}x{grid_n} @ {:.0} MHz", freq_hz / 1e6),
        num / den,
        threshold,
    ))
}

/// Source/receiver swap symmetry with unit line sources and the direct
/// solver, over random scatterers on a 16x16 grid.
pub fn check_reciprocity(seed: u64, n_scatterers: usize) -> Result<CheckResult> {
    let cfg = SceneConfig {
        grid_n: 16,
        frequencies_hz: vec![100e6],
        ..Default::default()
    };
    let grid = make_grid(&cfg)?;
    let layout = make_array_layout(&cfg)?;
    let k0 = cfg.wavenumber(100e6);
    let gd = green_domain_matrix(&grid, k0)?;
    // Each Tx position doubles as an Rx.
    let both = ArrayLayout {
        tx_positions: layout.tx_positions.clone(),
        rx_positions: layout.tx_positions.clone(),
    };
    let gr = green_receiver_matrix(&grid, &both, k0)?;
    let opts = SolverOptions {
        method: SolveMethod::DenseDirect,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape_cfg = ShapeConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..n_scatterers {
        let img = sample_scatterer(&mut rng, 16, &shape_cfg, cfg.tau())?;
        let tau = image_to_contrast(&img)?;
        let n_pos = both.tx_positions.len();
        let mut s = vec![Complex64::ZERO; n_pos * n_pos];
        for (q, tx) in both.tx_positions.iter().enumerate() {
            let e_inc = incident_field(&grid, *tx, k0)?;
            let e_tot = solve_total_field(&gd, &tau, &e_inc, &opts)?;
            let e_sca = scattered_field(&gr, &e_tot, &tau)?;
            for p in 0..n_pos {
                s[p * n_pos + q] = e_sca.values[p];
            }
        }
        for p in 0..n_pos {
            for q in (p + 1)..n_pos {
                let a = s[p * n_pos + q];
                let b = s[q * n_pos + p];
                let rel = (a - b).norm() / a.norm().max(b.norm()).max(1e-300);
                worst = worst.max(rel);
            }
        }
    }
    Ok(CheckResult::new("reciprocity 16x16", worst, 1e-8))
}

/// Zero contrast must produce an exactly zero scattered field.
pub fn check_zero_contrast() -> Result<CheckResult> {
    let cfg = SceneConfig {
        grid_n: 16,
        frequencies_hz: vec![60e6, 100e6],
        ..Default::default()
    };
    let img = crate::scene::ContrastImage::empty(16, cfg.tau());
    let resp = super::simulate_response(&img, &cfg, &SolverOptions::default())?;
    let max = resp.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(CheckResult::new("zero contrast -> zero field", max, 0.0))
}

/// FFT-embedded operator application against the explicit dense product.
pub fn check_fft_vs_dense() -> Result<CheckResult> {
    let cfg = SceneConfig {
        grid_n: 16,
        frequencies_hz: vec![100e6],
        ..Default::default()
    };
    let grid = make_grid(&cfg)?;
    let gd = green_domain_matrix(&grid, cfg.wavenumber(100e6))?;
    let n = gd.n_cells();
    let op = BttbOperator::new(&gd);
    let dense = gd.to_dense();
    let x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new((i as f64 * 0.17).sin(), (i as f64 * 0.29).cos()))
        .collect();
    let fast = op.apply(&x);
    let mut slow = vec![Complex64::ZERO; n];
    for i in 0..n {
        for j in 0..n {
            slow[i] += dense[i * n + j] * x[j];
        }
    }
    let num: f64 = fast
        .iter()
        .zip(&slow)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = slow.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(CheckResult::new("fft vs dense operator 16x16", num / den, 1e-10))
}

/// Receiver entries must follow the cylindrical-spreading asymptote
/// (amplitude ratio 1/sqrt(2) when the distance doubles) in the far zone.
pub fn check_far_zone_decay() -> Result<CheckResult> {
    let k0 = 2.0;
    let a = 0.05;
    let rho = 15.0; // k0 rho = 30 > 20
    let near = super::green::cell_integral_external(k0, a, rho).norm();
    let far = super::green::cell_integral_external(k0, a, 2.0 * rho).norm();
    let ratio = far / near;
    let expect = 1.0 / 2.0f64.sqrt();
    Ok(CheckResult::new(
        "far-zone 1/sqrt(rho) decay",
        (ratio - expect).abs() / expect,
        0.05,
    ))
}

/// No blow-up: total field stays within a small multiple of the incident
/// field for tau <= 1, and the scattered amplitude respects the row-sum
/// bound of the receiver operator.
pub fn check_energy_bound(seed: u64) -> Result<CheckResult> {
    let cfg = SceneConfig {
        grid_n: 16,
        frequencies_hz: vec![100e6],
        ..Default::default()
    };
    let grid = make_grid(&cfg)?;
    let layout = make_array_layout(&cfg)?;
    let k0 = cfg.wavenumber(100e6);
    let gd = green_domain_matrix(&grid, k0)?;
    let gr = green_receiver_matrix(&grid, &layout, k0)?;
    let opts = SolverOptions {
        method: SolveMethod::DenseDirect,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape_cfg = ShapeConfig::default();
    let row_sum = (0..gr.n_rx)
        .map(|m| {
            (0..gr.n_cells)
                .map(|c| gr.entry(m, c).norm())
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    let mut worst_ratio = 0.0f64;
    for _ in 0..5 {
        let img = sample_scatterer(&mut rng, 16, &shape_cfg, cfg.tau())?;
        let tau = image_to_contrast(&img)?;
        let tau_max = tau.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for tx in &layout.tx_positions {
            let e_inc = incident_field(&grid, *tx, k0)?;
            let e_tot = solve_total_field(&gd, &tau, &e_inc, &opts)?;
            let inc_max = e_inc.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let tot_max = e_tot.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            worst_ratio = worst_ratio.max(tot_max / inc_max);
            let e_sca = scattered_field(&gr, &e_tot, &tau)?;
            let sca_max = e_sca.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            // Algebraic bound |E_sca| <= rowsum(|G_R|) * tau_max * |E_tot|_inf.
            assert!(sca_max <= row_sum * tau_max * tot_max * (1.0 + 1e-12));
        }
    }
    Ok(CheckResult::new("total-field boundedness (tau <= 1)", worst_ratio, 10.0))
}

/// Run every solver check, including the two analytic-cylinder cases.
pub fn run_all(seed: u64) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    for f in DEFAULT_FREQUENCIES {
        checks.push(check_quadrature(f)?);
    }
    checks.push(check_mie_case(32, 60e6, 0.02)?);
    checks.push(check_mie_case(64, 100e6, 0.05)?);
    checks.push(check_reciprocity(seed, 10)?);
    checks.push(check_zero_contrast()?);
    checks.push(check_fft_vs_dense()?);
    checks.push(check_far_zone_decay()?);
    checks.push(check_energy_bound(seed)?);
    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_check_passes_at_100mhz() {
        let res = check_quadrature(100e6).unwrap();
        assert!(res.pass, "{}: {:.3e}", res.name, res.value);
    }

    #[test]
    fn far_zone_decay_passes() {
        let res = check_far_zone_decay().unwrap();
        assert!(res.pass, "{:.3e}", res.value);
    }

    #[test]
    fn disk_substitution_error_at_production_cells() {
        // Characterization, not a gate: at the production 64x64 cell size the
        // equal-area-disk closed form deviates from true-square quadrature by
        // O((k0 side)^2) -- a few 1e-4 at 120 MHz. This is inherent to the
        // closed form, small against the few-percent solver accuracy, and
        // kept visible here.
        let cfg = SceneConfig::default();
        let grid = make_grid(&cfg).unwrap();
        let k0 = cfg.wavenumber(120e6);
        let gd = green_domain_matrix(&grid, k0).unwrap();
        let obs = grid.centers[0];
        let cell = grid.centers[3];
        let closed = gd.entry(0, 3);
        let oracle = cell_integral_quadrature(k0, cell, grid.cell_side_m, obs, 1e-10).unwrap();
        let rel = (closed - oracle).norm() / oracle.norm();
        assert!(rel < 1e-3, "substitution error unexpectedly large: {rel:.3e}");
        assert!(rel > 1e-6, "substitution error unexpectedly small: {rel:.3e}");
    }

    #[test]
    fn cylinder_contrast_fractions_are_sane() {
        let cfg = SceneConfig {
            grid_n: 32,
            frequencies_hz: vec![60e6],
            ..Default::default()
        };
        let grid = make_grid(&cfg).unwrap();
        let tau = cylinder_contrast(&grid, 1.0, 1.0);
        assert!(tau.iter().all(|&t| (0.0..=1.0).contains(&t)));
        let area: f64 = tau.iter().sum::<f64>() * grid.cell_side_m * grid.cell_side_m;
        let expect = std::f64::consts::PI;
        assert!(((area - expect) / expect).abs() < 2e-3, "area {area} vs {expect}");
    }
}
