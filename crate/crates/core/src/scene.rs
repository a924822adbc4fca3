//! Physical experiment description: imaging domain, discretization grid,
//! antenna layout, illumination frequencies, and synthesis of random
//! dielectric scatterer images.
//!
//! Geometry conventions, fixed here and relied on everywhere else:
//! - the imaging domain is the square `[-L/2, L/2]^2` (side `L` in meters),
//! - cells are indexed row-major, `n = row * grid_n + col`, with `x`
//!   increasing with `col` and `y` decreasing with `row` (image convention),
//! - transmitters sit at angles `2*pi*i / n_tx`, receivers at
//!   `2*pi*m / n_rx + pi/n_rx` (half-step offset so no Tx/Rx coincide),
//!   both on a circle of radius `antenna_radius_m` around the origin.

use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// A point in the scene plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Everything needed to reproduce one measurement setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Side of the square imaging domain, meters.
    pub domain_side_m: f64,
    /// Cells per side; the domain is split into `grid_n^2` square cells.
    pub grid_n: usize,
    /// Relative permittivity of object pixels (background is vacuum).
    pub eps_r_scatterer: f64,
    /// Number of transmitters on the antenna circle.
    pub n_tx: usize,
    /// Number of receivers on the antenna circle.
    pub n_rx: usize,
    /// Radius of the antenna circle, meters.
    pub antenna_radius_m: f64,
    /// Illumination frequencies in Hz, strictly increasing.
    pub frequencies_hz: Vec<f64>,
    /// Background permittivity, F/m.
    #[serde(default = "default_eps0")]
    pub background_eps0: f64,
    /// Background permeability, H/m.
    #[serde(default = "default_mu0")]
    pub background_mu0: f64,
}

fn default_eps0() -> f64 {
    EPSILON_0
}
fn default_mu0() -> f64 {
    MU_0
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            domain_side_m: 9.45,
            grid_n: 64,
            eps_r_scatterer: 2.0,
            n_tx: 8,
            n_rx: 16,
            antenna_radius_m: 9.0,
            frequencies_hz: vec![60e6, 80e6, 100e6, 120e6],
            background_eps0: EPSILON_0,
            background_mu0: MU_0,
        }
    }
}

impl SceneConfig {
    /// Check every invariant; returns the violated one by name on failure.
    pub fn validate(&self) -> Result<()> {
        if !(self.domain_side_m > 0.0) {
            return Err(Error::Config(format!(
                "domain_side_m must be > 0, got {}",
                self.domain_side_m
            )));
        }
        if self.grid_n < 2 {
            return Err(Error::Config(format!("grid_n must be >= 2, got {}", self.grid_n)));
        }
        if !(self.eps_r_scatterer > 1.0) {
            return Err(Error::Config(format!(
                "eps_r_scatterer must be > 1 (positive contrast), got {}",
                self.eps_r_scatterer
            )));
        }
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(Error::Config("n_tx and n_rx must be >= 1".into()));
        }
        let half_diagonal = self.domain_side_m * std::f64::consts::SQRT_2 / 2.0;
        if !(self.antenna_radius_m > half_diagonal) {
            return Err(Error::Config(format!(
                "antenna_radius_m ({}) must exceed the domain half-diagonal ({:.4}); \
                 antennas must sit strictly outside the domain",
                self.antenna_radius_m, half_diagonal
            )));
        }
        if self.frequencies_hz.is_empty() {
            return Err(Error::Config("frequencies_hz must be non-empty".into()));
        }
        for w in self.frequencies_hz.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config(format!(
                    "frequencies_hz must be strictly increasing, got {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        if !(self.frequencies_hz[0] > 0.0) {
            return Err(Error::Config("frequencies must be > 0".into()));
        }
        if !(self.background_eps0 > 0.0) || !(self.background_mu0 > 0.0) {
            return Err(Error::Config("background constants must be > 0".into()));
        }
        Ok(())
    }

    /// Contrast value applied to object pixels: `tau = eps_r - 1`.
    pub fn tau(&self) -> f64 {
        self.eps_r_scatterer - 1.0
    }

    /// Free-space wavenumber at frequency `f_hz`, rad/m.
    pub fn wavenumber(&self, f_hz: f64) -> f64 {
        2.0 * std::f64::consts::PI * f_hz * (self.background_eps0 * self.background_mu0).sqrt()
    }

    /// Number of cells.
    pub fn n_cells(&self) -> usize {
        self.grid_n * self.grid_n
    }

    /// Length of one simulated response: `n_freq * n_tx * n_rx`.
    pub fn field_len(&self) -> usize {
        self.frequencies_hz.len() * self.n_tx * self.n_rx
    }
}

/// Row-major cell centers of the discretized domain.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub centers: Vec<Point2>,
    pub grid_n: usize,
    pub cell_side_m: f64,
    /// Radius of the equal-area disk: `pi a^2 = cell_side^2`.
    pub equiv_radius_m: f64,
}

/// Build the row-major cell-center grid tiling `[-L/2, L/2]^2`.
pub fn make_grid(cfg: &SceneConfig) -> Result<CellGrid> {
    cfg.validate()?;
    let n = cfg.grid_n;
    let side = cfg.domain_side_m / n as f64;
    let half = cfg.domain_side_m / 2.0;
    let mut centers = Vec::with_capacity(n * n);
    for row in 0..n {
        let y = half - (row as f64 + 0.5) * side;
        for col in 0..n {
            let x = -half + (col as f64 + 0.5) * side;
            centers.push(Point2::new(x, y));
        }
    }
    Ok(CellGrid {
        centers,
        grid_n: n,
        cell_side_m: side,
        equiv_radius_m: side * (1.0 / std::f64::consts::PI).sqrt(),
    })
}

/// Transmitter and receiver positions on the antenna circle.
#[derive(Debug, Clone)]
pub struct ArrayLayout {
    pub tx_positions: Vec<Point2>,
    pub rx_positions: Vec<Point2>,
}

/// Place antennas: Tx equally spaced starting at angle 0, Rx equally spaced
/// with a half-step offset so no receiver coincides with a transmitter.
pub fn make_array_layout(cfg: &SceneConfig) -> Result<ArrayLayout> {
    cfg.validate()?;
    let r = cfg.antenna_radius_m;
    let tx_positions = (0..cfg.n_tx)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / cfg.n_tx as f64;
            Point2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    let rx_positions = (0..cfg.n_rx)
        .map(|m| {
            let th = 2.0 * std::f64::consts::PI * m as f64 / cfg.n_rx as f64
                + std::f64::consts::PI / cfg.n_rx as f64;
            Point2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    Ok(ArrayLayout {
        tx_positions,
        rx_positions,
    })
}

/// A binary scatterer mask plus the contrast value its 1-pixels encode.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastImage {
    /// Row-major `grid_n * grid_n` values in {0, 1}.
    pub mask: Vec<u8>,
    pub grid_n: usize,
    /// Contrast applied to mask-1 pixels: `tau = eps_r - 1`.
    pub tau: f64,
}

impl ContrastImage {
    pub fn empty(grid_n: usize, tau: f64) -> Self {
        ContrastImage {
            mask: vec![0; grid_n * grid_n],
            grid_n,
            tau,
        }
    }

    pub fn area_pixels(&self) -> usize {
        self.mask.iter().filter(|&&p| p == 1).count()
    }

    /// Fraction of grid pixels covered by the scatterer.
    pub fn area_fraction(&self) -> f64 {
        self.area_pixels() as f64 / (self.grid_n * self.grid_n) as f64
    }
}

/// Expand the mask into the length-`N` real contrast vector, row-major.
pub fn image_to_contrast(img: &ContrastImage) -> Result<Vec<f64>> {
    if img.mask.len() != img.grid_n * img.grid_n {
        return Err(Error::Shape(format!(
            "mask has {} pixels, expected {}x{}",
            img.mask.len(),
            img.grid_n,
            img.grid_n
        )));
    }
    if let Some(bad) = img.mask.iter().find(|&&p| p > 1) {
        return Err(Error::Domain(format!("mask pixel {bad} outside {{0,1}}")));
    }
    Ok(img.mask.iter().map(|&p| img.tau * p as f64).collect())
}

/// Parameters of the radial-harmonic blob sampler.
///
/// A blob boundary is `r(theta) = r0 * (1 + sum_k a_k cos(k theta + phi_k))`
/// with `k = 1..=n_harmonics`; pixels whose centers fall inside the curve are
/// set. Samples violating the area/connectivity/margin constraints are
/// rejected and redrawn.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeConfig {
    /// Base radius range as fractions of the domain side.
    pub r0_frac_range: (f64, f64),
    /// Harmonic amplitudes are uniform in `[-amp_max, amp_max]`.
    pub amp_max: f64,
    pub n_harmonics: usize,
    /// Blob must keep this many cells clear of the domain boundary.
    pub margin_cells: usize,
    /// Acceptable blob area as a fraction of all grid pixels.
    pub area_frac_range: (f64, f64),
    pub max_retries: usize,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            r0_frac_range: (0.08, 0.22),
            amp_max: 0.25,
            n_harmonics: 4,
            margin_cells: 2,
            area_frac_range: (0.02, 0.40),
            max_retries: 200,
        }
    }
}

/// Explicit blob description, exposed so tests can rasterize known shapes.
#[derive(Debug, Clone)]
pub struct BlobShape {
    /// Center in grid units (pixels), measured from the top-left pixel center.
    pub center_row: f64,
    pub center_col: f64,
    /// Base radius in grid units.
    pub r0_cells: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

/// Rasterize a blob by the pixel-center-in-region test.
pub fn rasterize_blob(grid_n: usize, shape: &BlobShape, tau: f64) -> ContrastImage {
    let mut mask = vec![0u8; grid_n * grid_n];
    for row in 0..grid_n {
        for col in 0..grid_n {
            let dy = row as f64 - shape.center_row;
            let dx = col as f64 - shape.center_col;
            let rho = dx.hypot(dy);
            let theta = dy.atan2(dx);
            let mut boundary = 1.0;
            for (k, (&a, &ph)) in shape.amplitudes.iter().zip(&shape.phases).enumerate() {
                boundary += a * ((k as f64 + 1.0) * theta + ph).cos();
            }
            if rho <= shape.r0_cells * boundary {
                mask[row * grid_n + col] = 1;
            }
        }
    }
    ContrastImage {
        mask,
        grid_n,
        tau,
    }
}

/// 4-connected flood fill; returns the number of pixels reachable from the
/// first set pixel.
fn connected_count(mask: &[u8], grid_n: usize) -> usize {
    let start = match mask.iter().position(|&p| p == 1) {
        Some(i) => i,
        None => return 0,
    };
    let mut seen = vec![false; mask.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(idx) = stack.pop() {
        count += 1;
        let (r, c) = (idx / grid_n, idx % grid_n);
        let mut push = |rr: usize, cc: usize| {
            let j = rr * grid_n + cc;
            if mask[j] == 1 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        };
        if r > 0 {
            push(r - 1, c);
        }
        if r + 1 < grid_n {
            push(r + 1, c);
        }
        if c > 0 {
            push(r, c - 1);
        }
        if c + 1 < grid_n {
            push(r, c + 1);
        }
    }
    count
}

fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    // 53-bit uniform in [0,1); identical across platforms for a fixed stream.
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + u * (hi - lo)
}

/// Draw one random connected blob image satisfying the shape constraints.
///
/// All randomness comes from `rng`, so a fixed stream yields a fixed image.
pub fn sample_scatterer(
    rng: &mut impl RngCore,
    grid_n: usize,
    shape_cfg: &ShapeConfig,
    tau: f64,
) -> Result<ContrastImage> {
    if grid_n < 8 {
        return Err(Error::Config(format!("grid_n must be >= 8 for sampling, got {grid_n}")));
    }
    let g = grid_n as f64;
    let margin = shape_cfg.margin_cells as f64;
    for _ in 0..shape_cfg.max_retries {
        let r0 = uniform(rng, shape_cfg.r0_frac_range.0, shape_cfg.r0_frac_range.1) * g;
        // Keep the nominal disk inside the margin; harmonics may still spill,
        // in which case the margin check below rejects the draw.
        let lo = (margin + r0).min(g / 2.0 - 0.5);
        let hi = (g - 1.0 - margin - r0).max(g / 2.0 - 0.5);
        let center_row = uniform(rng, lo, hi);
        let center_col = uniform(rng, lo, hi);
        let mut amplitudes = Vec::with_capacity(shape_cfg.n_harmonics);
        let mut phases = Vec::with_capacity(shape_cfg.n_harmonics);
        for _ in 0..shape_cfg.n_harmonics {
            amplitudes.push(uniform(rng, -shape_cfg.amp_max, shape_cfg.amp_max));
            phases.push(uniform(rng, 0.0, 2.0 * std::f64::consts::PI));
        }
        let img = rasterize_blob(
            grid_n,
            &BlobShape {
                center_row,
                center_col,
                r0_cells: r0,
                amplitudes,
                phases,
            },
            tau,
        );
        if blob_is_valid(&img, shape_cfg) {
            return Ok(img);
        }
    }
    Err(Error::Generation(format!(
        "no valid scatterer after {} attempts (grid_n={grid_n})",
        shape_cfg.max_retries
    )))
}

fn blob_is_valid(img: &ContrastImage, cfg: &ShapeConfig) -> bool {
    let n = img.grid_n;
    let area = img.area_pixels();
    let frac = area as f64 / (n * n) as f64;
    if frac < cfg.area_frac_range.0 || frac > cfg.area_frac_range.1 {
        return false;
    }
    if connected_count(&img.mask, n) != area {
        return false;
    }
    // No set pixel within `margin_cells` of the boundary.
    let m = cfg.margin_cells;
    for row in 0..n {
        for col in 0..n {
            if img.mask[row * n + col] == 1 && (row < m || col < m || row >= n - m || col >= n - m) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_2x2_on_2m_domain() {
        let cfg = SceneConfig {
            domain_side_m: 2.0,
            grid_n: 2,
            frequencies_hz: vec![60e6],
            ..Default::default()
        };
        let grid = make_grid(&cfg).unwrap();
        assert_eq!(grid.cell_side_m, 1.0);
        let expect = [(-0.5, 0.5), (0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)];
        for (c, (x, y)) in grid.centers.iter().zip(expect) {
            assert!((c.x - x).abs() < 1e-15 && (c.y - y).abs() < 1e-15);
        }
    }

    #[test]
    fn default_grid_matches_paper_dimensions() {
        let grid = make_grid(&SceneConfig::default()).unwrap();
        assert_eq!(grid.centers.len(), 4096);
        assert!((grid.cell_side_m - 0.14765625).abs() < 1e-12);
    }

    #[test]
    fn equal_area_disk_identity() {
        for n in [2usize, 7, 32, 64] {
            let cfg = SceneConfig {
                grid_n: n,
                ..Default::default()
            };
            let grid = make_grid(&cfg).unwrap();
            let lhs = std::f64::consts::PI * grid.equiv_radius_m * grid.equiv_radius_m;
            let rhs = grid.cell_side_m * grid.cell_side_m;
            assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_centers_symmetric_under_quarter_turn() {
        let cfg = SceneConfig {
            grid_n: 8,
            ..Default::default()
        };
        let grid = make_grid(&cfg).unwrap();
        let n = cfg.grid_n;
        for r in 0..n {
            for c in 0..n {
                let p = grid.centers[r * n + c];
                // (r, c) -> (c, n-1-r) rotates coordinates by -90 degrees.
                let q = grid.centers[c * n + (n - 1 - r)];
                assert!((q.x - p.y).abs() < 1e-12 && (q.y + p.x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layout_angles() {
        let cfg = SceneConfig::default();
        let layout = make_array_layout(&cfg).unwrap();
        assert_eq!(layout.tx_positions.len(), 8);
        assert_eq!(layout.rx_positions.len(), 16);
        // First Tx at 0 degrees, second at 45.
        assert!((layout.tx_positions[0].y).abs() < 1e-12);
        let a1 = layout.tx_positions[1].y.atan2(layout.tx_positions[1].x).to_degrees();
        assert!((a1 - 45.0).abs() < 1e-10);
        // First Rx at 11.25 degrees (half of the 22.5-degree step).
        let r0 = layout.rx_positions[0].y.atan2(layout.rx_positions[0].x).to_degrees();
        assert!((r0 - 11.25).abs() < 1e-10);
        // Radii exact, and no Tx coincides with an Rx.
        for p in layout.tx_positions.iter().chain(&layout.rx_positions) {
            assert!((p.norm() - cfg.antenna_radius_m).abs() < 1e-9);
        }
        for t in &layout.tx_positions {
            for r in &layout.rx_positions {
                assert!(t.dist(r) > 1e-6);
            }
        }
    }

    #[test]
    fn antennas_clear_the_domain() {
        let cfg = SceneConfig::default();
        let layout = make_array_layout(&cfg).unwrap();
        let half = cfg.domain_side_m / 2.0;
        for p in layout.tx_positions.iter().chain(&layout.rx_positions) {
            let dx = (p.x.abs() - half).max(0.0);
            let dy = (p.y.abs() - half).max(0.0);
            assert!(dx.hypot(dy) > 0.0, "antenna {p:?} touches the domain");
        }
    }

    #[test]
    fn antenna_circle_inside_domain_rejected() {
        let cfg = SceneConfig {
            antenna_radius_m: 5.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_configs_name_the_violation() {
        let bad_freq = SceneConfig {
            frequencies_hz: vec![80e6, 60e6],
            ..Default::default()
        };
        let err = bad_freq.validate().unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
        let bad_eps = SceneConfig {
            eps_r_scatterer: 1.0,
            ..Default::default()
        };
        assert!(bad_eps.validate().is_err());
    }

    #[test]
    fn contrast_vector_basics() {
        let mut img = ContrastImage::empty(4, 1.0);
        assert_eq!(image_to_contrast(&img).unwrap(), vec![0.0; 16]);
        img.mask = vec![1; 16];
        assert_eq!(image_to_contrast(&img).unwrap(), vec![1.0; 16]);
        let mut one = ContrastImage::empty(4, 0.7);
        one.mask[2 * 4 + 3] = 1;
        let tau = image_to_contrast(&one).unwrap();
        for (i, v) in tau.iter().enumerate() {
            if i == 11 {
                assert_eq!(*v, 0.7);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn contrast_rejects_bad_shapes() {
        let img = ContrastImage {
            mask: vec![0; 10],
            grid_n: 4,
            tau: 1.0,
        };
        assert!(matches!(image_to_contrast(&img), Err(Error::Shape(_))));
        let img2 = ContrastImage {
            mask: vec![2; 16],
            grid_n: 4,
            tau: 1.0,
        };
        assert!(matches!(image_to_contrast(&img2), Err(Error::Domain(_))));
    }

    #[test]
    fn contrast_is_linear_and_invertible() {
        let mut img = ContrastImage::empty(6, 0.5);
        img.mask[7] = 1;
        img.mask[20] = 1;
        let t1 = image_to_contrast(&img).unwrap();
        let img2 = ContrastImage {
            tau: 1.0,
            ..img.clone()
        };
        let t2 = image_to_contrast(&img2).unwrap();
        for (a, b) in t1.iter().zip(&t2) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        // Recover the mask by dividing out tau.
        let recovered: Vec<u8> = t1.iter().map(|v| ((v / 0.5) as u8)).collect();
        assert_eq!(recovered, img.mask);
    }

    #[test]
    fn sampler_is_deterministic() {
        let cfg = ShapeConfig::default();
        let a = sample_scatterer(&mut ChaCha8Rng::seed_from_u64(42), 32, &cfg, 1.0).unwrap();
        let b = sample_scatterer(&mut ChaCha8Rng::seed_from_u64(42), 32, &cfg, 1.0).unwrap();
        assert_eq!(a.mask, b.mask);
    }

    #[test]
    fn zero_harmonics_give_a_disk() {
        let shape = BlobShape {
            center_row: 15.5,
            center_col: 15.5,
            r0_cells: 6.0,
            amplitudes: vec![0.0; 4],
            phases: vec![0.0; 4],
        };
        let img = rasterize_blob(32, &shape, 1.0);
        for row in 0..32 {
            for col in 0..32 {
                let d = ((row as f64 - 15.5).powi(2) + (col as f64 - 15.5).powi(2)).sqrt();
                let expect = (d <= 6.0) as u8;
                assert_eq!(img.mask[row * 32 + col], expect, "pixel ({row},{col})");
            }
        }
    }

    // Independent flood fill used as the test-side oracle.
    fn oracle_connected(mask: &[u8], n: usize) -> bool {
        let total = mask.iter().filter(|&&p| p == 1).count();
        if total == 0 {
            return false;
        }
        let start = mask.iter().position(|&p| p == 1).unwrap();
        let mut seen = std::collections::HashSet::new();
        seen.insert(start);
        let mut frontier = vec![start];
        while let Some(i) = frontier.pop() {
            let (r, c) = (i / n, i % n);
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                if rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                    continue;
                }
                let j = rr as usize * n + cc as usize;
                if mask[j] == 1 && seen.insert(j) {
                    frontier.push(j);
                }
            }
        }
        seen.len() == total
    }

    #[test]
    fn sampled_blobs_satisfy_constraints() {
        let cfg = ShapeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1500 {
            let img = sample_scatterer(&mut rng, 32, &cfg, 1.0).unwrap();
            let frac = img.area_fraction();
            assert!((0.02..=0.40).contains(&frac), "area fraction {frac}");
            assert!(oracle_connected(&img.mask, 32));
            for row in 0..32usize {
                for col in 0..32usize {
                    if img.mask[row * 32 + col] == 1 {
                        assert!(row >= 2 && col >= 2 && row < 30 && col < 30);
                    }
                }
            }
        }
    }

    #[test]
    fn sampler_works_at_minimum_grid() {
        let cfg = ShapeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let img = sample_scatterer(&mut rng, 8, &cfg, 1.0).unwrap();
            assert!(img.area_pixels() >= 2);
        }
    }
}
