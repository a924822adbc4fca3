//! Deterministic sampling helpers over a caller-owned byte stream.
//!
//! Box-Muller keeps normal draws identical across platforms and rand
//! versions; reproducibility of training runs depends on it.

pub use rand_chacha::rand_core::RngCore;

/// The crate's seeded stream of choice.
pub fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand_chacha::rand_core::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// 53-bit uniform in [0, 1).
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [-bound, bound].
pub fn uniform_symmetric(rng: &mut impl RngCore, bound: f64) -> f64 {
    (2.0 * uniform01(rng) - 1.0) * bound
}

/// One standard-normal draw (consumes two uniforms).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = (uniform01(rng)).max(f64::MIN_POSITIVE);
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// In-place Fisher-Yates shuffle driven by the caller's stream.
pub fn shuffle(order: &mut [usize], rng: &mut impl RngCore) {
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
}

/// Fill a slice with standard-normal draws, two per Box-Muller pair.
pub fn fill_standard_normal(rng: &mut impl RngCore, out: &mut [f64]) {
    let mut i = 0;
    while i + 2 <= out.len() {
        let u1 = (uniform01(rng)).max(f64::MIN_POSITIVE);
        let u2 = uniform01(rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        out[i] = r * th.cos();
        out[i + 1] = r * th.sin();
        i += 2;
    }
    if i < out.len() {
        out[i] = standard_normal(rng);
    }
}
