//! Special functions on complex parameters: log-gamma, Gauss hypergeometric,
//! modified Bessel I/K, Bessel J, and Weierstrass elementary factors.
//!
//! Everything here is binary64; series are truncated against the
//! `PrecisionContext` relative target with a three-consecutive-terms rule
//! (complex-order series are not monotone).

mod bessel;
mod gamma;
mod hyp2f1;
pub mod quad;

pub use bessel::{bessel_i, bessel_j, bessel_k, bessel_i_dx, bessel_k_dx};
pub use gamma::{beta_ratio_log_abs, log_gamma, log_gamma_unchecked, log_sin_pi};
pub use hyp2f1::{gauss_2f1, gauss_2f1_with, Hyp2f1Method};

use num_complex::Complex64;

/// Weierstrass elementary factor E(z, p) = (1-z) exp(z + z^2/2 + ... + z^p/p).
pub fn weierstrass_factor(z: Complex64, p: u32) -> Complex64 {
    let (lg, arg) = weierstrass_factor_log(z, p);
    Complex64::from_polar(lg.exp(), arg)
}

/// log of the Weierstrass elementary factor E(z, p) = (1-z) exp(sum z^i/i).
///
/// Returned as (log|E|, arg E) so callers can accumulate products with huge
/// exponents without overflow. arg is reduced mod 2pi, not unwound.
pub fn weierstrass_factor_log(z: Complex64, p: u32) -> (f64, f64) {
    let mut s = Complex64::new(0.0, 0.0);
    let mut zp = Complex64::new(1.0, 0.0);
    for i in 1..=p {
        zp *= z;
        s += zp / i as f64;
    }
    let one_minus = Complex64::new(1.0, 0.0) - z;
    let lg = one_minus.norm().ln() + s.re;
    let arg = one_minus.arg() + s.im;
    (lg, arg.rem_euclid(2.0 * std::f64::consts::PI))
}

/// |log E(z,p)| <= this for |z| <= 1/2: the standard tail bound |z|^{p+1}/(1-|z|) <= 2|z|^{p+1}.
pub fn weierstrass_factor_tail_bound(abs_z: f64, p: u32) -> f64 {
    2.0 * abs_z.powi(p as i32 + 1)
}
