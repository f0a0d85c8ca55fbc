use num_complex::Complex64;

use crate::{Error, Result};

const LN_2PI_HALF: f64 = 0.918938533204672741780329736406; // ln(2 pi)/2
const STIRLING_SHIFT: f64 = 12.0;

// B_{2j}/(2j(2j-1)) for the asymptotic series, j = 1..9.
const STIRLING_COEF: [f64; 9] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
];

fn dist_to_nonpositive_int(z: Complex64) -> f64 {
    if z.re > 0.0 {
        return z.norm();
    }
    let k = (-z.re).round();
    (z + k).norm()
}

fn stirling(z: Complex64) -> Complex64 {
    let lz = z.ln();
    let mut sum = (z - 0.5) * lz - z + LN_2PI_HALF;
    let zsq = z * z;
    let mut zp = z;
    for c in STIRLING_COEF {
        sum += c / zp;
        zp *= zsq;
    }
    sum
}

/// ln(1+w) accurate for small |w|.
fn ln_1p(w: Complex64) -> Complex64 {
    if w.norm() < 1e-4 {
        w * (Complex64::new(1.0, 0.0) - w * (Complex64::new(0.5, 0.0) - w / 3.0))
    } else {
        (Complex64::new(1.0, 0.0) + w).ln()
    }
}

/// Principal-ish log of sin(pi z), stable in both half planes.
pub fn log_sin_pi(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        return log_sin_pi(z.conj()).conj();
    }
    let ipi = Complex64::new(0.0, std::f64::consts::PI);
    // sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 i pi z}); |e^{2 i pi z}| <= 1 here
    ipi / 2.0 - ipi * z - std::f64::consts::LN_2 + ln_1p(-(2.0 * ipi * z).exp())
}

/// Principal-branch log-gamma via a Stirling expansion with upward recurrence,
/// reflected into Re z < 1/2 through log(sin).
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    let d = dist_to_nonpositive_int(z);
    if z.re <= 0.5 && d < 1e-12 {
        return Err(Error::Pole {
            location: Complex64::new(z.re.round(), 0.0),
            distance: d,
        });
    }
    Ok(log_gamma_unchecked(z))
}

/// Same as `log_gamma` but returns +inf real part at exact poles instead of
/// erroring; used where a pole legitimately means "coefficient is zero".
pub fn log_gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        if dist_to_nonpositive_int(z) == 0.0 {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        let pi = std::f64::consts::PI;
        return Complex64::new(pi.ln(), 0.0) - log_sin_pi(z) - log_gamma_unchecked(Complex64::new(1.0, 0.0) - z);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.norm() < STIRLING_SHIFT {
        acc += w.ln();
        w += 1.0;
    }
    stirling(w) - acc
}

/// log|Gamma(z) Gamma(k) / Gamma(z+k)|, computed as a difference of log-gammas.
pub fn beta_ratio_log_abs(z: Complex64, k: u32) -> Result<f64> {
    let zk = z + k as f64;
    let lk = log_gamma(Complex64::new(k as f64, 0.0))?;
    Ok(log_gamma(z)?.re + lk.re - log_gamma(zk)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn classical_values() {
        assert!((log_gamma(c(1.0, 0.0)).unwrap().norm()) < 1e-14);
        let half = log_gamma(c(0.5, 0.0)).unwrap();
        assert!((half.re - 0.5723649429247001).abs() < 1e-13);
        assert!(half.im.abs() < 1e-13);
        let five = log_gamma(c(5.0, 0.0)).unwrap();
        assert!((five.re - 24f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn recurrence_at_complex_argument() {
        let z = c(3.0, 2.0);
        let lhs = log_gamma(z + 1.0).unwrap() - log_gamma(z).unwrap();
        let rhs = z.ln();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn pole_detection() {
        assert!(matches!(log_gamma(c(0.0, 0.0)), Err(Error::Pole { .. })));
        assert!(matches!(log_gamma(c(-3.0, 0.0)), Err(Error::Pole { .. })));
        assert!(log_gamma(c(-3.0, 1e-6)).is_ok());
    }

    #[test]
    fn reflection_grid() {
        // |lnG(z) + lnG(1-z) - ln(pi/sin pi z)| small mod 2 pi i
        let pi = std::f64::consts::PI;
        for i in -10..=10 {
            for j in -10..=10 {
                let z = c(i as f64 + 0.31, j as f64 + 0.17);
                let lhs = log_gamma(z).unwrap() + log_gamma(c(1.0, 0.0) - z).unwrap();
                let rhs = Complex64::new(pi.ln(), 0.0) - log_sin_pi(z);
                let diff = lhs - rhs;
                let wraps = (diff.im / (2.0 * pi)).round();
                let residual = Complex64::new(diff.re, diff.im - wraps * 2.0 * pi);
                assert!(
                    residual.norm() < 1e-10,
                    "reflection failed at {z}: residual {residual}"
                );
            }
        }
    }

    #[test]
    fn beta_ratio_values() {
        assert!(beta_ratio_log_abs(c(1.0, 0.0), 1).unwrap().abs() < 1e-13);
        assert!((beta_ratio_log_abs(c(2.0, 0.0), 2).unwrap() - (1f64 / 6.0).ln()).abs() < 1e-12);
        assert!((beta_ratio_log_abs(c(3.0, 0.0), 1).unwrap() - (1f64 / 3.0).ln()).abs() < 1e-12);
        // large k must not overflow
        let v = beta_ratio_log_abs(c(2.5, 4.0), 200).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn unchecked_returns_infinite_log_at_poles() {
        let v = log_gamma_unchecked(c(-2.0, 0.0));
        assert!(v.re.is_infinite() && v.re > 0.0);
        // and exp() of it is usable as "coefficient zero"
        let w = (-v).exp();
        assert_eq!(w.norm(), 0.0);
    }
}
