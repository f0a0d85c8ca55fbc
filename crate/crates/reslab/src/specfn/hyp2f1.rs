use num_complex::Complex64;

use super::gamma::log_gamma;
use super::quad::tanh_sinh_01;
use crate::{Error, PrecisionContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hyp2f1Method {
    Auto,
    Series,
    EulerIntegral,
}

fn near_nonpositive_int(z: Complex64, tol: f64) -> Option<Complex64> {
    let k = (-z.re).round();
    if k >= -0.1 && (z + k.max(0.0)).norm() < tol {
        Some(Complex64::new(-k.max(0.0), 0.0))
    } else {
        None
    }
}

/// Gauss hypergeometric 2F1(a,b;c;z), series with Euler-integral fallback.
pub fn gauss_2f1(a: Complex64, b: Complex64, c: Complex64, z: Complex64, ctx: PrecisionContext) -> Result<Complex64> {
    gauss_2f1_with(a, b, c, z, Hyp2f1Method::Auto, ctx)
}

pub fn gauss_2f1_with(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
    method: Hyp2f1Method,
    ctx: PrecisionContext,
) -> Result<Complex64> {
    if let Some(pole) = near_nonpositive_int(c, 1e-12) {
        return Err(Error::Pole {
            location: pole,
            distance: (c - pole).norm(),
        });
    }
    match method {
        Hyp2f1Method::Series => series(a, b, c, z, ctx.target_rel_err),
        Hyp2f1Method::EulerIntegral => euler(a, b, c, z, ctx.target_rel_err),
        Hyp2f1Method::Auto => {
            if z.norm() < 0.999 {
                series(a, b, c, z, ctx.target_rel_err)
            } else {
                euler(a, b, c, z, ctx.target_rel_err)
            }
        }
    }
}

fn series(a: Complex64, b: Complex64, c: Complex64, z: Complex64, tol: f64) -> Result<Complex64> {
    if z.norm() >= 1.0 {
        return Err(Error::OffDomain {
            what: format!("2F1 series needs |z| < 1, got |z| = {}", z.norm()),
        });
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut quiet = 0u32;
    for k in 0..200_000u32 {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.norm() <= tol * sum.norm() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Convergence {
        context: "2F1 series",
        achieved: f64::NAN,
        wanted: tol,
    })
}

fn euler(a: Complex64, b: Complex64, c: Complex64, z: Complex64, tol: f64) -> Result<Complex64> {
    let cb = c - b;
    if b.re <= 0.0 || cb.re <= 0.0 {
        return Err(Error::OffDomain {
            what: format!("Euler integral needs Re b > 0 and Re(c-b) > 0, got b = {b}, c-b = {cb}"),
        });
    }
    if z.im == 0.0 && z.re >= 1.0 {
        return Err(Error::OffDomain {
            what: format!("Euler integral needs z off [1, inf), got z = {z}"),
        });
    }
    let pref = (log_gamma(c)? - log_gamma(b)? - log_gamma(cb)?).exp();
    let one = Complex64::new(1.0, 0.0);
    let integral = tanh_sinh_01(
        |t, omt| {
            let lt = t.ln();
            let lomt = omt.ln();
            ((b - one) * lt + (cb - one) * lomt - a * (one - z * t).ln()).exp()
        },
        tol,
    )?;
    Ok(pref * integral)
}
