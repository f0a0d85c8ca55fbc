use num_complex::Complex64;

use super::gamma::{log_gamma_unchecked};
use super::quad::trapezoid_doubling;
use crate::{Error, PrecisionContext, Result};

const PI: f64 = std::f64::consts::PI;

/// Ascending series for I_lambda(x), any complex lambda kept away from the
/// negative-integer pole line by the caller. Returns (sum, ln of the largest
/// term magnitude) so callers can judge how many digits the tail of a later
/// subtraction can trust.
fn i_series(lambda: Complex64, x: f64, tol: f64) -> Result<(Complex64, f64)> {
    let half = Complex64::new((x / 2.0).ln(), 0.0);
    let log_t0 = lambda * half - log_gamma_unchecked(lambda + 1.0);
    if log_t0.re > 700.0 {
        return Err(Error::Overflow { context: "bessel_i series leading term" });
    }
    let mut term = log_t0.exp();
    let mut sum = term;
    let mut ln_max = log_t0.re;
    let q = x * x / 4.0;
    let mut quiet = 0u32;
    for k in 0..10_000u32 {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (lambda + kf + 1.0));
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Overflow { context: "bessel_i series" });
        }
        let t = term.norm();
        if t > ln_max.exp() {
            ln_max = t.ln();
        }
        if t <= tol * sum.norm().max(1e-300) {
            quiet += 1;
            if quiet >= 3 {
                return Ok((sum, ln_max));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Convergence { context: "bessel_i series", achieved: f64::NAN, wanted: tol })
}

/// Quadrature branch of K: int_0^T exp(-x cosh t) cosh(lambda t) dt.
/// Returns (value, ln of the absolute roundoff floor of the sum).
fn k_quadrature(lambda: Complex64, x: f64, tol: f64) -> Result<(Complex64, f64)> {
    let sigma = lambda.re.abs();
    // peak of the magnitude envelope exp(-x cosh t + sigma t)
    let tstar = (sigma / x).asinh();
    let peak = -x * tstar.cosh() + sigma * tstar;
    let floor = peak + tol.ln() - 25.0;
    let mut upper = tstar + 1.0;
    while -x * upper.cosh() + sigma * upper > floor {
        upper += 0.5;
    }
    let f = |t: f64| {
        let e = Complex64::new(-x * t.cosh(), 0.0);
        (((e + lambda * t).exp()) + ((e - lambda * t).exp())) * 0.5
    };
    let v = trapezoid_doubling(f, upper, tol).map_err(|_| Error::Convergence {
        context: "bessel_k quadrature",
        achieved: f64::NAN,
        wanted: tol,
    })?;
    Ok((v, peak + 2e-15f64.ln()))
}

/// Reflection branch of K: pi (I_{-lambda} - I_lambda) / (2 sin pi lambda).
/// Returns (value, ln of the absolute roundoff floor after the division).
/// The floor constant covers the log-gamma error in the series leading terms,
/// which exp() turns into a relative error well above one ulp.
fn k_reflection(lambda: Complex64, x: f64, tol: f64) -> Result<(Complex64, f64)> {
    let (ip, mp) = i_series(lambda, x, tol)?;
    let (im, mm) = i_series(-lambda, x, tol)?;
    let scale = (PI * lambda).sin() * (2.0 / PI);
    let v = (im - ip) / scale;
    Ok((v, mp.max(mm) - scale.norm().ln() + 1e-13f64.ln()))
}

/// Modified Bessel K of complex order.
///
/// Evenized to Re lambda >= 0 first, so K(lambda) and K(-lambda) share one
/// code path bit for bit. Both branches lose digits in different regimes
/// (oscillation under the integral, cancellation in I_{-l} - I_l), and the
/// a-priori estimates are crude, so the loss is measured after the fact from
/// the computed magnitude and the other branch is tried when it is poor.
pub fn bessel_k(lambda: Complex64, x: f64, ctx: PrecisionContext) -> Result<Complex64> {
    if !(x > 0.0) {
        return Err(Error::OffDomain { what: format!("bessel_k needs x > 0, got {x}") });
    }
    let l = if lambda.re < 0.0 || (lambda.re == 0.0 && lambda.im < 0.0) {
        -lambda
    } else {
        lambda
    };
    let tol = ctx.target_rel_err.max(1e-14);
    let y = l.im.abs();
    if y <= 0.25 {
        // oscillation loss under the integral is at most exp(pi y / 2) < 2.2,
        // while sin(pi lambda) can vanish: quadrature only
        return k_quadrature(l, x, tol).map(|(v, _)| v);
    }
    // measured relative error of a branch: absolute roundoff floor over what
    // survived the cancellation
    let achieved = |v: Complex64, ln_floor: f64| {
        let n = v.norm();
        if n == 0.0 { f64::INFINITY } else { (ln_floor - n.ln()).exp() }
    };
    // a-priori ln-scale losses, used only to order the attempts:
    // oscillation under the integral vs I-scale over diff-scale
    let sigma = l.re;
    let tstar = (sigma / x).asinh();
    let peak = sigma * tstar - x * tstar.cosh();
    let e_quad = (y * y / (2.0 * x.max(l.norm()))).min(PI * y / 2.0);
    let ln_k_est = peak - e_quad;
    let e_refl = x.max(PI * y - x) - (ln_k_est + PI * y);
    let quad_first = e_quad <= e_refl.max(0.0);
    let first = if quad_first { k_quadrature(l, x, tol) } else { k_reflection(l, x, tol) };
    let first = first.map(|(v, p)| (v, achieved(v, p)));
    if let Ok((v, err)) = first {
        if err <= tol {
            return Ok(v);
        }
    }
    let second = if quad_first { k_reflection(l, x, tol) } else { k_quadrature(l, x, tol) };
    let second = second.map(|(v, p)| (v, achieved(v, p)));
    let best = match (first, second) {
        (Ok(a), Ok(b)) => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
        (Ok(a), Err(_)) => a,
        (Err(_), Ok(b)) => b,
        (Err(e), Err(_)) => return Err(e),
    };
    if best.1 > 1e-4 {
        return Err(Error::Convergence { context: "bessel_k", achieved: best.1, wanted: tol });
    }
    Ok(best.0)
}

/// Modified Bessel I of complex order.
pub fn bessel_i(lambda: Complex64, x: f64, ctx: PrecisionContext) -> Result<Complex64> {
    if !(x > 0.0) {
        return Err(Error::OffDomain { what: format!("bessel_i needs x > 0, got {x}") });
    }
    if x > 700.0 {
        return Err(Error::Overflow { context: "bessel_i argument" });
    }
    let tol = ctx.target_rel_err.max(1e-15);
    if lambda.re >= 0.0 {
        i_series(lambda, x, tol).map(|(v, _)| v)
    } else {
        // I_{-mu} = I_mu + (2 sin pi mu / pi) K_mu with mu = -lambda
        let mu = -lambda;
        let (base, _) = i_series(mu, x, tol)?;
        let k = bessel_k(mu, x, ctx)?;
        Ok(base + (2.0 / PI) * (PI * mu).sin() * k)
    }
}

/// d/dx I_lambda(x) through the exact recurrence (I_{l-1} + I_{l+1})/2.
pub fn bessel_i_dx(lambda: Complex64, x: f64, ctx: PrecisionContext) -> Result<Complex64> {
    Ok((bessel_i(lambda - 1.0, x, ctx)? + bessel_i(lambda + 1.0, x, ctx)?) * 0.5)
}

/// d/dx K_lambda(x) through the exact recurrence -(K_{l-1} + K_{l+1})/2.
pub fn bessel_k_dx(lambda: Complex64, x: f64, ctx: PrecisionContext) -> Result<Complex64> {
    Ok((bessel_k(lambda - 1.0, x, ctx)? + bessel_k(lambda + 1.0, x, ctx)?) * -0.5)
}

/// Bessel J of real nonnegative order: ascending series for x <= max(10, 2 nu),
/// large-argument asymptotics beyond.
pub fn bessel_j(nu: f64, x: f64, ctx: PrecisionContext) -> Result<f64> {
    if nu < 0.0 || x < 0.0 {
        return Err(Error::OffDomain { what: format!("bessel_j needs nu, x >= 0, got nu = {nu}, x = {x}") });
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    let tol = ctx.target_rel_err.max(1e-15);
    if x <= (2.0 * nu).max(10.0) {
        j_series(nu, x, tol)
    } else {
        let (value, min_term) = j_asymptotic(nu, x);
        if min_term > 1e-11 {
            // transition band where the divergent tail is still large
            j_series(nu, x, tol)
        } else {
            Ok(value)
        }
    }
}

fn j_series(nu: f64, x: f64, tol: f64) -> Result<f64> {
    let log_t0 = nu * (x / 2.0).ln() - log_gamma_unchecked(Complex64::new(nu + 1.0, 0.0)).re;
    let mut term = log_t0.exp();
    let mut sum = term;
    let mut max_abs = term.abs();
    let q = -x * x / 4.0;
    let mut quiet = 0u32;
    for k in 0..10_000u32 {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (nu + kf + 1.0));
        sum += term;
        max_abs = max_abs.max(term.abs());
        // floor at the roundoff scale of the largest term so zeros of J converge too
        if term.abs() <= (tol * sum.abs()).max(1e-16 * max_abs).max(1e-300) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Convergence { context: "bessel_j series", achieved: f64::NAN, wanted: tol })
}

/// Stokes expansion; returns (value, smallest retained |term|) so callers can
/// tell whether the divergent tail was actually small.
fn j_asymptotic(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut best = 1.0;
    for k in 1u32..60 {
        let kf = k as f64;
        let next = a * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() >= best {
            break;
        }
        best = next.abs();
        a = next;
        let signed = match k % 4 {
            0 | 1 => a,
            _ => -a,
        };
        if k % 2 == 0 {
            p += signed;
        } else {
            q += signed;
        }
    }
    let omega = x - nu * PI / 2.0 - PI / 4.0;
    ((2.0 / (PI * x)).sqrt() * (p * omega.cos() - q * omega.sin()), best)
}
