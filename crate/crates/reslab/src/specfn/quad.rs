//! Quadrature kernels used across the crate: tanh-sinh on (0,1) for
//! endpoint-singular integrands, doubling trapezoid with one Richardson step
//! for smooth decaying integrands, and uniform circle contours.

use num_complex::Complex64;

use crate::{Error, Result};

/// Integrate f over (0,1) by tanh-sinh quadrature.
///
/// The integrand receives (x, 1-x) separately so that endpoint-singular
/// factors can be evaluated without cancellation.
pub fn tanh_sinh_01<F>(f: F, target_rel: f64) -> Result<Complex64>
where
    F: Fn(f64, f64) -> Complex64,
{
    let half_pi = std::f64::consts::FRAC_PI_2;
    let eval_level = |h: f64| -> Complex64 {
        let node = |j: i64| -> Complex64 {
            let t = j as f64 * h;
            let u = half_pi * t.sinh();
            // x = 1/(1+e^{-2u}), 1-x = 1/(1+e^{2u}), both to full precision
            let x = 1.0 / (1.0 + (-2.0 * u).exp());
            let omx = 1.0 / (1.0 + (2.0 * u).exp());
            let w = half_pi * t.cosh() / (2.0 * u.cosh().powi(2));
            if w < 1e-320 {
                return Complex64::new(0.0, 0.0);
            }
            let v = f(x, omx);
            if v.is_finite() { v * w } else { Complex64::new(0.0, 0.0) }
        };
        // scan outward until the tail is negligible; integrands with a
        // near-singular endpoint factor x^a, a close to -1, keep
        // contributing far into the wings, so the cutoff is adaptive
        let jmax = (7.0 / h).ceil() as i64;
        let mut sum = node(0);
        for dir in [1i64, -1] {
            let mut quiet = 0u32;
            for j in 1..=jmax {
                let v = node(dir * j);
                sum += v;
                if v.norm() <= 1e-17 * sum.norm().max(1e-300) {
                    quiet += 1;
                    if quiet >= 3 {
                        break;
                    }
                } else {
                    quiet = 0;
                }
            }
        }
        sum * h
    };

    let mut h = 0.5;
    let mut prev = eval_level(h);
    for _ in 0..10 {
        h *= 0.5;
        let cur = eval_level(h);
        let diff = (cur - prev).norm();
        if diff <= target_rel * cur.norm().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Convergence {
        context: "tanh-sinh quadrature",
        achieved: f64::NAN,
        wanted: target_rel,
    })
}

/// Integrate a smooth integrand over [0, upper] by Romberg extrapolation of
/// doubling trapezoid sums. Convergence is judged on the extrapolated column,
/// so endpoint-regular integrands reach the target at the h^{2m} rate.
pub fn trapezoid_doubling<F>(f: F, upper: f64, target_rel: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    const MAX_LEVELS: usize = 18;
    const MAX_COLS: usize = 7;
    let mut n: usize = 16;
    let h0 = upper / n as f64;
    let mut endpoint_sum = (f(0.0) + f(upper)) * 0.5;
    for i in 1..n {
        endpoint_sum += f(i as f64 * h0);
    }
    let mut row = vec![endpoint_sum * h0];
    for level in 1..MAX_LEVELS {
        // refine: add the midpoints of the current grid
        let h = upper / (2 * n) as f64;
        let mut mids = Complex64::new(0.0, 0.0);
        for i in 0..n {
            mids += f((2 * i + 1) as f64 * h);
        }
        n *= 2;
        let mut next = Vec::with_capacity(row.len().min(MAX_COLS - 1) + 1);
        next.push(row[0] * 0.5 + mids * h);
        let mut pow4 = 1.0;
        for j in 0..row.len().min(MAX_COLS - 1) {
            pow4 *= 4.0;
            let t = (next[j] * pow4 - row[j]) / (pow4 - 1.0);
            next.push(t);
        }
        let best = *next.last().expect("nonempty");
        let prev_best = *row.last().expect("nonempty");
        row = next;
        if level >= 3 {
            let diff = (best - prev_best).norm();
            if diff <= target_rel * best.norm().max(1e-300) {
                return Ok(best);
            }
        }
    }
    Err(Error::Convergence {
        context: "trapezoid quadrature",
        achieved: f64::NAN,
        wanted: target_rel,
    })
}

/// Romberg on a single panel [a, b], judged on an absolute tolerance.
///
/// Never errors: returns (value, absolute error estimate, evaluations spent)
/// and lets the caller amortize the estimates over a panel sum. Also stops
/// once the estimate falls below a small relative floor so that panels much
/// larger than the requested absolute tolerance are not over-refined.
pub(crate) fn panel_romberg<F>(f: &mut F, a: f64, b: f64, abs_tol: f64) -> (Complex64, f64, usize)
where
    F: FnMut(f64) -> Complex64,
{
    const MAX_LEVELS: usize = 11;
    const MAX_COLS: usize = 6;
    let len = b - a;
    let mut n: usize = 4;
    let h0 = len / n as f64;
    let mut evals = n + 1;
    let mut sum = (f(a) + f(b)) * 0.5;
    for i in 1..n {
        sum += f(a + i as f64 * h0);
    }
    let mut row = vec![sum * h0];
    let mut best = row[0];
    let mut best_est = f64::INFINITY;
    for _ in 1..MAX_LEVELS {
        let h = len / (2 * n) as f64;
        let mut mids = Complex64::new(0.0, 0.0);
        for i in 0..n {
            mids += f(a + (2 * i + 1) as f64 * h);
        }
        evals += n;
        n *= 2;
        let mut next = Vec::with_capacity(row.len().min(MAX_COLS - 1) + 1);
        next.push(row[0] * 0.5 + mids * h);
        let mut pow4 = 1.0;
        for j in 0..row.len().min(MAX_COLS - 1) {
            pow4 *= 4.0;
            next.push((next[j] * pow4 - row[j]) / (pow4 - 1.0));
        }
        let cur = *next.last().expect("nonempty");
        best_est = (cur - *row.last().expect("nonempty")).norm();
        row = next;
        best = cur;
        if best_est <= abs_tol || best_est <= 1e-13 * cur.norm() {
            break;
        }
    }
    (best, best_est, evals)
}

/// (1/2 pi i) * contour integral of f over the circle |z - center| = radius,
/// by the N-point uniform trapezoid rule (spectrally accurate for analytic f).
pub fn circle_mean<F>(mut f: F, center: Complex64, radius: f64, nodes: usize) -> Complex64
where
    F: FnMut(Complex64) -> Complex64,
{
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..nodes {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / nodes as f64;
        let offset = Complex64::from_polar(radius, phi);
        sum += f(center + offset) * offset;
    }
    sum / nodes as f64
}
