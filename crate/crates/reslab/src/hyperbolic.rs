//! Explicit kernels on the upper half-space H^{n+1}: the point-pair
//! functionals sigma and tau, the free resolvent kernel in three
//! representations, its residue kernel at negative integers, spherical
//! harmonic dimensions, and the boundary-expansion kernels M_l.

use num_bigint::BigUint;
use num_complex::Complex64;

use crate::specfn::quad::{circle_mean, tanh_sinh_01};
use crate::specfn::{gauss_2f1, log_gamma, log_gamma_unchecked};
use crate::{Error, PrecisionContext, Result};

const PI: f64 = std::f64::consts::PI;

/// Point of the upper half-space model: height x > 0 over a horizontal
/// coordinate y of length n.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint {
    pub x: f64,
    pub y: Vec<f64>,
}

impl HalfSpacePoint {
    pub fn new(x: f64, y: Vec<f64>) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::OffDomain { what: format!("half-space height must be positive, got {x}") });
        }
        Ok(Self { x, y })
    }

    /// Ambient boundary dimension n.
    pub fn dim(&self) -> usize {
        self.y.len()
    }
}

/// Which representation produced a kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Series,
    EulerIntegral,
    HypergeomSeries,
    /// Bessel-transform integral over the continuous radial spectrum.
    SpectralIntegral,
}

/// A kernel value with its achieved-error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub est_rel_err: f64,
    pub representation_used: Representation,
}

/// Representation request for `resolvent_kernel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMethod {
    #[default]
    Auto,
    Series,
    Euler,
    Hypergeom,
}

fn horizontal_dist2(w: &HalfSpacePoint, wp: &HalfSpacePoint) -> Result<f64> {
    if w.dim() != wp.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: wp.dim() });
    }
    Ok(w.y.iter().zip(&wp.y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// sigma = cosh^2 of half the hyperbolic distance:
/// ((x+x')^2 + |y-y'|^2) / (4 x x').
pub fn sigma(w: &HalfSpacePoint, wp: &HalfSpacePoint) -> Result<f64> {
    let d2 = horizontal_dist2(w, wp)?;
    let sx = w.x + wp.x;
    Ok((sx * sx + d2) / (4.0 * w.x * wp.x))
}

/// tau = cosh of the hyperbolic distance:
/// (x^2 + x'^2 + |y-y'|^2) / (2 x x'). Satisfies tau = 2 sigma - 1.
pub fn tau(w: &HalfSpacePoint, wp: &HalfSpacePoint) -> Result<f64> {
    let d2 = horizontal_dist2(w, wp)?;
    Ok((w.x * w.x + wp.x * wp.x + d2) / (2.0 * w.x * wp.x))
}

/// How far s must stay from the nonpositive integers for pole-sensitive paths.
const POLE_GAP: f64 = 1e-9;

fn dist_to_nonpositive_int(s: Complex64) -> f64 {
    if s.re > 0.0 {
        s.norm()
    } else {
        (s + (-s.re).round()).norm()
    }
}

/// Free resolvent kernel R_0(s; w, w') on H^{n+1}.
///
/// Three representations are available; `Auto` picks the Euler integral when
/// its half-plane condition Re s > (n-1)/2 holds and the descending series in
/// 1/tau otherwise. The achieved-error estimate of the returned value never
/// exceeds the context target (a Convergence error is raised instead).
pub fn resolvent_kernel(
    n: u32,
    s: Complex64,
    w: &HalfSpacePoint,
    wp: &HalfSpacePoint,
    method: KernelMethod,
    ctx: PrecisionContext,
) -> Result<KernelValue> {
    if n == 0 {
        return Err(Error::OffDomain { what: "boundary dimension n must be positive".into() });
    }
    let sig = sigma(w, wp)?;
    let ta = 2.0 * sig - 1.0;
    if ta <= 1.0 {
        return Err(Error::OffDomain { what: "resolvent kernel needs w != w'".into() });
    }
    let target = ctx.target_rel_err;
    match method {
        KernelMethod::Auto => {
            // The Euler integrand behaves like t^{s-(n+1)/2} at the
            // endpoints, so quadrature degenerates as Re s approaches the
            // half-plane boundary; leave a margin and use the descending
            // series (valid for any s once tau > 1) there instead.
            if s.re > (n as f64 - 1.0) / 2.0 + 0.05 || ta < 1.001 {
                euler_rep(n, s, sig, target)
            } else {
                series_rep(n, s, ta, target)
            }
        }
        KernelMethod::Euler => euler_rep(n, s, sig, target),
        KernelMethod::Series => series_rep(n, s, ta, target),
        KernelMethod::Hypergeom => hypergeom_rep(n, s, sig, target),
    }
}

/// Euler-integral representation, valid for Re s > (n-1)/2:
/// pi^{-(n+1)/2} 2^{-n-1} Gamma(s)/Gamma(s-(n-1)/2)
///   int_0^1 (t(1-t))^{s-(n+1)/2} (sigma - t)^{-s} dt.
fn euler_rep(n: u32, s: Complex64, sig: f64, target: f64) -> Result<KernelValue> {
    let nf = n as f64;
    if s.re <= (nf - 1.0) / 2.0 + 1e-12 {
        return Err(Error::OffDomain {
            what: format!("euler representation needs Re s > (n-1)/2 = {}", (nf - 1.0) / 2.0),
        });
    }
    let ln_pref = -(nf + 1.0) / 2.0 * PI.ln() - (nf + 1.0) * 2f64.ln() + log_gamma(s)?
        - log_gamma(s - (nf - 1.0) / 2.0)?;
    let a = s - (nf + 1.0) / 2.0;
    let qtol = (target / 8.0).max(1e-14);
    let integral = tanh_sinh_01(
        |t, omt| (a * (t.ln() + omt.ln()) - s * (sig - t).ln()).exp(),
        qtol,
    )?;
    let value = (ln_pref + integral.ln()).exp();
    let est = (qtol + 1e-14 * (1.0 + ln_pref.norm())).min(1.0);
    if est > target {
        return Err(Error::Convergence { context: "resolvent euler representation", achieved: est, wanted: target });
    }
    Ok(KernelValue { value, est_rel_err: est, representation_used: Representation::EulerIntegral })
}

/// Hypergeometric representation:
/// pi^{-n/2} 2^{-2s-1} Gamma(s)/Gamma(s-n/2+1) sigma^{-s}
///   2F1(s, s-(n-1)/2; 2s-n+1; 1/sigma).
fn hypergeom_rep(n: u32, s: Complex64, sig: f64, target: f64) -> Result<KernelValue> {
    let nf = n as f64;
    if n % 2 == 1 && dist_to_nonpositive_int(s) < POLE_GAP {
        return Err(Error::Pole { location: s, distance: dist_to_nonpositive_int(s) });
    }
    let z = Complex64::new(1.0 / sig, 0.0);
    if z.norm() >= 0.999 {
        return Err(Error::OffDomain {
            what: format!("hypergeom representation needs 1/sigma < 0.999, got {}", z.re),
        });
    }
    let ln_pref = -nf / 2.0 * PI.ln() - (2.0 * s + 1.0) * 2f64.ln() + log_gamma(s)?
        - log_gamma(s - nf / 2.0 + 1.0)?
        - s * sig.ln();
    let f = gauss_2f1(
        s,
        s - (nf - 1.0) / 2.0,
        2.0 * s - nf + 1.0,
        z,
        PrecisionContext { target_rel_err: (target / 8.0).max(1e-14), ..Default::default() },
    )?;
    let value = ln_pref.exp() * f;
    let est = (target / 8.0).max(1e-14) + 1e-14 * (1.0 + ln_pref.norm());
    if est > target {
        return Err(Error::Convergence { context: "resolvent hypergeom representation", achieved: est, wanted: target });
    }
    Ok(KernelValue { value, est_rel_err: est, representation_used: Representation::HypergeomSeries })
}

/// Descending series in 1/tau:
/// pi^{-n/2} 2^{-s-1} sum_j 2^{-2j} Gamma(s+2j)/(Gamma(s-n/2+1+j) j!) tau^{-s-2j}.
///
/// Consecutive coefficients are advanced by the exact ratio
/// (s+2j)(s+2j+1) / (4 (s-n/2+1+j)(j+1) tau^2); whenever a ratio factor is
/// close to zero the next term is rebuilt from scratch instead, which keeps
/// the evaluation finite at integer s for even n (terms with a Gamma pole in
/// the denominator vanish, and their successors are rebuilt, not propagated).
fn series_rep(n: u32, s: Complex64, ta: f64, target: f64) -> Result<KernelValue> {
    let nf = n as f64;
    if ta < 1.0 + 1e-3 {
        return Err(Error::OffDomain { what: format!("series representation needs tau >= 1.001, got {ta}") });
    }
    if n % 2 == 1 && dist_to_nonpositive_int(s) < POLE_GAP {
        return Err(Error::Pole { location: s, distance: dist_to_nonpositive_int(s) });
    }
    let ln_tau = ta.ln();
    // ln of term j, rebuilt from scratch. For even n the Gamma ratio
    // Gamma(s+2j)/Gamma(s-n/2+1+j) collapses to a finite product of j+n/2-1
    // consecutive factors (a polynomial in s: pole-over-pole limits included),
    // so it is evaluated that way; for odd n the ratio keeps genuine poles in
    // the denominator only, where the term vanishes.
    let from_scratch = |j: u32| -> Complex64 {
        let jf = j as f64;
        let tail = -log_gamma_unchecked(Complex64::new(jf + 1.0, 0.0))
            - 2.0 * jf * 2f64.ln()
            - (s + 2.0 * jf) * ln_tau;
        if n % 2 == 0 {
            let m = (n / 2) as i64;
            let z = s - m as f64 + 1.0 + jf;
            let mut ln_ratio = Complex64::new(0.0, 0.0);
            for i in 0..(j as i64 + m - 1) {
                let factor = z + i as f64;
                if factor.norm() == 0.0 {
                    return Complex64::new(f64::NEG_INFINITY, 0.0);
                }
                ln_ratio += factor.ln();
            }
            ln_ratio + tail
        } else {
            let den = log_gamma_unchecked(s - nf / 2.0 + 1.0 + jf);
            if den.re.is_infinite() {
                return Complex64::new(f64::NEG_INFINITY, 0.0);
            }
            // numerator poles sit on s in -N0 - 2j, excluded by the pole gap
            log_gamma_unchecked(s + 2.0 * jf) - den + tail
        }
    };
    let ln_t0 = from_scratch(0);
    if ln_t0.re > 650.0 {
        return Err(Error::Overflow { context: "resolvent series leading term" });
    }
    let mut term = ln_t0.exp();
    let mut sum = term;
    let mut rebuilt = 0u32;
    let mut converged = false;
    let mut tail = f64::INFINITY;
    let mut j_used = 0u32;
    for j in 0..200_000u32 {
        let jf = j as f64;
        let num = (s + 2.0 * jf) * (s + 2.0 * jf + 1.0);
        let den = (s - nf / 2.0 + 1.0 + jf) * (jf + 1.0) * 4.0 * ta * ta;
        let scale = 1.0 + s.norm() + 2.0 * jf;
        let near_zero = num.norm() < 0.3 * scale || (s - nf / 2.0 + 1.0 + jf).norm() < 0.3
            || term.norm() == 0.0;
        if near_zero {
            let ln_t = from_scratch(j + 1);
            term = if ln_t.re == f64::NEG_INFINITY { Complex64::new(0.0, 0.0) } else { ln_t.exp() };
            rebuilt += 1;
        } else {
            term *= num / den;
        }
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Overflow { context: "resolvent series" });
        }
        let r = (num / den).norm();
        if r < 0.9 && term.norm() > 0.0 {
            tail = term.norm() * r / (1.0 - r);
        }
        j_used = j;
        if tail <= (target / 8.0) * sum.norm().max(1e-300) && j > 2 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence { context: "resolvent series", achieved: tail, wanted: target });
    }
    let ln_pref = -nf / 2.0 * PI.ln() - (s + 1.0) * 2f64.ln();
    let value = ln_pref.exp() * sum;
    let est = (tail / sum.norm().max(1e-300)
        + 2e-16 * (j_used as f64 + 1.0)
        + 1e-14 * (1.0 + rebuilt as f64))
        .min(1.0);
    if est > target {
        return Err(Error::Convergence { context: "resolvent series", achieved: est, wanted: target });
    }
    Ok(KernelValue { value, est_rel_err: est, representation_used: Representation::Series })
}

/// Residue kernel of the free resolvent at s = -k for odd n:
/// sum over 0 <= 2j <= k of
/// pi^{-n/2} (-1)^{k+2j} 2^{k-2j-1} tau^{k-2j} / (j! (k-2j)! Gamma(j-n/2+1-k)).
pub fn residue_kernel(n: u32, k: u32, w: &HalfSpacePoint, wp: &HalfSpacePoint) -> Result<Complex64> {
    if n % 2 == 0 {
        return Err(Error::OffDomain { what: format!("residue kernel needs odd n, got {n}") });
    }
    let ta = tau(w, wp)?;
    let nf = n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..=(k / 2) {
        let jf = j as f64;
        let kf = k as f64;
        // n odd makes j - n/2 + 1 - k a half-integer: never a Gamma pole
        let ln_mag = (kf - 2.0 * jf - 1.0) * 2f64.ln() + (kf - 2.0 * jf) * ta.ln()
            - nf / 2.0 * PI.ln()
            - log_gamma_unchecked(Complex64::new(jf + 1.0, 0.0))
            - log_gamma_unchecked(Complex64::new(kf - 2.0 * jf + 1.0, 0.0))
            - log_gamma_unchecked(Complex64::new(jf - nf / 2.0 + 1.0 - kf, 0.0));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * ln_mag.exp();
    }
    Ok(sum)
}

/// Dimension of the degree-k spherical harmonics on S^{d-1}, exactly:
/// dim P_k(d) - dim P_{k-2}(d) with P_k the homogeneous polynomials.
pub fn harmonic_dim(d: u32, k: u32) -> Result<BigUint> {
    if d < 2 {
        return Err(Error::OffDomain { what: format!("harmonic_dim needs d >= 2, got {d}") });
    }
    Ok(homogeneous_dim(d, k as i64) - homogeneous_dim(d, k as i64 - 2))
}

/// dim of homogeneous degree-k polynomials in d variables: C(k+d-1, d-1).
fn homogeneous_dim(d: u32, k: i64) -> BigUint {
    if k < 0 {
        return BigUint::from(0u32);
    }
    let mut num = BigUint::from(1u32);
    let mut den = BigUint::from(1u32);
    for i in 1..=(d as i64 - 1) {
        num *= BigUint::from((k + i) as u64);
        den *= BigUint::from(i as u64);
    }
    num / den
}

/// Boundary-expansion kernel M_l(s) at the boundary point (0, y) against w':
/// pi^{-n/2} 2^{-2l-1} Gamma(s) / (l! Gamma(s-n/2+l+1))
///   Delta_y^l (x'^2 + |y-y'|^2)^{-s} x'^s,
/// with Delta_y the spectrally positive horizontal Laplacian -sum d^2/dy_i^2
/// (the convention under which -(x d_x)^2 + n x d_x + x^2 Delta_y annihilates
/// the resolvent kernel), applied symbolically through the radial rule
/// Delta_y g(rho) = -(4 rho g'' + 2n g'), rho = |y-y'|^2.
pub fn mell_kernel(
    n: u32,
    s: Complex64,
    ell: u32,
    y: &[f64],
    wp: &HalfSpacePoint,
    _ctx: PrecisionContext,
) -> Result<Complex64> {
    if y.len() != wp.dim() {
        return Err(Error::DimensionMismatch { expected: wp.dim(), got: y.len() });
    }
    let nf = n as f64;
    let pole_arg = s - nf / 2.0 + ell as f64 + 1.0;
    let d_pref = dist_to_nonpositive_int(s).min(dist_to_nonpositive_int(pole_arg));
    if d_pref < POLE_GAP {
        return Err(Error::Pole { location: s, distance: d_pref });
    }
    let rho: f64 = y.iter().zip(&wp.y).map(|(a, b)| (a - b) * (a - b)).sum();
    let base = wp.x * wp.x + rho;
    if base <= 0.0 {
        return Err(Error::OffDomain { what: "boundary point coincides with the limit of w'".into() });
    }
    // Delta_y^l (x'^2 + rho)^{-s}: iterate the radial rule on the derivative
    // stack of g(rho) = (x'^2 + rho)^{-s}. Represent the current function as
    // sum_m c_m g^{(m)}(rho) with polynomial coefficients in rho; since each
    // application only needs values at one rho, track the coefficient VALUES
    // and shift derivative orders numerically via the closed form
    // g^{(m)}(rho) = (-1)^m (s)_m (x'^2+rho)^{-s-m}.
    //
    // Delta (c g^{(m)}) requires the rho-polynomial structure of c, so carry
    // coefficients as polynomials in rho explicitly: c_m(rho) = sum_i a_{m,i} rho^i.
    let mut coef: Vec<Vec<f64>> = vec![vec![1.0]]; // coef[m][i]: weight of rho^i on g^{(m)}
    for _ in 0..ell {
        let mut next: Vec<Vec<f64>> = vec![Vec::new(); coef.len() + 2];
        for (m, poly) in coef.iter().enumerate() {
            for (i, &a) in poly.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                // Delta_y [rho^i g^{(m)}] =
                //   4 rho^{i+1} g^{(m+2)}
                // + (8i + 2n) rho^i g^{(m+1)}
                // + (4 i (i-1) + 2 n i) rho^{i-1} g^{(m)}
                push_poly(&mut next[m + 2], i + 1, 4.0 * a);
                push_poly(&mut next[m + 1], i, (8.0 * i as f64 + 2.0 * nf) * a);
                if i >= 1 {
                    let c = 4.0 * (i as f64) * (i as f64 - 1.0) + 2.0 * nf * i as f64;
                    push_poly(&mut next[m], i - 1, c * a);
                }
            }
        }
        coef = next;
    }
    // evaluate sum_m c_m(rho) g^{(m)}(rho), g^{(m)} = (-1)^m (s)_m base^{-s-m};
    // the positive-Laplacian convention contributes (-1)^l overall
    let ln_base = base.ln();
    let mut val = Complex64::new(0.0, 0.0);
    let mut pochhammer = Complex64::new(1.0, 0.0);
    for (m, poly) in coef.iter().enumerate() {
        let mf = m as f64;
        if m > 0 {
            pochhammer *= -(s + (mf - 1.0));
        }
        let mut c = 0.0;
        let mut rp = 1.0;
        for &a in poly {
            c += a * rp;
            rp *= rho;
        }
        if c != 0.0 {
            val += c * pochhammer * ((-s - mf) * ln_base).exp();
        }
    }
    if ell % 2 == 1 {
        val = -val;
    }
    let ln_pref = -nf / 2.0 * PI.ln() - (2.0 * ell as f64 + 1.0) * 2f64.ln() + log_gamma(s)?
        - log_gamma_unchecked(Complex64::new(ell as f64 + 1.0, 0.0))
        - log_gamma(pole_arg)?
        + s * wp.x.ln();
    Ok(ln_pref.exp() * val)
}

fn push_poly(poly: &mut Vec<f64>, degree: usize, value: f64) {
    if poly.len() <= degree {
        poly.resize(degree + 1, 0.0);
    }
    poly[degree] += value;
}

/// Contour residue of the resolvent kernel: (1/2 pi i) times the integral of
/// R_0(s) around a circle, by the uniform trapezoid rule.
pub fn resolvent_contour_residue(
    n: u32,
    center: Complex64,
    radius: f64,
    nodes: usize,
    w: &HalfSpacePoint,
    wp: &HalfSpacePoint,
    ctx: PrecisionContext,
) -> Result<Complex64> {
    let mut err = None;
    let v = circle_mean(
        |s| match resolvent_kernel(n, s, w, wp, KernelMethod::Auto, ctx) {
            Ok(kv) => kv.value,
            Err(e) => {
                err = Some(e);
                Complex64::new(f64::NAN, f64::NAN)
            }
        },
        center,
        radius,
        nodes,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn pt(x: f64, y: &[f64]) -> HalfSpacePoint {
        HalfSpacePoint::new(x, y.to_vec()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Closed form on H^3 (n = 2): e^{-(s-1)d} / (4 pi sinh d).
    fn h3_closed_form(s: Complex64, d: f64) -> Complex64 {
        (-(s - 1.0) * d).exp() / (4.0 * PI * d.sinh())
    }

    #[test]
    fn sigma_and_tau_match_hand_values() {
        let w = pt(1.0, &[0.0]);
        let wp = pt(2.0, &[0.0]);
        assert!((sigma(&w, &wp).unwrap() - 9.0 / 8.0).abs() < 1e-15);
        assert!((tau(&w, &wp).unwrap() - 5.0 / 4.0).abs() < 1e-15);
        let same = pt(1.0, &[0.0]);
        assert_eq!(sigma(&w, &same).unwrap(), 1.0);
        assert_eq!(tau(&w, &same).unwrap(), 1.0);
    }

    #[test]
    fn sigma_tau_symmetric_and_related() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let w = pt(rng.gen_range(0.1..4.0), &[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
            let wp = pt(rng.gen_range(0.1..4.0), &[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
            let s1 = sigma(&w, &wp).unwrap();
            let s2 = sigma(&wp, &w).unwrap();
            let t1 = tau(&w, &wp).unwrap();
            assert_eq!(s1, s2);
            assert!((t1 - (2.0 * s1 - 1.0)).abs() <= 1e-14 * t1.abs());
            assert!(s1 >= 1.0 - 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = pt(1.0, &[0.0]);
        let wp = pt(1.0, &[0.0, 0.0]);
        assert!(matches!(sigma(&w, &wp), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn resolvent_matches_h3_closed_form() {
        let w = pt(1.0, &[0.0, 0.0]);
        let wp = pt(2.0, &[0.0, 0.0]);
        let d = (5.0f64 / 4.0).acosh();
        for s in [c(1.7, 0.0), c(2.0, 1.0), c(0.9, 0.0)] {
            let want = h3_closed_form(s, d);
            for method in [KernelMethod::Auto, KernelMethod::Series, KernelMethod::Euler, KernelMethod::Hypergeom] {
                if matches!(method, KernelMethod::Euler) && s.re <= 0.5 {
                    continue;
                }
                let kv = resolvent_kernel(2, s, &w, &wp, method, ctx()).unwrap();
                assert!(
                    (kv.value - want).norm() <= 1e-9 * want.norm(),
                    "method {method:?} at s={s}: got {}, want {want}",
                    kv.value
                );
            }
        }
    }

    #[test]
    fn resolvent_is_symmetric_in_its_points() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let w = pt(rng.gen_range(0.3..2.0), &[rng.gen_range(-1.0..1.0)]);
            let wp = pt(rng.gen_range(0.3..2.0), &[rng.gen_range(-1.0..1.0)]);
            if tau(&w, &wp).unwrap() < 1.01 {
                continue;
            }
            let s = c(rng.gen_range(0.5..2.5), rng.gen_range(-1.0..1.0));
            let a = resolvent_kernel(1, s, &w, &wp, KernelMethod::Auto, ctx()).unwrap();
            let b = resolvent_kernel(1, s, &wp, &w, KernelMethod::Auto, ctx()).unwrap();
            assert!((a.value - b.value).norm() <= 1e-12 * a.value.norm());
        }
    }

    #[test]
    fn series_and_euler_agree_at_complex_order() {
        // tau = 1.3 via x' chosen on the axis
        let w = pt(1.0, &[0.0, 0.0, 0.0]);
        let xq = 1.3 + (1.3f64 * 1.3 - 1.0).sqrt();
        let wp = pt(xq, &[0.0, 0.0, 0.0]);
        assert!((tau(&w, &wp).unwrap() - 1.3).abs() < 1e-12);
        let s = c(2.1, 0.7);
        let a = resolvent_kernel(3, s, &w, &wp, KernelMethod::Series, ctx()).unwrap();
        let b = resolvent_kernel(3, s, &w, &wp, KernelMethod::Euler, ctx()).unwrap();
        assert!(
            (a.value - b.value).norm() <= 1e-8 * a.value.norm(),
            "series {} vs euler {}",
            a.value,
            b.value
        );
    }

    #[test]
    fn representations_agree_within_reported_errors() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..40 {
            let n: u32 = rng.gen_range(1..5);
            let w = pt(1.0, &vec![0.0; n as usize]);
            let t: f64 = rng.gen_range(1.1..4.0);
            let xq = t + (t * t - 1.0).sqrt();
            let wp = pt(xq, &vec![0.0; n as usize]);
            let s = c(rng.gen_range((n as f64 - 1.0) / 2.0 + 0.3..4.0), rng.gen_range(-1.5..1.5));
            let a = resolvent_kernel(n, s, &w, &wp, KernelMethod::Series, ctx()).unwrap();
            let b = resolvent_kernel(n, s, &w, &wp, KernelMethod::Euler, ctx()).unwrap();
            let budget = 2.0 * (a.est_rel_err + b.est_rel_err) * a.value.norm();
            assert!(
                (a.value - b.value).norm() <= budget,
                "n={n} s={s} tau={t}: diff {} > budget {budget}",
                (a.value - b.value).norm()
            );
        }
    }

    #[test]
    fn pde_residual_small_in_first_argument() {
        // apply -(x d/dx)^2 + n x d/dx + x^2 Laplacian_y - s(n-s) by central
        // differences in the w variable; the kernel is annihilated
        for (n, s) in [(2u32, c(1.6, 0.4)), (3u32, c(2.2, -0.3))] {
            let nd = n as usize;
            let wp = pt(1.9, &vec![0.1; nd]);
            let x0 = 1.0;
            let y0 = vec![0.0; nd];
            let eval = |x: f64, y: &[f64]| -> Complex64 {
                let w = pt(x, y);
                resolvent_kernel(n, s, &w, &wp, KernelMethod::Auto, ctx()).unwrap().value
            };
            let w0 = pt(x0, &y0);
            assert!(tau(&w0, &wp).unwrap() > 1.1);
            let h: f64 = 1e-3;
            let f0 = eval(x0, &y0);
            // (x d/dx)^2 f = d^2/du^2 f(x e^u) at u=0
            let fp = eval(x0 * h.exp(), &y0);
            let fm = eval(x0 * (-h).exp(), &y0);
            let xdx2 = (fp - 2.0 * f0 + fm) / (h * h);
            let xdx = (fp - fm) / (2.0 * h);
            let mut lap = Complex64::new(0.0, 0.0);
            for i in 0..nd {
                let mut yp = y0.clone();
                yp[i] += h;
                let mut ym = y0.clone();
                ym[i] -= h;
                lap += (eval(x0, &yp) - 2.0 * f0 + eval(x0, &ym)) / (h * h);
            }
            let nf = n as f64;
            // horizontal Laplacian is spectrally positive: -sum of d^2/dy_i^2
            let resid = -xdx2 + nf * xdx - x0 * x0 * lap - s * (nf - s) * f0;
            let scale = f0.norm() * (1.0 + (s * (nf - s)).norm());
            assert!(
                resid.norm() <= 1e-4 * scale,
                "n={n}: residual {} vs scale {scale}",
                resid.norm()
            );
        }
    }

    #[test]
    fn series_is_finite_at_nonpositive_integers_for_even_n() {
        let w = pt(1.0, &[0.0, 0.0]);
        let wp = pt(2.0, &[0.3, 0.0]);
        let d = tau(&w, &wp).unwrap().acosh();
        for k in 0..5 {
            let s = c(-(k as f64), 0.0);
            let kv = resolvent_kernel(2, s, &w, &wp, KernelMethod::Series, ctx()).unwrap();
            assert!(kv.value.is_finite());
            // n = 2 closed form continues to hold at the nonpositive integers
            let want = h3_closed_form(s, d);
            assert!(
                (kv.value - want).norm() <= 1e-9 * want.norm().max(1e-30),
                "s={s}: got {}, want {want}",
                kv.value
            );
            // continuity across the integer point
            let nearby = resolvent_kernel(2, s + c(1e-7, 0.0), &w, &wp, KernelMethod::Series, ctx()).unwrap();
            assert!((kv.value - nearby.value).norm() <= 1e-5 * kv.value.norm().max(1e-30));
        }
        // n = 4 as well
        let w4 = pt(1.0, &[0.0; 4]);
        let wp4 = pt(1.8, &[0.2, 0.0, 0.0, 0.0]);
        for k in 0..4 {
            let kv = resolvent_kernel(4, c(-(k as f64), 0.0), &w4, &wp4, KernelMethod::Series, ctx()).unwrap();
            assert!(kv.value.is_finite());
        }
    }

    #[test]
    fn odd_n_reports_poles_near_nonpositive_integers() {
        let w = pt(1.0, &[0.0]);
        let wp = pt(2.0, &[0.0]);
        let r = resolvent_kernel(1, c(-2.0 + 1e-12, 0.0), &w, &wp, KernelMethod::Series, ctx());
        assert!(matches!(r, Err(Error::Pole { .. })));
    }

    #[test]
    fn residue_kernel_at_zero_is_inverse_volume_of_s1() {
        let w = pt(1.0, &[0.4]);
        let wp = pt(2.5, &[-0.3]);
        let v = residue_kernel(1, 0, &w, &wp).unwrap();
        assert!((v - c(1.0 / (2.0 * PI), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn residue_kernel_k0_constant_for_n3() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut first = None;
        for _ in 0..10 {
            let w = pt(rng.gen_range(0.2..3.0), &[rng.gen_range(-2.0..2.0), 0.0, 0.1]);
            let wp = pt(rng.gen_range(0.2..3.0), &[0.0, rng.gen_range(-2.0..2.0), -0.4]);
            let v = residue_kernel(3, 0, &w, &wp).unwrap();
            match first {
                None => first = Some(v),
                Some(f) => assert!((v - f).norm() < 1e-15),
            }
        }
    }

    #[test]
    fn residue_kernel_matches_contour_integral() {
        let w = pt(1.0, &[0.0]);
        let wp = pt(2.0, &[0.0]);
        let contour = resolvent_contour_residue(1, c(-1.0, 0.0), 0.1, 64, &w, &wp, ctx()).unwrap();
        let direct = residue_kernel(1, 1, &w, &wp).unwrap();
        assert!(
            (contour - direct).norm() <= 1e-6 * direct.norm(),
            "contour {contour} vs direct {direct}"
        );
    }

    #[test]
    fn residue_kernel_even_n_rejected() {
        let w = pt(1.0, &[0.0, 0.0]);
        assert!(matches!(residue_kernel(2, 0, &w, &w), Err(Error::OffDomain { .. })));
    }

    #[test]
    fn harmonic_dim_small_cases() {
        for d in 2..=6u32 {
            assert_eq!(harmonic_dim(d, 0).unwrap(), BigUint::from(1u32));
            assert_eq!(harmonic_dim(d, 1).unwrap(), BigUint::from(d));
        }
        for k in 0..=12u32 {
            assert_eq!(harmonic_dim(3, k).unwrap(), BigUint::from(2 * k + 1));
        }
        // circle: two harmonics per positive degree
        for k in 1..=12u32 {
            assert_eq!(harmonic_dim(2, k).unwrap(), BigUint::from(2u32));
        }
    }

    /// Sparse Gaussian elimination over GF(p) for the rank of the Laplacian
    /// from degree-k to degree-(k-2) homogeneous polynomials.
    fn laplacian_rank_gf(d: u32, k: u32) -> usize {
        const P: u64 = 1_000_000_007;
        fn monomials(d: u32, k: u32) -> Vec<Vec<u32>> {
            fn rec(d: u32, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
                if d == 1 {
                    let mut m = prefix.clone();
                    m.push(k);
                    out.push(m);
                    return;
                }
                for i in 0..=k {
                    prefix.push(i);
                    rec(d - 1, k - i, prefix, out);
                    prefix.pop();
                }
            }
            let mut out = Vec::new();
            rec(d, k, &mut Vec::new(), &mut out);
            out
        }
        if k < 2 {
            return 0;
        }
        let cols = monomials(d, k);
        let rows = monomials(d, k - 2);
        let row_index: std::collections::HashMap<Vec<u32>, usize> =
            rows.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        // column vectors of the Laplacian
        let mut vectors: Vec<Vec<(usize, u64)>> = Vec::new();
        for alpha in &cols {
            let mut v = Vec::new();
            for (i, &a) in alpha.iter().enumerate() {
                if a >= 2 {
                    let mut beta = alpha.clone();
                    beta[i] -= 2;
                    let coeff = (a as u64) * (a as u64 - 1) % P;
                    v.push((row_index[&beta], coeff));
                }
            }
            if !v.is_empty() {
                v.sort();
                vectors.push(v);
            }
        }
        // eliminate: pivots[row] = reduced vector with leading entry at row
        let inv = |a: u64| -> u64 {
            // Fermat inverse
            let mut base = a % P;
            let mut e = P - 2;
            let mut acc = 1u64;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * base % P;
                }
                base = base * base % P;
                e >>= 1;
            }
            acc
        };
        let mut pivots: std::collections::HashMap<usize, Vec<(usize, u64)>> =
            std::collections::HashMap::new();
        let mut rank = 0usize;
        for mut v in vectors {
            loop {
                let Some(&(lead, coeff)) = v.first() else { break };
                match pivots.get(&lead) {
                    None => {
                        let s = inv(coeff);
                        for e in v.iter_mut() {
                            e.1 = e.1 * s % P;
                        }
                        pivots.insert(lead, v);
                        rank += 1;
                        break;
                    }
                    Some(p) => {
                        // v -= coeff * p
                        let mut merged: std::collections::BTreeMap<usize, u64> =
                            v.iter().cloned().collect();
                        for &(r, c) in p {
                            let cur = merged.entry(r).or_insert(0);
                            *cur = (*cur + P - coeff * c % P) % P;
                        }
                        v = merged.into_iter().filter(|&(_, c)| c != 0).collect();
                    }
                }
            }
        }
        rank
    }

    #[test]
    fn harmonic_dim_matches_gf_rank_oracle() {
        for d in 2..=6u32 {
            for k in 0..=12u32 {
                let total = homogeneous_dim(d, k as i64).to_usize().unwrap();
                let rank = laplacian_rank_gf(d, k);
                let kernel_dim = total - rank;
                assert_eq!(
                    harmonic_dim(d, k).unwrap(),
                    BigUint::from(kernel_dim),
                    "d={d} k={k}"
                );
            }
        }
    }

    #[test]
    fn mell_kernel_hand_value_at_ell_zero() {
        let wp = pt(1.0, &[1.0]);
        let v = mell_kernel(1, c(1.0, 0.0), 0, &[0.0], &wp, ctx()).unwrap();
        assert!((v - c(1.0 / (2.0 * PI), 0.0)).norm() < 1e-14, "got {v}");
    }

    #[test]
    fn mell_kernel_scales_homogeneously() {
        let s = c(1.3, 0.4);
        let lam = 1.7;
        let wp = pt(0.9, &[0.5, -0.2]);
        let wpl = pt(lam * 0.9, &[lam * 0.5, -lam * 0.2]);
        let a = mell_kernel(2, s, 0, &[0.0, 0.0], &wp, ctx()).unwrap();
        let b = mell_kernel(2, s, 0, &[0.0, 0.0], &wpl, ctx()).unwrap();
        let want = a * (-s * lam.ln()).exp();
        assert!((b - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn mell_kernel_ell1_matches_finite_differences() {
        let n = 2u32;
        let s = c(1.4, 0.0);
        let wp = pt(0.8, &[0.6, -0.3]);
        let y0 = [0.1, 0.2];
        let m1 = mell_kernel(n, s, 1, &y0, &wp, ctx()).unwrap();
        // ratio between consecutive prefactors
        let ratio = 0.25
            * (log_gamma(s - 1.0 + 1.0).unwrap() - log_gamma(s - 1.0 + 2.0).unwrap()).exp();
        let f = |y: &[f64]| mell_kernel(n, s, 0, y, &wp, ctx()).unwrap();
        let f0 = f(&y0);
        let second_sum = |h: f64| {
            let mut lap = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                let mut yp = y0.to_vec();
                yp[i] += h;
                let mut ym = y0.to_vec();
                ym[i] -= h;
                lap += (f(&yp) - 2.0 * f0 + f(&ym)) / (h * h);
            }
            lap
        };
        // one Richardson step takes the difference error to h^4
        let lap = (4.0 * second_sum(5e-3) - second_sum(1e-2)) / 3.0;
        // positive-Laplacian convention: Delta_y = -(sum of plain differences)
        let want = ratio * -lap;
        assert!(
            (m1 - want).norm() <= 1e-6 * want.norm(),
            "m1 {m1} vs differences {want}"
        );
    }

    #[test]
    fn mell_kernels_are_the_boundary_expansion_of_the_resolvent() {
        // R_0(s; (x,y), w') = sum_l M_l(s; y, w') x^{s+2l} + O(x^{s+2L+2});
        // extract M_0, M_1, M_2 from the x -> 0 limit by eliminating powers
        // of x^2 on a geometric grid of heights.
        let n = 1u32;
        let s = c(1.3, 0.0);
        let y = [0.3];
        let wp = pt(0.9, &[-0.4]);
        let heights = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let f: Vec<Complex64> = heights
            .iter()
            .map(|&x| {
                let w = pt(x, &y);
                let r = resolvent_kernel(n, s, &w, &wp, KernelMethod::Auto, ctx()).unwrap().value;
                r * (-s * x.ln()).exp()
            })
            .collect();
        // Richardson in u = x^2, ratio 1/4 between consecutive heights
        let refine = |g: &[Complex64]| -> Vec<Complex64> {
            g.windows(2).map(|w| (4.0 * w[1] - w[0]) / 3.0).collect()
        };
        let g1 = refine(&f);
        let g2 = refine(&g1);
        let m0 = *g2.last().unwrap();
        let m0_direct = mell_kernel(n, s, 0, &y, &wp, ctx()).unwrap();
        assert!((m0 - m0_direct).norm() <= 1e-6 * m0_direct.norm(), "M0 {m0} vs {m0_direct}");
        // first correction: (f - M0)/x^2 -> M1
        let h1: Vec<Complex64> = f
            .iter()
            .zip(&heights)
            .map(|(v, &x)| (v - m0_direct) / (x * x))
            .collect();
        let h1r = refine(&refine(&h1));
        let m1 = *h1r.last().unwrap();
        let m1_direct = mell_kernel(n, s, 1, &y, &wp, ctx()).unwrap();
        assert!((m1 - m1_direct).norm() <= 1e-4 * m1_direct.norm(), "M1 {m1} vs {m1_direct}");
        // second correction pins the l = 2 normalization
        let h2: Vec<Complex64> = f
            .iter()
            .zip(&heights)
            .map(|(v, &x)| (v - m0_direct - m1_direct * x * x) / (x * x * x * x))
            .collect();
        let h2r = refine(&h2);
        let m2 = *h2r.last().unwrap();
        let m2_direct = mell_kernel(n, s, 2, &y, &wp, ctx()).unwrap();
        assert!((m2 - m2_direct).norm() <= 1e-2 * m2_direct.norm(), "M2 {m2} vs {m2_direct}");
    }

    #[test]
    fn mell_kernel_near_pole_rejected() {
        let wp = pt(1.0, &[1.0]);
        let r = mell_kernel(1, c(-3.0 + 1e-12, 0.0), 0, &[0.0], &wp, ctx());
        assert!(matches!(r, Err(Error::Pole { .. })));
    }
}
