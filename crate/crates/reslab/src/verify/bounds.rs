//! Grid sweeps certifying the special-function envelopes and the mutual
//! agreement of the resolvent kernel representations.
//!
//! Existence-style estimates ("there are constants c, C such that ...")
//! are checked as bounded-deficit properties: the minimal constants are
//! fitted on a coarse grid, frozen, and validated on a grid of twice the
//! density. A report is stable when refinement moves the deficit
//! supremum by less than `STABLE_GROWTH`.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::hyperbolic::{resolvent_kernel, sigma, tau, HalfSpacePoint, KernelMethod};
use crate::precision::PrecisionContext;
use crate::Result;
use crate::specfn::{bessel_i, bessel_k, beta_ratio_log_abs};

use super::{dist_to_nonpositive_int, linspace, logspace, minimax_fit, xlnx, BoundReport};

/// Half-width of the excluded neighborhoods around exceptional sets.
const EXCLUSION_RADIUS: f64 = 0.25;
/// A refined sweep may raise the deficit supremum by at most this much.
const STABLE_GROWTH: f64 = 0.1;

/// One sampled deficit: raw value, envelope weight (the factor multiplying
/// the fitted exponent), and the grid coordinates for the argmax report.
struct SweepPoint {
    deficit: f64,
    weight: f64,
    coords: Vec<f64>,
}

fn sweep_ctx() -> PrecisionContext {
    PrecisionContext {
        target_rel_err: 1e-9,
        ..PrecisionContext::default()
    }
}

/// Failure-injection hook for exercising the detection path end to end:
/// with RESLAB_TEST_CORRUPT_BESSEL set, every decaying-kernel sample picks
/// up a heavy-tailed error keyed to the bits of its inputs, the way a
/// corrupted table would. Refining the grid then hits fresh, typically
/// larger errors the frozen envelope cannot absorb, so the deficit
/// supremum grows and `stable` flips off. Checked once per process.
fn corruption(lam: Complex64, x: f64) -> f64 {
    static ON: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    if !*ON.get_or_init(|| std::env::var_os("RESLAB_TEST_CORRUPT_BESSEL").is_some()) {
        return 0.0;
    }
    let mut z = x.to_bits() ^ lam.re.to_bits().rotate_left(17) ^ lam.im.to_bits().rotate_left(41);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let u = (z >> 11) as f64 / (1u64 << 53) as f64;
    -0.5 * (1.0 - u).max(1e-12).ln()
}

fn sup_with_argmax(points: &[SweepPoint], c: f64, ln_c: f64) -> (f64, Vec<f64>) {
    let mut sup = f64::NEG_INFINITY;
    let mut arg = Vec::new();
    for p in points {
        let d = p.deficit - c * p.weight - ln_c;
        if d > sup {
            sup = d;
            arg.clone_from(&p.coords);
        }
    }
    (sup, arg)
}

/// Fit (c, ln C) on the coarse points, freeze, and validate on the fine
/// points. The coarse deficit supremum is zero by construction of the fit,
/// so stability reduces to the fine supremum staying under the growth cap.
fn fitted_report(coarse: &[SweepPoint], fine: &[SweepPoint], grid_spec: String) -> Result<BoundReport> {
    if coarse.is_empty() || fine.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pairs: Vec<(f64, f64)> = coarse.iter().map(|p| (p.deficit, p.weight)).collect();
    let (c, ln_c) = minimax_fit(&pairs);
    let (coarse_sup, _) = sup_with_argmax(coarse, c, ln_c);
    let (fine_sup, fine_arg) = sup_with_argmax(fine, c, ln_c);
    Ok(BoundReport {
        grid_spec,
        deficit_sup: fine_sup,
        deficit_argmax: fine_arg,
        stable: fine_sup - coarse_sup < STABLE_GROWTH,
        fitted: Some((c, ln_c)),
    })
}

/// Geometric ladder of integer orders in [1, 200].
fn beta_orders(density: u32) -> Vec<u32> {
    let count = 8 * density;
    let mut ks: Vec<u32> = (0..=count)
        .map(|i| 200f64.powf(f64::from(i) / f64::from(count)).round() as u32)
        .collect();
    ks.dedup();
    ks
}

/// Deficits of both gamma-ratio inequalities over the disk |z| <= 50.
///
/// Points within `EXCLUSION_RADIUS` of either pole set (of the ratio or of
/// its reciprocal) are skipped, mirroring the distance terms that blow up
/// there. Coordinates: [which inequality, Re z, Im z, k].
fn beta_points(density: u32) -> Result<Vec<SweepPoint>> {
    let axis = linspace(-50.0, 50.0, (10 * density) as usize);
    let ks = beta_orders(density);
    let mut out = Vec::new();
    for &k in &ks {
        let shift = f64::from(k);
        for &re in &axis {
            for &im in &axis {
                let z = Complex64::new(re, im);
                if z.norm() > 50.0 + 1e-9 {
                    continue;
                }
                let d0 = dist_to_nonpositive_int(z);
                let dk = dist_to_nonpositive_int(z + shift);
                if d0 < EXCLUSION_RADIUS || dk < EXCLUSION_RADIUS {
                    continue;
                }
                let log_ratio = beta_ratio_log_abs(z, k)?;
                let d1 = log_ratio - shift * LN_2 - (1.0 + d0.recip()).ln();
                let d2 = -log_ratio
                    - (shift + z.norm()) * LN_2
                    - FRAC_PI_2 * z.im.abs()
                    - (1.0 + dk.recip()).ln();
                out.push(SweepPoint { deficit: d1, weight: 0.0, coords: vec![0.0, re, im, shift] });
                out.push(SweepPoint { deficit: d2, weight: 0.0, coords: vec![1.0, re, im, shift] });
            }
        }
    }
    Ok(out)
}

/// Sweep both gamma-ratio bounds and report the worst deficit.
///
/// The envelopes carry no fitted constants, so the supremum itself is the
/// bounded slack of the inequalities; stability is judged by rerunning at
/// twice the grid density.
pub fn verify_beta_bounds(density: u32) -> Result<BoundReport> {
    if density == 0 {
        return Err(Error::GridTooCoarse { points: 0, min: 1 });
    }
    let coarse = beta_points(density)?;
    if coarse.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fine = beta_points(2 * density)?;
    let (coarse_sup, _) = sup_with_argmax(&coarse, 0.0, 0.0);
    let (fine_sup, fine_arg) = sup_with_argmax(&fine, 0.0, 0.0);
    Ok(BoundReport {
        grid_spec: format!(
            "gamma ratio bounds: z on the disk |z| <= 50 from a {}x{} lattice, {} geometric \
             orders in [1, 200], pole neighborhoods of radius {} excluded; density {}",
            10 * density + 1,
            10 * density + 1,
            beta_orders(density).len(),
            EXCLUSION_RADIUS,
            density,
        ),
        deficit_sup: fine_sup,
        deficit_argmax: fine_arg,
        stable: fine_sup - coarse_sup < STABLE_GROWTH,
        fitted: None,
    })
}

/// Envelope deficits for K and I over |lambda| in [0.5, 30], x in [0.05, 40].
///
/// K is weighted by |Re lambda| and compared against
/// max(1, |Re lambda|/x)^|Re lambda| e^{-x} for x >= 1 and
/// |Re lambda|^|Re lambda| x^{-|Re lambda|} for x <= 1; I (Re lambda >= 0)
/// is weighted by |lambda| and compared against min(1, x/Re lambda)^{Re
/// lambda} e^x and |lambda|^{-Re lambda} x^{Re lambda}. Coordinates:
/// [0 for K / 1 for I, Re lambda, Im lambda, x].
fn bessel_points(density: u32) -> Result<Vec<SweepPoint>> {
    let ctx = sweep_ctx();
    let radii = logspace(0.5, 30.0, (5 * density) as usize);
    let angles = linspace(0.0, FRAC_PI_2, (3 * density) as usize);
    let xs = logspace(0.05, 40.0, (8 * density) as usize);
    let mut out = Vec::with_capacity(2 * radii.len() * angles.len() * xs.len());
    for &r in &radii {
        for &phi in &angles {
            let lam = Complex64::from_polar(r, phi);
            let a = lam.re.abs();
            for &x in &xs {
                let k_core = if x >= 1.0 {
                    a * (a / x).max(1.0).ln() - x
                } else {
                    xlnx(a) - a * x.ln()
                };
                let k_val = bessel_k(lam, x, ctx)?;
                out.push(SweepPoint {
                    deficit: k_val.norm().ln() - k_core + corruption(lam, x),
                    weight: a,
                    coords: vec![0.0, lam.re, lam.im, x],
                });
                let i_core = if x >= 1.0 {
                    if lam.re == 0.0 {
                        x
                    } else {
                        lam.re * (x / lam.re).min(1.0).ln() + x
                    }
                } else {
                    lam.re * (x.ln() - lam.norm().ln())
                };
                let i_val = bessel_i(lam, x, ctx)?;
                out.push(SweepPoint {
                    deficit: i_val.norm().ln() - i_core,
                    weight: lam.norm(),
                    coords: vec![1.0, lam.re, lam.im, x],
                });
            }
        }
    }
    Ok(out)
}

/// Fit the minimal (c, ln C) closing both Bessel envelopes on the coarse
/// grid, then validate the frozen constants at twice the density.
pub fn verify_bessel_bounds(density: u32) -> Result<BoundReport> {
    if density == 0 {
        return Err(Error::GridTooCoarse { points: 0, min: 1 });
    }
    let coarse = bessel_points(density)?;
    let fine = bessel_points(2 * density)?;
    fitted_report(
        &coarse,
        &fine,
        format!(
            "modified Bessel envelopes: {} radii in [0.5, 30] x {} phases in [0, pi/2], \
             argument at {} log-spaced points of [0.05, 40]; density {}",
            5 * density + 1,
            3 * density + 1,
            8 * density + 1,
            density,
        ),
    )
}

/// max(|Re lambda|^{-2 Re lambda}, 1) in log form, continuous across 0.
fn order_switch_term(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (-2.0 * t * t.abs().ln()).max(0.0)
    }
}

/// Regime cell of the coupled kernel: 0 both arguments >= 1, 1 both <= 1,
/// 2 first small only, 3 second small only.
fn f_cell(u: f64, v: f64) -> usize {
    match (u >= 1.0, v >= 1.0) {
        (true, true) => 0,
        (false, false) => 1,
        (false, true) => 2,
        (true, false) => 3,
    }
}

/// Log of the cell factor: 1, max((uv)^t, 1), max(u^t, 1), max(v^t, 1).
fn f_cell_term(t: f64, u: f64, v: f64) -> f64 {
    match f_cell(u, v) {
        0 => 0.0,
        1 => (t * (u * v).ln()).max(0.0),
        2 => (t * u.ln()).max(0.0),
        _ => (t * v.ln()).max(0.0),
    }
}

/// log |F| for the coupled kernel: K at the larger of x, x' (scaled by tau),
/// I at the smaller.
fn f_log_abs(lam: Complex64, x: f64, xp: f64, scale: f64, ctx: PrecisionContext) -> Result<f64> {
    let (outer, inner) = if x > xp { (x, xp) } else { (xp, x) };
    let k_val = bessel_k(lam, outer * scale, ctx)?;
    let i_val = bessel_i(lam, inner * scale, ctx)?;
    Ok(k_val.norm().ln() + i_val.norm().ln())
}

/// Deficits of the coupled-kernel estimate over all four regime cells.
/// Coordinates: [cell, Re lambda, Im lambda, x, x', tau].
fn f_points(density: u32) -> Result<Vec<SweepPoint>> {
    let ctx = sweep_ctx();
    let res = linspace(-2.5, 2.5, (4 * density) as usize);
    let ims = linspace(0.0, 2.0, (2 * density) as usize);
    let xs = logspace(0.07, 8.0, (3 * density) as usize);
    let scales = logspace(0.11, 9.0, (3 * density) as usize);
    let mut out = Vec::new();
    for &re in &res {
        for &im in &ims {
            let lam = Complex64::new(re, im);
            if lam.norm() < 0.3 {
                continue;
            }
            let switch = order_switch_term(re);
            for &x in &xs {
                for &xp in &xs {
                    if x == xp {
                        continue;
                    }
                    for &scale in &scales {
                        let u = x * scale;
                        let v = xp * scale;
                        if (u - 1.0).abs() < 0.02 || (v - 1.0).abs() < 0.02 {
                            continue;
                        }
                        let h = f_log_abs(lam, x, xp, scale, ctx)?;
                        out.push(SweepPoint {
                            deficit: h - f_cell_term(re, u, v) - switch,
                            weight: lam.norm(),
                            coords: vec![f_cell(u, v) as f64, re, im, x, xp, scale],
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Fit and validate the four-cell estimate of the coupled kernel
/// K(x tau) I(x' tau) across the regime boundaries at argument 1.
pub fn verify_f_bound(density: u32) -> Result<BoundReport> {
    if density == 0 {
        return Err(Error::GridTooCoarse { points: 0, min: 1 });
    }
    let coarse = f_points(density)?;
    let fine = f_points(2 * density)?;
    fitted_report(
        &coarse,
        &fine,
        format!(
            "coupled kernel estimate: order on [-2.5, 2.5] x [0, 2]i away from 0, x and x' \
             at {} log-spaced points of [0.07, 8], tau at {} points of [0.11, 9], bands of \
             width 0.02 around arguments 1 excluded; density {}",
            3 * density + 1,
            3 * density + 1,
            density,
        ),
    )
}

/// One cross-representation test case for the free-space kernel.
#[derive(Clone, Debug)]
pub struct ConsistencyCase {
    pub n: u32,
    pub s: Complex64,
    pub w: HalfSpacePoint,
    pub wp: HalfSpacePoint,
}

/// Seeded random cases, `per_n` for each of n = 1, 2, 3, with spectral
/// parameter right of the continuous spectrum and points separated enough
/// that every representation applies.
pub fn default_consistency_cases(seed: u64, per_n: usize) -> Result<Vec<ConsistencyCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * per_n);
    for n in 1..=3u32 {
        for _ in 0..per_n {
            let s = Complex64::new(
                f64::from(n) / 2.0 + rng.gen_range(0.4..2.4),
                rng.gen_range(-2.0..2.0),
            );
            let mut pair = None;
            for _ in 0..10_000 {
                let w = HalfSpacePoint::new(
                    rng.gen_range(-0.7..0.7f64).exp(),
                    (0..n).map(|_| rng.gen_range(-1.2..1.2)).collect(),
                )?;
                let wp = HalfSpacePoint::new(
                    rng.gen_range(-0.7..0.7f64).exp(),
                    (0..n).map(|_| rng.gen_range(-1.2..1.2)).collect(),
                )?;
                if sigma(&w, &wp)? >= 1.1 {
                    pair = Some((w, wp));
                    break;
                }
            }
            let (w, wp) = pair.ok_or(Error::Convergence {
                context: "consistency case sampling",
                achieved: f64::NAN,
                wanted: 1.1,
            })?;
            out.push(ConsistencyCase { n, s, w, wp });
        }
    }
    Ok(out)
}

/// Worst pairwise relative deviation across all applicable representations,
/// with the in-plane closed form joining the comparison for n = 2.
/// Argmax coordinates: [case index, representation a, representation b]
/// where 0 = series, 1 = integral, 2 = hypergeometric, 3 = closed form.
fn consistency_sup(cases: &[ConsistencyCase], ctx: PrecisionContext) -> Result<(f64, Vec<f64>)> {
    let mut sup = f64::NEG_INFINITY;
    let mut arg = Vec::new();
    for (idx, case) in cases.iter().enumerate() {
        let methods = [KernelMethod::Series, KernelMethod::Euler, KernelMethod::Hypergeom];
        let mut values: Vec<(usize, Complex64)> = Vec::new();
        for (mi, method) in methods.into_iter().enumerate() {
            match resolvent_kernel(case.n, case.s, &case.w, &case.wp, method, ctx) {
                Ok(kv) => values.push((mi, kv.value)),
                Err(Error::OffDomain { .. }) | Err(Error::Pole { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if case.n == 2 {
            let r = tau(&case.w, &case.wp)?.acosh();
            let green = (-(case.s - 1.0) * r).exp() / (4.0 * PI * r.sinh());
            values.push((3, green));
        }
        if values.len() < 2 {
            return Err(Error::OffDomain {
                what: format!("consistency case {idx}: fewer than two representations apply"),
            });
        }
        for a in 0..values.len() {
            for b in a + 1..values.len() {
                let (ma, va) = values[a];
                let (mb, vb) = values[b];
                let dev = (va - vb).norm() / va.norm().max(vb.norm()).max(1e-300);
                if dev > sup {
                    sup = dev;
                    arg = vec![idx as f64, ma as f64, mb as f64];
                }
            }
        }
    }
    Ok((sup, arg))
}

/// Cross-check every applicable representation of the free-space kernel on
/// the given cases. Refinement here tightens the working tolerance rather
/// than a grid; the reported numbers come from the tighter pass.
pub fn verify_resolvent_consistency(cases: &[ConsistencyCase]) -> Result<BoundReport> {
    if cases.is_empty() {
        return Err(Error::EmptyInput);
    }
    let base = PrecisionContext { target_rel_err: 1e-10, ..PrecisionContext::default() };
    let tight = PrecisionContext { target_rel_err: 1e-12, ..PrecisionContext::default() };
    let (coarse_sup, _) = consistency_sup(cases, base)?;
    let (fine_sup, fine_arg) = consistency_sup(cases, tight)?;
    Ok(BoundReport {
        grid_spec: format!(
            "kernel representation agreement on {} cases; working tolerance refined \
             1e-10 -> 1e-12",
            cases.len(),
        ),
        deficit_sup: fine_sup,
        deficit_argmax: fine_arg,
        stable: fine_sup - coarse_sup < STABLE_GROWTH,
        fitted: None,
    })
}
