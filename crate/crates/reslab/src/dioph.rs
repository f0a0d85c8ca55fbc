//! Growth analysis for the smallest positive mode parameters of a cusp:
//! the growth function that drives resonance-count bounds, empirical fits
//! of the rotation angles' Diophantine exponent, continued-fraction
//! convergents, and a doubly exponential Liouville-type angle construction.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::cusp::{b_rank1, min_positive_b_ln, validated_from_turns, Mode, Turn, ValidatedGroup};
use crate::exact::{ln_biguint, ln_rational};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Largest degree the growth function will scan; guards runaway arguments.
const MAX_GROWTH_DEGREE: u64 = 10_000_000;

/// Fits with an exponent above this cap are flagged as non-Diophantine.
pub const DIOPHANTINE_GAMMA_CAP: f64 = 1.5;

/// Fits whose envelope dips more than this far (in log units) below the
/// fitted line are flagged as non-Diophantine even when the exponent is
/// small: a straight line cannot describe such an envelope.
pub const DIOPHANTINE_SHORTFALL_CAP: f64 = 1.0;

fn smooth_norm(u: f64) -> f64 {
    u.hypot(1.0)
}

fn base_term(u: f64) -> f64 {
    let s = smooth_norm(u);
    2.0 * s * s.ln()
}

/// Logs of the smallest positive mode parameter for every degree
/// `1..=m_max`.
///
/// Rank-one groups with a two-dimensional fiber take an incremental residue
/// scan over the angle's exact rational snapshot; every other shape falls
/// back to the per-degree lattice search.
pub fn min_positive_b_ln_table(g: &ValidatedGroup, m_max: u32) -> Result<Vec<f64>> {
    if g.k0() == 1 && g.fiber_dim() == 2 {
        if let Some(table) = rank1_circle_table(g, m_max) {
            return Ok(table);
        }
    }
    (1..=m_max).map(|m| min_positive_b_ln(g, m).map(|(ln_b, _)| ln_b)).collect()
}

/// Incremental distance-to-integer scan for a single rotation angle.
///
/// Walks the residues of `m * numer mod denom` and converts the nearest
/// admissible lattice offset to a log mode parameter. Returns `None` when a
/// degree needs the general search (every nearby candidate sits under the
/// zero threshold).
fn rank1_circle_table(g: &ValidatedGroup, m_max: u32) -> Option<Vec<f64>> {
    let turn = if g.plane_count() == 1 {
        g.turns()[0][0].value().clone()
    } else {
        BigRational::zero()
    };
    // validated turns are reduced into [0, 1)
    let num = turn.numer().to_biguint()?;
    let den = turn.denom().to_biguint()?;
    let ln_den = ln_biguint(&den);
    let ln_scale = (TWO_PI / g.translations()[0][0].abs()).ln();
    // ln(0) = -inf disables the exclusion when the threshold is zero
    let thr_ln = g.zero_threshold().ln();
    let mut r = BigUint::zero();
    let mut out = Vec::with_capacity(m_max as usize);
    for _ in 0..m_max {
        r += &num;
        if r >= den {
            r -= &den;
        }
        // |m a + j| runs through k + dist and (k + 1) - dist, k = 0, 1, ...
        let mut best: Option<f64> = None;
        for k in 0..64u32 {
            for cand in [&r + &den * k, &den * (k + 1) - &r] {
                if cand.is_zero() {
                    continue;
                }
                let ln_b = ln_biguint(&cand) - ln_den + ln_scale;
                if ln_b <= thr_ln {
                    continue;
                }
                best = Some(best.map_or(ln_b, |b: f64| b.min(ln_b)));
            }
            if best.is_some() {
                break;
            }
        }
        out.push(best?);
    }
    Some(out)
}

/// Growth value from a precomputed table of logs of the smallest positive
/// mode parameters, entry `i` holding the value for degree `i + 1`.
///
/// Returns the value and the maximizing degree when the degree bracket is
/// nonnegative; ties resolve to the smallest degree. Degrees past the table
/// end are not scanned, so callers must size the table to `floor(|u|)`.
pub fn lambda_from_table(ln_min_b: &[f64], u: f64) -> (f64, Option<usize>) {
    let ua = u.abs();
    let base = base_term(u);
    let m_top = if ua >= 1.0 { (ua.floor() as usize).min(ln_min_b.len()) } else { 0 };
    let mut best: Option<(f64, usize)> = None;
    for m in 1..=m_top {
        let mf = m as f64;
        let v = 2.0 * (ua - mf) * (-ln_min_b[m - 1]) - 2.0 * mf * mf.ln();
        if best.map_or(true, |(bv, _)| v > bv) {
            best = Some((v, m));
        }
    }
    match best {
        Some((v, m)) if v >= 0.0 => (base + v, Some(m)),
        _ => (base, None),
    }
}

/// One evaluation of the growth function.
#[derive(Debug, Clone)]
pub struct GrowthSample {
    pub u: f64,
    pub value: f64,
    /// Maximizing degree, when the degree bracket is nonnegative.
    pub witness_m: Option<u32>,
    /// Smallest-parameter mode at the maximizing degree.
    pub witness_mode: Option<Mode>,
}

/// Growth-function samples sharing one parameter table across all requested
/// arguments.
pub fn growth_profile(g: &ValidatedGroup, us: &[f64]) -> Result<Vec<GrowthSample>> {
    if us.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut m_top = 0u64;
    for &u in us {
        if !u.is_finite() {
            return Err(Error::OffDomain {
                what: format!("growth argument must be finite, got {u}"),
            });
        }
        m_top = m_top.max(u.abs().floor() as u64);
    }
    if m_top > MAX_GROWTH_DEGREE {
        return Err(Error::ExplosionGuard { predicted: m_top, cap: MAX_GROWTH_DEGREE });
    }
    let table =
        if m_top >= 1 { min_positive_b_ln_table(g, m_top as u32)? } else { Vec::new() };
    let mut witnesses: BTreeMap<usize, Mode> = BTreeMap::new();
    let mut out = Vec::with_capacity(us.len());
    for &u in us {
        let (value, arg) = lambda_from_table(&table, u);
        let (witness_m, witness_mode) = match arg {
            None => (None, None),
            Some(m) => {
                if !witnesses.contains_key(&m) {
                    let (_ln_b, mode) = min_positive_b_ln(g, m as u32)?;
                    witnesses.insert(m, mode);
                }
                (Some(m as u32), witnesses.get(&m).cloned())
            }
        };
        out.push(GrowthSample { u, value, witness_m, witness_mode });
    }
    Ok(out)
}

/// Growth function of a single cusp:
/// `2<u> ln<u> + max(0, sup_m [2(|u| - m) ln(1/b_min(m)) - 2m ln m])`
/// with `<u> = sqrt(1 + u^2)` and the sup over degrees `1..=floor(|u|)`.
///
/// Also returns the maximizing degree and its smallest-parameter mode when
/// the sup is nonnegative.
pub fn lambda_growth(g: &ValidatedGroup, u: f64) -> Result<(f64, Option<(u32, Mode)>)> {
    let sample = growth_profile(g, &[u])?.into_iter().next().expect("one sample");
    Ok((sample.value, sample.witness_m.zip(sample.witness_mode)))
}

/// Growth function of a finite union of cusps: the max over the parts.
pub fn lambda_x(groups: &[ValidatedGroup], u: f64) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut best = f64::NEG_INFINITY;
    for g in groups {
        let (v, _) = lambda_growth(g, u)?;
        best = best.max(v);
    }
    Ok(best)
}

/// Least-squares slope of `ln Lambda(u)` against `ln u` over the given
/// arguments, all of which must exceed 1.
pub fn lambda_loglog_slope(g: &ValidatedGroup, us: &[f64]) -> Result<f64> {
    if us.len() < 2 {
        return Err(Error::EmptyInput);
    }
    for &u in us {
        if !u.is_finite() || u <= 1.0 {
            return Err(Error::OffDomain {
                what: format!("slope arguments must exceed 1, got {u}"),
            });
        }
    }
    let samples = growth_profile(g, us)?;
    let xs: Vec<f64> = samples.iter().map(|s| s.u.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.value.ln()).collect();
    Ok(least_squares(&xs, &ys).0)
}

/// Least-squares line fit; returns (slope, intercept).
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, ym - slope * xm)
}

/// Result of the empirical power-law fit `b_min(m) ~ c m^{-gamma}`.
#[derive(Debug, Clone)]
pub struct DiophantineFit {
    /// Fitted constant.
    pub c_fit: f64,
    /// Fitted exponent.
    pub gamma_fit: f64,
    /// Lower-envelope points `(m, ln b_min(m))` the fit ran over: every
    /// degree that ties or undercuts all smaller degrees.
    pub envelope: Vec<(u32, f64)>,
    /// Largest distance (log units) an envelope point falls below the line.
    pub max_shortfall: f64,
    /// Empirical classification under the module caps.
    pub diophantine: bool,
}

/// Fits a power law to the lower envelope of the smallest positive mode
/// parameters over degrees `1..=m_max` (requires `m_max >= 4`).
pub fn check_diophantine(g: &ValidatedGroup, m_max: u32) -> Result<DiophantineFit> {
    if m_max < 4 {
        return Err(Error::OffDomain {
            what: format!("power-law fit needs m_max >= 4, got {m_max}"),
        });
    }
    let table = min_positive_b_ln_table(g, m_max)?;
    let mut envelope = Vec::new();
    let mut run_min = f64::INFINITY;
    for (i, &ln_b) in table.iter().enumerate() {
        if ln_b <= run_min {
            run_min = ln_b;
            envelope.push((i as u32 + 1, ln_b));
        }
    }
    let xs: Vec<f64> = envelope.iter().map(|&(m, _)| f64::from(m).ln()).collect();
    let ys: Vec<f64> = envelope.iter().map(|&(_, v)| v).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let gamma_fit = -slope;
    let c_fit = intercept.exp();
    let max_shortfall = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (intercept + slope * x) - y)
        .fold(0.0f64, f64::max);
    let diophantine =
        gamma_fit <= DIOPHANTINE_GAMMA_CAP && max_shortfall <= DIOPHANTINE_SHORTFALL_CAP;
    Ok(DiophantineFit { c_fit, gamma_fit, envelope, max_shortfall, diophantine })
}

/// Continued-fraction convergents `(p_k, q_k)` of `alpha` in `(0, 1)`,
/// starting from the first nontrivial convergent.
///
/// Exact inputs terminate at the exact value. Approximate inputs fail with
/// `PrecisionExhausted` once a denominator would consume more than half the
/// stored precision, the classical `|alpha - p/q| ~ 1/q^2` trust radius.
pub fn continued_fraction(alpha: &Turn, depth: usize) -> Result<Vec<(BigInt, BigInt)>> {
    let a = alpha.value();
    if *a <= BigRational::zero() || *a >= BigRational::one() {
        return Err(Error::OffDomain {
            what: format!("continued fraction needs an argument in (0, 1), got {a}"),
        });
    }
    let pb = alpha.precision_bits();
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p_cur, mut q_cur) = (BigInt::zero(), BigInt::one());
    let mut x = a.clone();
    let mut out = Vec::new();
    for _ in 0..depth {
        if x.is_zero() {
            break;
        }
        let inv = x.recip();
        let quot = inv.floor().to_integer();
        let p_next = &quot * &p_cur + &p_prev;
        let q_next = &quot * &q_cur + &q_prev;
        if let Some(pb) = pb {
            let need = 2 * q_next.bits();
            if need >= u64::from(pb) {
                return Err(Error::PrecisionExhausted {
                    needed_bits: need,
                    have_bits: u64::from(pb),
                });
            }
        }
        out.push((p_next.clone(), q_next.clone()));
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
        x = inv.fract();
    }
    Ok(out)
}

/// Parameters of the doubly exponential angle construction: partial
/// denominators `a_1 = 2`, `a_{l+1} = 2^{a_l^q}` summed to `depth` terms,
/// lattice spacing `ell`, and the working precision the resulting angle
/// carries.
#[derive(Debug, Clone)]
pub struct WorstCaseConfig {
    pub q: u32,
    pub depth: u32,
    pub ell: f64,
    pub precision_bits: u64,
}

/// One diagnosed degree of the worst-case angle.
#[derive(Debug, Clone)]
pub struct WorstCaseRow {
    /// Degree `m = a_k`.
    pub m: u64,
    /// Lattice offset of the near-cancelling mode.
    pub j: i64,
    /// Designed smallest parameter `(2 pi m / ell) 2^{-m^q}`.
    pub predicted_b: f64,
    pub predicted_ln_b: f64,
    /// Parameter recomputed through the holonomy machinery.
    pub computed_b: f64,
    pub computed_ln_b: f64,
}

/// Builds the truncated doubly exponential angle `theta / 2 pi = sum 1/a_l`
/// and diagnoses the near-cancellation it forces at each degree `a_k`,
/// `k < depth`.
///
/// The precision budget must resolve the first omitted series term
/// `2^{-a_depth^q}`, i.e. `precision_bits >= a_depth^q + 64`.
pub fn worst_case_angle(cfg: &WorstCaseConfig) -> Result<(Turn, Vec<WorstCaseRow>)> {
    if cfg.q == 0 || cfg.depth == 0 {
        return Err(Error::OffDomain {
            what: format!(
                "worst-case construction needs q >= 1 and depth >= 1, got q = {}, depth = {}",
                cfg.q, cfg.depth
            ),
        });
    }
    if !cfg.ell.is_finite() || cfg.ell <= 0.0 {
        return Err(Error::OffDomain {
            what: format!("lattice spacing must be positive and finite, got {}", cfg.ell),
        });
    }
    // a_l = 2^{e_l} with e_1 = 1 and e_{l+1} = a_l^q
    let overflow = || Error::PrecisionExhausted {
        needed_bits: u64::MAX,
        have_bits: cfg.precision_bits,
    };
    let mut exps: Vec<u64> = vec![1];
    for _ in 1..cfg.depth {
        let prev = *exps.last().expect("nonempty");
        if prev >= 63 {
            return Err(overflow());
        }
        let a_prev = 1u64 << prev;
        exps.push(a_prev.checked_pow(cfg.q).ok_or_else(overflow)?);
    }
    let e_last = *exps.last().expect("nonempty");
    let needed = match e_last.checked_mul(u64::from(cfg.q)) {
        Some(shift) if shift < 63 => (1u64 << shift) + 64,
        _ => u64::MAX,
    };
    if needed == u64::MAX || cfg.precision_bits < needed {
        return Err(Error::PrecisionExhausted {
            needed_bits: needed,
            have_bits: cfg.precision_bits,
        });
    }
    let mut numer = BigUint::zero();
    for &e in &exps {
        numer += BigUint::one() << (e_last - e);
    }
    let value = BigRational::new(
        BigInt::from(numer),
        BigInt::from(BigUint::one() << e_last),
    );
    let pb32 = u32::try_from(cfg.precision_bits.min(u64::from(u32::MAX))).expect("clamped");
    let turn = Turn::Approx { value: value.clone(), precision_bits: pb32 };
    let g = validated_from_turns(3, 1, vec![vec![turn.clone()]], vec![vec![cfg.ell]])?;
    let mut rows = Vec::new();
    for k in 0..exps.len().saturating_sub(1) {
        let ek = exps[k];
        let m = 1u64 << ek;
        let j = -exps[..=k].iter().map(|&el| 1i64 << (ek - el)).sum::<i64>();
        let computed_b = b_rank1(&g, m as i64, j)?;
        let w = (&value * &BigRational::from_integer(BigInt::from(m))
            + &BigRational::from_integer(BigInt::from(j)))
            .abs();
        let computed_ln_b = ln_rational(&w) + (TWO_PI / cfg.ell).ln();
        let predicted_ln_b =
            (TWO_PI * m as f64 / cfg.ell).ln() - exps[k + 1] as f64 * std::f64::consts::LN_2;
        rows.push(WorstCaseRow {
            m,
            j,
            predicted_b: predicted_ln_b.exp(),
            predicted_ln_b,
            computed_b,
            computed_ln_b,
        });
    }
    Ok((turn, rows))
}
