//! Cusp model groups: commuting screw motions on R^{k0} x R^{n-k0}, their
//! spherical-harmonic weight decomposition, holonomy phase classes, the mode
//! frequencies b, the radial mode operators, and the Bessel-transform
//! resolvent kernel of each mode.
//!
//! A rank-k0 group is generated by k0 motions, each rotating t orthogonal
//! planes of the fiber R^{n-k0} and translating by a lattice basis vector of
//! R^{k0}. Degree-m spherical harmonics split under the torus of rotations
//! into weight spaces; each weight w contributes the phase sum_r w_r theta_r
//! per generator, and together with a dual-lattice offset v* produces the
//! frequency b = 2 pi |sum_j (phase_j + c_j) v*_j|. Angles are tracked as
//! exact rationals (in turns) whenever possible so that b = 0 is decided
//! exactly, never by floating-point luck.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::exact::{frac_part, ln_rational, parse_decimal, pi_rational, rational_to_f64};
use crate::hyperbolic::{KernelValue, Representation};
use crate::specfn::quad::panel_romberg;
use crate::specfn::{bessel_i, bessel_j, bessel_k};
use crate::{Error, PrecisionContext, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One rotation angle, either an exact rational multiple of a full turn or a
/// decimal radian literal carrying its own precision budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AngleSpec {
    /// theta = 2 pi p / q with integer p and q > 0.
    RationalMultipleOf2Pi { p: BigInt, q: BigInt },
    /// theta in radians as a decimal literal in [0, 2 pi), trusted to
    /// `precision_bits` significant bits.
    Decimal { value: String, precision_bits: u32 },
}

impl AngleSpec {
    pub fn rational(p: i64, q: i64) -> Self {
        AngleSpec::RationalMultipleOf2Pi { p: BigInt::from(p), q: BigInt::from(q) }
    }

    pub fn decimal(value: &str, precision_bits: u32) -> Self {
        AngleSpec::Decimal { value: value.to_string(), precision_bits }
    }
}

/// An angle measured in turns (fractions of a full revolution).
///
/// `Exact` angles support exact cancellation tests; `Approx` angles remember
/// how many bits of the stored rational snapshot are meaningful.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Turn {
    Exact(BigRational),
    Approx { value: BigRational, precision_bits: u32 },
}

impl Turn {
    /// The stored rational number of turns.
    pub fn value(&self) -> &BigRational {
        match self {
            Turn::Exact(v) => v,
            Turn::Approx { value, .. } => value,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Turn::Exact(_))
    }

    /// Meaningful bits of the stored value, None when exact.
    pub fn precision_bits(&self) -> Option<u32> {
        match self {
            Turn::Exact(_) => None,
            Turn::Approx { precision_bits, .. } => Some(*precision_bits),
        }
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(self.value())
    }

    /// Angle in radians (turns times 2 pi), not reduced.
    pub fn radians(&self) -> f64 {
        self.to_f64() * TWO_PI
    }

    /// Same angle reduced to [0, 1) turns.
    pub fn reduced(&self) -> Turn {
        match self {
            Turn::Exact(v) => Turn::Exact(frac_part(v)),
            Turn::Approx { value, precision_bits } => {
                Turn::Approx { value: frac_part(value), precision_bits: *precision_bits }
            }
        }
    }
}

fn angle_to_turn(spec: &AngleSpec) -> Result<Turn> {
    match spec {
        AngleSpec::RationalMultipleOf2Pi { p, q } => {
            if !q.is_positive() {
                return Err(Error::AngleParse { input: format!("{p}/{q}") });
            }
            Ok(Turn::Exact(frac_part(&BigRational::new(p.clone(), q.clone()))))
        }
        AngleSpec::Decimal { value, precision_bits } => {
            let v = parse_decimal(value)?;
            let two_pi = pi_rational(*precision_bits as u64 + 64) * BigRational::from_integer(BigInt::from(2));
            if v.is_negative() || v >= two_pi {
                return Err(Error::AngleParse { input: value.clone() });
            }
            Ok(Turn::Approx { value: frac_part(&(v / two_pi)), precision_bits: *precision_bits })
        }
    }
}

/// One generator: commuting rotations through `rotation_angles` in t fixed
/// orthogonal planes of the fiber, composed with `translation` in R^{k0}.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub rotation_angles: Vec<AngleSpec>,
    pub translation: Vec<f64>,
}

/// Cusp model group of rank k0 inside an (n+1)-dimensional half space: k0
/// independent screw motions whose translations span a lattice in R^{k0}.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspGroup {
    pub n: u32,
    pub k0: u32,
    pub generators: Vec<Generator>,
}

/// A cusp group that passed validation, with angles in canonical reduced
/// form and the cached lattice data every downstream computation needs.
#[derive(Debug, Clone)]
pub struct ValidatedGroup {
    n: u32,
    k0: u32,
    plane_count: usize,
    turns: Vec<Vec<Turn>>,
    translations: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
    dual: Vec<Vec<f64>>,
    dual_gram_rat: Vec<Vec<BigRational>>,
    zero_threshold: f64,
    min_precision_bits: Option<u32>,
}

impl ValidatedGroup {
    /// Boundary dimension n of the ambient half space H^{n+1}.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Rank of the translation lattice.
    pub fn k0(&self) -> u32 {
        self.k0
    }

    /// Dimension d = n - k0 of the rotated fiber.
    pub fn fiber_dim(&self) -> u32 {
        self.n - self.k0
    }

    /// Number t of rotation planes per generator.
    pub fn plane_count(&self) -> usize {
        self.plane_count
    }

    /// Rotation angles in reduced turns, one row per generator.
    pub fn turns(&self) -> &[Vec<Turn>] {
        &self.turns
    }

    /// Lattice basis rows v_j.
    pub fn translations(&self) -> &[Vec<f64>] {
        &self.translations
    }

    /// Gram matrix <v_i, v_j> of the translation lattice.
    pub fn gram(&self) -> &[Vec<f64>] {
        &self.gram
    }

    /// Below this, a computed frequency cannot be certified nonzero at the
    /// stated angle precision; zero for groups with all angles exact.
    pub fn zero_threshold(&self) -> f64 {
        self.zero_threshold
    }

    /// Smallest precision budget among decimal angles, None when all exact.
    pub fn min_precision_bits(&self) -> Option<u32> {
        self.min_precision_bits
    }
}

/// Dual basis rows: row j is v*_j with <v_i, v*_j> = delta_ij.
pub fn dual_basis(g: &ValidatedGroup) -> &[Vec<f64>] {
    &g.dual
}

/// Check the shape and rank conditions and build the cached lattice data.
pub fn validate_group(g: &CuspGroup) -> Result<ValidatedGroup> {
    if g.k0 == 0 || g.k0 >= g.n {
        return Err(Error::OffDomain {
            what: format!("cusp rank must satisfy 1 <= k0 <= n-1, got k0 = {}, n = {}", g.k0, g.n),
        });
    }
    let k = g.k0 as usize;
    if g.generators.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: g.generators.len() });
    }
    let t = g.generators[0].rotation_angles.len();
    let mut turns = Vec::with_capacity(k);
    let mut translations = Vec::with_capacity(k);
    for gen in &g.generators {
        if gen.rotation_angles.len() != t {
            return Err(Error::DimensionMismatch { expected: t, got: gen.rotation_angles.len() });
        }
        if gen.translation.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: gen.translation.len() });
        }
        turns.push(gen.rotation_angles.iter().map(angle_to_turn).collect::<Result<Vec<_>>>()?);
        translations.push(gen.translation.clone());
    }
    assemble(g.n, g.k0, turns, translations)
}

/// Build a validated group directly from turns, bypassing angle parsing.
/// Rows of `turn_rows` are per generator; angles are reduced to [0, 1).
pub fn validated_from_turns(
    n: u32,
    k0: u32,
    turn_rows: Vec<Vec<Turn>>,
    translations: Vec<Vec<f64>>,
) -> Result<ValidatedGroup> {
    if k0 == 0 || k0 >= n {
        return Err(Error::OffDomain {
            what: format!("cusp rank must satisfy 1 <= k0 <= n-1, got k0 = {k0}, n = {n}"),
        });
    }
    let k = k0 as usize;
    if turn_rows.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: turn_rows.len() });
    }
    if translations.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: translations.len() });
    }
    let t = turn_rows[0].len();
    for row in &turn_rows {
        if row.len() != t {
            return Err(Error::DimensionMismatch { expected: t, got: row.len() });
        }
    }
    for row in &translations {
        if row.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: row.len() });
        }
    }
    assemble(n, k0, turn_rows, translations)
}

fn assemble(
    n: u32,
    k0: u32,
    turns: Vec<Vec<Turn>>,
    translations: Vec<Vec<f64>>,
) -> Result<ValidatedGroup> {
    let k = k0 as usize;
    let d = n - k0;
    let t = turns[0].len();
    if 2 * t > d as usize {
        return Err(Error::PlaneOverflow { planes: t, fiber_dim: d as usize });
    }
    for row in &translations {
        for &v in row {
            if !v.is_finite() {
                return Err(Error::OffDomain { what: format!("translation entry must be finite, got {v}") });
            }
        }
    }
    let turns: Vec<Vec<Turn>> =
        turns.iter().map(|row| row.iter().map(Turn::reduced).collect()).collect();
    let mut min_precision_bits: Option<u32> = None;
    for row in &turns {
        for t in row {
            if let Some(pb) = t.precision_bits() {
                min_precision_bits = Some(min_precision_bits.map_or(pb, |cur| cur.min(pb)));
            }
        }
    }
    let zero_threshold = match min_precision_bits {
        None => 0.0,
        Some(pb) => 10f64.powf(-(pb as f64) / 4.0),
    };
    let rat_rows: Vec<Vec<BigRational>> = translations
        .iter()
        .map(|row| row.iter().map(|&v| BigRational::from_float(v).expect("finite")).collect())
        .collect();
    let inv = rational_inverse(&rat_rows).ok_or(Error::RankDeficient)?;
    // dual basis row j is column j of the inverse matrix
    let dual_rat: Vec<Vec<BigRational>> =
        (0..k).map(|j| (0..k).map(|i| inv[i][j].clone()).collect()).collect();
    let dual: Vec<Vec<f64>> =
        dual_rat.iter().map(|row| row.iter().map(rational_to_f64).collect()).collect();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| translations[i].iter().zip(&translations[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let dual_gram_rat: Vec<Vec<BigRational>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    dual_rat[i]
                        .iter()
                        .zip(&dual_rat[j])
                        .map(|(a, b)| a * b)
                        .fold(BigRational::zero(), |acc, x| acc + x)
                })
                .collect()
        })
        .collect();
    Ok(ValidatedGroup {
        n,
        k0,
        plane_count: t,
        turns,
        translations,
        gram,
        dual,
        dual_gram_rat,
        zero_threshold,
        min_precision_bits,
    })
}

/// Gauss-Jordan inverse over the rationals; None when the matrix is singular.
fn rational_inverse(rows: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let k = rows.len();
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            for j in 0..k {
                r.push(if i == j {
                    BigRational::from_integer(BigInt::from(1))
                } else {
                    BigRational::zero()
                });
            }
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).find(|&i| !a[i][col].is_zero())?;
        a.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..2 * k {
            a[col][j] = &a[col][j] / &p;
        }
        for i in 0..k {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..2 * k {
                    let sub = &a[col][j] * &f;
                    a[i][j] = &a[i][j] - &sub;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[k..].to_vec()).collect())
}

/// Torus weight of a spherical-harmonic subspace: the rotations act on it
/// with phase sum_r weight_r theta_r, and the subspace has this multiplicity
/// inside the degree-m harmonics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonicWeight {
    pub weight: Vec<i64>,
    pub multiplicity: u64,
}

const MAX_WEIGHT_STATES: u64 = 25_000_000;

/// Weight decomposition of degree-m spherical harmonics on the unit sphere
/// of R^d under t commuting plane rotations, for all degrees 0..=m_max.
///
/// Coordinates diagonalizing the torus give t conjugate pairs of weight
/// +-e_r and d-2t invariant directions of weight zero; monomial counts come
/// from an unbounded-knapsack pass per variable, and degree-m harmonics are
/// the difference between degree m and degree m-2 monomial counts.
pub fn harmonic_weights_upto(d: u32, t: u32, m_max: u32) -> Result<Vec<Vec<HarmonicWeight>>> {
    if d == 0 {
        return Err(Error::OffDomain { what: "fiber dimension must be positive".into() });
    }
    let tu = t as usize;
    if 2 * tu > d as usize {
        return Err(Error::PlaneOverflow { planes: tu, fiber_dim: d as usize });
    }
    let mu = m_max as usize;
    if d == 2 && t == 1 {
        // circle fiber: degree-m harmonics are exactly the two phases +-m
        return Ok((0..=mu)
            .map(|m| {
                if m == 0 {
                    vec![HarmonicWeight { weight: vec![0], multiplicity: 1 }]
                } else {
                    vec![
                        HarmonicWeight { weight: vec![-(m as i64)], multiplicity: 1 },
                        HarmonicWeight { weight: vec![m as i64], multiplicity: 1 },
                    ]
                }
            })
            .collect());
    }
    let width = 2 * mu + 1;
    let mut states: u64 = 1;
    for _ in 0..tu {
        states = states.saturating_mul(width as u64);
    }
    let cells = states.saturating_mul(mu as u64 + 1);
    if cells > MAX_WEIGHT_STATES {
        return Err(Error::ExplosionGuard { predicted: cells, cap: MAX_WEIGHT_STATES });
    }
    let states = states as usize;
    let strides: Vec<usize> = (0..tu).map(|r| width.pow(r as u32)).collect();
    let center: usize = strides.iter().map(|s| s * mu).sum();
    let mut counts = vec![vec![0u64; states]; mu + 1];
    counts[0][center] = 1;
    // shift = +stride moves the weight coordinate up by one, -stride down,
    // 0 is an invariant variable; per-digit guards stop carries between
    // coordinates of the flattened index
    let add_variable = |counts: &mut Vec<Vec<u64>>, r: usize, dir: i32| {
        for deg in 1..=mu {
            let (lower, upper) = counts.split_at_mut(deg);
            let prev = &lower[deg - 1];
            let cur = &mut upper[0];
            match dir {
                0 => {
                    for st in 0..states {
                        cur[st] += prev[st];
                    }
                }
                1 => {
                    let stride = strides[r];
                    for st in 0..states {
                        if (st / stride) % width > 0 {
                            cur[st] += prev[st - stride];
                        }
                    }
                }
                _ => {
                    let stride = strides[r];
                    for st in 0..states {
                        if (st / stride) % width + 1 < width {
                            cur[st] += prev[st + stride];
                        }
                    }
                }
            }
        }
    };
    for r in 0..tu {
        add_variable(&mut counts, r, 1);
        add_variable(&mut counts, r, -1);
    }
    for _ in 0..(d as usize - 2 * tu) {
        add_variable(&mut counts, 0, 0);
    }
    let decode = |st: usize| -> Vec<i64> {
        (0..tu).map(|r| ((st / strides[r]) % width) as i64 - mu as i64).collect()
    };
    let mut out = Vec::with_capacity(mu + 1);
    for m in 0..=mu {
        let mut weights = Vec::new();
        for st in 0..states {
            let below = if m >= 2 { counts[m - 2][st] } else { 0 };
            let mult = counts[m][st] - below;
            if mult > 0 {
                weights.push(HarmonicWeight { weight: decode(st), multiplicity: mult });
            }
        }
        weights.sort_by(|a, b| a.weight.cmp(&b.weight));
        out.push(weights);
    }
    Ok(out)
}

/// Weight decomposition of degree-m spherical harmonics on the unit sphere
/// of R^d under t commuting plane rotations.
pub fn harmonic_weights(d: u32, t: u32, m: u32) -> Result<Vec<HarmonicWeight>> {
    Ok(harmonic_weights_upto(d, t, m)?.pop().expect("nonempty"))
}

/// Holonomy phase class of a degree-m harmonic: the weight combination of
/// the generator angles (one turn per generator, not reduced), together with
/// the number of weight spaces sharing it.
#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyClass {
    pub turns: Vec<Turn>,
    pub multiplicity: u64,
}

impl HolonomyClass {
    /// Angle vector reduced to [0, 2 pi), one entry per generator.
    pub fn radians(&self) -> Vec<f64> {
        self.turns
            .iter()
            .map(|t| {
                let a = t.reduced().to_f64() * TWO_PI;
                if a >= TWO_PI { 0.0 } else { a }
            })
            .collect()
    }
}

/// Weight combination of one generator's angles: sum_r c_r theta_r in turns.
/// Exact when every contributing angle is exact (in particular for c = 0).
fn weight_turn(row: &[Turn], weight: &[i64]) -> Turn {
    let mut value = BigRational::zero();
    let mut exact = true;
    let mut bits = u32::MAX;
    for (&c, t) in weight.iter().zip(row) {
        if c == 0 {
            continue;
        }
        let cr = BigRational::from_integer(BigInt::from(c));
        match t {
            Turn::Exact(v) => value = value + cr * v,
            Turn::Approx { value: v, precision_bits } => {
                exact = false;
                bits = bits.min(*precision_bits);
                value = value + cr * v;
            }
        }
    }
    if exact {
        Turn::Exact(value)
    } else {
        Turn::Approx { value, precision_bits: bits }
    }
}

fn classes_for(g: &ValidatedGroup, weights: &[HarmonicWeight]) -> Vec<HolonomyClass> {
    let mut classes: BTreeMap<Vec<Turn>, u64> = BTreeMap::new();
    for w in weights {
        let key: Vec<Turn> = g.turns.iter().map(|row| weight_turn(row, &w.weight)).collect();
        *classes.entry(key).or_insert(0) += w.multiplicity;
    }
    classes
        .into_iter()
        .map(|(turns, multiplicity)| HolonomyClass { turns, multiplicity })
        .collect()
}

/// Holonomy phase classes of degree-m harmonics, sorted by their turn
/// vectors. Distinct weight combinations stay distinct even when they agree
/// mod a full turn, so class indices label modes unambiguously.
pub fn holonomy_angles(g: &ValidatedGroup, m: u32) -> Result<Vec<HolonomyClass>> {
    let weights = harmonic_weights(g.fiber_dim(), g.plane_count as u32, m)?;
    Ok(classes_for(g, &weights))
}

/// Mode label: harmonic degree m, holonomy class index p at that degree,
/// dual-lattice offset v*, with the reduced angle vector and the frequency
/// cached. b is recomputable from (m, p, v*) through the group.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub m: u32,
    pub p: usize,
    pub vstar: Vec<i64>,
    pub angles: Vec<f64>,
    pub b: f64,
}

impl Mode {
    /// Recompute the cached frequency from (m, p, v*) through the group.
    pub fn recompute_b(&self, g: &ValidatedGroup) -> Result<f64> {
        b_value(g, self.m, self.p, &self.vstar)
    }
}

/// Combined coefficients w_j = class phase_j + c_j, exact rationals.
fn class_w(class: &HolonomyClass, vstar: &[i64]) -> Vec<BigRational> {
    class
        .turns
        .iter()
        .zip(vstar)
        .map(|(t, &c)| t.value() + BigRational::from_integer(BigInt::from(c)))
        .collect()
}

/// 2 pi |sum_j w_j v*_j|; exactly 0.0 iff every w_j is the zero rational.
/// A nonzero combination that underflows reports f64::MIN_POSITIVE instead
/// of collapsing to zero.
fn b_from_w(g: &ValidatedGroup, w: &[BigRational]) -> f64 {
    if w.iter().all(Zero::is_zero) {
        return 0.0;
    }
    let k = g.k0 as usize;
    let mut u = vec![0.0; k];
    for j in 0..k {
        let wj = rational_to_f64(&w[j]);
        for i in 0..k {
            u[i] += wj * g.dual[j][i];
        }
    }
    let b = TWO_PI * u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b == 0.0 { f64::MIN_POSITIVE } else { b }
}

/// ln b, falling back to the exact dual quadratic form when b underflows.
fn ln_b_of(g: &ValidatedGroup, w: &[BigRational], b: f64) -> f64 {
    if b > 1e-290 {
        return b.ln();
    }
    let k = g.k0 as usize;
    let mut q = BigRational::zero();
    for i in 0..k {
        for j in 0..k {
            q = q + &w[i] * &w[j] * &g.dual_gram_rat[i][j];
        }
    }
    0.5 * ln_rational(&q) + TWO_PI.ln()
}

/// Frequency of the mode (m, p, v*): 2 pi times the norm of the combined
/// phase-plus-offset vector in the dual lattice. Exact rational cancellation
/// yields exactly 0.0.
pub fn b_value(g: &ValidatedGroup, m: u32, p: usize, vstar: &[i64]) -> Result<f64> {
    if vstar.len() != g.k0 as usize {
        return Err(Error::DimensionMismatch { expected: g.k0 as usize, got: vstar.len() });
    }
    let classes = holonomy_angles(g, m)?;
    let class = classes.get(p).ok_or_else(|| Error::OffDomain {
        what: format!("class index {p} out of range: degree {m} has {} holonomy classes", classes.len()),
    })?;
    Ok(b_from_w(g, &class_w(class, vstar)))
}

/// Rank-one circle-fiber shortcut: frequency of the mode with signed
/// harmonic index m (sign = rotation direction) and dual offset j.
pub fn b_rank1(g: &ValidatedGroup, m: i64, j: i64) -> Result<f64> {
    if g.k0 != 1 || g.fiber_dim() != 2 {
        return Err(Error::OffDomain {
            what: format!(
                "signed-index shortcut needs rank 1 and a circle fiber, got k0 = {}, d = {}",
                g.k0,
                g.fiber_dim()
            ),
        });
    }
    let theta = if g.plane_count == 0 {
        BigRational::zero()
    } else {
        g.turns[0][0].value().clone()
    };
    let w = theta * BigRational::from_integer(BigInt::from(m)) + BigRational::from_integer(BigInt::from(j));
    Ok(b_from_w(g, &[w]))
}

/// Default candidate cap for `enumerate_modes`.
pub const DEFAULT_MODE_CAP: u64 = 1_000_000;

/// Integer boxes covering |sum_j (phase_j + c_j) v*_j| <= radius via the
/// coordinate bound |w_j| <= radius sqrt(gram_jj), widened by one for float
/// safety. Returns per-coordinate inclusive ranges.
fn class_box(
    class: &HolonomyClass,
    half_width: &[f64],
) -> Result<(Vec<i64>, Vec<i64>)> {
    let mut lo = Vec::with_capacity(half_width.len());
    let mut hi = Vec::with_capacity(half_width.len());
    for (t, &hw) in class.turns.iter().zip(half_width) {
        let a = t.to_f64();
        let pad = 1e-9 * (1.0 + hw + a.abs());
        let l = (-a - hw - pad).ceil();
        let h = (-a + hw + pad).floor();
        if !l.is_finite() || !h.is_finite() || l.abs() > 4.0e18 || h.abs() > 4.0e18 {
            return Err(Error::Overflow { context: "mode enumeration box" });
        }
        lo.push(l as i64 - 1);
        hi.push(h as i64 + 1);
    }
    Ok((lo, hi))
}

fn for_each_lattice_point(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
    let k = lo.len();
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return;
    }
    let mut c: Vec<i64> = lo.to_vec();
    if k == 0 {
        f(&c);
        return;
    }
    loop {
        f(&c);
        let mut i = 0;
        loop {
            c[i] += 1;
            if c[i] <= hi[i] {
                break;
            }
            c[i] = lo[i];
            i += 1;
            if i == k {
                return;
            }
        }
    }
}

/// All modes with b <= b_max and degree <= m_max, sorted by (m, p, v* lex),
/// complete and duplicate-free. Uses `DEFAULT_MODE_CAP` as candidate cap.
pub fn enumerate_modes(g: &ValidatedGroup, m_max: u32, b_max: f64) -> Result<Vec<Mode>> {
    enumerate_modes_capped(g, m_max, b_max, DEFAULT_MODE_CAP)
}

/// `enumerate_modes` with an explicit cap on the number of lattice
/// candidates examined; exceeding it is an ExplosionGuard error.
pub fn enumerate_modes_capped(
    g: &ValidatedGroup,
    m_max: u32,
    b_max: f64,
    cap: u64,
) -> Result<Vec<Mode>> {
    if !b_max.is_finite() || b_max < 0.0 {
        return Err(Error::OffDomain { what: format!("frequency bound must be finite and >= 0, got {b_max}") });
    }
    let k = g.k0 as usize;
    let radius = b_max / TWO_PI;
    let half_width: Vec<f64> = (0..k).map(|j| radius * g.gram[j][j].sqrt()).collect();
    // cheap lower bound on the candidate count before any weight work
    let box_floor: f64 = half_width.iter().map(|h| 2.0 * h.floor() + 3.0).product();
    let lower = (m_max as f64 + 1.0) * box_floor;
    if lower > cap as f64 {
        return Err(Error::ExplosionGuard { predicted: lower.min(u64::MAX as f64) as u64, cap });
    }
    let tables = harmonic_weights_upto(g.fiber_dim(), g.plane_count as u32, m_max)?;
    let mut predicted: u64 = 0;
    let mut out = Vec::new();
    for (m, weights) in tables.iter().enumerate() {
        let classes = classes_for(g, weights);
        for (p, class) in classes.iter().enumerate() {
            let (lo, hi) = class_box(class, &half_width)?;
            let count: f64 = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1).max(0) as f64).product();
            predicted = predicted.saturating_add(count.min(u64::MAX as f64) as u64);
            if predicted > cap {
                return Err(Error::ExplosionGuard { predicted, cap });
            }
            let angles = class.radians();
            for_each_lattice_point(&lo, &hi, |c| {
                let b = b_from_w(g, &class_w(class, c));
                if b <= b_max {
                    out.push(Mode { m: m as u32, p, vstar: c.to_vec(), angles: angles.clone(), b });
                }
            });
        }
    }
    out.sort_by(|a, z| a.m.cmp(&z.m).then(a.p.cmp(&z.p)).then(a.vstar.cmp(&z.vstar)));
    Ok(out)
}

/// Smallest positive frequency at degree m with a witness mode. Exact zeros
/// are excluded exactly; for decimal angles, frequencies at or below the
/// group's zero threshold are excluded as uncertifiable.
pub fn min_positive_b(g: &ValidatedGroup, m: u32) -> Result<(f64, Mode)> {
    let (b, _ln_b, mode) = min_positive_core(g, m)?;
    Ok((b, mode))
}

/// Like `min_positive_b` but returning ln b, which stays meaningful when b
/// underflows f64 (computed from the exact dual quadratic form).
pub fn min_positive_b_ln(g: &ValidatedGroup, m: u32) -> Result<(f64, Mode)> {
    let (_b, ln_b, mode) = min_positive_core(g, m)?;
    Ok((ln_b, mode))
}

fn min_positive_core(g: &ValidatedGroup, m: u32) -> Result<(f64, f64, Mode)> {
    let k = g.k0 as usize;
    let classes = holonomy_angles(g, m)?;
    let min_dual = (0..k)
        .map(|j| g.dual[j].iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    let thr = g.zero_threshold;
    let mut best: Option<(f64, f64, Mode)> = None;
    for (p, class) in classes.iter().enumerate() {
        // start from the rounded closest-vector guess and grow the search
        // ball until a nonzero candidate appears; one shortest-dual step
        // beyond the zero point always suffices
        let c0: Vec<i64> = class
            .turns
            .iter()
            .map(|t| {
                (-t.value()).round().to_integer().to_i64().ok_or(Error::Overflow { context: "mode search center" })
            })
            .collect::<Result<Vec<_>>>()?;
        let b0 = b_from_w(g, &class_w(class, &c0));
        let mut radius = b0 + TWO_PI * min_dual * 1.0001 + thr;
        let mut found: Option<(f64, f64, Vec<i64>)> = None;
        for _ in 0..64 {
            let half_width: Vec<f64> =
                (0..k).map(|j| radius / TWO_PI * g.gram[j][j].sqrt()).collect();
            let (lo, hi) = class_box(class, &half_width)?;
            for_each_lattice_point(&lo, &hi, |c| {
                let w = class_w(class, c);
                if w.iter().all(Zero::is_zero) {
                    return;
                }
                let b = b_from_w(g, &w);
                if thr > 0.0 && b <= thr {
                    return;
                }
                let ln_b = ln_b_of(g, &w, b);
                let better = match &found {
                    None => true,
                    Some((_, cur, _)) => ln_b < *cur,
                };
                if better {
                    found = Some((b, ln_b, c.to_vec()));
                }
            });
            if found.is_some() {
                break;
            }
            radius += TWO_PI * min_dual;
        }
        let (b, ln_b, c) = found.ok_or(Error::OffDomain {
            what: "no positive frequency found in expanding search".into(),
        })?;
        let better = match &best {
            None => true,
            Some((_, cur, _)) => ln_b < *cur,
        };
        if better {
            let mode = Mode { m, p, vstar: c, angles: class.radians(), b };
            best = Some((b, ln_b, mode));
        }
    }
    best.ok_or(Error::EmptyInput)
}

/// Apply the degree-m, frequency-b radial operator on an equispaced grid
/// f[i] ~ f(r0 + i dr):
///   -f'' - (d-1)/r f' + m (m + d - 2) / r^2 f + b^2 f,
/// with second-order central differences inside and one-sided stencils at
/// the ends. Needs at least 5 grid points.
pub fn delta_i_apply(d: u32, m: u32, b: f64, r0: f64, dr: f64, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() < 5 {
        return Err(Error::GridTooCoarse { points: f.len(), min: 5 });
    }
    if d == 0 {
        return Err(Error::OffDomain { what: "fiber dimension must be positive".into() });
    }
    if !(r0 > 0.0) || !r0.is_finite() || !(dr > 0.0) || !dr.is_finite() {
        return Err(Error::OffDomain { what: format!("radial grid needs r0 > 0 and dr > 0, got r0 = {r0}, dr = {dr}") });
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::OffDomain { what: format!("frequency must be finite and >= 0, got {b}") });
    }
    let cc = (m as i64 * (m as i64 + d as i64 - 2)) as f64;
    let fr = (d - 1) as f64;
    let h = dr;
    let h2 = h * h;
    let nn = f.len();
    let mut out = Vec::with_capacity(nn);
    for i in 0..nn {
        let (d1, d2) = if i == 0 {
            (
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h),
                (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2,
            )
        } else if i == nn - 1 {
            (
                (3.0 * f[i] - 4.0 * f[i - 1] + f[i - 2]) / (2.0 * h),
                (2.0 * f[i] - 5.0 * f[i - 1] + 4.0 * f[i - 2] - f[i - 3]) / h2,
            )
        } else {
            (
                (f[i + 1] - f[i - 1]) / (2.0 * h),
                (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2,
            )
        };
        let r = r0 + i as f64 * h;
        out.push(-d2 - fr / r * d1 + cc / (r * r) * f[i] + b * b * f[i]);
    }
    Ok(out)
}

/// Radial Green factor at spectral parameter s over boundary dimension n:
/// K_{s-n/2}(max(x,x') tau) I_{s-n/2}(min(x,x') tau), continuous across
/// x = x' where both orderings agree.
pub fn f_kernel(s: Complex64, n: u32, x: f64, xp: f64, tau: f64, ctx: PrecisionContext) -> Result<Complex64> {
    if !(x > 0.0) || !(xp > 0.0) || !(tau > 0.0) {
        return Err(Error::OffDomain {
            what: format!("radial factor needs x, x', tau > 0, got x = {x}, x' = {xp}, tau = {tau}"),
        });
    }
    let lam = s - Complex64::new(n as f64 / 2.0, 0.0);
    let (hi, lo) = if x >= xp { (x, xp) } else { (xp, x) };
    Ok(bessel_k(lam, hi * tau, ctx)? * bessel_i(lam, lo * tau, ctx)?)
}

/// Spectral density of the degree-m, frequency-b radial operator at energy
/// t^2 + b^2 in the radial variables r, r':
///   (2/pi) (r r')^{-(d-2)/2} J_nu(r t) J_nu(r' t) t,  nu = (d-2)/2 + m.
pub fn spectral_density(d: u32, m: u32, t: f64, r: f64, rp: f64, ctx: PrecisionContext) -> Result<f64> {
    if d == 0 {
        return Err(Error::OffDomain { what: "fiber dimension must be positive".into() });
    }
    if !(t >= 0.0) || !(r > 0.0) || !(rp > 0.0) {
        return Err(Error::OffDomain {
            what: format!("spectral density needs t >= 0 and r, r' > 0, got t = {t}, r = {r}, r' = {rp}"),
        });
    }
    let nu = 0.5 * (d as f64 - 2.0) + m as f64;
    if nu < 0.0 {
        return Err(Error::OffDomain {
            what: format!("Bessel order (d-2)/2 + m must be >= 0, got {nu}"),
        });
    }
    let j = bessel_j(nu, r * t, ctx)? * bessel_j(nu, rp * t, ctx)?;
    Ok(std::f64::consts::FRAC_2_PI * (r * rp).powf(-0.5 * (d as f64 - 2.0)) * j * t)
}

/// Quadrature budget for `mode_resolvent_kernel`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadBudget {
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadBudget {
    fn default() -> Self {
        Self { rel_tol: 1e-8, max_evals: 400_000 }
    }
}

// modified-Bessel arguments stay below this so that K does not underflow to
// zero while I overflows; e^{680} and e^{-680} are both representable
const BESSEL_ARG_CAP: f64 = 680.0;

/// Resolvent kernel of the mode's radial operator at spectral parameter s,
/// for Re s > n/2, in the half-space heights x, x' and fiber radii r, r':
/// the spectral integral of the radial Green factor at shifted energy
/// sqrt(t^2 + b^2) against the completeness-normalized Bessel density
/// (pi/2 times `spectral_density`).
///
/// The integrand decays like e^{-|x - x'| t}; at x = x' the transform is
/// only conditionally convergent and the quadrature reports a convergence
/// error instead of a silently bad value.
pub fn mode_resolvent_kernel(
    g: &ValidatedGroup,
    mode: &Mode,
    s: Complex64,
    x: f64,
    r: f64,
    xp: f64,
    rp: f64,
    quad: &QuadBudget,
) -> Result<KernelValue> {
    let n = g.n;
    let d = g.fiber_dim();
    if !(s.re > n as f64 / 2.0) {
        return Err(Error::OffDomain {
            what: format!("spectral parameter needs Re s > n/2 = {}, got {s}", n as f64 / 2.0),
        });
    }
    if !(x > 0.0) || !(xp > 0.0) || !(r > 0.0) || !(rp > 0.0) {
        return Err(Error::OffDomain {
            what: format!("kernel points need x, x', r, r' > 0, got {x}, {xp}, {r}, {rp}"),
        });
    }
    if !(quad.rel_tol > 0.0) {
        return Err(Error::OffDomain { what: format!("relative tolerance must be positive, got {}", quad.rel_tol) });
    }
    let b = mode.b;
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::OffDomain { what: format!("mode frequency must be finite and >= 0, got {b}") });
    }
    let m = mode.m;
    let nu = 0.5 * (d as f64 - 2.0) + m as f64;
    if nu < 0.0 {
        return Err(Error::OffDomain {
            what: format!("Bessel order (d-2)/2 + m must be >= 0, got {nu}"),
        });
    }
    let lam = s - Complex64::new(n as f64 / 2.0, 0.0);
    let ctx = PrecisionContext::binary64(1e-12);
    let cap = BESSEL_ARG_CAP / x.max(xp);
    let delta = (x - xp).abs();
    let (hi, lo) = if x >= xp { (x, xp) } else { (xp, x) };
    let failure: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let evals = std::cell::Cell::new(0usize);
    let zero = Complex64::new(0.0, 0.0);
    let mut integrand = |t: f64| -> Complex64 {
        evals.set(evals.get() + 1);
        if failure.borrow().is_some() || t <= 0.0 {
            return zero;
        }
        let tau = (t * t + b * b).sqrt();
        let v = (|| -> Result<Complex64> {
            let dens = spectral_density(d, m, t, r, rp, ctx)?;
            if dens == 0.0 {
                return Ok(zero);
            }
            let f = bessel_k(lam, hi * tau, ctx)? * bessel_i(lam, lo * tau, ctx)?;
            Ok(f * (std::f64::consts::FRAC_PI_2 * dens))
        })();
        match v {
            Ok(v) if v.re.is_finite() && v.im.is_finite() => v,
            Ok(_) => {
                *failure.borrow_mut() = Some(Error::Overflow { context: "mode kernel integrand" });
                zero
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                zero
            }
        }
    };
    // panels of half an oscillation of the Bessel-product fast phase
    let h = (std::f64::consts::PI / (r + rp)).min(1.5);
    let mut sum = zero;
    let mut abs_acc = 0.0;
    let mut scale = 0.0f64;
    let mut t0 = 0.0;
    let mut mags = [f64::INFINITY; 3];
    let mut decaying = 0u32;
    let mut tail = f64::INFINITY;
    let turn_on = (nu + 1.0) / r.min(rp);
    loop {
        if t0 >= cap {
            break;
        }
        let t1 = (t0 + h).min(cap);
        let panel_tol = quad.rel_tol * scale * 0.02;
        let (v, est, _) = panel_romberg(&mut integrand, t0, t1, panel_tol);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        sum += v;
        abs_acc += est;
        let mag = v.norm();
        scale = scale.max(mag);
        if mag < mags[2] {
            decaying += 1;
        } else {
            decaying = 0;
        }
        mags = [mags[1], mags[2], mag];
        t0 = t1;
        if delta > 0.0 {
            let rho = (-delta * h).exp();
            let recent = mags.iter().fold(mag, |a, &x| if x.is_finite() { a.max(x) } else { a });
            tail = recent * rho / (1.0 - rho);
        }
        let denom = sum.norm().max(scale * 1e-6).max(f64::MIN_POSITIVE);
        if decaying >= 3 && t0 > turn_on && t0 > 3.0 * b + 1.0 && tail <= 0.25 * quad.rel_tol * denom {
            break;
        }
        if evals.get() > quad.max_evals {
            return Err(Error::Convergence {
                context: "mode kernel spectral integral",
                achieved: if tail.is_finite() { tail / denom } else { 1.0 },
                wanted: quad.rel_tol,
            });
        }
    }
    let norm = sum.norm();
    let denom = norm.max(scale * 1e-6).max(f64::MIN_POSITIVE);
    if !tail.is_finite() {
        // no exponential decay available (x = x'): the oscillatory transform
        // was truncated at the representability cap without a tail bound
        return Err(Error::Convergence {
            context: "mode kernel spectral integral",
            achieved: 1.0,
            wanted: quad.rel_tol,
        });
    }
    let est_rel = (abs_acc + tail) / denom;
    if est_rel > quad.rel_tol {
        return Err(Error::Convergence {
            context: "mode kernel spectral integral",
            achieved: est_rel,
            wanted: quad.rel_tol,
        });
    }
    Ok(KernelValue { value: sum, est_rel_err: est_rel, representation_used: Representation::SpectralIntegral })
}
