//! Resonance counting: exact pole lattices of the model spaces, upper-bound
//! pole lattices for cusps, the global counting bounds, the canonical
//! product over rotated Weierstrass factors, and contour-based zero counts.

use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::dioph::lambda_x;
use crate::hyperbolic::harmonic_dim;
use crate::specfn::{weierstrass_factor_log, weierstrass_factor_tail_bound};
use crate::cusp::ValidatedGroup;
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Contour resolution used by the Jensen-type count bound.
const JENSEN_NODES: u32 = 512;

/// Smallest contour grid accepted by the winding-number count.
const MIN_CONTOUR_NODES: usize = 16;

/// Contours whose smallest sample is below this fraction of the largest
/// are treated as passing through a zero.
const CONTOUR_ZERO_RATIO: f64 = 1e-12;

/// Whether a reported multiplicity is the true rank or only a cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    UpperBound,
}

/// One resonance, or one candidate pole with a multiplicity cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonancePoint {
    pub location: Complex64,
    pub multiplicity: u64,
    pub exactness: Exactness,
    /// Which formula produced the point.
    pub source: &'static str,
}

/// Samples (radius, count) of a counting function, nondecreasing in the
/// radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingCurve {
    pub samples: Vec<(f64, f64)>,
}

impl CountingCurve {
    /// Sorts the samples by radius and checks that the counts never
    /// decrease.
    pub fn from_samples(mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.iter().any(|(r, c)| !r.is_finite() || !c.is_finite()) {
            return Err(Error::OffDomain {
                what: "counting curve sample is not finite".into(),
            });
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let curve = CountingCurve { samples };
        if !curve.is_nondecreasing() {
            return Err(Error::OffDomain {
                what: "counting curve decreases with the radius".into(),
            });
        }
        Ok(curve)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// Negative part `max(-x, 0)`.
pub fn negative_part(x: f64) -> f64 {
    (-x).max(0.0)
}

fn check_radius(r: f64) -> Result<()> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::OffDomain {
            what: format!("counting radius must be positive, got {r}"),
        });
    }
    Ok(())
}

fn big_to_mult(value: num_bigint::BigUint) -> Result<u64> {
    value.to_u64().ok_or(Error::Overflow {
        context: "resonance multiplicity",
    })
}

/// Resonances of the simply connected constant-curvature space of odd
/// dimension `n + 1` inside the ball of radius `r` about `n/2`: simple
/// pole locations `-k` with the rank of the degree-`k` spherical harmonic
/// space in `n + 2` variables as multiplicity. Even `n + 1` has none.
/// Also returns the counting-curve sample at `r`.
pub fn hyperbolic_resonances(n: u32, r: f64) -> Result<(Vec<ResonancePoint>, (f64, f64))> {
    if n == 0 {
        return Err(Error::OffDomain {
            what: "model space needs n >= 1".into(),
        });
    }
    check_radius(r)?;
    let mut points = Vec::new();
    let mut total = 0.0_f64;
    if n % 2 == 1 {
        let mut k = 0u32;
        while f64::from(k) + f64::from(n) / 2.0 <= r {
            let mult = big_to_mult(harmonic_dim(n + 2, k)?)?;
            points.push(ResonancePoint {
                location: Complex64::new(-f64::from(k), 0.0),
                multiplicity: mult,
                exactness: Exactness::Exact,
                source: "rank of the spherical harmonic space at the pole",
            });
            total += mult as f64;
            k += 1;
        }
    }
    Ok((points, (r, total)))
}

/// Counting curve of the odd model space over a grid of radii.
pub fn hyperbolic_counting_curve(n: u32, radii: &[f64]) -> Result<CountingCurve> {
    if radii.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        samples.push(hyperbolic_resonances(n, r)?.1);
    }
    CountingCurve::from_samples(samples)
}

/// True when the fiber dimension `n - k0` is even, in which case the
/// zero-frequency sector of the cusp contributes no poles at all.
pub fn zero_sector_silent(n: u32, k0: u32) -> bool {
    (n - k0) % 2 == 0
}

/// Candidate pole lattice of a cusp inside the ball of radius `r` about
/// `n/2`: locations `k0/2 - k` with multiplicity cap
/// `ceil(c_bound * (1 + k)^(n - k0))`. Every point is an upper bound;
/// the caller supplies the rank constant.
pub fn cusp_pole_lattice(
    g: &ValidatedGroup,
    r: f64,
    c_bound: f64,
) -> Result<Vec<ResonancePoint>> {
    check_radius(r)?;
    if !c_bound.is_finite() || c_bound <= 0.0 {
        return Err(Error::OffDomain {
            what: format!("rank constant must be positive, got {c_bound}"),
        });
    }
    let n = g.n();
    let k0 = g.k0();
    let source = if zero_sector_silent(n, k0) {
        "upper bound from the cusp rank growth; the even-fiber zero sector adds no poles"
    } else {
        "upper bound from the cusp rank growth"
    };
    let mut points = Vec::new();
    let mut k = 0u32;
    // |k0/2 - k - n/2| <= r with k0 < n reduces to k + (n - k0)/2 <= r.
    while f64::from(k) + f64::from(n - k0) / 2.0 <= r {
        let raw = c_bound * f64::from(k + 1).powi((n - k0) as i32);
        let cap = raw.ceil();
        if !(cap < u64::MAX as f64) {
            return Err(Error::Overflow {
                context: "cusp multiplicity cap",
            });
        }
        points.push(ResonancePoint {
            location: Complex64::new(f64::from(k0) / 2.0 - f64::from(k), 0.0),
            multiplicity: cap as u64,
            exactness: Exactness::UpperBound,
            source,
        });
        k += 1;
    }
    Ok(points)
}

/// Global bound on the resonance count in the ball of radius `r` about
/// `n/2`. The general form is `c * lambda(2r)^(n+2) / r` with the growth
/// function of the worst cusp; under the Diophantine flag it is the
/// polynomial form `c * r^(n+1) * (ln r)^(n+2)`.
pub fn resonance_count_bound(
    groups: &[ValidatedGroup],
    n: u32,
    r: f64,
    c: f64,
    diophantine_form: bool,
) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    for g in groups {
        if g.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n as usize,
                got: g.n() as usize,
            });
        }
    }
    if !r.is_finite() || r <= 1.0 {
        return Err(Error::OffDomain {
            what: format!("count bound needs radius > 1, got {r}"),
        });
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::OffDomain {
            what: format!("count bound constant must be positive, got {c}"),
        });
    }
    if diophantine_form {
        Ok(c * r.powi(n as i32 + 1) * r.ln().powi(n as i32 + 2))
    } else {
        let growth = lambda_x(groups, 2.0 * r)?;
        Ok(c * growth.powi(n as i32 + 2) / r)
    }
}

/// Bound `c_kappa * t^(n+2)` on the count in the window of width `2t`
/// within a vertical strip of depth `kappa`; the depth enters only
/// through the constant.
pub fn strip_count_bound(kappa: f64, t: f64, c_kappa: f64, n: u32) -> Result<f64> {
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::OffDomain {
            what: format!("strip depth must be positive, got {kappa}"),
        });
    }
    if !t.is_finite() || t <= 1.0 {
        return Err(Error::OffDomain {
            what: format!("strip window needs t > 1, got {t}"),
        });
    }
    if !c_kappa.is_finite() || c_kappa <= 0.0 {
        return Err(Error::OffDomain {
            what: format!("strip constant must be positive, got {c_kappa}"),
        });
    }
    Ok(c_kappa * t.powi(n as i32 + 2))
}

/// Value of the canonical product in log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductValue {
    /// `ln |g(s)|`; negative infinity exactly at a zero hit by a factor.
    pub log_modulus: f64,
    /// Accumulated argument reduced mod 2 pi. The per-factor arguments
    /// are only known mod 2 pi, so this is indicative, not unwound.
    pub phase: f64,
    /// `exp(log_modulus + i phase)`; saturates to zero or infinity when
    /// the log scale leaves the double range.
    pub value: Complex64,
    /// Bound on the change of `log g` under any refinement of the
    /// truncation order, from the tail bounds of the factors.
    pub truncation_log_bound: f64,
}

/// Entire function `s^l * prod_{k<=k_max} prod_w E(-2sw/k, n+1)^(2 l k^n)`
/// over the `2(n+1)`-th roots of unity `w`, evaluated in log space. Its
/// zeros away from the origin sit at `s = (k/2) u` for `u` among the
/// roots of unity, with multiplicity `2 l k^n` per coinciding factor.
/// Requires `k_max >= 4 |s|` so that every truncated factor has argument
/// in the tail-bound range.
pub fn canonical_product(s: Complex64, l: u32, n: u32, k_max: u32) -> Result<ProductValue> {
    if l == 0 || n == 0 {
        return Err(Error::OffDomain {
            what: "canonical product needs l >= 1 and n >= 1".into(),
        });
    }
    if !s.re.is_finite() || !s.im.is_finite() {
        return Err(Error::OffDomain {
            what: "canonical product argument is not finite".into(),
        });
    }
    let required = (4.0 * s.norm()).ceil() as u64;
    if (k_max as u64) < required.max(1) {
        return Err(Error::TruncationTooSmall {
            k_max: k_max as u64,
            required: required.max(1),
        });
    }
    let p = n + 1;
    // Each omitted factor obeys the tail bound at argument 2|s|/k; summing
    // 2 l k^n copies over 2(n+1) roots and k > k_max and using
    // sum 1/k^2 <= 1/k_max gives 8 l (n+1) (2|s|)^(n+2) / k_max.
    let truncation_log_bound = 4.0 * f64::from(l) * f64::from(p)
        * weierstrass_factor_tail_bound(2.0 * s.norm(), p)
        / f64::from(k_max);
    if s.norm() == 0.0 {
        return Ok(ProductValue {
            log_modulus: f64::NEG_INFINITY,
            phase: 0.0,
            value: Complex64::new(0.0, 0.0),
            truncation_log_bound,
        });
    }
    let mut log_modulus = f64::from(l) * s.norm().ln();
    let mut phase = f64::from(l) * s.arg();
    let roots: Vec<Complex64> = (0..2 * p)
        .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * f64::from(j) / f64::from(p)))
        .collect();
    'outer: for k in 1..=k_max {
        let exponent = 2.0 * f64::from(l) * f64::from(k).powi(n as i32);
        for w in &roots {
            let z = -2.0 * s * w / f64::from(k);
            let (lg, ar) = weierstrass_factor_log(z, p);
            if lg == f64::NEG_INFINITY {
                log_modulus = f64::NEG_INFINITY;
                break 'outer;
            }
            log_modulus += exponent * lg;
            phase += exponent * ar;
        }
    }
    phase = phase.rem_euclid(TWO_PI);
    let value = if log_modulus == f64::NEG_INFINITY {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::from_polar(log_modulus.exp(), phase)
    };
    Ok(ProductValue {
        log_modulus,
        phase,
        value,
        truncation_log_bound,
    })
}

fn pairwise_sum(terms: &[Complex64]) -> Complex64 {
    match terms.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => terms[0],
        len => {
            let (a, b) = terms.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Number of zeros of `f` inside the disk, counted with multiplicity, by
/// the winding number of `f` along the circle: trapezoid rule on
/// `f'/f`, the derivative taken by central differencing along the
/// contour direction. Returns the rounded count and the distance of the
/// raw quadrature value to it.
pub fn zero_count_disk<F>(
    f: F,
    center: Complex64,
    radius: f64,
    nodes: u32,
) -> Result<(i64, f64)>
where
    F: Fn(Complex64) -> Complex64,
{
    if !radius.is_finite() || radius <= 0.0 || !center.re.is_finite() || !center.im.is_finite() {
        return Err(Error::OffDomain {
            what: "zero count needs a finite disk of positive radius".into(),
        });
    }
    if (nodes as usize) < MIN_CONTOUR_NODES {
        return Err(Error::GridTooCoarse {
            points: nodes as usize,
            min: MIN_CONTOUR_NODES,
        });
    }
    let h = radius * 1e-5;
    let mut values = Vec::with_capacity(nodes as usize);
    let mut min_abs = f64::INFINITY;
    let mut max_abs = 0.0_f64;
    for j in 0..nodes {
        let dir = Complex64::from_polar(1.0, TWO_PI * f64::from(j) / f64::from(nodes));
        let s = center + radius * dir;
        let fs = f(s);
        min_abs = min_abs.min(fs.norm());
        max_abs = max_abs.max(fs.norm());
        values.push((dir, s, fs));
    }
    if max_abs == 0.0 || min_abs <= CONTOUR_ZERO_RATIO * max_abs {
        return Err(Error::ContourThroughZero {
            ratio: if max_abs == 0.0 { 0.0 } else { min_abs / max_abs },
        });
    }
    let terms: Vec<Complex64> = values
        .iter()
        .map(|&(dir, s, fs)| {
            let step = h * Complex64::new(0.0, 1.0) * dir;
            let df = (f(s + step) - f(s - step)) / (2.0 * step);
            df / fs * radius * dir
        })
        .collect();
    // count = (1 / 2 pi i) * integral f'/f ds with ds = i r dir d(theta);
    // the i from ds cancels the 1/i, leaving the plain mean of the terms.
    let count = pairwise_sum(&terms) / f64::from(nodes);
    let rounded = count.re.round();
    Ok((rounded as i64, (count - rounded).norm()))
}

/// Upper bound on the number of zeros of `f` in the inner disk about
/// `s0` from the growth of `log |f|` on the outer circle against a lower
/// bound for `log |f(s0)|`, clipped at zero.
pub fn jensen_count_bound<F>(
    f: F,
    s0: Complex64,
    r_inner: f64,
    r_outer: f64,
    log_lower_at_s0: f64,
) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(r_inner.is_finite() && r_outer.is_finite() && r_inner > 0.0 && r_inner < r_outer) {
        return Err(Error::OffDomain {
            what: format!("jensen bound needs 0 < r_inner < r_outer, got {r_inner}, {r_outer}"),
        });
    }
    if !log_lower_at_s0.is_finite() {
        return Err(Error::OffDomain {
            what: "jensen bound needs a finite lower bound at the center".into(),
        });
    }
    if f(s0).norm() == 0.0 {
        return Err(Error::OffDomain {
            what: "jensen bound needs f(s0) != 0".into(),
        });
    }
    let mut max_log = f64::NEG_INFINITY;
    for j in 0..JENSEN_NODES {
        let s = s0 + Complex64::from_polar(r_outer, TWO_PI * f64::from(j) / f64::from(JENSEN_NODES));
        max_log = max_log.max(f(s).norm().ln());
    }
    Ok(((max_log - log_lower_at_s0) / (r_outer / r_inner).ln()).max(0.0))
}

/// Layout of the two disks used when trading a strip count for a disk
/// count: the big disk centered at `a * steps` on the real axis with
/// radius `center + 2t`, and the counting disk of radius `t` about
/// `n/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskGeometry {
    pub center: f64,
    pub big_radius: f64,
    pub counting_center: f64,
    pub counting_radius: f64,
    /// Whether the big disk contains the counting disk.
    pub contains: bool,
}

pub fn counting_disk_geometry(a: f64, steps: u32, t: f64, n: u32) -> Result<DiskGeometry> {
    if !a.is_finite() || a <= 0.0 || !t.is_finite() || t <= 0.0 || steps == 0 || n == 0 {
        return Err(Error::OffDomain {
            what: "disk layout needs positive a, t, steps and n".into(),
        });
    }
    let center = a * f64::from(steps);
    let big_radius = center + 2.0 * t;
    let counting_center = f64::from(n) / 2.0;
    let contains = (counting_center - center).abs() + t <= big_radius + 1e-12;
    Ok(DiskGeometry {
        center,
        big_radius,
        counting_center,
        counting_radius: t,
        contains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::{
        enumerate_modes, validate_group, validated_from_turns, AngleSpec, CuspGroup, Generator,
    };
    use crate::dioph::{worst_case_angle, WorstCaseConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rank1(p: i64, q: i64, ell: f64) -> ValidatedGroup {
        validate_group(&CuspGroup {
            n: 3,
            k0: 1,
            generators: vec![Generator {
                rotation_angles: vec![AngleSpec::rational(p, q)],
                translation: vec![ell],
            }],
        })
        .expect("valid rank-1 group")
    }

    fn choose(a: u64, b: u64) -> u128 {
        let mut out: u128 = 1;
        for i in 0..b {
            out = out * (a - i) as u128 / (i + 1) as u128;
        }
        out
    }

    /// Count of all poles with radius at most `r`, via the telescoping
    /// closed form for partial sums of harmonic ranks.
    fn closed_form_count(n: u64, r: f64) -> u128 {
        let half = n as f64 / 2.0;
        if r < half {
            return 0;
        }
        let k = (r - half).floor() as u64;
        choose(k + n + 1, n + 1) + choose(k + n, n + 1)
    }

    #[test]
    fn model_space_poles_in_small_ball() {
        let (points, (r, total)) = hyperbolic_resonances(1, 2.6).unwrap();
        assert_eq!(r, 2.6);
        assert_eq!(total, 9.0);
        let mults: Vec<u64> = points.iter().map(|p| p.multiplicity).collect();
        assert_eq!(mults, vec![1, 3, 5]);
        for (k, p) in points.iter().enumerate() {
            assert_eq!(p.location, Complex64::new(-(k as f64), 0.0));
            assert_eq!(p.exactness, Exactness::Exact);
        }
    }

    #[test]
    fn even_model_spaces_have_no_poles() {
        for n in [2, 4] {
            let (points, (_, total)) = hyperbolic_resonances(n, 100.0).unwrap();
            assert!(points.is_empty());
            assert_eq!(total, 0.0);
        }
        assert!(hyperbolic_resonances(0, 1.0).is_err());
        assert!(hyperbolic_resonances(1, -1.0).is_err());
    }

    #[test]
    fn model_counting_matches_the_closed_form() {
        for n in [1u32, 3, 5] {
            for r in [0.2, 3.7, 10.0, 55.5, 137.2, 400.0] {
                let (_, (_, total)) = hyperbolic_resonances(n, r).unwrap();
                let expected = closed_form_count(n as u64, r) as f64;
                assert_eq!(total, expected, "n = {n}, r = {r}");
            }
        }
    }

    #[test]
    fn model_counting_tracks_the_expected_power() {
        let radii: Vec<f64> = (1..=8).map(|i| 50.0 * i as f64).collect();
        let curve = hyperbolic_counting_curve(1, &radii).unwrap();
        assert!(curve.is_nondecreasing());
        for &(r, total) in &curve.samples {
            let ratio = total / (r * r);
            assert!((0.8..=1.2).contains(&ratio), "r = {r}: {ratio}");
        }
        // unsorted input comes back sorted by radius
        let shuffled = hyperbolic_counting_curve(1, &[300.0, 50.0, 150.0]).unwrap();
        let rs: Vec<f64> = shuffled.samples.iter().map(|s| s.0).collect();
        assert_eq!(rs, vec![50.0, 150.0, 300.0]);
        assert!(hyperbolic_counting_curve(1, &[]).is_err());
    }

    #[test]
    fn counting_curves_reject_decreasing_data() {
        assert!(CountingCurve::from_samples(vec![(1.0, 2.0), (2.0, 1.0)]).is_err());
        assert!(CountingCurve::from_samples(vec![(2.0, 1.0), (1.0, 5.0)]).is_err());
        assert!(CountingCurve::from_samples(vec![(1.0, f64::NAN)]).is_err());
        let ok = CountingCurve::from_samples(vec![(2.0, 3.0), (1.0, 3.0), (3.0, 7.0)]).unwrap();
        assert!(ok.is_nondecreasing());
    }

    proptest! {
        #[test]
        fn counting_curves_never_decrease(
            n in prop::sample::select(vec![1u32, 2, 3, 4, 5]),
            radii in prop::collection::vec(0.3f64..500.0, 1..30),
        ) {
            let curve = hyperbolic_counting_curve(n, &radii).unwrap();
            prop_assert!(curve.is_nondecreasing());
        }
    }

    #[test]
    fn cusp_lattice_sits_on_the_half_integer_grid() {
        let g = rank1(1, 7, 1.0);
        let points = cusp_pole_lattice(&g, 5.0, 1.7).unwrap();
        let locations: Vec<f64> = points.iter().map(|p| p.location.re).collect();
        assert_eq!(locations, vec![0.5, -0.5, -1.5, -2.5, -3.5]);
        let mults: Vec<u64> = points.iter().map(|p| p.multiplicity).collect();
        assert_eq!(mults, vec![2, 7, 16, 28, 43]);
        for p in &points {
            assert_eq!(p.exactness, Exactness::UpperBound);
            assert_eq!(p.location.im, 0.0);
            // fiber dimension 2 is even: the zero sector is flagged silent
            assert!(zero_sector_silent(g.n(), g.k0()));
            assert!(p.source.contains("adds no poles"));
        }
        let odd_fiber = validate_group(&CuspGroup {
            n: 4,
            k0: 1,
            generators: vec![Generator {
                rotation_angles: vec![AngleSpec::rational(1, 6)],
                translation: vec![1.0],
            }],
        })
        .unwrap();
        let points = cusp_pole_lattice(&odd_fiber, 4.0, 1.0).unwrap();
        assert!(!zero_sector_silent(4, 1));
        assert!(points.iter().all(|p| !p.source.contains("adds no poles")));
        // multiplicity caps now grow cubically
        assert_eq!(points[2].multiplicity, 27);
        assert!(cusp_pole_lattice(&g, 5.0, 0.0).is_err());
        assert!(cusp_pole_lattice(&g, 0.0, 1.0).is_err());
    }

    #[test]
    fn cusp_lattice_count_grows_linearly() {
        let g = rank1(1, 7, 1.0);
        let counts: Vec<usize> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&r| cusp_pole_lattice(&g, r, 1.0).unwrap().len())
            .collect();
        for w in counts.windows(2) {
            let ratio = w[1] as f64 / w[0] as f64;
            assert!((1.8..=2.2).contains(&ratio), "{counts:?}");
        }
        for (&r, &c) in [10.0, 20.0, 40.0].iter().zip(&counts) {
            assert!((c as f64 - r).abs() <= 2.0);
        }
    }

    #[test]
    fn zero_frequency_modes_need_zero_rotation() {
        // irrational rotation: the only frequency-zero mode is the trivial one
        let g = validate_group(&CuspGroup {
            n: 3,
            k0: 1,
            generators: vec![Generator {
                rotation_angles: vec![AngleSpec::decimal("0.3183098861837907", 60)],
                translation: vec![1.0],
            }],
        })
        .unwrap();
        let modes = enumerate_modes(&g, 30, 0.0).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].m, 0);
        assert_eq!(modes[0].b, 0.0);
        // no rotation at all: every degree carries a frequency-zero mode
        let flat = rank1(0, 1, 1.0);
        let modes = enumerate_modes(&flat, 5, 0.0).unwrap();
        assert!(modes.iter().all(|md| md.b == 0.0));
        let degrees: std::collections::BTreeSet<u32> = modes.iter().map(|md| md.m).collect();
        assert_eq!(degrees.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn count_bound_scales_linearly_in_the_constant() {
        let g = rank1(0, 1, 1.0);
        for dioph in [false, true] {
            let one = resonance_count_bound(std::slice::from_ref(&g), 3, 17.0, 1.0, dioph).unwrap();
            let two = resonance_count_bound(std::slice::from_ref(&g), 3, 17.0, 2.0, dioph).unwrap();
            assert_eq!(two, 2.0 * one);
            assert!(one > 0.0);
        }
        assert!(matches!(
            resonance_count_bound(&[], 3, 17.0, 1.0, true),
            Err(Error::EmptyInput)
        ));
        assert!(resonance_count_bound(std::slice::from_ref(&g), 3, 1.0, 1.0, true).is_err());
        assert!(matches!(
            resonance_count_bound(std::slice::from_ref(&g), 4, 17.0, 1.0, false),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn count_bound_matches_the_polynomial_form_for_straight_cusps() {
        // with no rotation the growth function is its base term, so the
        // general form stays within a constant of the polynomial form
        let g = rank1(0, 1, 1.0);
        let mut ratios = Vec::new();
        for r in [10.0, 100.0, 1000.0, 10000.0] {
            let general = resonance_count_bound(std::slice::from_ref(&g), 3, r, 1.0, false).unwrap();
            let poly = r.powi(4) * r.ln().powi(5);
            ratios.push(general / poly);
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min >= 1.0e3 && max <= 5.0e3, "{ratios:?}");
        assert!(max / min <= 4.0, "{ratios:?}");
    }

    #[test]
    fn count_bound_separates_wild_angles_from_the_polynomial_form() {
        let (turn, _) = worst_case_angle(&WorstCaseConfig {
            q: 1,
            depth: 4,
            ell: 1.0,
            precision_bits: 65_600,
        })
        .unwrap();
        let g = validated_from_turns(3, 1, vec![vec![turn]], vec![vec![1.0]]).unwrap();
        let general = resonance_count_bound(std::slice::from_ref(&g), 3, 32.0, 1.0, false).unwrap();
        let tame = resonance_count_bound(std::slice::from_ref(&g), 3, 32.0, 1.0, true).unwrap();
        let ratio = general / tame;
        assert!(ratio > 10.0, "ratio = {ratio}");
        assert!((1.0e4..1.0e6).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn strip_count_respects_the_window_power() {
        assert_eq!(strip_count_bound(1.0, 10.0, 1.0, 1).unwrap(), 1000.0);
        for n in [1u32, 2, 3, 4] {
            let small = strip_count_bound(2.0, 10.0, 3.5, n).unwrap();
            let big = strip_count_bound(2.0, 20.0, 3.5, n).unwrap();
            assert_eq!(big / small, f64::from(2u32.pow(n + 2)));
        }
        // the strip depth enters only through the caller's constant
        assert_eq!(
            strip_count_bound(1.0, 10.0, 2.0, 1).unwrap(),
            strip_count_bound(9.0, 10.0, 2.0, 1).unwrap()
        );
        assert!(strip_count_bound(1.0, 1.0, 1.0, 1).is_err());
        assert!(strip_count_bound(-1.0, 10.0, 1.0, 1).is_err());
        assert!(strip_count_bound(1.0, 10.0, 0.0, 1).is_err());
    }

    #[test]
    fn product_vanishes_at_the_origin_to_the_right_order() {
        for l in [1u32, 2] {
            let at_zero = canonical_product(Complex64::new(0.0, 0.0), l, 1, 32).unwrap();
            assert_eq!(at_zero.log_modulus, f64::NEG_INFINITY);
            assert_eq!(at_zero.value, Complex64::new(0.0, 0.0));
            let f = |s| canonical_product(s, l, 1, 32).unwrap().value;
            let (count, dist) = zero_count_disk(f, Complex64::new(0.0, 0.0), 0.25, 256).unwrap();
            assert_eq!(count, l as i64);
            assert!(dist < 0.05, "dist = {dist}");
        }
    }

    #[test]
    fn product_zero_at_minus_one_has_multiplicity_four() {
        let minus_one = Complex64::new(-1.0, 0.0);
        let exact = canonical_product(minus_one, 1, 1, 64).unwrap();
        assert_eq!(exact.log_modulus, f64::NEG_INFINITY);
        let f = |s| canonical_product(s, 1, 1, 64).unwrap().value;
        let (count, dist) = zero_count_disk(f, minus_one, 0.2, 256).unwrap();
        assert!(dist < 0.05, "dist = {dist}");
        // enumerate the factors whose zero falls in the same disk: the
        // zero of E(-2sw/k, .) sits at s = -k/(2w), each of order 2 l k^n
        let mut enumerated: i64 = 0;
        for k in 1..=64u32 {
            for j in 0..4 {
                let w = Complex64::from_polar(1.0, std::f64::consts::PI * f64::from(j) / 2.0);
                let zero = -f64::from(k) / 2.0 * w.conj();
                if (zero - minus_one).norm() <= 0.2 {
                    enumerated += i64::from(2 * k);
                }
            }
        }
        assert_eq!(count, enumerated);
        assert_eq!(count, 4);
    }

    #[test]
    fn product_log_growth_is_polynomially_bounded() {
        let grid = [-30.0, -20.0, -10.0, -3.0, 0.0, 3.0, 10.0, 20.0, 30.0];
        for n in [1u32, 2] {
            let p = n + 1;
            let mut max_ratio = 0.0_f64;
            for &x in &grid {
                'point: for &y in &grid {
                    let s = Complex64::new(x, y);
                    if s.norm() < 0.2 {
                        continue;
                    }
                    // skip points within 0.2 of a zero ray hit s = (k/2) u
                    for j in 0..2 * p {
                        let u = Complex64::from_polar(
                            1.0,
                            std::f64::consts::PI * f64::from(j) / f64::from(p),
                        );
                        let along = (s * u.conj()).re;
                        let k_near = (2.0 * along).round();
                        for k in [k_near - 1.0, k_near, k_near + 1.0] {
                            if k >= 1.0 && (s - k / 2.0 * u).norm() < 0.2 {
                                continue 'point;
                            }
                        }
                    }
                    let value = canonical_product(s, 1, n, 256).unwrap();
                    let scale = s.norm().hypot(1.0).powi(n as i32 + 1);
                    max_ratio = max_ratio.max(value.log_modulus.abs() / scale);
                    assert!((0.0..=TWO_PI).contains(&value.phase));
                }
            }
            let cap = if n == 1 { ORDER_CAP_N1 } else { ORDER_CAP_N2 };
            assert!(
                max_ratio <= cap,
                "n = {n}: observed {max_ratio}, cap {cap}"
            );
            assert!(max_ratio >= 0.2 * cap, "cap is too loose: {max_ratio}");
        }
    }

    const ORDER_CAP_N1: f64 = 14.0;
    const ORDER_CAP_N2: f64 = 19.0;

    #[test]
    fn product_truncation_bound_covers_refinement() {
        for s in [
            Complex64::new(3.0, 0.0),
            Complex64::new(-2.0, 5.0),
            Complex64::new(0.0, 10.0),
        ] {
            let k0 = (4.0 * s.norm()).ceil() as u32 + 1;
            let coarse = canonical_product(s, 1, 1, k0).unwrap();
            let fine = canonical_product(s, 1, 1, 4 * k0).unwrap();
            let diff = (coarse.log_modulus - fine.log_modulus).abs();
            assert!(
                diff <= coarse.truncation_log_bound,
                "s = {s}: diff {diff} vs bound {}",
                coarse.truncation_log_bound
            );
            let doubled = canonical_product(s, 1, 1, 2 * k0).unwrap();
            let ratio = coarse.truncation_log_bound / doubled.truncation_log_bound;
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_needs_enough_factors() {
        let err = canonical_product(Complex64::new(10.0, 0.0), 1, 1, 20).unwrap_err();
        match err {
            Error::TruncationTooSmall { k_max, required } => {
                assert_eq!(k_max, 20);
                assert_eq!(required, 40);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(canonical_product(Complex64::new(1.0, 0.0), 0, 1, 16).is_err());
        assert!(canonical_product(Complex64::new(1.0, 0.0), 1, 0, 16).is_err());
    }

    #[test]
    fn contour_count_recovers_polynomial_zeros() {
        let cube = |s: Complex64| s * s * s;
        let (count, dist) = zero_count_disk(cube, Complex64::new(0.0, 0.0), 1.0, 128).unwrap();
        assert_eq!(count, 3);
        assert!(dist < 0.05);
        let double_root =
            |s: Complex64| (s - 1.0) * (s - 2.0) * (s - 2.0);
        let (count, dist) =
            zero_count_disk(double_root, Complex64::new(1.5, 0.0), 1.0, 256).unwrap();
        assert_eq!(count, 3);
        assert!(dist < 0.05);
        let through = |s: Complex64| s - 2.0;
        assert!(matches!(
            zero_count_disk(through, Complex64::new(1.5, 0.0), 0.5, 128),
            Err(Error::ContourThroughZero { .. })
        ));
        assert!(matches!(
            zero_count_disk(cube, Complex64::new(0.0, 0.0), 1.0, 4),
            Err(Error::GridTooCoarse { points: 4, min: 16 })
        ));
    }

    #[test]
    fn jensen_bound_brackets_polynomial_counts() {
        let constant = |_s: Complex64| Complex64::new(3.0, 4.0);
        let bound = jensen_count_bound(
            constant,
            Complex64::new(0.0, 0.0),
            1.0,
            10.0,
            5.0_f64.ln(),
        )
        .unwrap();
        assert!(bound.abs() < 1e-12);
        let roots = [
            Complex64::new(0.1, 0.0),
            Complex64::new(0.0, -0.2),
            Complex64::new(0.15, 0.1),
        ];
        let poly = |s: Complex64| roots.iter().fold(Complex64::new(1.0, 0.0), |acc, &z| acc * (s - z));
        let origin = Complex64::new(0.0, 0.0);
        let log_lower = poly(origin).norm().ln();
        let bound = jensen_count_bound(poly, origin, 0.5, 50.0, log_lower).unwrap();
        assert!((3.0..=4.0).contains(&bound), "bound = {bound}");
        assert!(jensen_count_bound(poly, origin, 5.0, 1.0, 0.0).is_err());
        let vanishing = |s: Complex64| s;
        assert!(jensen_count_bound(vanishing, origin, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn jensen_bound_dominates_the_contour_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_260_814);
        for case in 0..20 {
            let degree = rng.gen_range(1..=5);
            let roots: Vec<Complex64> = (0..degree)
                .map(|_| {
                    let radius = rng.gen_range(0.2..0.8);
                    let angle = rng.gen_range(0.0..TWO_PI);
                    Complex64::from_polar(radius, angle)
                })
                .collect();
            let poly = |s: Complex64| {
                roots
                    .iter()
                    .fold(Complex64::new(1.0, 0.0), |acc, &z| acc * (s - z))
            };
            let origin = Complex64::new(0.0, 0.0);
            let (count, dist) = zero_count_disk(&poly, origin, 1.0, 256).unwrap();
            assert_eq!(count, degree as i64, "case {case}");
            assert!(dist < 0.05);
            let log_lower = poly(origin).norm().ln();
            let bound = jensen_count_bound(&poly, origin, 1.0, 100.0, log_lower).unwrap();
            assert!(bound >= count as f64, "case {case}: {bound} < {count}");
        }
    }

    #[test]
    fn disk_layout_contains_the_counting_window() {
        let layout = counting_disk_geometry(1.0, 10, 3.0, 1).unwrap();
        assert_eq!(layout.center, 10.0);
        assert_eq!(layout.big_radius, 16.0);
        assert_eq!(layout.counting_center, 0.5);
        assert_eq!(layout.counting_radius, 3.0);
        assert!(layout.contains);
        let detached = counting_disk_geometry(0.01, 1, 0.1, 10).unwrap();
        assert!(!detached.contains);
        assert!(counting_disk_geometry(0.0, 1, 1.0, 1).is_err());
        assert!(counting_disk_geometry(1.0, 0, 1.0, 1).is_err());
    }

    #[test]
    fn negative_part_clips_at_zero() {
        assert_eq!(negative_part(-3.0), 3.0);
        assert_eq!(negative_part(2.0), 0.0);
        assert_eq!(negative_part(0.0), 0.0);
    }
}
