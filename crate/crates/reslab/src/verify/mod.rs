//! Verification harness: exact symbolic checks of the boundary-solution
//! coefficient recurrences, and grid sweeps that fit and validate the
//! implied constants of the special-function envelopes.

pub mod bounds;
pub mod coeffs;

pub use bounds::{
    default_consistency_cases, verify_bessel_bounds, verify_beta_bounds, verify_f_bound,
    verify_resolvent_consistency, ConsistencyCase,
};
pub use coeffs::{
    boundary_identity_residual, boundary_identity_residual_exact, build_coefficients,
    CoefficientTable, RationalFunction,
};

/// Outcome of one grid sweep: the supremum of the deficits against an
/// envelope, where it was attained, and whether one refinement kept it
/// from growing.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Human-readable description of the grid actually swept.
    pub grid_spec: String,
    /// Largest deficit on the validation grid.
    pub deficit_sup: f64,
    /// Coordinates of the worst point, in the op's parameter order.
    pub deficit_argmax: Vec<f64>,
    /// Recomputed: deficit growth under one x2 refinement stayed below 0.1.
    pub stable: bool,
    /// (c, ln C) when the envelope's free constants were fitted first.
    pub fitted: Option<(f64, f64)>,
}

/// `t ln t` extended by its limit 0 at `t = 0`.
pub(crate) fn xlnx(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

/// Smallest constants (c, ln C), in the minimax sense, with
/// `h - c*weight - ln C <= 0` for every sweep point `(h, weight)`:
/// ternary search on c for the balance point of max(c, ln C(c)).
pub(crate) fn minimax_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let ln_c_of = |c: f64| {
        points
            .iter()
            .map(|&(h, w)| h - c * w)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (mut lo, mut hi) = (0.0_f64, 200.0_f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if m1.max(ln_c_of(m1)) <= m2.max(ln_c_of(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let c = 0.5 * (lo + hi);
    (c, ln_c_of(c))
}

/// `steps + 1` evenly spaced points covering [a, b]; doubling `steps`
/// keeps every original point in the refinement.
pub(crate) fn linspace(a: f64, b: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| a + (b - a) * i as f64 / steps as f64)
        .collect()
}

/// Geometrically spaced points covering [a, b], a > 0.
pub(crate) fn logspace(a: f64, b: f64, steps: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), steps)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Distance from z to the nonpositive integers.
pub(crate) fn dist_to_nonpositive_int(z: num_complex::Complex64) -> f64 {
    let nearest = z.re.round().min(0.0);
    (z.re - nearest).hypot(z.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimax_fit_balances_the_two_constants() {
        // single point: h = 10 at weight 1; optimum is c = ln C = 5
        let (c, ln_c) = minimax_fit(&[(10.0, 1.0)]);
        assert!((c - 5.0).abs() < 1e-9, "c = {c}");
        assert!((ln_c - 5.0).abs() < 1e-9);
        // all deficits already nonpositive at c = 0: no growth needed
        let (c, ln_c) = minimax_fit(&[(-3.0, 1.0), (-1.0, 2.0)]);
        assert!(c.abs() < 1e-9);
        assert!((ln_c + 1.0).abs() < 1e-9);
        // fitted pair always closes the deficits
        let pts = [(4.0, 0.5), (7.0, 3.0), (1.0, 0.0)];
        let (c, ln_c) = minimax_fit(&pts);
        for (h, w) in pts {
            assert!(h - c * w - ln_c <= 1e-9);
        }
    }

    #[test]
    fn refined_grids_keep_the_original_points() {
        let coarse = linspace(-50.0, 50.0, 10);
        let fine = linspace(-50.0, 50.0, 20);
        for (i, v) in coarse.iter().enumerate() {
            assert_eq!(*v, fine[2 * i]);
        }
        let lo = logspace(0.5, 30.0, 6);
        assert!((lo[0] - 0.5).abs() < 1e-12);
        assert!((lo[6] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_integer_distance_matches_hand_values() {
        use num_complex::Complex64;
        assert_eq!(dist_to_nonpositive_int(Complex64::new(1.0, 0.0)), 1.0);
        assert_eq!(dist_to_nonpositive_int(Complex64::new(-25.0, 0.0)), 0.0);
        let d = dist_to_nonpositive_int(Complex64::new(-2.5, 1.0));
        assert!((d - 0.5_f64.hypot(1.0)).abs() < 1e-15);
    }
}
