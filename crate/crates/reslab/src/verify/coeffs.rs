//! Exact boundary-solution coefficients: the rational functions c_{j,k}(s)
//! that solve away Taylor boundary terms on a model end, their recurrence,
//! and the exact polynomial residual of the defining identity.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::exact::rational_to_f64;
use crate::{Error, Result};

fn rat_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn half(n: u32) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(2))
}

#[cfg(test)]
fn poly_trim(mut p: Vec<BigRational>) -> Vec<BigRational> {
    while p.len() > 1 && p.last().map_or(false, Zero::is_zero) {
        p.pop();
    }
    p
}

/// p(s) * (s + a), coefficients low degree first.
fn poly_mul_linear(p: &[BigRational], a: &BigRational) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i] += c * a;
        out[i + 1] += c;
    }
    out
}

#[cfg(test)]
fn poly_mul(p: &[BigRational], q: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    poly_trim(out)
}

fn poly_eval_rat(p: &[BigRational], s: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

fn poly_eval_complex(p: &[BigRational], s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in p.iter().rev() {
        acc = acc * s + rational_to_f64(c);
    }
    acc
}

/// Ratio of polynomials in s over exact rationals, low degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    pub numerator: Vec<BigRational>,
    pub denominator: Vec<BigRational>,
}

impl RationalFunction {
    /// Exact value at a rational point; None on a denominator root.
    pub fn eval_rational(&self, s: &BigRational) -> Option<BigRational> {
        let den = poly_eval_rat(&self.denominator, s);
        if den.is_zero() {
            return None;
        }
        Some(poly_eval_rat(&self.numerator, s) / den)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        poly_eval_complex(&self.numerator, s) / poly_eval_complex(&self.denominator, s)
    }
}

/// The coefficients c_{j,k}(s), k = 0..=order-j, of the boundary solution
/// operator at level j with truncation order `order`. Entry k has constant
/// numerator and denominator roots exactly at n/2 - j - {0,...,k}; the
/// error-term coefficient is the last entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub n: u32,
    pub j: u32,
    pub order: u32,
    pub entries: Vec<RationalFunction>,
}

impl CoefficientTable {
    /// Coefficient of the order-(2 order + 2) error term.
    pub fn error_coefficient(&self) -> &RationalFunction {
        self.entries.last().expect("table is never empty")
    }
}

/// Builds the exact coefficient table from the base value
/// c_{j,0} = 1/(4j(s - n/2 + j)) and the recurrence
/// c_{j,k} = c_{j,k-1} / (4(j+k)(s - n/2 + j + k)).
pub fn build_coefficients(n: u32, j: u32, order: u32) -> Result<CoefficientTable> {
    if n == 0 || j == 0 || j > order {
        return Err(Error::OffDomain {
            what: format!("coefficient table needs n >= 1 and 1 <= j <= order, got n={n}, j={j}, order={order}"),
        });
    }
    let mut numerator = BigRational::new(BigInt::one(), BigInt::from(4i64 * i64::from(j)));
    let mut denominator = vec![rat_int(i64::from(j)) - half(n), BigRational::one()];
    let mut entries = vec![RationalFunction {
        numerator: vec![numerator.clone()],
        denominator: denominator.clone(),
    }];
    for k in 1..=(order - j) {
        numerator /= rat_int(4 * i64::from(j + k));
        denominator = poly_mul_linear(&denominator, &(rat_int(i64::from(j + k)) - half(n)));
        entries.push(RationalFunction {
            numerator: vec![numerator.clone()],
            denominator: denominator.clone(),
        });
    }
    Ok(CoefficientTable { n, j, order, entries })
}

/// Exact residual of the solve-away identity at rational s and fiber
/// eigenvalue xi_sq: with the fiber mode reducing the Laplacian to
/// (-(x d/dx)^2 + n x d/dx + x^2 xi_sq), the identity collapses to a
/// polynomial in x whose coefficients must all vanish; returns the
/// largest coefficient magnitude (exactly zero when the table is right).
pub fn boundary_identity_residual_exact(
    n: u32,
    j: u32,
    order: u32,
    s: &BigRational,
    xi_sq: &BigRational,
) -> Result<BigRational> {
    if xi_sq.is_negative() {
        return Err(Error::OffDomain {
            what: "fiber eigenvalue must be nonnegative".into(),
        });
    }
    for t in j..=order {
        if *s == half(n) - rat_int(i64::from(t)) {
            return Err(Error::Pole {
                location: Complex64::new(rational_to_f64(s), 0.0),
                distance: 0.0,
            });
        }
    }
    let table = build_coefficients(n, j, order)?;
    let beta = s - half(n);
    let c: Vec<BigRational> = table
        .entries
        .iter()
        .map(|e| e.eval_rational(s).expect("pole set already excluded"))
        .collect();
    let top = (order - j) as usize;
    let mut residual = BigRational::zero();
    let mut xi_pow = BigRational::one();
    // power x^{s+2j}: -4j(s-n/2+j) c_0 + 1
    let mut coeff = rat_int(-4 * i64::from(j)) * (&beta + rat_int(i64::from(j))) * &c[0]
        + BigRational::one();
    residual = residual.max(coeff.abs());
    for m in 1..=top {
        // power x^{s+2j+2m}: xi^{2m} (c_{m-1} - 4(j+m)(s-n/2+j+m) c_m)
        xi_pow *= xi_sq;
        let jm = i64::from(j) + m as i64;
        coeff = (&c[m - 1] - rat_int(4 * jm) * (&beta + rat_int(jm)) * &c[m]) * &xi_pow;
        residual = residual.max(coeff.abs());
    }
    // power x^{s+2 order+2}: xi^{2(top+1)} (c_top - error coefficient)
    xi_pow *= xi_sq;
    let b = table
        .error_coefficient()
        .eval_rational(s)
        .expect("pole set already excluded");
    coeff = (&c[top] - b) * &xi_pow;
    residual = residual.max(coeff.abs());
    Ok(residual)
}

/// Binary64 residual of the same identity at complex s.
pub fn boundary_identity_residual(
    n: u32,
    j: u32,
    order: u32,
    s: Complex64,
    xi_sq: f64,
) -> Result<f64> {
    if !xi_sq.is_finite() || xi_sq < 0.0 {
        return Err(Error::OffDomain {
            what: format!("fiber eigenvalue must be a nonnegative real, got {xi_sq}"),
        });
    }
    let nf = f64::from(n) / 2.0;
    for t in j..=order {
        let pole = Complex64::new(nf - f64::from(t), 0.0);
        if (s - pole).norm() < 1e-9 {
            return Err(Error::Pole {
                location: pole,
                distance: (s - pole).norm(),
            });
        }
    }
    let table = build_coefficients(n, j, order)?;
    let beta = s - nf;
    let c: Vec<Complex64> = table.entries.iter().map(|e| e.eval_complex(s)).collect();
    let top = (order - j) as usize;
    let mut residual = 0.0_f64;
    let mut xi_pow = 1.0_f64;
    let mut coeff = -4.0 * f64::from(j) * (beta + f64::from(j)) * c[0] + 1.0;
    residual = residual.max(coeff.norm());
    for m in 1..=top {
        xi_pow *= xi_sq;
        coeff = (c[m - 1] - 4.0 * (f64::from(j) + m as f64) * (beta + f64::from(j) + m as f64) * c[m])
            * xi_pow;
        residual = residual.max(coeff.norm());
    }
    xi_pow *= xi_sq;
    let b = table.error_coefficient().eval_complex(s);
    residual = residual.max(((c[top] - b) * xi_pow).norm());
    Ok(residual)
}
