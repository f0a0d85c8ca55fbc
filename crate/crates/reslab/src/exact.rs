//! Big-integer and big-rational utilities shared by the exact code paths:
//! decimal parsing/printing, fixed-point pi, and logarithms of huge rationals.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Parse a plain decimal literal ("-12.345", "0.5e-3") into an exact rational.
pub fn parse_decimal(input: &str) -> Result<BigRational> {
    let bad = || Error::AngleParse {
        input: input.to_string(),
    };
    let s = input.trim();
    let (mant, exp10) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (sign, digits) = match mant.strip_prefix('-') {
        Some(rest) => (Sign::Minus, rest),
        None => (Sign::Plus, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let mantissa = BigInt::from_biguint(sign, joined.parse::<BigUint>().map_err(|_| bad())?);
    let shift = exp10 - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    Ok(if shift >= 0 {
        BigRational::from_integer(mantissa * ten.pow(shift as u32))
    } else {
        BigRational::new(mantissa, ten.pow((-shift) as u32))
    })
}

/// Parse "p/q" (exact integers, q > 0) into a reduced rational.
pub fn parse_fraction(input: &str) -> Result<BigRational> {
    let bad = || Error::AngleParse {
        input: input.to_string(),
    };
    let s = input.trim();
    let (p, q) = s.split_once('/').ok_or_else(bad)?;
    let p: BigInt = p.trim().parse().map_err(|_| bad())?;
    let q: BigInt = q.trim().parse().map_err(|_| bad())?;
    if q.is_zero() || q.is_negative() {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

/// Round-to-nearest f64 regardless of magnitude (saturates to 0 / +-inf).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    let sn = num.bits().saturating_sub(63);
    let sd = den.bits().saturating_sub(63);
    let fn_ = (num >> sn).to_f64().unwrap();
    let fd = (den >> sd).to_f64().unwrap();
    sign * (fn_ / fd) * f64::exp2(sn as f64 - sd as f64)
}

/// Natural log of a positive big integer, accurate to ~1e-16 relative
/// in the mantissa plus ~bits * eps from the exponent term.
pub fn ln_biguint(n: &BigUint) -> f64 {
    assert!(!n.is_zero(), "ln of zero");
    let b = n.bits();
    if b <= 63 {
        return (n.to_f64().unwrap()).ln();
    }
    let shift = b - 63;
    let mant = (n >> shift).to_f64().unwrap();
    mant.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational of arbitrary scale.
pub fn ln_rational(r: &BigRational) -> f64 {
    assert!(r.is_positive(), "ln of non-positive rational");
    ln_biguint(r.numer().magnitude()) - ln_biguint(r.denom().magnitude())
}

/// atan(1/x) in fixed point at scale 2^bits (x >= 2).
fn atan_inv_fixed(x: u32, bits: u64) -> BigUint {
    let one = BigUint::one() << bits;
    let xsq = x * x;
    let mut power = &one / x;
    let mut sum = power.clone();
    let mut k: u32 = 1;
    loop {
        power /= xsq;
        let term = &power / (2 * k + 1);
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        k += 1;
    }
    sum
}

/// pi scaled by 2^bits, via Machin's formula with 64 guard bits.
pub fn pi_fixed(bits: u64) -> BigUint {
    let work = bits + 64;
    let a = atan_inv_fixed(5, work);
    let b = atan_inv_fixed(239, work);
    let pi = (a << 4u32) - (b << 2u32);
    &pi >> 64
}

/// pi as an exact dyadic rational with the given number of fractional bits.
pub fn pi_rational(bits: u64) -> BigRational {
    BigRational::new(
        BigInt::from_biguint(Sign::Plus, pi_fixed(bits)),
        BigInt::one() << bits,
    )
}

/// Decimal rendering with the given number of fractional digits (round half up).
pub fn decimal_string(r: &BigRational, digits: usize) -> String {
    let neg = r.is_negative();
    let num = r.numer().magnitude().clone();
    let den = r.denom().magnitude().clone();
    let int = &num / &den;
    let rem = &num - &int * &den;
    let scale = BigUint::from(10u32).pow(digits as u32);
    let scaled = (&rem * &scale * 2u32 + &den) / (&den * 2u32);
    // rounding may carry into the integer part
    let (int, scaled) = if scaled >= scale {
        (int + 1u32, scaled - &scale)
    } else {
        (int, scaled)
    };
    let frac = scaled.to_str_radix(10);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&int.to_str_radix(10));
    if digits > 0 {
        out.push('.');
        out.push_str(&"0".repeat(digits - frac.len()));
        out.push_str(&frac);
    }
    out
}

/// Fractional part in [0, 1).
pub fn frac_part(r: &BigRational) -> BigRational {
    r - BigRational::from_integer(r.numer().div_floor(r.denom()))
}

/// Distance from r to the nearest integer, in [0, 1/2].
pub fn dist_to_int(r: &BigRational) -> BigRational {
    let f = frac_part(r);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if f > half {
        BigRational::one() - f
    } else {
        f
    }
}
