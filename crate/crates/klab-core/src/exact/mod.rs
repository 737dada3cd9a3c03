//! Exact arithmetic foundations: arbitrary-precision rationals, square
//! rational matrices, cyclotomic integers and p-adic valuations.
//!
//! Everything downstream builds on these types; no floating point is used
//! anywhere except in the certified approximations of [`CyclotomicValue`].

mod cyclotomic;
mod matrix;
mod valuation;

pub use cyclotomic::{cyclotomic_polynomial, CyclotomicValue};
pub use matrix::RationalMatrix;
pub use valuation::{is_prime, vp, vp_int, PValuation, Valuation};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational number, always stored in lowest terms with a positive
/// denominator (`num_rational` maintains both invariants on construction).
pub type Rational = BigRational;

/// Errors raised by the exact-arithmetic layer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExactError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
}

/// Shorthand for an integer rational.
pub fn rat_int<T: Into<BigInt>>(n: T) -> Rational {
    Rational::from_integer(n.into())
}

/// Shorthand for the fraction `n/d`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// True iff `x` has denominator 1.
pub fn is_integer(x: &Rational) -> bool {
    x.denom().is_one()
}

/// Largest integer `<= x`.
pub fn rat_floor(x: &Rational) -> BigInt {
    x.floor().to_integer()
}

/// Fractional part of `x`, always in `[0, 1)`.
pub fn rat_frac(x: &Rational) -> Rational {
    x - Rational::from_integer(rat_floor(x))
}

/// `p^k` for a possibly negative exponent `k`.
pub fn pow_rat(p: u64, k: i64) -> Rational {
    let mag = BigInt::from(p).pow(k.unsigned_abs() as u32);
    if k >= 0 {
        Rational::from_integer(mag)
    } else {
        Rational::new(BigInt::one(), mag)
    }
}

/// gcd of two positive rationals: the largest rational dividing both with
/// integer quotients. Used for intersecting arithmetic progressions.
pub fn rat_gcd(a: &Rational, b: &Rational) -> Rational {
    use num_integer::Integer;
    assert!(a.is_positive() && b.is_positive());
    let d = a.denom().lcm(b.denom());
    let an = (a * Rational::from_integer(d.clone())).to_integer();
    let bn = (b * Rational::from_integer(d.clone())).to_integer();
    Rational::new(an.gcd(&bn), d)
}

/// True iff `a/b` is an integer for rationals `a`, `b` (`b != 0`).
pub fn rat_divides(b: &Rational, a: &Rational) -> bool {
    if b.is_zero() {
        return a.is_zero();
    }
    is_integer(&(a / b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_stay_reduced() {
        let x = rat(6, 4);
        assert_eq!(x.numer(), &BigInt::from(3));
        assert_eq!(x.denom(), &BigInt::from(2));
        let z = rat(0, 5);
        assert!(z.is_zero());
        assert_eq!(z.denom(), &BigInt::from(1));
        // negative sign lives in the numerator
        let y = rat(3, -9);
        assert_eq!(y.numer(), &BigInt::from(-1));
        assert_eq!(y.denom(), &BigInt::from(3));
    }

    #[test]
    fn floor_and_frac() {
        assert_eq!(rat_floor(&rat(7, 3)), BigInt::from(2));
        assert_eq!(rat_floor(&rat(-7, 3)), BigInt::from(-3));
        assert_eq!(rat_frac(&rat(-7, 3)), rat(2, 3));
        assert_eq!(rat_frac(&rat(7, 3)), rat(1, 3));
    }

    #[test]
    fn gcd_of_rationals() {
        assert_eq!(rat_gcd(&rat(1, 6), &rat(1, 4)), rat(1, 12));
        assert_eq!(rat_gcd(&rat(3, 2), &rat(2, 1)), rat(1, 2));
        assert!(rat_divides(&rat(1, 12), &rat(1, 6)));
        assert!(!rat_divides(&rat(1, 6), &rat(1, 12)));
    }
}
