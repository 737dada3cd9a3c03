//! p-adic valuations of integers and rationals, normalised by `v_p(p) = 1`.

use super::{ExactError, Rational};
use num_bigint::BigInt;
use num_traits::Zero;

/// Value of a p-adic valuation: a finite integer, or `+inf` for 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    /// `v(x) >= m`, with `+inf >= m` for every `m`.
    pub fn at_least(self, m: i64) -> bool {
        match self {
            Valuation::Finite(v) => v >= m,
            Valuation::Infinite => true,
        }
    }
}

/// A p-adic valuation together with the prime it was taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PValuation {
    pub p: u64,
    pub value: Valuation,
}

/// Trial-division primality test. Moduli at desk scale are tiny, so this is
/// plenty.
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Valuation of a nonzero integer at `p` (assumed prime, not checked).
pub fn vp_int(x: &BigInt, p: u64) -> Valuation {
    if x.is_zero() {
        return Valuation::Infinite;
    }
    let p = BigInt::from(p);
    let mut v = 0i64;
    let mut cur = x.clone();
    loop {
        let (q, r) = num_integer::Integer::div_rem(&cur, &p);
        if !r.is_zero() {
            return Valuation::Finite(v);
        }
        v += 1;
        cur = q;
    }
}

/// Exact p-adic valuation of a rational, `+inf` iff the input is 0.
/// Rejects non-prime `p`.
pub fn vp(x: &Rational, p: u64) -> Result<PValuation, ExactError> {
    if !is_prime(p) {
        return Err(ExactError::NotPrime(p));
    }
    let value = match (vp_int(x.numer(), p), vp_int(x.denom(), p)) {
        (Valuation::Infinite, _) => Valuation::Infinite,
        (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a - b),
        (_, Valuation::Infinite) => unreachable!("denominator is never zero"),
    };
    Ok(PValuation { p, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{rat, rat_int};

    #[test]
    fn valuation_examples() {
        // prime factorisations by hand
        assert_eq!(vp(&rat(8, 3), 2).unwrap().value, Valuation::Finite(3));
        assert_eq!(vp(&rat_int(1), 7).unwrap().value, Valuation::Finite(0));
        assert_eq!(vp(&rat(9, 4), 3).unwrap().value, Valuation::Finite(2));
        assert_eq!(vp(&rat(9, 4), 2).unwrap().value, Valuation::Finite(-2));
        assert_eq!(vp(&rat_int(0), 5).unwrap().value, Valuation::Infinite);
    }

    #[test]
    fn rejects_non_prime() {
        assert_eq!(vp(&rat_int(1), 6), Err(ExactError::NotPrime(6)));
        assert_eq!(vp(&rat_int(1), 1), Err(ExactError::NotPrime(1)));
        assert_eq!(vp(&rat_int(1), 0), Err(ExactError::NotPrime(0)));
    }

    #[test]
    fn primality() {
        let primes: Vec<u64> = (0..100).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            primes,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97]
        );
    }
}
