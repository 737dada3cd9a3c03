//! Exact integer combinations of roots of unity.
//!
//! A value is stored unreduced as a length-`L` integer coefficient vector,
//! coefficient `k` multiplying `e(k/L) = exp(2 pi i k / L)`. Addition and
//! multiplication never canonicalise; equality and zero tests reduce the
//! difference modulo the L-th cyclotomic polynomial, which is the honest
//! ring-theoretic test. A certified floating-point embedding provides cheap
//! nonzero detection and absolute values.

use super::{ExactError, Rational};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Exact element of the group ring Z[mu_L] of L-th roots of unity.
#[derive(Debug, Clone)]
pub struct CyclotomicValue {
    level: u64,
    coeffs: Vec<BigInt>,
}

impl CyclotomicValue {
    pub fn zero() -> Self {
        CyclotomicValue {
            level: 1,
            coeffs: vec![BigInt::zero()],
        }
    }

    pub fn one() -> Self {
        CyclotomicValue {
            level: 1,
            coeffs: vec![BigInt::one()],
        }
    }

    /// A zero value pre-allocated at level `level`; useful when accumulating
    /// a sum whose common level is known up front.
    pub fn zero_at_level(level: u64) -> Self {
        assert!(level >= 1);
        CyclotomicValue {
            level,
            coeffs: vec![BigInt::zero(); level as usize],
        }
    }

    /// Exact representation of `e(a/b)`; `a` is reduced mod `b`.
    pub fn root(a: i64, b: u64) -> Result<Self, ExactError> {
        if b == 0 {
            return Err(ExactError::ZeroDenominator);
        }
        let k = a.rem_euclid(b as i64) as usize;
        let mut coeffs = vec![BigInt::zero(); b as usize];
        coeffs[k] = BigInt::one();
        Ok(CyclotomicValue { level: b, coeffs })
    }

    /// `e(r)` for a rational `r`; the level is the denominator of `r`.
    pub fn root_of_rational(r: &Rational) -> Self {
        let level = r.denom().to_u64().expect("root level fits in u64");
        let k = super::rat_frac(r) * Rational::from_integer(BigInt::from(level));
        let k = k.to_integer().to_u64().expect("index fits") as usize;
        let mut coeffs = vec![BigInt::zero(); level as usize];
        coeffs[k] = BigInt::one();
        CyclotomicValue { level, coeffs }
    }

    /// Rebuild a value from its serialized (level, coefficients) form.
    pub fn from_parts(level: u64, coeffs: Vec<BigInt>) -> Result<Self, ExactError> {
        if level == 0 || coeffs.len() != level as usize {
            return Err(ExactError::ZeroDenominator);
        }
        Ok(CyclotomicValue { level, coeffs })
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Number of nonzero stored terms.
    pub fn term_count(&self) -> usize {
        self.coeffs.iter().filter(|c| !c.is_zero()).count()
    }

    /// Re-express at level `m` (must be a multiple of the current level).
    pub fn raise_level(&self, m: u64) -> Self {
        assert!(m % self.level == 0, "level {} does not divide {}", self.level, m);
        let f = (m / self.level) as usize;
        let mut coeffs = vec![BigInt::zero(); m as usize];
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs[k * f] = c.clone();
            }
        }
        CyclotomicValue { level: m, coeffs }
    }

    fn merged(a: &Self, b: &Self) -> (Self, Self) {
        let m = a.level.lcm(&b.level);
        (a.raise_level(m), b.raise_level(m))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (mut a, b) = Self::merged(self, other);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x += y;
        }
        a
    }

    /// Add `e(k/L)` in place; `self` must already live at a level divisible
    /// by the root's denominator. This is the hot path of Kloosterman-sum
    /// accumulation.
    pub fn add_root_in_place(&mut self, r: &Rational) {
        let den = r.denom().to_u64().expect("denominator fits");
        debug_assert!(self.level % den == 0);
        let f = self.level / den;
        let k = (super::rat_frac(r) * Rational::from_integer(BigInt::from(den))).to_integer();
        let idx = (k.to_u64().unwrap() * f) % self.level;
        self.coeffs[idx as usize] += 1;
    }

    pub fn neg(&self) -> Self {
        CyclotomicValue {
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = Self::merged(self, other);
        let n = a.level as usize;
        let mut coeffs = vec![BigInt::zero(); n];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                coeffs[(i + j) % n] += x * y;
            }
        }
        CyclotomicValue { level: a.level, coeffs }
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        CyclotomicValue {
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Complex embedding with a certified absolute error bound.
    pub fn embed(&self) -> (f64, f64, f64) {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        let mut magnitude = 0.0f64;
        let l = self.level as f64;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cf = c.to_f64().unwrap_or(f64::INFINITY);
            let ang = 2.0 * std::f64::consts::PI * (k as f64) / l;
            re += cf * ang.cos();
            im += cf * ang.sin();
            magnitude += cf.abs();
        }
        // Rounding: one sin/cos evaluation (~1 ulp), a multiply and a long
        // accumulation per term. A crude but safe envelope:
        let err = magnitude * (self.coeffs.len() as f64 + 8.0) * f64::EPSILON;
        (re, im, err)
    }

    /// `|value|` together with an absolute error bound on the returned float.
    pub fn abs(&self) -> (f64, f64) {
        let (re, im, err) = self.embed();
        (re.hypot(im), err + 4.0 * f64::EPSILON * re.hypot(im).max(1.0))
    }

    /// Exact zero test: reduce modulo the L-th cyclotomic polynomial.
    pub fn is_zero(&self) -> bool {
        if self.coeffs.iter().all(|c| c.is_zero()) {
            return true;
        }
        // Certified nonzero shortcut via the embedding.
        let (re, im, err) = self.embed();
        if re.hypot(im) > err + 1e-12 * (1.0 + re.hypot(im)) && err.is_finite() {
            return false;
        }
        let phi = cyclotomic_polynomial(self.level);
        poly_rem_is_zero(&self.coeffs, &phi)
    }

    /// Exact equality modulo the cyclotomic relation at the merged level.
    pub fn eq_exact(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }
}

impl PartialEq for CyclotomicValue {
    fn eq(&self, other: &Self) -> bool {
        self.eq_exact(other)
    }
}
impl Eq for CyclotomicValue {}

/// Remainder of `poly` (dense, any degree) modulo the monic `phi`; returns
/// true iff it vanishes.
fn poly_rem_is_zero(poly: &[BigInt], phi: &[BigInt]) -> bool {
    let d = phi.len() - 1;
    debug_assert!(phi[d].is_one());
    let mut r: Vec<BigInt> = poly.to_vec();
    let mut deg = r.len();
    while deg > d {
        deg -= 1;
        let c = std::mem::replace(&mut r[deg], BigInt::zero());
        if c.is_zero() {
            continue;
        }
        for k in 0..d {
            let v = &r[deg - d + k] - &c * &phi[k];
            r[deg - d + k] = v;
        }
    }
    r.iter().all(|c| c.is_zero())
}

/// The n-th cyclotomic polynomial, dense coefficients ascending, memoised.
///
/// Computed by the classical recursion: divide `x^n - 1` by `Phi_d` for all
/// proper divisors `d | n`; every division is exact over the integers.
pub fn cyclotomic_polynomial(n: u64) -> Arc<Vec<BigInt>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Vec<BigInt>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return hit.clone();
    }
    assert!(n >= 1);
    let result = if n == 1 {
        vec![-BigInt::one(), BigInt::one()]
    } else {
        let mut num = vec![BigInt::zero(); n as usize + 1];
        num[0] = -BigInt::one();
        num[n as usize] = BigInt::one();
        let mut cur = num;
        for d in 1..n {
            if n % d == 0 {
                let phi_d = cyclotomic_polynomial(d);
                cur = poly_div_exact(&cur, &phi_d);
            }
        }
        cur
    };
    let arc = Arc::new(result);
    cache.lock().unwrap().insert(n, arc.clone());
    arc
}

/// Exact division of integer polynomials (divisor monic, division known exact).
fn poly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let dd = den.len() - 1;
    debug_assert!(den[dd].is_one());
    let mut r = num.to_vec();
    let dn = r.len() - 1;
    let mut q = vec![BigInt::zero(); dn - dd + 1];
    for i in (0..q.len()).rev() {
        let c = r[i + dd].clone();
        if c.is_zero() {
            continue;
        }
        q[i] = c.clone();
        for k in 0..=dd {
            let v = &r[i + k] - &c * &den[k];
            r[i + k] = v;
        }
    }
    debug_assert!(r.iter().all(|c| c.is_zero()), "division was not exact");
    q
}
