//! Fast-path counters for local Kloosterman sets of the special Weyl
//! elements, transcribed from the explicit coordinate computations for
//! GL(3) and from the row-by-row resolution of the support conditions of
//! the `w_*` parametrisation in higher rank.
//!
//! All fast paths are exact for ramified primes (`e = v_p(q) >= 1`, where
//! the level subgroup has an exact Iwahori factorisation). Unramified
//! parameters fall back to the generic engine.

use super::{count_local, EnumOptions, KsetError, LocalSpec};
use crate::bruhat::ModulusVector;
use crate::exact::{rat_int, Rational, Valuation};
use crate::exact::{vp, vp_int};
use crate::weyl::WeylElement;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// p-adic data of one modulus entry: valuation and unit part.
fn split(p: u64, c: u64) -> (i64, u64) {
    let mut v = 0i64;
    let mut u = c;
    while u % p == 0 {
        u /= p;
        v += 1;
    }
    (v, u)
}

/// `#X^{(p)}_{q,w}(c)` for n = 3 and `w` one of `w_1, w_1', w_l`, via the
/// explicit parametrisations of the ramified counting argument. Exact for
/// `e >= 1`; other parameters fall back to [`count_local`].
pub fn fast_count_gl3(
    local: &LocalSpec,
    w: &WeylElement,
    c: &ModulusVector,
    opts: &EnumOptions,
) -> Result<u64, KsetError> {
    assert_eq!(c.n(), 3, "fast_count_gl3 is specific to n = 3");
    assert_eq!(w.n(), 3);
    let (p, e) = (local.p, local.e as i64);
    if e == 0 {
        return count_local(local, 3, w, c, opts);
    }
    match w.admissible_partition().as_deref() {
        // w_1': the primed boxes x', y', z', alpha', beta' with the final
        // congruence solved for x'; count p^{r + 2t - e} on the support
        // t >= 2e, r >= 2e
        Some([2, 1]) => {
            let (t, _) = split(p, c.entries()[0]);
            let (bt, _) = split(p, c.entries()[1]);
            let r = bt - t;
            if t < 2 * e || r < 2 * e {
                return Ok(0);
            }
            to_u64(&BigInt::from(p).pow((r + 2 * t - e) as u32))
        }
        // w_1 mirrors w_1' at the reversed moduli through the cell involution
        Some([1, 2]) => {
            let (t, _) = split(p, c.entries()[1]);
            let (bt, _) = split(p, c.entries()[0]);
            let r = bt - t;
            if t < 2 * e || r < 2 * e {
                return Ok(0);
            }
            to_u64(&BigInt::from(p).pow((r + 2 * t - e) as u32))
        }
        // w_l = w_* for n = 3: normalise to the geometric shape
        // (p^alpha, s p^{alpha+beta}) and run the stratified count
        Some([1, 1, 1]) => {
            let (v1, u1) = split(p, c.entries()[0]);
            let (v2, u2) = split(p, c.entries()[1]);
            // moduli reversal is an exact symmetry; arrange beta >= 0
            let (alpha, beta, ua, ub) = if v1 <= v2 {
                (v1, v2 - v1, u1, u2)
            } else {
                (v2, v1 - v2, u2, u1)
            };
            // a common unit scaling clears c_1's unit part; only the ratio
            // s = u_b / u_a survives, and only through v_p(1 - s)
            let s = Rational::new(BigInt::from(ub), BigInt::from(ua));
            let nu0 = vp(&(rat_int(1) - &s), p).expect("p prime").value;
            wstar_stratified_count(3, p, e, alpha, beta, nu0)
        }
        _ => count_local(local, 3, w, c, opts),
    }
}

/// `#X^{(p)}_{q,w_*}(c(alpha,beta;s))` with
/// `c(alpha,beta;s) = (p^alpha, p^{alpha+beta}s, ..., p^{alpha+(n-2)beta}s^{n-2})`,
/// by row-by-row resolution of the support conditions of the lower
/// unitriangular matrix `u'(x,u)`. Exact for `e >= 1` and in particular 0
/// whenever `alpha < n e`; unramified parameters fall back to
/// [`count_local`].
pub fn fast_count_wstar(
    local: &LocalSpec,
    n: usize,
    alpha: i64,
    beta: i64,
    s_unit: u64,
    opts: &EnumOptions,
) -> Result<u64, KsetError> {
    assert!(n >= 3 && alpha >= 0 && beta >= 0);
    assert!(s_unit % local.p != 0, "s must be a p-adic unit");
    let (p, e) = (local.p, local.e as i64);
    if e == 0 {
        let c = geometric_moduli(n, p, alpha, beta, s_unit)?;
        return count_local(local, n, &WeylElement::w_star(n), &c, opts);
    }
    let nu0 = vp_int(&(BigInt::one() - BigInt::from(s_unit)), p);
    wstar_stratified_count(n, p, e, alpha, beta, nu0)
}

/// The moduli vector `c(alpha,beta;s)`, for the brute-force cross-checks.
pub fn geometric_moduli(n: usize, p: u64, alpha: i64, beta: i64, s: u64) -> Result<ModulusVector, KsetError> {
    let mut c = Vec::with_capacity(n - 1);
    for i in 0..(n - 1) as u32 {
        let v = p
            .checked_pow(alpha as u32 + i * beta as u32)
            .and_then(|x| x.checked_mul(s.checked_pow(i)?))
            .ok_or_else(|| KsetError::Invalid("geometric moduli overflow u64".into()))?;
        c.push(v);
    }
    Ok(ModulusVector::new(c)?)
}

/// Exact evaluation of the stratified integral
///
/// ```text
/// #X = N_{p^e} * p^{(n-1)alpha + (n-1)(n-2)/2 * beta - e} * (1 - 1/p)^{n-2}
///      * sum_{m in Z_{>=0}^{n-2}} prod_k mu( m_k - min(alpha - ne, m_1..m_{k-1}) + e )
/// ```
///
/// by dynamic programming over the running minimum; the geometric tails of
/// the m-sums are closed forms, so the whole count is a single exact
/// rational that must come out a nonnegative integer.
fn wstar_stratified_count(
    n: usize,
    p: u64,
    e: i64,
    alpha: i64,
    beta: i64,
    nu0: Valuation,
) -> Result<u64, KsetError> {
    assert!(e >= 1);
    let ne = (n as i64) * e;
    if alpha < ne {
        return Ok(0);
    }
    let cap = alpha - ne; // the running minimum starts here and only decreases
    let nvars = n - 2;
    let p_rat = rat_int(p as i64);
    let pe_inv = Rational::new(BigInt::one(), BigInt::from(p).pow(e as u32));
    let geom = &p_rat / (&p_rat - Rational::one()); // sum_{d >= 0} p^{-d}

    let mut v: Vec<Rational> = vec![Rational::one(); (cap + 1) as usize];
    for _ in 0..nvars {
        let mut next: Vec<Rational> = Vec::with_capacity((cap + 1) as usize);
        for state in 0..=cap {
            let mut acc = Rational::zero();
            match (beta > 0, nu0) {
                (true, _) => {
                    // mu = p^{-e} only for m <= state - e
                    for m in 0..=(state - e).min(state - 1) {
                        acc += &pe_inv * &v[m as usize];
                    }
                }
                (false, Valuation::Finite(v0)) if v0 < e => {
                    for m in 0..=(state - e + v0).min(state - 1) {
                        acc += &pe_inv * &v[m as usize];
                    }
                }
                _ => {
                    // mu = p^{-e} below the state, geometric decay above it
                    for m in 0..state {
                        acc += &pe_inv * &v[m as usize];
                    }
                    acc += &pe_inv * &geom * &v[state as usize];
                }
            }
            next.push(acc);
        }
        v = next;
    }

    let exp = (n as i64 - 1) * alpha + ((n as i64 - 1) * (n as i64 - 2) / 2) * beta - e;
    let one_minus_pinv = Rational::one() - (&p_rat).recip();
    let mut total = Rational::from_integer(super::unipotent_index(n, p, e as u32))
        * Rational::from_integer(BigInt::from(p).pow(exp as u32));
    for _ in 0..nvars {
        total *= &one_minus_pinv;
    }
    total *= &v[cap as usize];
    if !crate::exact::is_integer(&total) || total.is_negative() {
        return Err(KsetError::Invalid(format!(
            "stratified count is not a nonnegative integer: {total}"
        )));
    }
    to_u64(&total.to_integer())
}

fn to_u64(x: &BigInt) -> Result<u64, KsetError> {
    x.to_u64()
        .ok_or_else(|| KsetError::Invalid(format!("count {x} does not fit in u64")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ksets::LocalSpec;

    fn mv(c: &[u64]) -> ModulusVector {
        ModulusVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn w1_prime_indicator_examples() {
        let local = LocalSpec::new(2, 1);
        let w1p = WeylElement::w_one_prime(3);
        // p^{2e} | c_1 fails: 4 does not divide 2
        let got = fast_count_gl3(&local, &w1p, &mv(&[2, 4]), &EnumOptions::default()).unwrap();
        assert_eq!(got, 0);
    }

    #[test]
    fn w_l_congruence_condition() {
        // 3e <= min valuation < 4e requires c_1 ≡ c_2 mod p^{4e}
        let local = LocalSpec::new(2, 1);
        let wl = WeylElement::long_element(3);
        let got = fast_count_gl3(&local, &wl, &mv(&[8, 16]), &EnumOptions::default()).unwrap();
        assert_eq!(got, 0);
        // equal moduli pass the congruence and are counted
        let got = fast_count_gl3(&local, &wl, &mv(&[8, 8]), &EnumOptions::default()).unwrap();
        let brute = count_local(&local, 3, &wl, &mv(&[8, 8]), &EnumOptions::default()).unwrap();
        assert_eq!(got, brute);
        assert!(got > 0);
    }

    #[test]
    fn gl3_fast_counts_match_brute_force() {
        let opts = EnumOptions::default();
        for (p, e) in [(2u64, 1u32), (2, 2), (3, 1)] {
            let local = LocalSpec::new(p, e);
            for w in [
                WeylElement::w_one(3),
                WeylElement::w_one_prime(3),
                WeylElement::long_element(3),
            ] {
                for a in 0..=5i64 {
                    for b in 0..=5i64 {
                        if (e == 2 || p == 3) && a.max(b) > 4 {
                            continue;
                        }
                        let c = mv(&[p.pow(a as u32), p.pow(b as u32)]);
                        let fast = fast_count_gl3(&local, &w, &c, &opts).unwrap();
                        let brute = count_local(&local, 3, &w, &c, &opts).unwrap();
                        assert_eq!(fast, brute, "p={p} e={e} w={w} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn gl3_fast_counts_with_units() {
        let opts = EnumOptions::default();
        let local = LocalSpec::new(2, 1);
        let wl = WeylElement::long_element(3);
        for c in [mv(&[8, 24]), mv(&[24, 8]), mv(&[40, 8]), mv(&[16, 48]), mv(&[48, 16])] {
            let fast = fast_count_gl3(&local, &wl, &c, &opts).unwrap();
            let brute = count_local(&local, 3, &wl, &c, &opts).unwrap();
            assert_eq!(fast, brute, "c={c}");
        }
    }

    #[test]
    fn wstar_emptiness_below_n_e() {
        let local = LocalSpec::new(2, 1);
        for alpha in 0..4i64 {
            for beta in 0..=2i64 {
                let got = fast_count_wstar(&local, 4, alpha, beta, 1, &EnumOptions::default()).unwrap();
                assert_eq!(got, 0, "alpha={alpha} beta={beta}");
            }
        }
    }

    #[test]
    fn wstar_fast_counts_match_brute_force() {
        let opts = EnumOptions::default();
        let local = LocalSpec::new(2, 1);
        for alpha in 4..=5i64 {
            for beta in 0..=1i64 {
                for s in [1u64, 3] {
                    let fast = fast_count_wstar(&local, 4, alpha, beta, s, &opts).unwrap();
                    let c = geometric_moduli(4, 2, alpha, beta, s).unwrap();
                    let brute = count_local(&local, 4, &WeylElement::w_star(4), &c, &opts).unwrap();
                    assert_eq!(fast, brute, "alpha={alpha} beta={beta} s={s}");
                }
            }
        }
    }

    #[test]
    fn wstar_unramified_falls_back_to_engine() {
        let local = LocalSpec::new(2, 0);
        let opts = EnumOptions::default();
        let fast = fast_count_wstar(&local, 4, 1, 0, 1, &opts).unwrap();
        let brute = count_local(&local, 4, &WeylElement::w_star(4), &mv(&[2, 2, 2]), &opts).unwrap();
        assert_eq!(fast, brute);
        assert!(fast > 0);
    }
}
