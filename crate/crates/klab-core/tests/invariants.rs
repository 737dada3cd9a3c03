//! Randomized and property-based invariants across the exact-arithmetic and
//! Bruhat layers: valuation identities, cyclotomic equality against the
//! complex embedding, inverse round trips over a thousand unimodular
//! samples, and the Bruhat cell partition.

use klab_core::bruhat::{bruhat_decompose, moduli_of};
use klab_core::exact::{rat_int, vp, CyclotomicValue, Rational, RationalMatrix, Valuation};
use klab_core::weyl::WeylElement;
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SMALL_PRIMES: [u64; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

fn vp_val(x: &Rational, p: u64) -> Valuation {
    vp(x, p).unwrap().value
}

proptest! {
    #[test]
    fn valuation_is_additive_and_ultrametric(
        an in -200i64..200, ad in 1i64..200,
        bn in -200i64..200, bd in 1i64..200,
        pidx in 0usize..SMALL_PRIMES.len(),
    ) {
        let p = SMALL_PRIMES[pidx];
        let x = Rational::new(BigInt::from(an), BigInt::from(ad));
        let y = Rational::new(BigInt::from(bn), BigInt::from(bd));
        // v(xy) = v(x) + v(y)
        match (vp_val(&x, p), vp_val(&y, p)) {
            (Valuation::Finite(a), Valuation::Finite(b)) => {
                prop_assert_eq!(vp_val(&(&x * &y), p), Valuation::Finite(a + b));
                // v(x+y) >= min, with equality when the valuations differ
                let s = vp_val(&(&x + &y), p);
                prop_assert!(s.at_least(a.min(b)));
                if a != b {
                    prop_assert_eq!(s, Valuation::Finite(a.min(b)));
                }
            }
            _ => {
                // one factor is zero
                prop_assert_eq!(vp_val(&(&x * &y), p), Valuation::Infinite);
            }
        }
    }

    #[test]
    fn cyclotomic_equality_matches_embedding(
        coeffs_a in prop::collection::vec(-4i64..=4, 6),
        coeffs_b in prop::collection::vec(-4i64..=4, 6),
        la in 1u64..=12, lb in 1u64..=12,
    ) {
        let build = |coeffs: &[i64], l: u64| {
            let mut acc = CyclotomicValue::zero_at_level(l);
            for (k, &c) in coeffs.iter().enumerate() {
                let root = CyclotomicValue::root(k as i64, l).unwrap();
                acc = acc.add(&root.scale(&BigInt::from(c)));
            }
            acc
        };
        let a = build(&coeffs_a, la);
        let b = build(&coeffs_b, lb);
        let (ra, ia, _) = a.embed();
        let (rb, ib, _) = b.embed();
        let dist = ((ra - rb).powi(2) + (ia - ib).powi(2)).sqrt();
        if a.eq_exact(&b) {
            prop_assert!(dist < 1e-9, "exact equality but embeddings differ by {dist}");
        }
        if dist > 1e-6 {
            prop_assert!(!a.eq_exact(&b), "embeddings {dist} apart but values exactly equal");
        }
        // equality is reflexive and symmetric on these samples
        prop_assert!(a.eq_exact(&a));
        prop_assert_eq!(a.eq_exact(&b), b.eq_exact(&a));
    }

    #[test]
    fn cyclotomic_ring_axioms(
        xa in -3i64..=3, la in 1u64..=10,
        xb in -3i64..=3, lb in 1u64..=10,
        xc in -3i64..=3, lc in 1u64..=10,
    ) {
        let a = CyclotomicValue::root(xa, la).unwrap().scale(&BigInt::from(xa.abs() + 1));
        let b = CyclotomicValue::root(xb, lb).unwrap().scale(&BigInt::from(xb.abs() + 1));
        let c = CyclotomicValue::root(xc, lc).unwrap();
        prop_assert!(a.add(&b).eq_exact(&b.add(&a)));
        prop_assert!(a.mul(&b).eq_exact(&b.mul(&a)));
        prop_assert!(a.mul(&b.add(&c)).eq_exact(&a.mul(&b).add(&a.mul(&c))));
        prop_assert!(a.sub(&a).is_zero());
    }
}

/// Random element of SL_n(Q) as a product of unitriangular matrices with
/// small rational entries and a determinant-one torus.
fn random_sl_q(n: usize, rng: &mut StdRng) -> RationalMatrix {
    let mut upper = RationalMatrix::identity(n);
    let mut lower = RationalMatrix::identity(n);
    let mut upper2 = RationalMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            upper.set(i, j, Rational::new(BigInt::from(rng.gen_range(-6i64..=6)), BigInt::from(rng.gen_range(1i64..=4))));
            lower.set(j, i, Rational::new(BigInt::from(rng.gen_range(-6i64..=6)), BigInt::from(rng.gen_range(1i64..=4))));
            upper2.set(i, j, Rational::new(BigInt::from(rng.gen_range(-6i64..=6)), BigInt::from(rng.gen_range(1i64..=4))));
        }
    }
    let mut torus = vec![Rational::new(BigInt::from(1), BigInt::from(1)); n];
    let mut det = Rational::new(BigInt::from(1), BigInt::from(1));
    for t in torus.iter_mut().take(n - 1) {
        let v = Rational::new(BigInt::from(rng.gen_range(1i64..=5)), BigInt::from(rng.gen_range(1i64..=5)));
        det *= &v;
        *t = v;
    }
    torus[n - 1] = det.recip();
    upper.mul(&RationalMatrix::diagonal(&torus)).mul(&lower).mul(&upper2)
}

#[test]
fn inverse_round_trip_on_a_thousand_unimodular_samples() {
    let mut rng = StdRng::seed_from_u64(20260810);
    for k in 0..1000 {
        let n = 2 + (k % 4); // dimensions 2..=5
        let g = random_sl_q(n, &mut rng);
        assert_eq!(g.det(), rat_int(1), "sample {k} is not unimodular");
        let inv = g.inverse().unwrap();
        assert_eq!(g.mul(&inv), RationalMatrix::identity(n), "g g^-1 != I at sample {k}");
        assert_eq!(inv.mul(&g), RationalMatrix::identity(n), "g^-1 g != I at sample {k}");
    }
}

/// Random element of SL_n(Z) with entries bounded by 50, generated by
/// elementary row operations and rejection.
fn random_sl_z(n: usize, rng: &mut StdRng) -> RationalMatrix {
    'outer: loop {
        let mut g = RationalMatrix::identity(n);
        for _ in 0..rng.gen_range(3..10) {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n);
            while j == i {
                j = rng.gen_range(0..n);
            }
            let k = rat_int(rng.gen_range(-3i64..=3));
            // row_i += k * row_j
            for col in 0..n {
                let v = g.get(i, col) + &k * g.get(j, col);
                g.set(i, col, v);
            }
        }
        for i in 0..n {
            for j in 0..n {
                if g.get(i, j).numer().magnitude() > &num_bigint::BigUint::from(50u32) {
                    continue 'outer;
                }
            }
        }
        return g;
    }
}

#[test]
fn bruhat_round_trip_and_cell_partition_on_a_thousand_samples() {
    let mut rng = StdRng::seed_from_u64(1729);
    let mut cells_seen = std::collections::HashSet::new();
    for k in 0..1000 {
        let n = 2 + (k % 3); // dimensions 2..=4
        let g = random_sl_z(n, &mut rng);
        let f = bruhat_decompose(&g).unwrap();
        // multiply-back is exact
        assert_eq!(f.product(), g, "round trip failed at sample {k}");
        // each sample lands in exactly one cell: the detected permutation is
        // a function of g, and the factorisation through any other Weyl
        // element would break uniqueness of the torus part
        cells_seen.insert((n, f.w.perm().to_vec()));
        // moduli are defined whenever g is integral
        let (c, signs) = moduli_of(&f).unwrap();
        assert_eq!(c.n(), n);
        assert_eq!(signs.len(), n);
    }
    assert!(cells_seen.len() > 3, "sampling never left the generic cell");
}

#[test]
fn generic_matrices_land_in_the_long_cell() {
    let mut rng = StdRng::seed_from_u64(42);
    let mut generic = 0u32;
    for _ in 0..300 {
        let n = 3;
        let g = random_sl_z(n, &mut rng);
        // all leading lower-left minors nonzero <=> long element
        let all_minors_nonzero = (1..n).all(|k| {
            let mut m = Vec::new();
            for i in n - k..n {
                let mut row = Vec::new();
                for j in 0..k {
                    row.push(g.get(i, j).clone());
                }
                m.push(row);
            }
            let mat = {
                let mut full = RationalMatrix::zero(k);
                for (i, row) in m.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        full.set(i, j, v.clone());
                    }
                }
                full
            };
            !num_traits::Zero::is_zero(&mat.det())
        });
        let f = bruhat_decompose(&g).unwrap();
        if all_minors_nonzero {
            generic += 1;
            assert_eq!(f.w, WeylElement::long_element(n), "generic sample not in the long cell");
        }
    }
    assert!(generic > 50, "generator produced too few generic samples ({generic})");
}

#[test]
fn weyl_representatives_are_unimodular_integral() {
    for n in 2..=6 {
        for w in WeylElement::all_admissible(n) {
            let rep = w.rep();
            assert!(rep.is_integral());
            assert_eq!(rep.det(), rat_int(1), "{w}");
        }
    }
}
