use super::*;
use crate::exact::rat;

fn mv(c: &[u64]) -> ModulusVector {
    ModulusVector::new(c.to_vec()).unwrap()
}

fn totient(c: u64) -> u64 {
    (1..=c).filter(|&a| num_integer::gcd(a, c) == 1).count() as u64
}

#[test]
fn n2_level_one_counts_are_totients() {
    let spec = LatticeSpec::new(2, 1);
    let wl = WeylElement::long_element(2);
    for c in 1..=30 {
        let got = count_global(&spec, &wl, &mv(&[c]), &EnumOptions::default()).unwrap();
        assert_eq!(got, totient(c), "c = {c}");
    }
}

#[test]
fn n2_level_one_modulus_five_pairs() {
    // oracle: the classical congruence a d ≡ 1 mod 5
    let spec = LatticeSpec::new(2, 1);
    let wl = WeylElement::long_element(2);
    let en = enumerate_global(&spec, &wl, &mv(&[5]), &EnumOptions::default()).unwrap();
    let mut got: Vec<(Rational, Rational)> = en
        .pairs
        .iter()
        .map(|p| (p.x.get(0, 1).clone(), p.y.get(0, 1).clone()))
        .collect();
    got.sort();
    let mut want = Vec::new();
    for a in 1..5u64 {
        for d in 1..5u64 {
            if (a * d) % 5 == 1 {
                want.push((rat(a as i64, 5), rat(d as i64, 5)));
            }
        }
    }
    want.sort();
    assert_eq!(got, want);
    assert_eq!(en.stats.truncated, 0);
}

#[test]
fn n2_level_two_modulus_four() {
    // brute force over a,d mod 4 with a ≡ d ≡ 1 mod 2 and ad ≡ 1 mod 4
    let spec = LatticeSpec::new(2, 2);
    let wl = WeylElement::long_element(2);
    let en = enumerate_global(&spec, &wl, &mv(&[4]), &EnumOptions::default()).unwrap();
    let got: Vec<(Rational, Rational)> = en
        .pairs
        .iter()
        .map(|p| (p.x.get(0, 1).clone(), p.y.get(0, 1).clone()))
        .collect();
    assert_eq!(got, vec![(rat(1, 4), rat(1, 4)), (rat(3, 4), rat(3, 4))]);
    // and the set is empty unless q^2 | c
    let c2 = count_global(&spec, &wl, &mv(&[2]), &EnumOptions::default()).unwrap();
    assert_eq!(c2, 0);
}

#[test]
fn trivial_weyl_counts_unipotent_index() {
    // #X_{q,id}((1,1)) = N_q = q^{n(n-1)(n-2)/6}
    let id = WeylElement::identity(3);
    let one = mv(&[1, 1]);
    for (q, want) in [(1u64, 1u64), (2, 2), (3, 3), (4, 4)] {
        let spec = LatticeSpec::new(3, q);
        let got = count_global(&spec, &id, &one, &EnumOptions::default()).unwrap();
        assert_eq!(got, want, "q = {q}");
    }
}

#[test]
fn w_star_needs_q_cubed_divisibility() {
    // Lemma-style emptiness at n=3: nonempty needs q^3 | c_i; (2,2) at q=2 dies
    let spec = LatticeSpec::new(3, 2);
    let ws = WeylElement::w_star(3);
    let got = count_global(&spec, &ws, &mv(&[2, 2]), &EnumOptions::default()).unwrap();
    assert_eq!(got, 0);
}

#[test]
fn enumerated_pairs_round_trip_through_bruhat() {
    let spec = LatticeSpec::new(3, 1);
    for w in [
        WeylElement::identity(3),
        WeylElement::w_one(3),
        WeylElement::w_one_prime(3),
        WeylElement::long_element(3),
    ] {
        for c in [mv(&[1, 1]), mv(&[2, 1]), mv(&[2, 4]), mv(&[3, 3]), mv(&[6, 4])] {
            let en = enumerate_global(&spec, &w, &c, &EnumOptions::default()).unwrap();
            for pair in &en.pairs {
                let g = pair.gamma();
                assert!(spec.contains(&g), "membership failed for {w} c={c}");
                let f = bruhat_decompose(&g).unwrap();
                assert_eq!(f.w, w, "cell mismatch");
                let (c2, signs) = moduli_of(&f).unwrap();
                assert_eq!(c2, c);
                assert!(signs.iter().all(|&s| s == 1));
                // canonical form is reproduced exactly
                assert_eq!(canonicalize(&f.x, Side::Left, &f.w), pair.x);
                assert_eq!(canonicalize(&f.y, Side::Right, &f.w), pair.y);
            }
        }
    }
}

#[test]
fn bruhat_cells_partition_samples() {
    // every unimodular sample lands in exactly one cell; generic ones in the
    // long cell
    let g = RationalMatrix::from_int_rows(&[&[1, 2], &[2, 5]]);
    let f = bruhat_decompose(&g).unwrap();
    assert_eq!(f.w, WeylElement::long_element(2));
}

#[test]
fn local_count_away_from_support_is_one() {
    // p not dividing q c_1 ... c_{n-1}: the trivial coset only
    let local = LocalSpec::new(5, 0);
    for w in [WeylElement::identity(3), WeylElement::long_element(3)] {
        let got = count_local(&local, 3, &w, &mv(&[2, 3]), &EnumOptions::default()).unwrap();
        assert_eq!(got, 1, "w = {w}");
    }
}

#[test]
fn local_counts_factor_global_ones() {
    // property (2): the diagonal embedding into the product of local sets is
    // a bijection
    let spec = LatticeSpec::new(3, 1);
    let wl = WeylElement::long_element(3);
    for c in [mv(&[2, 2]), mv(&[4, 2]), mv(&[6, 2]), mv(&[12, 3])] {
        let global = count_global(&spec, &wl, &c, &EnumOptions::default()).unwrap();
        let crt = count_by_crt(&spec, &wl, &c, &EnumOptions::default()).unwrap();
        assert_eq!(global, crt, "c = {c}");
    }
}

#[test]
fn local_unit_scaling_away_from_level() {
    // property (4): prime-to-p unit parts do not change the local count
    let local = LocalSpec::new(3, 0);
    let wl = WeylElement::long_element(3);
    let a = count_local(&local, 3, &wl, &mv(&[15, 3]), &EnumOptions::default()).unwrap();
    let b = count_local(&local, 3, &wl, &mv(&[3, 3]), &EnumOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn w1_prime_local_emptiness_indicator() {
    // p | q: empty unless p^{2e} | c_1 and p^{4e} | c_2
    let local = LocalSpec::new(2, 1);
    let w1p = WeylElement::w_one_prime(3);
    let got = count_local(&local, 3, &w1p, &mv(&[2, 4]), &EnumOptions::default()).unwrap();
    assert_eq!(got, 0);
}

#[test]
fn canonicalize_left_examples() {
    // x_{12} = 7/3 reduces to 1/3
    let mut m = RationalMatrix::identity(2);
    m.set(0, 1, rat(7, 3));
    let c = canonicalize(&m, Side::Left, &WeylElement::long_element(2));
    assert_eq!(c.get(0, 1), &rat(1, 3));
    // identity stays put
    let id = RationalMatrix::identity(3);
    assert_eq!(canonicalize(&id, Side::Left, &WeylElement::long_element(3)), id);
    // general n=3 case: the correction u0 = canonical * x^{-1} is integral
    let mut x = RationalMatrix::identity(3);
    x.set(0, 1, rat(3, 2));
    x.set(0, 2, rat(-1, 4));
    x.set(1, 2, rat(5, 3));
    let canon = canonicalize(&x, Side::Left, &WeylElement::long_element(3));
    assert!(canon.strict_upper_in_unit_box());
    let u0 = canon.mul(&x.inverse().unwrap());
    assert!(u0.is_integral(), "difference is not an integral unipotent: {u0}");
}

#[test]
fn canonicalize_right_respects_support() {
    // for w_1' only the (1,3) and (2,3) entries are free
    let w = WeylElement::w_one_prime(3);
    let mut y = RationalMatrix::identity(3);
    y.set(0, 2, rat(9, 4));
    y.set(1, 2, rat(-2, 3));
    let canon = canonicalize(&y, Side::Right, &w);
    assert_eq!(canon.get(0, 2), &rat(1, 4));
    assert_eq!(canon.get(1, 2), &rat(1, 3));
    let u1 = y.inverse().unwrap().mul(&canon);
    assert!(u1.is_integral());
}

#[test]
fn stabilization_under_denominator_doubling() {
    let spec = LatticeSpec::new(3, 2);
    let wl = WeylElement::long_element(3);
    for c in [mv(&[8, 8]), mv(&[16, 8])] {
        let d0 = c.product();
        let base = count_global(&spec, &wl, &c, &EnumOptions::default()).unwrap();
        for d in [2 * d0, d0 * d0] {
            let opts = EnumOptions {
                denom_bound: Some(d),
                ..Default::default()
            };
            assert_eq!(count_global(&spec, &wl, &c, &opts).unwrap(), base, "c={c} d={d}");
        }
    }
}

#[test]
fn involution_maps_w1_to_w1_prime() {
    let spec = LatticeSpec::new(3, 1);
    let w1 = WeylElement::w_one(3);
    let w1p = WeylElement::w_one_prime(3);
    for c in [mv(&[4, 2]), mv(&[8, 2]), mv(&[9, 3])] {
        let side_a = enumerate_global(&spec, &w1, &c, &EnumOptions::default()).unwrap();
        let side_b = enumerate_global(&spec, &w1p, &c.op(), &EnumOptions::default()).unwrap();
        let mut images: Vec<CosetPair> = side_a
            .pairs
            .iter()
            .map(|p| involution_image(p).unwrap())
            .collect();
        images.sort();
        for im in &images {
            assert_eq!(im.w, w1p);
            assert_eq!(im.c, c.op());
        }
        assert_eq!(images, side_b.pairs, "bijection failed at c={c}");
        // the map inverts itself
        for p in &side_a.pairs {
            let back = involution_image(&involution_image(p).unwrap()).unwrap();
            assert_eq!(&back, p);
        }
    }
}

#[test]
fn involution_fixes_identity_coset() {
    let pair = CosetPair {
        x: RationalMatrix::identity(3),
        y: RationalMatrix::identity(3),
        w: WeylElement::identity(3),
        c: mv(&[1, 1]),
    };
    let im = involution_image(&pair).unwrap();
    assert_eq!(im, pair);
}

#[test]
fn parallel_enumeration_is_deterministic() {
    let spec = LatticeSpec::new(3, 1);
    let wl = WeylElement::long_element(3);
    let c = mv(&[6, 4]);
    let seq = enumerate_global(&spec, &wl, &c, &EnumOptions::default()).unwrap();
    let par = enumerate_global(&spec, &wl, &c, &EnumOptions::parallel()).unwrap();
    assert_eq!(seq.pairs, par.pairs);
}

#[test]
fn budget_errors_are_explicit() {
    let spec = LatticeSpec::new(3, 1);
    let wl = WeylElement::long_element(3);
    let opts = EnumOptions {
        max_nodes: 3,
        ..Default::default()
    };
    match count_global(&spec, &wl, &mv(&[12, 12]), &opts) {
        Err(KsetError::BudgetExceeded { visited, .. }) => assert!(visited > 3),
        other => panic!("expected budget error, got {other:?}"),
    }
}

#[test]
fn reduced_counts_match_enumeration_length() {
    // count_* run in the reduced unipotent quotient; the multiplicity must
    // recover the plain enumeration exactly
    for (q, w, c) in [
        (2u64, WeylElement::long_element(3), mv(&[8, 8])),
        (2, WeylElement::w_one_prime(3), mv(&[4, 16])),
        (1, WeylElement::long_element(3), mv(&[6, 4])),
        (3, WeylElement::identity(3), mv(&[1, 1])),
    ] {
        let spec = LatticeSpec::new(3, q);
        let en = enumerate_global(&spec, &w, &c, &EnumOptions::default()).unwrap();
        let cnt = count_global(&spec, &w, &c, &EnumOptions::default()).unwrap();
        assert_eq!(cnt, en.pairs.len() as u64, "q={q} w={w} c={c}");
    }
}
