//! Weyl group elements of SL(n) with their fixed integral representatives.
//!
//! A representative is a signed permutation matrix of determinant +1. Block
//! anti-diagonal representatives `w_{d_1,...,d_r}` place the identity block
//! `I_{d_1}` in the bottom-left corner and `I_{d_r}` in the top-right, with
//! the sign correction (when the permutation is odd) on the first row. For
//! n = 3 this yields
//!
//! ```text
//! w_{1,2} = [0 1 0; 0 0 1; 1 0 0]     w_{2,1} = [0 0 1; 1 0 0; 0 1 0]
//! w_{1,1,1} = [0 0 -1; 0 1 0; 1 0 0]
//! ```
//!
//! The permutation of a representative sends row i to the column holding the
//! row's nonzero entry; a -1 entry defines the permutation just like a +1.

use crate::exact::{rat_int, RationalMatrix};

/// A Weyl element: permutation plus the sign pattern of its fixed
/// determinant-one representative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeylElement {
    n: usize,
    /// 0-based: row `i` has its nonzero entry in column `perm[i]`.
    perm: Vec<usize>,
    /// sign of that entry, `+1` except possibly in the first row
    signs: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WeylError {
    #[error("invalid partition {0:?} of {1}")]
    InvalidPartition(Vec<usize>, usize),
    #[error("not a permutation: {0:?}")]
    NotAPermutation(Vec<usize>),
}

fn permutation_sign(perm: &[usize]) -> i8 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1i8;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

impl WeylElement {
    /// Representative of an arbitrary permutation, sign placed in the first
    /// row when the permutation is odd.
    pub fn from_permutation(perm: Vec<usize>) -> Result<Self, WeylError> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &j in &perm {
            if j >= n || seen[j] {
                return Err(WeylError::NotAPermutation(perm));
            }
            seen[j] = true;
        }
        let mut signs = vec![1i8; n];
        signs[0] = permutation_sign(&perm);
        Ok(WeylElement { n, perm, signs })
    }

    /// Block anti-diagonal representative `w_{d_1,...,d_r}`, with `I_{d_1}`
    /// in the bottom-left corner.
    pub fn from_partition(n: usize, parts: &[usize]) -> Result<Self, WeylError> {
        if parts.is_empty() || parts.iter().any(|&d| d == 0) || parts.iter().sum::<usize>() != n {
            return Err(WeylError::InvalidPartition(parts.to_vec(), n));
        }
        let mut perm = vec![0usize; n];
        let mut col_start = 0;
        let mut row_end = n;
        for &d in parts {
            for k in 0..d {
                perm[row_end - d + k] = col_start + k;
            }
            row_end -= d;
            col_start += d;
        }
        Self::from_permutation(perm)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_partition(n, &[n]).unwrap()
    }

    /// Long element `w_{1,...,1}`.
    pub fn long_element(n: usize) -> Self {
        Self::from_partition(n, &vec![1; n]).unwrap()
    }

    /// `w_* = w_{1,n-2,1}` (equal to the long element for n = 3).
    pub fn w_star(n: usize) -> Self {
        assert!(n >= 3);
        Self::from_partition(n, &[1, n - 2, 1]).unwrap()
    }

    /// `w_1 = w_{1,n-1}`.
    pub fn w_one(n: usize) -> Self {
        assert!(n >= 2);
        Self::from_partition(n, &[1, n - 1]).unwrap()
    }

    /// `w_1' = w_{n-1,1}`.
    pub fn w_one_prime(n: usize) -> Self {
        assert!(n >= 2);
        Self::from_partition(n, &[n - 1, 1]).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 0-based image of row `i`.
    pub fn sigma(&self, i: usize) -> usize {
        self.perm[i]
    }

    /// 0-based preimage of column `j`.
    pub fn sigma_inv(&self, j: usize) -> usize {
        self.perm.iter().position(|&c| c == j).unwrap()
    }

    pub fn sign(&self, i: usize) -> i8 {
        self.signs[i]
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// The fixed matrix representative in SL_n(Z).
    pub fn rep(&self) -> RationalMatrix {
        let mut m = RationalMatrix::zero(self.n);
        for i in 0..self.n {
            m.set(i, self.perm[i], rat_int(self.signs[i] as i64));
        }
        m
    }

    /// Decompose the permutation as a block anti-diagonal form, if any.
    pub fn admissible_partition(&self) -> Option<Vec<usize>> {
        let n = self.n;
        let inv: Vec<usize> = {
            let mut v = vec![0; n];
            for (i, &j) in self.perm.iter().enumerate() {
                v[j] = i;
            }
            v
        };
        let mut parts = Vec::new();
        let mut row_end = n;
        let mut col_start = 0;
        while col_start < n {
            let r0 = inv[col_start];
            if r0 >= row_end {
                return None;
            }
            let d = row_end - r0;
            if col_start + d > n {
                return None;
            }
            for k in 0..d {
                if self.perm[r0 + k] != col_start + k {
                    return None;
                }
            }
            parts.push(d);
            row_end = r0;
            col_start += d;
        }
        (row_end == 0).then_some(parts)
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible_partition().is_some()
    }

    /// Free positions of `U_w = w^{-1} U^T w  ∩  U`: the 0-based pairs
    /// `(k, l)` with `k < l` and `sigma^{-1}(k) > sigma^{-1}(l)`.
    pub fn uw_support(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut inv = vec![0; n];
        for (i, &j) in self.perm.iter().enumerate() {
            inv[j] = i;
        }
        let mut supp = Vec::new();
        for k in 0..n {
            for l in k + 1..n {
                if inv[k] > inv[l] {
                    supp.push((k, l));
                }
            }
        }
        supp
    }

    /// All admissible Weyl elements for dimension `n`, one per composition.
    pub fn all_admissible(n: usize) -> Vec<WeylElement> {
        let mut out = Vec::new();
        let mut parts = Vec::new();
        fn rec(n: usize, left: usize, parts: &mut Vec<usize>, out: &mut Vec<WeylElement>) {
            if left == 0 {
                out.push(WeylElement::from_partition(n, parts).unwrap());
                return;
            }
            for d in 1..=left {
                parts.push(d);
                rec(n, left - d, parts, out);
                parts.pop();
            }
        }
        rec(n, n, &mut parts, &mut out);
        out
    }
}

impl std::fmt::Display for WeylElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.admissible_partition() {
            Some(p) => write!(
                f,
                "w_{{{}}}",
                p.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
            ),
            None => write!(f, "perm{:?}", self.perm.iter().map(|&j| j + 1).collect::<Vec<_>>()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn explicit_n3_representatives() {
        let w1 = WeylElement::w_one(3);
        assert_eq!(w1.rep(), RationalMatrix::from_int_rows(&[&[0, 1, 0], &[0, 0, 1], &[1, 0, 0]]));
        let w1p = WeylElement::w_one_prime(3);
        assert_eq!(w1p.rep(), RationalMatrix::from_int_rows(&[&[0, 0, 1], &[1, 0, 0], &[0, 1, 0]]));
        let wl = WeylElement::long_element(3);
        assert_eq!(wl.rep(), RationalMatrix::from_int_rows(&[&[0, 0, -1], &[0, 1, 0], &[1, 0, 0]]));
        assert_eq!(wl, WeylElement::w_star(3));
    }

    #[test]
    fn identity_from_full_block() {
        let id = WeylElement::from_partition(2, &[2]).unwrap();
        assert_eq!(id.rep(), RationalMatrix::identity(2));
    }

    #[test]
    fn w_star_n4_matches_block_form() {
        let w = WeylElement::w_star(4);
        assert_eq!(
            w.rep(),
            RationalMatrix::from_int_rows(&[
                &[0, 0, 0, -1],
                &[0, 1, 0, 0],
                &[0, 0, 1, 0],
                &[1, 0, 0, 0]
            ])
        );
        assert!(w.is_admissible());
    }

    #[test]
    fn all_representatives_are_unimodular() {
        for n in 2..=5 {
            for w in WeylElement::all_admissible(n) {
                assert!(w.rep().det().is_one(), "{w} has det != 1");
            }
        }
    }

    #[test]
    fn partition_recovery() {
        for n in 2..=5 {
            for w in WeylElement::all_admissible(n) {
                let p = w.admissible_partition().expect("admissible by construction");
                assert_eq!(WeylElement::from_partition(n, &p).unwrap(), w);
            }
        }
    }

    #[test]
    fn transposition_fixing_last_point_is_not_admissible() {
        // permutation (1 2) on 3 letters, exhaustive check against all partitions
        let w = WeylElement::from_permutation(vec![1, 0, 2]).unwrap();
        assert!(!w.is_admissible());
        for parts in [vec![3], vec![1, 2], vec![2, 1], vec![1, 1, 1]] {
            assert_ne!(WeylElement::from_partition(3, &parts).unwrap().perm(), w.perm());
        }
    }

    #[test]
    fn invalid_partitions_rejected() {
        assert!(WeylElement::from_partition(3, &[2, 2]).is_err());
        assert!(WeylElement::from_partition(3, &[0, 3]).is_err());
        assert!(WeylElement::from_partition(3, &[]).is_err());
    }

    #[test]
    fn uw_support_n3() {
        // U_{w_1'} keeps columns (1,3) and (2,3); U_{w_l} is all of U
        let w1p = WeylElement::w_one_prime(3);
        assert_eq!(w1p.uw_support(), vec![(0, 2), (1, 2)]);
        let wl = WeylElement::long_element(3);
        assert_eq!(wl.uw_support(), vec![(0, 1), (0, 2), (1, 2)]);
        let id = WeylElement::identity(3);
        assert!(id.uw_support().is_empty());
    }
}
