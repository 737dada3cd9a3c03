//! Bruhat factorisation of unimodular rational matrices.
//!
//! Every g in SL_n(Q) factors uniquely as `g = x t w y` with `x` upper
//! unitriangular, `t` diagonal of determinant one, `w` the fixed Weyl
//! representative of its cell and `y` in `U_w(Q)`. The cell is detected from
//! the rank array of lower-left submatrices; the factors then fall out of an
//! exact bottom-up elimination.

use crate::exact::{is_integer, rat_int, ExactError, Rational, RationalMatrix};
use crate::weyl::WeylElement;
use num_traits::{One, Signed, Zero};

/// Modulus vector `c = (c_1, ..., c_{n-1})` of positive integers, with the
/// convention `c_0 = c_n = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModulusVector {
    c: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BruhatError {
    #[error("matrix must have determinant 1, got {0}")]
    NotUnimodular(String),
    #[error("not a lattice cell element: torus products are not integers")]
    NonIntegralModuli,
    #[error("moduli must be positive")]
    ZeroModulus,
    #[error(transparent)]
    Exact(#[from] ExactError),
}

impl ModulusVector {
    pub fn new(c: Vec<u64>) -> Result<Self, BruhatError> {
        if c.iter().any(|&x| x == 0) {
            return Err(BruhatError::ZeroModulus);
        }
        Ok(ModulusVector { c })
    }

    pub fn ones(n: usize) -> Self {
        ModulusVector { c: vec![1; n - 1] }
    }

    pub fn n(&self) -> usize {
        self.c.len() + 1
    }

    pub fn entries(&self) -> &[u64] {
        &self.c
    }

    /// `c_i` with the boundary convention `c_0 = c_n = 1`.
    pub fn ci(&self, i: usize) -> u64 {
        if i == 0 || i == self.n() {
            1
        } else {
            self.c[i - 1]
        }
    }

    /// Diagonal entries of `c^* = diag(1/c_{n-1}, c_{n-1}/c_{n-2}, ..., c_1)`:
    /// position i (1-based) holds `c_{n-i+1}/c_{n-i}`.
    pub fn c_star_diag(&self) -> Vec<Rational> {
        let n = self.n();
        (1..=n)
            .map(|i| Rational::new(self.ci(n - i + 1).into(), self.ci(n - i).into()))
            .collect()
    }

    pub fn c_star(&self) -> RationalMatrix {
        RationalMatrix::diagonal(&self.c_star_diag())
    }

    /// Reversed modulus vector `c_op = (c_{n-1}, ..., c_1)`.
    pub fn op(&self) -> Self {
        let mut c = self.c.clone();
        c.reverse();
        ModulusVector { c }
    }

    /// `c_1 c_2 ... c_{n-1}`.
    pub fn product(&self) -> u64 {
        self.c.iter().product()
    }
}

impl std::fmt::Display for ModulusVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({})",
            self.c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        )
    }
}

/// Exact Bruhat factorisation `g = x * diag(t) * w.rep() * y`.
#[derive(Debug, Clone)]
pub struct BruhatFactorization {
    pub x: RationalMatrix,
    /// Diagonal torus part; determinant 1 but entries may be negative.
    pub t: Vec<Rational>,
    pub w: WeylElement,
    pub y: RationalMatrix,
}

impl BruhatFactorization {
    /// Multiply the factors back together.
    pub fn product(&self) -> RationalMatrix {
        let t = RationalMatrix::diagonal(&self.t);
        self.x.mul(&t).mul(&self.w.rep()).mul(&self.y)
    }
}

/// Detect the Bruhat cell of `g` from the rank array of lower-left
/// submatrices: row `i` maps to column `j` exactly when the rank of the
/// lower-left corner increments in both directions at `(i, j)`.
fn cell_permutation(g: &RationalMatrix) -> Vec<usize> {
    let n = g.n();
    // r[a][b] = rank of rows a..n, cols 0..b
    let mut r = vec![vec![0usize; n + 1]; n + 1];
    for a in 0..=n {
        for b in 0..=n {
            r[a][b] = g.rank_of_submatrix(a..n, 0..b);
        }
    }
    let mut perm = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if r[i][j + 1] + r[i + 1][j] == r[i + 1][j + 1] + r[i][j] + 1 {
                perm[i] = j;
            }
        }
    }
    perm
}

/// Exact Bruhat factorisation of a determinant-one matrix.
pub fn bruhat_decompose(g: &RationalMatrix) -> Result<BruhatFactorization, BruhatError> {
    if !g.det().is_one() {
        return Err(BruhatError::NotUnimodular(g.det().to_string()));
    }
    let n = g.n();
    let w = WeylElement::from_permutation(cell_permutation(g)).expect("rank array yields a permutation");

    // Eliminate upwards: subtract multiples of lower rows (in ascending
    // leading-column order) so that row i keeps its leading entry at
    // sigma(i). The multipliers are exactly the entries of x.
    let mut b = g.clone();
    let mut x = RationalMatrix::identity(n);
    for i in (0..n.saturating_sub(1)).rev() {
        let mut lower: Vec<usize> = (i + 1..n).collect();
        lower.sort_by_key(|&k| w.sigma(k));
        for k in lower {
            let lead = b.get(k, w.sigma(k)).clone();
            let mu = b.get(i, w.sigma(k)) / &lead;
            if mu.is_zero() {
                continue;
            }
            for j in 0..n {
                let v = b.get(i, j) - &mu * b.get(k, j);
                b.set(i, j, v);
            }
            x.set(i, k, mu);
        }
    }

    let mut t = Vec::with_capacity(n);
    let mut y = RationalMatrix::identity(n);
    for i in 0..n {
        let lead = b.get(i, w.sigma(i)).clone();
        debug_assert!(!lead.is_zero());
        t.push(&lead * rat_int(w.sign(i) as i64));
        for j in 0..n {
            let v = b.get(i, j) / &lead;
            y.set(w.sigma(i), j, v);
        }
    }
    debug_assert!(y.is_upper_unitriangular());
    Ok(BruhatFactorization { x, t, w, y })
}

/// Extract the modulus vector from a factorisation: `c_i` is the absolute
/// value of the product of the last `i` torus entries. Returns the diagonal
/// sign matrix `s` with `t = s * c^*` alongside.
pub fn moduli_of(f: &BruhatFactorization) -> Result<(ModulusVector, Vec<i8>), BruhatError> {
    let n = f.t.len();
    let mut c = Vec::with_capacity(n - 1);
    let mut acc = Rational::one();
    for i in 1..n {
        acc *= &f.t[n - i];
        let a = acc.abs();
        if !is_integer(&a) || a.is_zero() {
            return Err(BruhatError::NonIntegralModuli);
        }
        c.push(num_traits::ToPrimitive::to_u64(&a.to_integer()).ok_or(BruhatError::NonIntegralModuli)?);
    }
    let signs = f.t.iter().map(|x| if x.is_negative() { -1 } else { 1 }).collect();
    Ok((ModulusVector::new(c)?, signs))
}

/// Rewrite `g = x t w y` with `t = s c^*` as `g = s * (x' c^* w y)` where the
/// sign matrix has been absorbed into `x` by conjugation. The element lies in
/// the Kloosterman set of modulus `c` only when `s` is trivial; the leading
/// sign is returned so callers can test exactly that.
pub fn normalize_signs(f: &BruhatFactorization) -> Result<(Vec<i8>, BruhatFactorization), BruhatError> {
    let (c, signs) = moduli_of(f)?;
    let n = f.t.len();
    let mut x = f.x.clone();
    for i in 0..n {
        for j in i + 1..n {
            let v = x.get(i, j) * rat_int((signs[i] * signs[j]) as i64);
            x.set(i, j, v);
        }
    }
    let norm = BruhatFactorization {
        x,
        t: c.c_star_diag(),
        w: f.w.clone(),
        y: f.y.clone(),
    };
    Ok((signs, norm))
}
