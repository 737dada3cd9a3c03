//! Dense square matrices over the rationals with exact elimination.
//!
//! Matrices here are tiny (n <= 6 in practice); clarity and exactness beat
//! asymptotics.

use super::{is_integer, ExactError, Rational};
use num_traits::{One, Signed, Zero};
use std::fmt;

/// A square matrix with exact rational entries, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalMatrix {
    n: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zero(n: usize) -> Self {
        RationalMatrix {
            n,
            entries: vec![Rational::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        RationalMatrix {
            n,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    /// Diagonal matrix from its diagonal entries.
    pub fn diagonal(d: &[Rational]) -> Self {
        let mut m = Self::zero(d.len());
        for (i, x) in d.iter().enumerate() {
            m.set(i, i, x.clone());
        }
        m
    }

    /// Convenience constructor from integer entries.
    pub fn from_int_rows(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| super::rat_int(x)).collect())
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.entries[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let cur = out.get(i, j) + a * b;
                        out.set(i, j, cur);
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Exact determinant by fraction-friendly Gaussian elimination.
    pub fn det(&self) -> Rational {
        let n = self.n;
        let mut m = self.clone();
        let mut det = Rational::one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !m.get(r, col).is_zero());
            let Some(p) = pivot else {
                return Rational::zero();
            };
            if p != col {
                for j in 0..n {
                    let a = m.get(p, j).clone();
                    let b = m.get(col, j).clone();
                    m.set(p, j, b);
                    m.set(col, j, a);
                }
                det = -det;
            }
            let pv = m.get(col, col).clone();
            det *= pv.clone();
            for r in col + 1..n {
                let f = m.get(r, col) / &pv;
                if f.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = m.get(r, j) - &f * m.get(col, j);
                    m.set(r, j, v);
                }
            }
        }
        det
    }

    /// Exact inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<Self, ExactError> {
        let n = self.n;
        let mut m = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| !m.get(r, col).is_zero());
            let Some(p) = pivot else {
                return Err(ExactError::Singular);
            };
            if p != col {
                for j in 0..n {
                    let (a, b) = (m.get(p, j).clone(), m.get(col, j).clone());
                    m.set(p, j, b);
                    m.set(col, j, a);
                    let (a, b) = (inv.get(p, j).clone(), inv.get(col, j).clone());
                    inv.set(p, j, b);
                    inv.set(col, j, a);
                }
            }
            let pv = m.get(col, col).clone();
            for j in 0..n {
                let v = m.get(col, j) / &pv;
                m.set(col, j, v);
                let v = inv.get(col, j) / &pv;
                inv.set(col, j, v);
            }
            for r in 0..n {
                if r == col || m.get(r, col).is_zero() {
                    continue;
                }
                let f = m.get(r, col).clone();
                for j in 0..n {
                    let v = m.get(r, j) - &f * m.get(col, j);
                    m.set(r, j, v);
                    let v = inv.get(r, j) - &f * inv.get(col, j);
                    inv.set(r, j, v);
                }
            }
        }
        Ok(inv)
    }

    /// `(self^-1)^T`, used by the cell involution.
    pub fn inverse_transpose(&self) -> Result<Self, ExactError> {
        Ok(self.inverse()?.transpose())
    }

    /// Exact rank via elimination.
    pub fn rank_of_submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> usize {
        let rs: Vec<usize> = rows.collect();
        let cs: Vec<usize> = cols.collect();
        let mut m: Vec<Vec<Rational>> = rs
            .iter()
            .map(|&i| cs.iter().map(|&j| self.get(i, j).clone()).collect())
            .collect();
        let (h, w) = (m.len(), cs.len());
        let mut rank = 0;
        let mut row = 0;
        for col in 0..w {
            let pivot = (row..h).find(|&r| !m[r][col].is_zero());
            let Some(p) = pivot else { continue };
            m.swap(row, p);
            let pv = m[row][col].clone();
            for r in row + 1..h {
                let f = &m[r][col] / &pv;
                if f.is_zero() {
                    continue;
                }
                for c in col..w {
                    let v = &m[r][c] - &f * &m[row][c];
                    m[r][c] = v;
                }
            }
            rank += 1;
            row += 1;
            if row == h {
                break;
            }
        }
        rank
    }

    pub fn is_upper_unitriangular(&self) -> bool {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let e = self.get(i, j);
                if i == j && !e.is_one() {
                    return false;
                }
                if i > j && !e.is_zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_integral(&self) -> bool {
        self.entries.iter().all(is_integer)
    }

    /// True iff every entry lies in `[0, 1)` off the diagonal pattern; used
    /// for canonical unipotent representatives.
    pub fn strict_upper_in_unit_box(&self) -> bool {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                let e = self.get(i, j);
                if e.is_negative() || *e >= Rational::one() {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[ {} ]", row.join("  "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn det_and_inverse() {
        let m = RationalMatrix::from_int_rows(&[&[2, 1], &[3, 2]]);
        assert_eq!(m.det(), rat(1, 1));
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), RationalMatrix::identity(2));
        assert_eq!(inv.mul(&m), RationalMatrix::identity(2));
    }

    #[test]
    fn singular_rejected() {
        let m = RationalMatrix::from_int_rows(&[&[1, 2], &[2, 4]]);
        assert_eq!(m.det(), rat(0, 1));
        assert!(m.inverse().is_err());
    }

    #[test]
    fn rank_of_corners() {
        let m = RationalMatrix::from_int_rows(&[&[0, 1, 0], &[0, 0, 1], &[1, 0, 0]]);
        // lower-left 1x1 corner has rank 1, the 2x2 rows {2,3} x cols {1,2} rank 1
        assert_eq!(m.rank_of_submatrix(2..3, 0..1), 1);
        assert_eq!(m.rank_of_submatrix(1..3, 0..2), 1);
        assert_eq!(m.rank_of_submatrix(0..3, 0..3), 3);
    }
}
