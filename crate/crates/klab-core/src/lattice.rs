//! Exhaustive norm-ball counting in principal congruence subgroups and the
//! lifting experiments to SL_n(Z/q).
//!
//! Enumeration is column-by-column backtracking with congruence and norm
//! pruning; unimodularity is enforced through the gcd of the maximal minors
//! of the chosen columns, and the final column is solved from the
//! determinant equation rather than enumerated.

use crate::exact::{rat_int, Rational};
use crate::verify::index_constants;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Frobenius,
    MaxEntry,
}

impl std::str::FromStr for Norm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frobenius" => Ok(Norm::Frobenius),
            "max-entry" | "max" => Ok(Norm::MaxEntry),
            other => Err(format!("unknown norm {other:?}; use frobenius or max-entry")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("enumeration budget exceeded after {visited} nodes")]
    BudgetExceeded { visited: u64 },
    #[error("radius must be at least 1")]
    RadiusTooSmall,
}

/// Exact count of `{gamma in Gamma(q) : ||gamma|| <= R}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallCount {
    pub n: usize,
    pub q: u64,
    pub radius: Rational,
    pub norm: Norm,
    pub count: u64,
}

struct BallSearch {
    n: usize,
    q: i64,
    norm: Norm,
    r2: Rational,
    entry_bound: i64,
    budget: u64,
    visited: u64,
}

impl BallSearch {
    fn norm_ok_partial(&self, cols: &[Vec<i64>]) -> bool {
        match self.norm {
            Norm::MaxEntry => true, // enforced per entry on generation
            Norm::Frobenius => {
                let s: i64 = cols.iter().flat_map(|c| c.iter().map(|&x| x * x)).sum();
                rat_int(s) <= self.r2
            }
        }
    }

    fn tick(&mut self) -> Result<(), LatticeError> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(LatticeError::BudgetExceeded { visited: self.visited });
        }
        Ok(())
    }

    /// Candidate values for entry (row, col): congruent to delta mod q and
    /// inside the entry box.
    fn entry_candidates(&self, row: usize, col: usize) -> Vec<i64> {
        let delta = if row == col { 1i64 } else { 0 };
        let mut out = Vec::new();
        let mut v = delta;
        while v.abs() <= self.entry_bound {
            out.push(v);
            v += self.q;
        }
        let mut v = delta - self.q;
        while v.abs() <= self.entry_bound {
            out.push(v);
            v -= self.q;
        }
        out.sort();
        out
    }

    /// gcd over all k x k minors of the chosen k columns; 1 is necessary for
    /// completion to determinant one.
    fn minor_gcd(&self, cols: &[Vec<i64>]) -> BigInt {
        let k = cols.len();
        let n = self.n;
        let mut g = BigInt::zero();
        let mut rows = (0..k).collect::<Vec<usize>>();
        loop {
            let m: Vec<Vec<i64>> = rows.iter().map(|&r| cols.iter().map(|c| c[r]).collect()).collect();
            g = g.gcd(&det_i64(&m));
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    return g;
                }
                i -= 1;
                if rows[i] < n - k + i {
                    rows[i] += 1;
                    for j in i + 1..k {
                        rows[j] = rows[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    return g;
                }
            }
        }
    }

    fn search(&mut self, cols: &mut Vec<Vec<i64>>, hits: &mut Vec<Vec<Vec<i64>>>, collect: bool, count: &mut u64) -> Result<(), LatticeError> {
        let n = self.n;
        let col = cols.len();
        if col == n - 1 {
            return self.solve_last_column(cols, hits, collect, count);
        }
        let mut column = vec![0i64; n];
        self.fill_column(cols, &mut column, 0, hits, collect, count)
    }

    fn fill_column(
        &mut self,
        cols: &mut Vec<Vec<i64>>,
        column: &mut Vec<i64>,
        row: usize,
        hits: &mut Vec<Vec<Vec<i64>>>,
        collect: bool,
        count: &mut u64,
    ) -> Result<(), LatticeError> {
        let n = self.n;
        if row == n {
            cols.push(column.clone());
            let ok = self.norm_ok_partial(cols) && !self.minor_gcd(cols).gt(&BigInt::from(1));
            if ok {
                self.search(cols, hits, collect, count)?;
            }
            cols.pop();
            return Ok(());
        }
        for v in self.entry_candidates(row, cols.len()) {
            self.tick()?;
            column[row] = v;
            // frobenius running bound over the partial column
            if self.norm == Norm::Frobenius {
                let s: i64 = cols.iter().flat_map(|c| c.iter().map(|&x| x * x)).sum::<i64>()
                    + column[..=row].iter().map(|&x| x * x).sum::<i64>();
                if rat_int(s) > self.r2 {
                    continue;
                }
            }
            self.fill_column(cols, column, row + 1, hits, collect, count)?;
        }
        column[row] = 0;
        Ok(())
    }

    /// The last column solves `sum_i x_i C_i = 1` for the cofactors of the
    /// first n-1 columns; all but one coordinate are enumerated and the
    /// pivot coordinate is solved exactly.
    fn solve_last_column(
        &mut self,
        cols: &[Vec<i64>],
        hits: &mut Vec<Vec<Vec<i64>>>,
        collect: bool,
        count: &mut u64,
    ) -> Result<(), LatticeError> {
        let n = self.n;
        // cofactor of entry (i, n-1): (-1)^{i + n - 1} * minor without row i
        let mut cof = vec![BigInt::zero(); n];
        for i in 0..n {
            let m: Vec<Vec<i64>> = (0..n)
                .filter(|&r| r != i)
                .map(|r| cols.iter().map(|c| c[r]).collect())
                .collect();
            let sign = if (i + n - 1) % 2 == 0 { 1 } else { -1 };
            cof[i] = det_i64(&m) * BigInt::from(sign);
        }
        let pivot = (0..n).max_by_key(|&i| cof[i].abs()).unwrap();
        if cof[pivot].is_zero() {
            return Ok(()); // singular prefix, no completion
        }
        let mut column = vec![0i64; n];
        self.enumerate_free(cols, &mut column, 0, pivot, &cof, hits, collect, count)
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_free(
        &mut self,
        cols: &[Vec<i64>],
        column: &mut Vec<i64>,
        row: usize,
        pivot: usize,
        cof: &[BigInt],
        hits: &mut Vec<Vec<Vec<i64>>>,
        collect: bool,
        count: &mut u64,
    ) -> Result<(), LatticeError> {
        let n = self.n;
        if row == n {
            // solve the pivot entry: x_p = (1 - sum_{i != p} x_i C_i) / C_p
            let mut rest = BigInt::from(1);
            for i in 0..n {
                if i != pivot {
                    rest -= &cof[i] * BigInt::from(column[i]);
                }
            }
            let (quot, rem) = rest.div_rem(&cof[pivot]);
            if !rem.is_zero() {
                return Ok(());
            }
            let Some(x) = quot.to_i64() else { return Ok(()) };
            let delta = if pivot == n - 1 { 1 } else { 0 };
            if (x - delta).rem_euclid(self.q) != 0 || x.abs() > self.entry_bound {
                return Ok(());
            }
            column[pivot] = x;
            let mut all = cols.to_vec();
            all.push(column.clone());
            if self.norm_ok_partial(&all) {
                *count += 1;
                if collect {
                    hits.push(all);
                }
            }
            column[pivot] = 0;
            return Ok(());
        }
        if row == pivot {
            return self.enumerate_free(cols, column, row + 1, pivot, cof, hits, collect, count);
        }
        for v in self.entry_candidates(row, n - 1) {
            self.tick()?;
            column[row] = v;
            self.enumerate_free(cols, column, row + 1, pivot, cof, hits, collect, count)?;
        }
        column[row] = 0;
        Ok(())
    }
}

fn det_i64(m: &[Vec<i64>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::from(1);
    }
    if n == 1 {
        return BigInt::from(m[0][0]);
    }
    let mut acc = BigInt::zero();
    for j in 0..n {
        if m[0][j] == 0 {
            continue;
        }
        let minor: Vec<Vec<i64>> = m[1..]
            .iter()
            .map(|r| r.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect())
            .collect();
        let sign = if j % 2 == 0 { 1 } else { -1 };
        acc += BigInt::from(sign * m[0][j]) * det_i64(&minor);
    }
    acc
}

fn run_ball(
    n: usize,
    q: u64,
    radius: &Rational,
    norm: Norm,
    budget: u64,
    collect: bool,
) -> Result<(u64, Vec<Vec<Vec<i64>>>), LatticeError> {
    if radius < &rat_int(1) {
        return Err(LatticeError::RadiusTooSmall);
    }
    let r2 = radius * radius;
    let entry_bound = match norm {
        Norm::Frobenius => isqrt_floor(&r2),
        Norm::MaxEntry => crate::exact::rat_floor(radius).to_i64().unwrap_or(i64::MAX),
    };
    let mut search = BallSearch {
        n,
        q: q as i64,
        norm,
        r2,
        entry_bound,
        budget,
        visited: 0,
    };
    let mut hits = Vec::new();
    let mut count = 0u64;
    let mut cols = Vec::new();
    search.search(&mut cols, &mut hits, collect, &mut count)?;
    Ok((count, hits))
}

fn isqrt_floor(x: &Rational) -> i64 {
    let f = crate::exact::rat_floor(x).to_i64().unwrap_or(i64::MAX);
    let mut r = (f as f64).sqrt() as i64 + 2;
    while r * r > f {
        r -= 1;
    }
    r
}

pub const DEFAULT_BALL_BUDGET: u64 = 500_000_000;

/// Exhaustive count of `Gamma(q)` elements of norm at most `radius`.
pub fn count_ball(n: usize, q: u64, radius: &Rational, norm: Norm, budget: u64) -> Result<BallCount, LatticeError> {
    let (count, _) = run_ball(n, q, radius, norm, budget, false)?;
    Ok(BallCount {
        n,
        q,
        radius: radius.clone(),
        norm,
        count,
    })
}

/// Lifting experiment: residues of SL_n(Z/q) with an integral lift of norm
/// at most `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingResult {
    pub n: usize,
    pub q: u64,
    pub radius: Rational,
    pub norm: Norm,
    pub covered: u64,
    pub total: u64,
}

impl LiftingResult {
    pub fn exceptions(&self) -> u64 {
        self.total - self.covered
    }
}

/// Enumerate the SL_n(Z) ball, reduce mod q, and report the covered share of
/// SL_n(Z/q).
pub fn lifting_exceptions(
    n: usize,
    q: u64,
    radius: &Rational,
    norm: Norm,
    budget: u64,
) -> Result<LiftingResult, LatticeError> {
    let (_, hits) = run_ball(n, 1, radius, norm, budget, true)?;
    let mut residues: HashSet<Vec<u64>> = HashSet::new();
    for cols in hits {
        let mut code = Vec::with_capacity(n * n);
        for i in 0..n {
            for col in cols.iter() {
                code.push(col[i].rem_euclid(q as i64) as u64);
            }
        }
        residues.insert(code);
    }
    let total = index_constants(n, q).v_q.to_u64().expect("index fits u64");
    Ok(LiftingResult {
        n,
        q,
        radius: radius.clone(),
        norm: Norm::Frobenius,
        covered: residues.len() as u64,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn unit_ball_of_sl2() {
        // entries' squares sum <= 2.25: ±identity and the two rotations
        let got = count_ball(2, 1, &rat(3, 2), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(got.count, 4);
    }

    #[test]
    fn level_two_ball() {
        // -I ≡ I mod 2, so Gamma(2) contains ±I; the rotations reduce to an
        // off-diagonal residue and are excluded
        let got = count_ball(2, 2, &rat(3, 2), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(got.count, 2);
        // at level 3 only the identity survives
        let got = count_ball(2, 3, &rat(3, 2), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(got.count, 1);
    }

    #[test]
    fn identity_only_regime() {
        // ||I||_F = sqrt(n): below that the ball is empty, at it exactly I
        let got = count_ball(3, 5, &rat(7, 4), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(got.count, 1);
        let got = count_ball(2, 7, &rat(1, 1), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(got.count, 0);
    }

    #[test]
    fn monotone_in_q_and_r() {
        let r = rat(5, 1);
        let base = count_ball(2, 1, &r, Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap().count;
        for q in [2u64, 3, 4] {
            let c = count_ball(2, q, &r, Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap().count;
            assert!(c <= base, "q={q}");
        }
        let bigger = count_ball(2, 1, &rat(8, 1), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap().count;
        assert!(bigger >= base);
    }

    #[test]
    fn congruence_filters_are_multiplicative() {
        // counting mod q1 q2 equals simultaneous conditions mod q1 and q2
        let r = rat(12, 1);
        let c6 = count_ball(2, 6, &r, Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap().count;
        // brute-force the simultaneous condition: gamma ≡ I mod 2 and mod 3
        let (_, hits) = run_ball(2, 1, &r, Norm::Frobenius, DEFAULT_BALL_BUDGET, true).unwrap();
        let mut simultaneous = 0u64;
        for cols in hits {
            let ok = (0..2).all(|i| {
                (0..2).all(|j| {
                    let delta = if i == j { 1 } else { 0 };
                    (cols[j][i] - delta) % 2 == 0 && (cols[j][i] - delta) % 3 == 0
                })
            });
            if ok {
                simultaneous += 1;
            }
        }
        assert_eq!(c6, simultaneous);
    }

    #[test]
    fn max_entry_norm_counts_differ() {
        let fro = count_ball(2, 1, &rat(2, 1), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap().count;
        let max = count_ball(2, 1, &rat(2, 1), Norm::MaxEntry, DEFAULT_BALL_BUDGET).unwrap().count;
        assert!(max >= fro);
    }

    #[test]
    fn lifting_small_levels() {
        // radius 2.9 ≈ q^{3/2}+eps covers all six residues of SL_2(F_2)
        let out = lifting_exceptions(2, 2, &rat(29, 10), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(out.total, 6);
        assert_eq!(out.exceptions(), 0);
        // q = 1 is trivially covered by the identity
        let out = lifting_exceptions(2, 1, &rat(3, 2), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(out.total, 1);
        assert_eq!(out.exceptions(), 0);
    }

    #[test]
    fn lifting_ratio_decays_with_the_level() {
        // radius q^{1.6}: the uncovered share is reported and shrinks
        let mut ratios = Vec::new();
        for q in [3u64, 4, 5] {
            let r_num = ((q as f64).powf(1.6) * 10.0).round() as i64;
            let out = lifting_exceptions(2, q, &rat(r_num, 10), Norm::Frobenius, DEFAULT_BALL_BUDGET).unwrap();
            let ratio = out.exceptions() as f64 / out.total as f64;
            ratios.push(ratio);
            assert!(ratio < 0.5, "q={q}: uncovered share {ratio}");
        }
        // no strict monotonicity is claimed, only smallness on this range
        assert!(ratios.iter().all(|r| *r < 0.5));
    }

    #[test]
    fn budget_is_enforced() {
        match count_ball(3, 1, &rat(40, 1), Norm::Frobenius, 10) {
            Err(LatticeError::BudgetExceeded { visited }) => assert!(visited > 10),
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
