//! Exact backtracking engine for Kloosterman coset pairs.
//!
//! An element of the set is `gamma = x c* w y` with canonical unipotent
//! representatives (all free entries in `[0,1)`). Membership in the lattice
//! is entry-wise: `gamma_{ij}` must lie in `delta_{ij} + q^{1+i-j} Z`
//! (globally) or satisfy `v_p(gamma_{ij} - delta_{ij}) >= e(1+i-j)` (locally
//! at p with `e = v_p(q)`).
//!
//! The search fills gamma row by row from the bottom. Processing row i
//! introduces the x-entries `x_{i,i+1..n}` and the free entries of y-row
//! `sigma(i)`; every membership condition in row i is affine-linear in these
//! unknowns with coefficients known from lower rows. A condition with a
//! single unknown pins that unknown to an arithmetic progression (globally)
//! or a p-adic ball (locally), so variables are branched over exact
//! candidate sets and the search tree stays proportional to the number of
//! solutions.

use crate::bruhat::ModulusVector;
use crate::exact::{pow_rat, rat_divides, rat_gcd, rat_int, Rational, RationalMatrix};
use crate::exact::{vp_int, Valuation};
use crate::weyl::WeylElement;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

/// Which arithmetic the membership conditions live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arith {
    /// `Gamma(q)^natural`: entries in `delta + q^{1+i-j} Z`.
    Global { q: u64 },
    /// `K_p(q)^natural` with `e = v_p(q)`: valuation conditions only,
    /// representatives have p-power denominators.
    Local { p: u64, e: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KsetError {
    #[error("search budget exceeded after {visited} nodes ({found} pairs found so far)")]
    BudgetExceeded { visited: u64, found: u64 },
    #[error("underdetermined variable in row {row}: cannot pin {what}")]
    Underdetermined { row: usize, what: String },
    #[error(transparent)]
    Bruhat(#[from] crate::bruhat::BruhatError),
    #[error("involution obstruction: {0}")]
    InvolutionObstruction(String),
    #[error("{0}")]
    Invalid(String),
}

/// Node/truncation counters reported with every run.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineStats {
    /// candidate assignments explored
    pub nodes: u64,
    /// candidates discarded because their denominator exceeded the cap;
    /// nonzero truncation means completeness relies on the stabilization
    /// certificate
    pub truncated: u64,
}

#[derive(Debug, Clone)]
pub struct EngineParams {
    pub n: usize,
    pub w: WeylElement,
    pub c: ModulusVector,
    pub arith: Arith,
    /// Scale factor for the per-entry denominator cap; the cap itself is
    /// `denom_bound * q^{n-1}` (its p-part locally).
    pub denom_bound: u64,
    pub max_nodes: u64,
    pub parallel: bool,
    /// Quotient by the full unipotent lattices `Gamma^nat ∩ U` (left) and
    /// `Gamma^nat ∩ U_w` (right) instead of their integral points. Both act
    /// trivially on the superdiagonal characters, so counts and character
    /// sums over the reduced domain recover the true ones after multiplying
    /// by the exact index reported in [`RunOutput::multiplicity`].
    pub reduced: bool,
}

pub const DEFAULT_MAX_NODES: u64 = 200_000_000;

impl EngineParams {
    pub fn new(n: usize, w: &WeylElement, c: &ModulusVector, arith: Arith) -> Self {
        EngineParams {
            n,
            w: w.clone(),
            c: c.clone(),
            arith,
            denom_bound: c.product().max(1),
            max_nodes: DEFAULT_MAX_NODES,
            parallel: false,
            reduced: false,
        }
    }

    pub fn with_reduced(mut self, r: bool) -> Self {
        self.reduced = r;
        self
    }

    pub fn with_denom_bound(mut self, d: u64) -> Self {
        self.denom_bound = d;
        self
    }

    pub fn with_parallel(mut self, p: bool) -> Self {
        self.parallel = p;
        self
    }

    pub fn with_max_nodes(mut self, m: u64) -> Self {
        self.max_nodes = m;
        self
    }
}

/// `v_p(x) >= m`, with `v_p(0) = +inf`.
fn vp_at_least(x: &Rational, p: u64, m: i64) -> bool {
    if x.is_zero() {
        return true;
    }
    vp_of(x, p).unwrap() >= m
}

fn vp_of(x: &Rational, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let num = match vp_int(x.numer(), p) {
        Valuation::Finite(v) => v,
        Valuation::Infinite => unreachable!(),
    };
    let den = match vp_int(x.denom(), p) {
        Valuation::Finite(v) => v,
        Valuation::Infinite => unreachable!(),
    };
    Some(num - den)
}

/// Single-variable constraint: an arithmetic progression over the rationals
/// or a p-adic ball. Both describe the exact solution set of one membership
/// condition in one unknown.
#[derive(Debug, Clone)]
enum Cons {
    Prog { base: Rational, step: Rational },
    Ball { center: Rational, depth: i64 },
}

impl Cons {
    /// Upper bound on the number of members in `[0,1)`, computable without
    /// materialising them.
    fn size_estimate(&self) -> u64 {
        match self {
            Cons::Prog { step, .. } => {
                if step >= &Rational::one() {
                    1
                } else {
                    let inv = step.recip();
                    num_traits::ToPrimitive::to_u64(&inv.ceil().to_integer()).unwrap_or(u64::MAX)
                }
            }
            Cons::Ball { depth, .. } => {
                if *depth >= 0 {
                    1
                } else {
                    2u64.saturating_pow((-depth).min(63) as u32)
                }
            }
        }
    }
}

impl Arith {
    fn delta(i: usize, j: usize) -> Rational {
        if i == j {
            rat_int(1)
        } else {
            rat_int(0)
        }
    }

    /// Is a fully-known value admissible at entry (i, j)?
    fn contains(&self, v: &Rational, i: usize, j: usize) -> bool {
        let d = Self::delta(i, j);
        match *self {
            Arith::Global { q } => {
                let step = pow_rat(q, 1 + i as i64 - j as i64);
                rat_divides(&step, &(v - d))
            }
            Arith::Local { p, e } => {
                let m = (e as i64) * (1 + i as i64 - j as i64);
                vp_at_least(&(v - d), p, m)
            }
        }
    }

    /// Constraint on `var` implied by `coef * var + acc in Lambda_{ij}`.
    fn pin(&self, coef: &Rational, acc: &Rational, i: usize, j: usize) -> Cons {
        let rhs = (Self::delta(i, j) - acc) / coef;
        match *self {
            Arith::Global { q } => {
                let step = pow_rat(q, 1 + i as i64 - j as i64) / coef;
                Cons::Prog {
                    base: rhs,
                    step: step.abs(),
                }
            }
            Arith::Local { p, e } => {
                let m = (e as i64) * (1 + i as i64 - j as i64);
                let depth = m - vp_of(coef, p).expect("pin coefficient is nonzero");
                Cons::Ball { center: rhs, depth }
            }
        }
    }

    fn p(&self) -> Option<u64> {
        match *self {
            Arith::Global { .. } => None,
            Arith::Local { p, .. } => Some(p),
        }
    }

    /// Per-entry denominator cap.
    fn cap(&self, n: usize, denom_bound: u64) -> BigInt {
        match *self {
            Arith::Global { q } => BigInt::from(denom_bound) * BigInt::from(q).pow(n as u32 - 1),
            Arith::Local { p, e } => {
                let k = match vp_int(&BigInt::from(denom_bound.max(1)), p) {
                    Valuation::Finite(v) => v as u32,
                    Valuation::Infinite => 0,
                };
                BigInt::from(p).pow(k + e * (n as u32 - 1))
            }
        }
    }
}

fn meet(a: &Cons, b: &Cons, p: Option<u64>) -> Option<Cons> {
    match (a, b) {
        (Cons::Prog { base: b1, step: s1 }, Cons::Prog { base: b2, step: s2 }) => {
            let g = rat_gcd(s1, s2);
            if !rat_divides(&g, &(b1 - b2)) {
                return None;
            }
            // CRT after clearing denominators by the gcd: find an element of
            // (b1 + s1 Z) ∩ (b2 + s2 Z)
            let a1 = ((b2 - b1) / &g).to_integer();
            let m1 = (s1 / &g).to_integer();
            let m2 = (s2 / &g).to_integer();
            let e = m1.extended_gcd(&m2);
            debug_assert!(e.gcd.is_one(), "steps divided by gcd are coprime");
            // k solves b1 + k*s1 ≡ b2 (mod s2), i.e. k*m1 ≡ a1 (mod m2)
            let k = (&a1 * &e.x).mod_floor(&m2);
            let base = b1 + Rational::from_integer(k) * s1;
            let step = s1 / &g * s2; // lcm
            Some(Cons::Prog { base, step })
        }
        (Cons::Ball { center: c1, depth: d1 }, Cons::Ball { center: c2, depth: d2 }) => {
            let p = p.expect("ball constraints are local");
            if !vp_at_least(&(c1 - c2), p, (*d1).min(*d2)) {
                return None;
            }
            if d1 >= d2 {
                Some(a.clone())
            } else {
                Some(b.clone())
            }
        }
        _ => unreachable!("constraint kinds never mix"),
    }
}

/// Representative in `Z[1/p]` of `center` modulo `p^depth Z_p`.
fn p_truncation(center: &Rational, p: u64, depth: i64) -> Rational {
    let pb = BigInt::from(p);
    let k = match vp_int(center.denom(), p) {
        Valuation::Finite(v) => v,
        Valuation::Infinite => unreachable!(),
    };
    let t = k + depth;
    if t <= 0 {
        return rat_int(0);
    }
    // center = A / (p^k m) with gcd(m, p) = 1; want B / p^k with
    // B ≡ A m^{-1} (mod p^t)
    let pk = pb.pow(k as u32);
    let m = center.denom() / &pk;
    let pt = pb.pow(t as u32);
    let e = m.extended_gcd(&pt);
    debug_assert!(e.gcd.is_one());
    let b = (center.numer() * &e.x).mod_floor(&pt);
    Rational::new(b, pk)
}

/// All members of the constraint inside `[0, limit)` whose denominator
/// divides `cap`; drops outside the cap are counted into `truncated`.
fn candidates(
    cons: &Cons,
    p: Option<u64>,
    limit: &Rational,
    cap: &BigInt,
    truncated: &AtomicU64,
) -> Vec<Rational> {
    let (base, step) = match cons {
        Cons::Prog { base, step } => (base.clone(), step.clone()),
        Cons::Ball { center, depth } => {
            let p = p.expect("local constraint");
            (p_truncation(center, p, *depth), pow_rat(p, *depth))
        }
    };
    debug_assert!(step.is_positive());
    // smallest progression element >= 0
    let start = &base - Rational::from_integer(crate::exact::rat_floor(&(&base / &step))) * &step;
    let mut out = Vec::new();
    let mut v = start;
    while &v < limit {
        if cap.is_multiple_of(v.denom()) {
            out.push(v.clone());
        } else {
            truncated.fetch_add(1, Ordering::Relaxed);
        }
        v += &step;
    }
    out
}

#[derive(Debug, Clone)]
struct Term {
    var: usize,
    coef: Rational,
}

#[derive(Debug, Clone)]
struct Eq {
    i: usize,
    j: usize,
    terms: Vec<Term>,
    acc: Rational,
}

/// Row-local variable: an x-entry or a free y-entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X { col: usize },
    Y { col: usize },
}

#[derive(Debug, Clone)]
struct RowProblem {
    vars: Vec<Var>,
    eqs: Vec<Eq>,
    cons: Vec<Option<Cons>>,
    values: Vec<Option<Rational>>,
}

pub struct RunOutput {
    pub pairs: Option<Vec<(RationalMatrix, RationalMatrix)>>,
    pub count: u64,
    /// index of the reduced domain in the standard one (1 unless `reduced`)
    pub multiplicity: u64,
    pub stats: EngineStats,
}

struct Search<'a> {
    params: &'a EngineParams,
    /// `t_k * s_k`: torus entry times representative sign, per row
    tw: Vec<Rational>,
    /// free columns of each y-row
    supp: Vec<Vec<usize>>,
    /// per-entry box limit for variables: `[0, 1)` in the standard quotient,
    /// `[0, min(1, q^{1+i-j}))` in the reduced one
    boxes: Vec<Vec<Rational>>,
    cap: BigInt,
    nodes: AtomicU64,
    truncated: AtomicU64,
    found: AtomicU64,
}

impl<'a> Search<'a> {
    fn new(params: &'a EngineParams) -> Self {
        let n = params.n;
        let cstar = params.c.c_star_diag();
        let tw: Vec<Rational> = (0..n)
            .map(|k| &cstar[k] * rat_int(params.w.sign(k) as i64))
            .collect();
        let mut supp = vec![Vec::new(); n];
        for (k, l) in params.w.uw_support() {
            supp[k].push(l);
        }
        let one = Rational::one();
        let boxes: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if !params.reduced || j <= i {
                            return one.clone();
                        }
                        let step = match params.arith {
                            Arith::Global { q } => pow_rat(q, 1 + i as i64 - j as i64),
                            Arith::Local { p, e } => pow_rat(p, (e as i64) * (1 + i as i64 - j as i64)),
                        };
                        step.min(one.clone())
                    })
                    .collect()
            })
            .collect();
        Search {
            params,
            tw,
            supp,
            boxes,
            cap: params.arith.cap(n, params.denom_bound),
            nodes: AtomicU64::new(0),
            truncated: AtomicU64::new(0),
            found: AtomicU64::new(0),
        }
    }

    /// Index of the reduced domain: the product of the inverse box sizes of
    /// all x-entries and all free y-entries.
    fn multiplicity(&self) -> u64 {
        let n = self.params.n;
        let mut m = Rational::one();
        for i in 0..n {
            for j in i + 1..n {
                m *= self.boxes[i][j].recip();
            }
        }
        for (k, l) in self.params.w.uw_support() {
            m *= self.boxes[k][l].recip();
        }
        num_traits::ToPrimitive::to_u64(&m.to_integer()).expect("index fits u64")
    }

    fn var_box(&self, i: usize, def: Var) -> &Rational {
        match def {
            Var::X { col } => &self.boxes[i][col],
            Var::Y { col } => &self.boxes[self.params.w.sigma(i)][col],
        }
    }

    fn tick(&self) -> Result<(), KsetError> {
        let v = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if v > self.params.max_nodes {
            return Err(KsetError::BudgetExceeded {
                visited: v,
                found: self.found.load(Ordering::Relaxed),
            });
        }
        Ok(())
    }

    /// Build the membership equations of gamma-row `i` given the already
    /// assigned y-rows of all lower rows.
    fn row_problem(&self, i: usize, y: &RationalMatrix) -> RowProblem {
        let n = self.params.n;
        let w = &self.params.w;
        let si = w.sigma(i);
        let mut vars = Vec::new();
        for k in i + 1..n {
            vars.push(Var::X { col: k });
        }
        let y_free_from = vars.len();
        for &l in &self.supp[si] {
            vars.push(Var::Y { col: l });
        }
        let mut eqs = Vec::new();
        for j in 0..n {
            let mut terms = Vec::new();
            let mut acc = Rational::zero();
            // k = i term: t_i s_i * y_{sigma(i), j}
            if j == si {
                acc += &self.tw[i];
            } else if let Some(pos) = self.supp[si].iter().position(|&l| l == j) {
                terms.push(Term {
                    var: y_free_from + pos,
                    coef: self.tw[i].clone(),
                });
            }
            // k > i terms: x_{ik} * t_k s_k * y_{sigma(k), j}
            for k in i + 1..n {
                let coef = &self.tw[k] * y.get(w.sigma(k), j);
                if !coef.is_zero() {
                    terms.push(Term { var: k - i - 1, coef });
                }
            }
            eqs.push(Eq { i, j, terms, acc });
        }
        let nv = vars.len();
        RowProblem {
            vars,
            eqs,
            cons: vec![None; nv],
            values: vec![None; nv],
        }
    }

    /// Propagate: drop satisfied equations, fail on violated ones, turn
    /// single-unknown equations into constraints. Returns false on a
    /// contradiction.
    fn saturate(&self, prob: &mut RowProblem) -> bool {
        let arith = &self.params.arith;
        loop {
            let mut progress = false;
            let mut k = 0;
            while k < prob.eqs.len() {
                match prob.eqs[k].terms.len() {
                    0 => {
                        let eq = prob.eqs.swap_remove(k);
                        if !arith.contains(&eq.acc, eq.i, eq.j) {
                            return false;
                        }
                        progress = true;
                    }
                    1 => {
                        let eq = prob.eqs.swap_remove(k);
                        let t = &eq.terms[0];
                        let pinned = arith.pin(&t.coef, &eq.acc, eq.i, eq.j);
                        let merged = match &prob.cons[t.var] {
                            None => Some(pinned),
                            Some(old) => meet(old, &pinned, arith.p()),
                        };
                        match merged {
                            None => return false,
                            Some(c) => prob.cons[t.var] = Some(c),
                        }
                        progress = true;
                    }
                    _ => k += 1,
                }
            }
            if !progress {
                return true;
            }
        }
    }

    fn assign(prob: &mut RowProblem, var: usize, value: &Rational) {
        prob.values[var] = Some(value.clone());
        prob.cons[var] = None;
        for eq in prob.eqs.iter_mut() {
            if let Some(pos) = eq.terms.iter().position(|t| t.var == var) {
                let t = eq.terms.swap_remove(pos);
                eq.acc += &t.coef * value;
            }
        }
    }

    /// Solve the unknowns of row `i`, then descend towards row `stop`;
    /// `emit` fires whenever row `stop` has been completed.
    fn solve_row<F: FnMut(&RationalMatrix, &RationalMatrix) -> Result<(), KsetError>>(
        &self,
        i: usize,
        stop: usize,
        mut prob: RowProblem,
        x: &mut RationalMatrix,
        y: &mut RationalMatrix,
        emit: &mut F,
    ) -> Result<(), KsetError> {
        if !self.saturate(&mut prob) {
            return Ok(());
        }
        // cheapest-first branching; the size estimate avoids materialising
        // candidate lists for variables we do not branch on
        let mut best: Option<(usize, u64)> = None;
        for v in 0..prob.vars.len() {
            if prob.values[v].is_some() {
                continue;
            }
            if let Some(c) = &prob.cons[v] {
                let est = c.size_estimate();
                if best.map_or(true, |(_, b)| est < b) {
                    best = Some((v, est));
                }
            }
        }
        if let Some((v, _)) = best {
            let mut cands = candidates(
                prob.cons[v].as_ref().unwrap(),
                self.params.arith.p(),
                self.var_box(i, prob.vars[v]),
                &self.cap,
                &self.truncated,
            );
            let last = cands.pop();
            for val in cands {
                self.tick()?;
                let mut sub = prob.clone();
                Self::assign(&mut sub, v, &val);
                self.solve_row(i, stop, sub, x, y, emit)?;
            }
            if let Some(val) = last {
                // sole remaining candidate: consume the problem without cloning
                self.tick()?;
                Self::assign(&mut prob, v, &val);
                self.solve_row(i, stop, prob, x, y, emit)?;
            }
            return Ok(());
        }
        if let Some(v) = (0..prob.vars.len()).find(|&v| prob.values[v].is_none()) {
            // Unreachable for permutation w: every x-variable is pinned by
            // the equation at its own column, then every y-variable by its
            // column equation. Kept as a hard error out of caution.
            return Err(KsetError::Underdetermined {
                row: i,
                what: format!("{:?}", prob.vars[v]),
            });
        }
        // row complete: commit, descend or emit, then undo
        let si = self.params.w.sigma(i);
        for (v, def) in prob.vars.iter().enumerate() {
            let val = prob.values[v].clone().unwrap();
            match *def {
                Var::X { col } => x.set(i, col, val),
                Var::Y { col } => y.set(si, col, val),
            }
        }
        let r = if i == stop {
            if stop == 0 {
                self.found.fetch_add(1, Ordering::Relaxed);
            }
            emit(x, y)
        } else {
            let next = self.row_problem(i - 1, y);
            self.solve_row(i - 1, stop, next, x, y, emit)
        };
        for def in prob.vars.iter() {
            match *def {
                Var::X { col } => x.set(i, col, Rational::zero()),
                Var::Y { col } => y.set(si, col, Rational::zero()),
            }
        }
        r
    }

    fn fresh_xy(&self) -> (RationalMatrix, RationalMatrix) {
        let n = self.params.n;
        (RationalMatrix::identity(n), RationalMatrix::identity(n))
    }
}

/// Fold over all canonical pairs of the set without materialising them.
///
/// Sharding follows the outermost free coordinates: the bottom gamma-row is
/// solved first and each of its solutions seeds an independent subtree with
/// its own accumulator; the accumulators are merged in deterministic shard
/// order, so any associative `visit`/`merge` pair yields identical results
/// sequentially and in parallel.
pub fn run_fold<A, I, V, M>(
    params: &EngineParams,
    init: I,
    visit: V,
    merge: M,
) -> Result<(A, u64, u64, EngineStats), KsetError>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, &RationalMatrix, &RationalMatrix) + Sync,
    M: Fn(A, A) -> A,
{
    let n = params.n;
    assert!(n >= 2, "dimension must be at least 2");
    assert_eq!(params.c.n(), n, "modulus vector has wrong length");
    assert_eq!(params.w.n(), n);
    let search = Search::new(params);
    let bottom = n - 1;
    let s_bottom = params.w.sigma(bottom);

    // Phase 1: bottom row only.
    let mut prefixes: Vec<Vec<(usize, Rational)>> = Vec::new();
    {
        let (mut x0, mut y0) = search.fresh_xy();
        let prob = search.row_problem(bottom, &y0);
        let mut record = |_x: &RationalMatrix, y: &RationalMatrix| -> Result<(), KsetError> {
            prefixes.push(
                search.supp[s_bottom]
                    .iter()
                    .map(|&l| (l, y.get(s_bottom, l).clone()))
                    .collect(),
            );
            Ok(())
        };
        search.solve_row(bottom, bottom, prob, &mut x0, &mut y0, &mut record)?;
    }

    // Phase 2: one shard per bottom-row solution.
    let run_shard = |prefix: &Vec<(usize, Rational)>| -> Result<(A, u64), KsetError> {
        let (mut x, mut y) = search.fresh_xy();
        for (l, v) in prefix {
            y.set(s_bottom, *l, v.clone());
        }
        let mut acc = init();
        let mut cnt = 0u64;
        {
            let mut emit = |x: &RationalMatrix, y: &RationalMatrix| -> Result<(), KsetError> {
                cnt += 1;
                visit(&mut acc, x, y);
                Ok(())
            };
            if bottom == 0 {
                emit(&x, &y)?;
            } else {
                let prob = search.row_problem(bottom - 1, &y);
                search.solve_row(bottom - 1, 0, prob, &mut x, &mut y, &mut emit)?;
            }
        }
        Ok((acc, cnt))
    };

    let shard_results: Result<Vec<_>, KsetError> = if params.parallel && prefixes.len() > 1 {
        prefixes.par_iter().map(run_shard).collect()
    } else {
        prefixes.iter().map(run_shard).collect()
    };

    let mut count = 0u64;
    let mut acc = init();
    for (a, cnt) in shard_results? {
        count += cnt;
        acc = merge(acc, a);
    }
    Ok((
        acc,
        count,
        search.multiplicity(),
        EngineStats {
            nodes: search.nodes.load(Ordering::Relaxed),
            truncated: search.truncated.load(Ordering::Relaxed),
        },
    ))
}

/// Run the engine, optionally collecting the canonical pairs.
pub fn run(params: &EngineParams, collect: bool) -> Result<RunOutput, KsetError> {
    let (pairs, count, multiplicity, stats) = run_fold(
        params,
        Vec::new,
        |acc: &mut Vec<(RationalMatrix, RationalMatrix)>, x, y| {
            if collect {
                acc.push((x.clone(), y.clone()));
            }
        },
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    )?;
    Ok(RunOutput {
        pairs: collect.then_some(pairs),
        count,
        multiplicity,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn progression_meet() {
        // (1/3 + Z) ∩ (1/12 + (1/4)Z) = 1/3 + Z
        let a = Cons::Prog { base: rat(1, 3), step: rat(1, 1) };
        let b = Cons::Prog { base: rat(1, 12), step: rat(1, 4) };
        let m = meet(&a, &b, None).unwrap();
        let Cons::Prog { base, step } = m else { panic!() };
        assert_eq!(step, rat(1, 1));
        assert_eq!(crate::exact::rat_frac(&base), rat(1, 3));
        // incompatible residues
        let c = Cons::Prog { base: rat(0, 1), step: rat(1, 2) };
        let d = Cons::Prog { base: rat(1, 3), step: rat(1, 2) };
        assert!(meet(&c, &d, None).is_none());
    }

    #[test]
    fn candidate_extraction() {
        let trunc = AtomicU64::new(0);
        let cons = Cons::Prog { base: rat(7, 5), step: rat(1, 5) };
        let cap = BigInt::from(5);
        let vals = candidates(&cons, None, &Rational::one(), &cap, &trunc);
        assert_eq!(vals, vec![rat(0, 1), rat(1, 5), rat(2, 5), rat(3, 5), rat(4, 5)]);
        assert_eq!(trunc.load(Ordering::Relaxed), 0);
        // cap smaller than the progression denominator truncates
        let vals = candidates(&cons, None, &Rational::one(), &BigInt::from(2), &trunc);
        assert_eq!(vals, vec![rat(0, 1)]);
        assert_eq!(trunc.load(Ordering::Relaxed), 4);
    }

    #[test]
    fn ball_candidates() {
        let trunc = AtomicU64::new(0);
        // v_2(y - 1/3) >= 0: the dyadic approximations of 1/3 mod Z_2 are 0 mod 1
        let cons = Cons::Ball { center: rat(1, 3), depth: 0 };
        let vals = candidates(&cons, Some(2), &Rational::one(), &BigInt::from(8), &trunc);
        assert_eq!(vals, vec![rat(0, 1)]);
        // v_2(y - 1/4) >= 0: y must be 1/4 mod Z_2
        let cons = Cons::Ball { center: rat(1, 4), depth: 0 };
        let vals = candidates(&cons, Some(2), &Rational::one(), &BigInt::from(8), &trunc);
        assert_eq!(vals, vec![rat(1, 4)]);
        // v_2(y) >= -1: y in {0, 1/2}
        let cons = Cons::Ball { center: rat(0, 1), depth: -1 };
        let vals = candidates(&cons, Some(2), &Rational::one(), &BigInt::from(8), &trunc);
        assert_eq!(vals, vec![rat(0, 1), rat(1, 2)]);
        // v_2(y - 1/6) >= 1 forces y = b/2 with 3b ≡ 1 mod 4, i.e. b ≡ 3 mod 4;
        // no such b gives y in [0,1)
        let cons = Cons::Ball { center: rat(1, 6), depth: 1 };
        let vals = candidates(&cons, Some(2), &Rational::one(), &BigInt::from(8), &trunc);
        assert!(vals.is_empty());
    }

    #[test]
    fn ball_candidates_match_brute_force() {
        // oracle: scan all fractions with denominator dividing 16 in [0,1)
        for (num, den, depth) in [(1i64, 3i64, 0i64), (1, 12, -1), (5, 48, 2), (0, 1, -2), (7, 16, 0)] {
            let center = rat(num, den);
            let cons = Cons::Ball { center: center.clone(), depth };
            let trunc = AtomicU64::new(0);
            let got = candidates(&cons, Some(2), &Rational::one(), &BigInt::from(16), &trunc);
            let mut want = Vec::new();
            for b in 0..16i64 {
                let y = rat(b, 16);
                if vp_at_least(&(&y - &center), 2, depth) {
                    want.push(y);
                }
            }
            // candidate extraction may emit values with denominators > 16 only if
            // they were not truncated; with this cap both sides agree exactly
            assert_eq!(got, want, "center={center} depth={depth}");
        }
    }
}
