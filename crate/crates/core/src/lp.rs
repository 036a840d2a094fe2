//! Exact linear programming over the 2^n-atom polytope.
//!
//! The oracle maximizes or minimizes the mass of a compound event over all
//! sub-distributions `y >= 0` with a prescribed total mass, prescribed
//! per-event marginal masses, and optional extra linear constraints on
//! probabilities of further atom sets. Arithmetic is exact throughout:
//! optima are attained rationals, never approximations, so agreement checks
//! against closed forms are equality checks.
//!
//! Two independent solvers live here on purpose. [`solve`] is a revised
//! two-phase simplex with Bland's anti-cycling pivot rule; it is the oracle
//! the rest of the crate trusts. [`brute_force_solve`] enumerates basic
//! solutions directly and exists to keep the simplex honest on small
//! instances.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::event::EventSpec;
use crate::rational::{format_rational, Rational};
use crate::word::BinaryWord;

/// Default cap on the number of events (2^n LP columns).
pub const DEFAULT_ATOM_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Extra row: a linear condition on the total mass of an atom set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtraConstraint {
    pub atoms: BTreeSet<BinaryWord>,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relation {
    Eq(Rational),
    Le(Rational),
    Ge(Rational),
    Between(Rational, Rational),
}

/// The full problem: optimize event mass subject to total mass `mass_total`,
/// marginal masses `marginal_rhs`, y >= 0, and the extra constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpProblem {
    pub n: usize,
    pub objective: EventSpec,
    pub direction: Direction,
    pub mass_total: Rational,
    pub marginal_rhs: Vec<Rational>,
    pub extra: Vec<ExtraConstraint>,
}

impl LpProblem {
    /// Standard full-mass problem: total mass 1, marginals `p`.
    pub fn bound_problem(
        marginals: &[Rational],
        objective: EventSpec,
        direction: Direction,
    ) -> LpProblem {
        LpProblem {
            n: marginals.len(),
            objective,
            direction,
            mass_total: Rational::one(),
            marginal_rhs: marginals.to_vec(),
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("{n} events exceed the atom limit {limit}")]
    AtomLimit { n: usize, limit: usize },
    #[error("marginal {index} = {} outside [0, mass_total = {}]", format_rational(.value), format_rational(.mass_total))]
    MarginalOutOfRange {
        index: usize,
        value: Rational,
        mass_total: Rational,
    },
    #[error("negative mass_total {}", format_rational(.0))]
    NegativeMass(Rational),
    #[error("malformed constraint {index}: {reason}")]
    MalformedConstraint { index: usize, reason: String },
    #[error("objective event has length {got}, problem has {expected} events")]
    EventLength { got: usize, expected: usize },
    #[error("internal solver error: {0}")]
    Internal(String),
}

/// Exact optimum plus an attaining mass vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpOptimum {
    pub value: Rational,
    pub optimizer: BTreeMap<BinaryWord, Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpSolution {
    Optimal(LpOptimum),
    Infeasible,
}

impl LpSolution {
    pub fn status(&self) -> &'static str {
        match self {
            LpSolution::Optimal(_) => "optimal",
            LpSolution::Infeasible => "infeasible",
        }
    }

    pub fn optimum(&self) -> Option<&LpOptimum> {
        match self {
            LpSolution::Optimal(opt) => Some(opt),
            LpSolution::Infeasible => None,
        }
    }

    /// Unwraps the optimum; panics on infeasible (use where feasibility is
    /// guaranteed, e.g. plain marginal problems).
    pub fn expect_optimal(&self) -> &LpOptimum {
        self.optimum().expect("LP unexpectedly infeasible")
    }
}

/// Solves with the default atom limit.
pub fn solve(prob: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with_limit(prob, DEFAULT_ATOM_LIMIT)
}

/// Exact two-phase simplex with Bland's rule.
///
/// Plain problems (no extra rows) start from an explicit feasible basis —
/// the nested left-aligned stacking — and skip phase 1 entirely.
pub fn solve_with_limit(prob: &LpProblem, atom_limit: usize) -> Result<LpSolution, LpError> {
    validate(prob, atom_limit)?;
    let mut tab = Tableau::build(prob)?;
    if prob.extra.is_empty() {
        tab.crash_basis(prob)?;
    } else if !tab.phase_one()? {
        return Ok(LpSolution::Infeasible);
    }
    tab.phase_two(prob)?;
    Ok(LpSolution::Optimal(tab.extract(prob)))
}

/// The statewise value: mass `t` available, marginal masses `l` left.
/// Always maximizes (it is the value function of the remaining segment).
pub fn solve_statewise(
    t: &Rational,
    l: &[Rational],
    objective: &EventSpec,
    atom_limit: usize,
) -> Result<LpSolution, LpError> {
    let prob = LpProblem {
        n: l.len(),
        objective: objective.clone(),
        direction: Direction::Maximize,
        mass_total: t.clone(),
        marginal_rhs: l.to_vec(),
        extra: Vec::new(),
    };
    solve_with_limit(&prob, atom_limit)
}

/// Index set of events whose layer is missing from at most `s` of the
/// positive optimizer atoms inside the objective event (0-based indices).
pub fn dominating_indices(
    optimizer: &BTreeMap<BinaryWord, Rational>,
    objective: &EventSpec,
    s: usize,
) -> BTreeSet<usize> {
    let n = objective.n();
    let mut missing = vec![0usize; n];
    for (word, mass) in optimizer {
        if mass.is_zero() || !objective.contains(word) {
            continue;
        }
        for i in 0..n {
            if !word.bit(i) {
                missing[i] += 1;
            }
        }
    }
    (0..n).filter(|&i| missing[i] <= s).collect()
}

fn validate(prob: &LpProblem, atom_limit: usize) -> Result<(), LpError> {
    if prob.n > atom_limit {
        return Err(LpError::AtomLimit {
            n: prob.n,
            limit: atom_limit,
        });
    }
    if prob.objective.n() != prob.n {
        return Err(LpError::EventLength {
            got: prob.objective.n(),
            expected: prob.n,
        });
    }
    if prob.marginal_rhs.len() != prob.n {
        return Err(LpError::EventLength {
            got: prob.marginal_rhs.len(),
            expected: prob.n,
        });
    }
    if prob.mass_total.is_negative() {
        return Err(LpError::NegativeMass(prob.mass_total.clone()));
    }
    for (index, value) in prob.marginal_rhs.iter().enumerate() {
        if value.is_negative() || value > &prob.mass_total {
            return Err(LpError::MarginalOutOfRange {
                index,
                value: value.clone(),
                mass_total: prob.mass_total.clone(),
            });
        }
    }
    for (index, c) in prob.extra.iter().enumerate() {
        for w in &c.atoms {
            if w.len() != prob.n {
                return Err(LpError::MalformedConstraint {
                    index,
                    reason: format!("atom `{w}` has wrong length"),
                });
            }
        }
        let bad = |reason: &str| LpError::MalformedConstraint {
            index,
            reason: reason.into(),
        };
        match &c.relation {
            Relation::Eq(v) | Relation::Le(v) | Relation::Ge(v) => {
                if v.is_negative() {
                    return Err(bad("negative bound"));
                }
            }
            Relation::Between(lo, hi) => {
                if lo.is_negative() {
                    return Err(bad("negative lower bound"));
                }
                if lo > hi {
                    return Err(bad("empty interval: lower bound exceeds upper bound"));
                }
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------------------
// Revised simplex internals
// --------------------------------------------------------------------------

/// One structural or slack column. Coefficients are all +1/-1, so pricing
/// and direction computations reduce to signed sums of dual/inverse entries.
#[derive(Debug, Clone)]
struct Column {
    entries: Vec<(usize, i8)>,
}

struct Tableau {
    rows: usize,
    columns: Vec<Column>,
    structural: usize,
    b: Vec<Rational>,
    /// Basis inverse, kept explicitly (row-major, rows x rows).
    binv: Vec<Vec<Rational>>,
    /// Basic variable per row; values >= `ARTIFICIAL_BASE` encode the
    /// artificial of a row, anything below `columns.len()` is a real column.
    basis: Vec<usize>,
    x_b: Vec<Rational>,
    in_basis: Vec<bool>,
}

const ARTIFICIAL_BASE: usize = usize::MAX >> 1;

impl Tableau {
    fn build(prob: &LpProblem) -> Result<Tableau, LpError> {
        let n_atoms = 1usize << prob.n;
        // Row layout: 0 = total mass, 1..=n marginals, then expanded extras.
        let mut extra_rows: Vec<(BTreeSet<BinaryWord>, i8, Rational)> = Vec::new();
        for c in &prob.extra {
            match &c.relation {
                Relation::Eq(v) => extra_rows.push((c.atoms.clone(), 0, v.clone())),
                Relation::Le(v) => extra_rows.push((c.atoms.clone(), 1, v.clone())),
                Relation::Ge(v) => extra_rows.push((c.atoms.clone(), -1, v.clone())),
                Relation::Between(lo, hi) => {
                    extra_rows.push((c.atoms.clone(), -1, lo.clone()));
                    extra_rows.push((c.atoms.clone(), 1, hi.clone()));
                }
            }
        }
        let rows = 1 + prob.n + extra_rows.len();
        let mut columns = Vec::with_capacity(n_atoms + extra_rows.len());
        for word in BinaryWord::all(prob.n) {
            let mut entries = vec![(0usize, 1i8)];
            for i in word.set_bits() {
                entries.push((1 + i, 1));
            }
            for (r, (atoms, _, _)) in extra_rows.iter().enumerate() {
                if atoms.contains(&word) {
                    entries.push((1 + prob.n + r, 1));
                }
            }
            columns.push(Column { entries });
        }
        // Slack (+1) and surplus (-1) columns for inequality rows.
        for (r, (_, sign, _)) in extra_rows.iter().enumerate() {
            if *sign != 0 {
                columns.push(Column {
                    entries: vec![(1 + prob.n + r, *sign)],
                });
            }
        }
        let mut b = Vec::with_capacity(rows);
        b.push(prob.mass_total.clone());
        b.extend(prob.marginal_rhs.iter().cloned());
        b.extend(extra_rows.iter().map(|(_, _, v)| v.clone()));

        let binv = identity(rows);
        let basis: Vec<usize> = (0..rows).map(|r| ARTIFICIAL_BASE + r).collect();
        let x_b = b.clone();
        let in_basis = vec![false; columns.len()];
        Ok(Tableau {
            rows,
            structural: n_atoms,
            columns,
            b,
            binv,
            basis,
            x_b,
            in_basis,
        })
    }

    fn is_artificial(&self, var: usize) -> bool {
        var >= ARTIFICIAL_BASE
    }

    /// Installs the feasible basis given by stacking every event layer
    /// left-aligned at 0: the support is a strictly nested chain of words
    /// (drop the event with the smallest remaining mass at each breakpoint),
    /// which is always linearly independent. Only valid without extra rows.
    fn crash_basis(&mut self, prob: &LpProblem) -> Result<(), LpError> {
        debug_assert_eq!(self.rows, 1 + prob.n);
        let n = prob.n;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            prob.marginal_rhs[a]
                .cmp(&prob.marginal_rhs[b])
                .then(a.cmp(&b))
        });
        // Chain of words: all events, then drop order[0], order[1], ...
        let mut word = (1u32 << n) - 1; // all-ones in index encoding
        let mut vars = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        let mut prev = Rational::zero();
        for &i in &order {
            vars.push(word as usize);
            values.push(&prob.marginal_rhs[i] - &prev);
            prev = prob.marginal_rhs[i].clone();
            word &= !(1u32 << (n - 1 - i));
        }
        debug_assert_eq!(word, 0);
        vars.push(0); // empty word takes the remaining mass
        values.push(&prob.mass_total - &prev);

        let mut basis_matrix = vec![vec![Rational::zero(); self.rows]; self.rows];
        for (col, &var) in vars.iter().enumerate() {
            for &(r, s) in &self.columns[var].entries {
                basis_matrix[r][col] = Rational::from_integer(s.into());
            }
        }
        let binv = invert(&basis_matrix)
            .ok_or_else(|| LpError::Internal("crash basis singular".into()))?;
        self.binv = binv;
        self.basis = vars.clone();
        self.x_b = values;
        self.in_basis = vec![false; self.columns.len()];
        for &v in &vars {
            self.in_basis[v] = true;
        }
        debug_assert!(self.x_b.iter().all(|v| !v.is_negative()));
        Ok(())
    }

    /// Dual values for the given basic costs: y = c_B^T B^{-1}.
    fn duals(&self, cost: &dyn Fn(usize) -> i8) -> Vec<Rational> {
        let mut y = vec![Rational::zero(); self.rows];
        for (i, &var) in self.basis.iter().enumerate() {
            match cost(var) {
                0 => {}
                1 => {
                    for r in 0..self.rows {
                        if !self.binv[i][r].is_zero() {
                            y[r] += &self.binv[i][r];
                        }
                    }
                }
                -1 => {
                    for r in 0..self.rows {
                        if !self.binv[i][r].is_zero() {
                            y[r] -= &self.binv[i][r];
                        }
                    }
                }
                _ => unreachable!("costs are 0/+1/-1"),
            }
        }
        y
    }

    /// Signed sum of dual entries along a column (columns are +-1 sparse).
    fn price(&self, col: &Column, y: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for &(r, s) in &col.entries {
            if y[r].is_zero() {
                continue;
            }
            if s == 1 {
                acc += &y[r];
            } else {
                acc -= &y[r];
            }
        }
        acc
    }

    /// B^{-1} a_j for a sparse +-1 column.
    fn direction(&self, col: &Column) -> Vec<Rational> {
        let mut d = vec![Rational::zero(); self.rows];
        for &(r, s) in &col.entries {
            for i in 0..self.rows {
                if self.binv[i][r].is_zero() {
                    continue;
                }
                if s == 1 {
                    d[i] += &self.binv[i][r];
                } else {
                    d[i] -= &self.binv[i][r];
                }
            }
        }
        d
    }

    /// Bland ratio test: smallest ratio, ties to the smallest basis variable.
    fn leaving_row(&self, d: &[Rational]) -> Option<usize> {
        let mut best: Option<(Rational, usize)> = None;
        for i in 0..self.rows {
            if !d[i].is_positive() {
                continue;
            }
            let ratio = &self.x_b[i] / &d[i];
            match &best {
                None => best = Some((ratio, i)),
                Some((r, bi)) => {
                    if ratio < *r || (ratio == *r && self.basis[i] < self.basis[*bi]) {
                        best = Some((ratio, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }

    fn pivot(&mut self, entering: usize, row: usize, d: Vec<Rational>) {
        let pivot_val = d[row].clone();
        // Normalize the pivot row of B^{-1} and x_b.
        if !pivot_val.is_one() {
            for r in 0..self.rows {
                if !self.binv[row][r].is_zero() {
                    self.binv[row][r] /= &pivot_val;
                }
            }
            self.x_b[row] /= &pivot_val;
        }
        for i in 0..self.rows {
            if i == row || d[i].is_zero() {
                continue;
            }
            let factor = d[i].clone();
            for r in 0..self.rows {
                if !self.binv[row][r].is_zero() {
                    let delta = &self.binv[row][r] * &factor;
                    self.binv[i][r] -= delta;
                }
            }
            let delta = &self.x_b[row] * &factor;
            self.x_b[i] -= delta;
        }
        let old = self.basis[row];
        if !self.is_artificial(old) {
            self.in_basis[old] = false;
        }
        self.basis[row] = entering;
        self.in_basis[entering] = true;
    }

    /// Runs simplex iterations for the given cost function (maximization).
    fn optimize(&mut self, cost: &dyn Fn(usize) -> i8) -> Result<(), LpError> {
        loop {
            let y = self.duals(cost);
            let mut entering = None;
            for (j, col) in self.columns.iter().enumerate() {
                if self.in_basis[j] {
                    continue;
                }
                let mut rc = -self.price(col, &y);
                match cost(j) {
                    0 => {}
                    1 => rc += Rational::one(),
                    -1 => rc -= Rational::one(),
                    _ => unreachable!(),
                }
                if rc.is_positive() {
                    entering = Some(j);
                    break; // Bland: first improving column in fixed order.
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let d = self.direction(&self.columns[j]);
            let Some(row) = self.leaving_row(&d) else {
                return Err(LpError::Internal("unbounded problem".into()));
            };
            self.pivot(j, row, d);
        }
    }

    /// Phase 1: drive artificials to zero. Returns false if infeasible.
    fn phase_one(&mut self) -> Result<bool, LpError> {
        self.optimize(&|var| if var >= ARTIFICIAL_BASE { -1 } else { 0 })?;
        let infeasibility: Rational = self
            .basis
            .iter()
            .zip(&self.x_b)
            .filter(|(v, _)| **v >= ARTIFICIAL_BASE)
            .fold(Rational::zero(), |acc, (_, x)| acc + x);
        if !infeasibility.is_zero() {
            return Ok(false);
        }
        self.evict_artificials()?;
        Ok(true)
    }

    /// Pivots zero-level artificials out of the basis; drops rows that turn
    /// out redundant (no real column can replace the artificial).
    fn evict_artificials(&mut self) -> Result<(), LpError> {
        loop {
            let Some(row) = (0..self.rows).find(|&i| self.is_artificial(self.basis[i])) else {
                return Ok(());
            };
            debug_assert!(self.x_b[row].is_zero());
            let mut replaced = false;
            for j in 0..self.columns.len() {
                if self.in_basis[j] {
                    continue;
                }
                // (B^{-1} a_j)[row] without computing the full direction.
                let mut dj = Rational::zero();
                for &(r, s) in &self.columns[j].entries {
                    if self.binv[row][r].is_zero() {
                        continue;
                    }
                    if s == 1 {
                        dj += &self.binv[row][r];
                    } else {
                        dj -= &self.binv[row][r];
                    }
                }
                if !dj.is_zero() {
                    // Degenerate pivot (the leaving value is zero), so a
                    // negative pivot element is fine here.
                    let d = self.direction(&self.columns[j]);
                    self.pivot(j, row, d);
                    replaced = true;
                    break;
                }
            }
            if !replaced {
                self.drop_row(row)?;
            }
        }
    }

    /// Removes a redundant row and rebuilds the basis inverse from scratch.
    fn drop_row(&mut self, dead: usize) -> Result<(), LpError> {
        self.basis.remove(dead);
        self.b.remove(dead);
        self.rows -= 1;
        for col in &mut self.columns {
            col.entries.retain(|&(r, _)| r != dead);
            for e in &mut col.entries {
                if e.0 > dead {
                    e.0 -= 1;
                }
            }
        }
        // Rebuild B^{-1} for the surviving basis (all real columns now).
        let mut basis_matrix = vec![vec![Rational::zero(); self.rows]; self.rows];
        for (i, &var) in self.basis.iter().enumerate() {
            debug_assert!(!self.is_artificial(var));
            for &(r, s) in &self.columns[var].entries {
                basis_matrix[r][i] = Rational::from_integer(s.into());
            }
        }
        let binv = invert(&basis_matrix)
            .ok_or_else(|| LpError::Internal("singular basis after row drop".into()))?;
        let mut x_b = vec![Rational::zero(); self.rows];
        for (i, xi) in x_b.iter_mut().enumerate() {
            for r in 0..self.rows {
                if !binv[i][r].is_zero() && !self.b[r].is_zero() {
                    *xi += &binv[i][r] * &self.b[r];
                }
            }
        }
        self.binv = binv;
        self.x_b = x_b;
        Ok(())
    }

    fn phase_two(&mut self, prob: &LpProblem) -> Result<(), LpError> {
        let structural = self.structural;
        let sign: i8 = match prob.direction {
            Direction::Maximize => 1,
            Direction::Minimize => -1,
        };
        let n = prob.n;
        let objective = prob.objective.clone();
        let cost = move |var: usize| -> i8 {
            if var >= structural {
                return 0; // slack or artificial
            }
            if objective.contains(&BinaryWord::from_index(var as u32, n)) {
                sign
            } else {
                0
            }
        };
        self.optimize(&cost)
    }

    fn extract(&self, prob: &LpProblem) -> LpOptimum {
        let mut optimizer = BTreeMap::new();
        for (i, &var) in self.basis.iter().enumerate() {
            if var < self.structural && !self.x_b[i].is_zero() {
                let word = BinaryWord::from_index(var as u32, prob.n);
                optimizer.insert(word, self.x_b[i].clone());
            }
        }
        let value = optimizer
            .iter()
            .filter(|(w, _)| prob.objective.contains(w))
            .fold(Rational::zero(), |acc, (_, m)| acc + m);
        LpOptimum { value, optimizer }
    }
}

fn identity(n: usize) -> Vec<Vec<Rational>> {
    let mut m = vec![vec![Rational::zero(); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Rational::one();
    }
    m
}

/// Exact Gauss-Jordan inverse; `None` when singular.
fn invert(matrix: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = matrix.len();
    let mut a: Vec<Vec<Rational>> = matrix.to_vec();
    let mut inv = identity(n);
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for c in 0..n {
            a[col][c] /= &p;
            inv[col][c] /= &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                let d1 = &a[col][c] * &f;
                a[r][c] -= d1;
                let d2 = &inv[col][c] * &f;
                inv[r][c] -= d2;
            }
        }
    }
    Some(inv)
}

// --------------------------------------------------------------------------
// Brute-force reference: enumerate basic solutions
// --------------------------------------------------------------------------

/// Enumerates every basis of the constraint system, keeps the feasible ones,
/// and returns the best vertex. Exponential; intended for n <= 4 only.
pub fn brute_force_solve(prob: &LpProblem) -> Result<LpSolution, LpError> {
    validate(prob, 6)?;
    let tab = Tableau::build(prob)?;
    let rows = tab.rows;
    let cols = tab.columns.len();
    let n = prob.n;
    let maximize = prob.direction == Direction::Maximize;

    let obj_value = |basis: &[usize], x: &[Rational]| -> Rational {
        basis
            .iter()
            .zip(x)
            .filter(|(&v, _)| {
                v < tab.structural
                    && prob
                        .objective
                        .contains(&BinaryWord::from_index(v as u32, n))
            })
            .fold(Rational::zero(), |acc, (_, xi)| acc + xi)
    };

    if rows > cols {
        return Ok(LpSolution::Infeasible);
    }
    let mut best: Option<(Rational, Vec<usize>, Vec<Rational>)> = None;
    let mut combo: Vec<usize> = (0..rows).collect();
    loop {
        if let Some(x) = solve_square(&tab, &combo) {
            if x.iter().all(|v| !v.is_negative()) {
                let val = obj_value(&combo, &x);
                let better = match &best {
                    None => true,
                    Some((bv, _, _)) => {
                        if maximize {
                            val > *bv
                        } else {
                            val < *bv
                        }
                    }
                };
                if better {
                    best = Some((val, combo.clone(), x));
                }
            }
        }
        // Next lexicographic combination of `rows` indices out of `cols`.
        let mut i = rows;
        loop {
            if i == 0 {
                match best {
                    Some((value, basis, x)) => {
                        let mut optimizer = BTreeMap::new();
                        for (v, xi) in basis.iter().zip(&x) {
                            if *v < tab.structural && !xi.is_zero() {
                                optimizer.insert(BinaryWord::from_index(*v as u32, n), xi.clone());
                            }
                        }
                        return Ok(LpSolution::Optimal(LpOptimum { value, optimizer }));
                    }
                    None => return Ok(LpSolution::Infeasible),
                }
            }
            i -= 1;
            if combo[i] != i + cols - rows {
                combo[i] += 1;
                for j in i + 1..rows {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Solves B x = b for the basis given by `combo`; `None` when singular.
fn solve_square(tab: &Tableau, combo: &[usize]) -> Option<Vec<Rational>> {
    let m = tab.rows;
    let mut a = vec![vec![Rational::zero(); m + 1]; m];
    for (j, &var) in combo.iter().enumerate() {
        for &(r, s) in &tab.columns[var].entries {
            a[r][j] = Rational::from_integer(s.into());
        }
    }
    for r in 0..m {
        a[r][m] = tab.b[r].clone();
    }
    for col in 0..m {
        let pivot = (col..m).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for c in col..=m {
            a[col][c] /= &p;
        }
        for r in 0..m {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in col..=m {
                let d = &a[col][c] * &f;
                a[r][c] -= d;
            }
        }
    }
    Some((0..m).map(|r| a[r][m].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::Marginals;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn p(values: &[(i64, i64)]) -> Vec<Rational> {
        values.iter().map(|&(a, b)| rat(a, b)).collect()
    }

    fn max_at_least(marginals: &[Rational], k: usize) -> Rational {
        let e = EventSpec::at_least(k, marginals.len()).unwrap();
        let prob = LpProblem::bound_problem(marginals, e, Direction::Maximize);
        solve(&prob).unwrap().expect_optimal().value.clone()
    }

    #[test]
    fn frechet_intersection_upper() {
        let m = p(&[(3, 10), (3, 5)]);
        let e = EventSpec::words(["11".parse().unwrap()], 2).unwrap();
        let prob = LpProblem::bound_problem(&m, e, Direction::Maximize);
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.expect_optimal().value, rat(3, 10));
    }

    #[test]
    fn at_least_two_of_three() {
        assert_eq!(max_at_least(&p(&[(1, 2), (3, 5), (7, 10)]), 2), rat(9, 10));
        assert_eq!(
            max_at_least(&p(&[(1, 10), (2, 10), (9, 10)]), 2),
            rat(3, 10)
        );
    }

    #[test]
    fn infeasible_extra_constraint() {
        let m = p(&[(3, 10), (3, 5)]);
        let e = EventSpec::words(["11".parse().unwrap()], 2).unwrap();
        let prob = LpProblem {
            n: 2,
            objective: e,
            direction: Direction::Maximize,
            mass_total: rat(1, 1),
            marginal_rhs: m,
            extra: vec![ExtraConstraint {
                atoms: ["11".parse().unwrap()].into_iter().collect(),
                relation: Relation::Eq(rat(1, 2)),
            }],
        };
        assert_eq!(solve(&prob).unwrap(), LpSolution::Infeasible);
    }

    #[test]
    fn forced_inclusion_exclusion() {
        let m = p(&[(3, 10), (3, 5)]);
        let union = EventSpec::at_least(1, 2).unwrap();
        let prob = LpProblem {
            n: 2,
            objective: union,
            direction: Direction::Maximize,
            mass_total: rat(1, 1),
            marginal_rhs: m,
            extra: vec![ExtraConstraint {
                atoms: ["11".parse().unwrap()].into_iter().collect(),
                relation: Relation::Eq(rat(1, 10)),
            }],
        };
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.expect_optimal().value, rat(4, 5));
    }

    #[test]
    fn statewise_boundary_and_zero() {
        let m = p(&[(1, 2), (3, 5), (7, 10)]);
        let e = EventSpec::at_least(2, 3).unwrap();
        let full = solve_statewise(&rat(1, 1), &m, &e, DEFAULT_ATOM_LIMIT).unwrap();
        assert_eq!(full.expect_optimal().value, rat(9, 10));
        let zero = solve_statewise(
            &rat(0, 1),
            &[rat(0, 1), rat(0, 1), rat(0, 1)],
            &e,
            DEFAULT_ATOM_LIMIT,
        )
        .unwrap();
        assert_eq!(zero.expect_optimal().value, rat(0, 1));
    }

    #[test]
    fn statewise_scaling_homogeneity_example() {
        let m = p(&[(1, 2), (3, 5), (7, 10)]);
        let half: Vec<Rational> = m.iter().map(|v| v / rat(2, 1)).collect();
        let e = EventSpec::at_least(2, 3).unwrap();
        let sol = solve_statewise(&rat(1, 2), &half, &e, DEFAULT_ATOM_LIMIT).unwrap();
        assert_eq!(sol.expect_optimal().value, rat(9, 20));
    }

    #[test]
    fn dominating_indices_examples() {
        // Optimizer attaining 3/10 for at-least-2 with p = (1/10, 1/5, 9/10).
        let optimizer: BTreeMap<BinaryWord, Rational> = [
            ("101", rat(1, 10)),
            ("011", rat(2, 10)),
            ("001", rat(6, 10)),
            ("000", rat(1, 10)),
        ]
        .into_iter()
        .map(|(w, m)| (w.parse().unwrap(), m))
        .collect();
        let e = EventSpec::at_least(2, 3).unwrap();
        let d0 = dominating_indices(&optimizer, &e, 0);
        assert_eq!(d0, [2usize].into_iter().collect());
        let d_all = dominating_indices(&optimizer, &e, 2);
        assert_eq!(d_all, [0usize, 1, 2].into_iter().collect());

        // No event appears in every contributing atom at r* = 0.
        let spread: BTreeMap<BinaryWord, Rational> = [
            ("110", rat(1, 5)),
            ("101", rat(3, 10)),
            ("011", rat(2, 5)),
            ("000", rat(1, 10)),
        ]
        .into_iter()
        .map(|(w, m)| (w.parse().unwrap(), m))
        .collect();
        assert!(dominating_indices(&spread, &e, 0).is_empty());
    }

    #[test]
    fn minimize_equals_one_minus_complement_maximum() {
        let m = p(&[(1, 2), (3, 5), (7, 10)]);
        let e = EventSpec::at_least(2, 3).unwrap();
        let min = solve(&LpProblem::bound_problem(
            &m,
            e.clone(),
            Direction::Minimize,
        ))
        .unwrap()
        .expect_optimal()
        .value
        .clone();
        let comp_max = solve(&LpProblem::bound_problem(
            &m,
            e.complement_event(),
            Direction::Maximize,
        ))
        .unwrap()
        .expect_optimal()
        .value
        .clone();
        assert_eq!(min.clone() + comp_max, rat(1, 1));
        assert_eq!(min, rat(2, 5));
    }

    #[test]
    fn optimizer_satisfies_constraints_exactly() {
        let m = p(&[(1, 10), (2, 10), (9, 10)]);
        let e = EventSpec::at_least(2, 3).unwrap();
        let sol = solve(&LpProblem::bound_problem(&m, e, Direction::Maximize)).unwrap();
        let opt = sol.expect_optimal();
        let total: Rational = opt.optimizer.values().fold(rat(0, 1), |a, v| a + v);
        assert_eq!(total, rat(1, 1));
        for i in 0..3 {
            let gi: Rational = opt
                .optimizer
                .iter()
                .filter(|(w, _)| w.bit(i))
                .fold(rat(0, 1), |a, (_, v)| a + v);
            assert_eq!(gi, m[i]);
        }
    }

    #[test]
    fn determinism_bit_for_bit() {
        let m = p(&[(1, 3), (2, 5), (7, 9), (11, 13)]);
        let e = EventSpec::at_least(2, 4).unwrap();
        let prob = LpProblem::bound_problem(&m, e, Direction::Maximize);
        let a = solve(&prob).unwrap();
        let b = solve(&prob).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brute_force_matches_simplex_small() {
        let cases: Vec<Vec<Rational>> = vec![
            p(&[(1, 2), (3, 5), (7, 10)]),
            p(&[(1, 10), (2, 10), (9, 10)]),
            p(&[(1, 5), (3, 10), (1, 2)]),
            p(&[(0, 1), (1, 2), (1, 1)]),
            p(&[(1, 3), (1, 3), (1, 3)]),
        ];
        for m in cases {
            for k in 1..=3usize {
                for dir in [Direction::Maximize, Direction::Minimize] {
                    let e = EventSpec::at_least(k, 3).unwrap();
                    let prob = LpProblem::bound_problem(&m, e, dir);
                    let fast = solve(&prob).unwrap();
                    let slow = brute_force_solve(&prob).unwrap();
                    assert_eq!(
                        fast.expect_optimal().value,
                        slow.expect_optimal().value,
                        "p={m:?} k={k} {dir:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn atom_limit_enforced() {
        let m = vec![rat(1, 2); 13];
        let e = EventSpec::at_least(1, 13).unwrap();
        let prob = LpProblem::bound_problem(&m, e, Direction::Maximize);
        assert!(matches!(solve(&prob), Err(LpError::AtomLimit { .. })));
    }

    #[test]
    fn marginals_type_round_trip() {
        let m = Marginals::new(p(&[(9, 10), (1, 10)])).unwrap();
        assert_eq!(max_at_least(m.values(), 1), rat(1, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn duality_of_directions(
            nums in proptest::collection::vec(0i64..=12, 3),
            k in 1usize..=3,
        ) {
            let m: Vec<Rational> = nums.iter().map(|&v| rat(v, 12)).collect();
            let e = EventSpec::at_least(k, 3).unwrap();
            let min = solve(&LpProblem::bound_problem(&m, e.clone(), Direction::Minimize))
                .unwrap().expect_optimal().value.clone();
            let comp_max = solve(&LpProblem::bound_problem(&m, e.complement_event(), Direction::Maximize))
                .unwrap().expect_optimal().value.clone();
            prop_assert_eq!(min + comp_max, rat(1, 1));
        }

        #[test]
        fn scaling_homogeneity(
            nums in proptest::collection::vec(0i64..=10, 3),
            k in 1usize..=3,
            alpha_num in 1i64..=8,
        ) {
            let m: Vec<Rational> = nums.iter().map(|&v| rat(v, 10)).collect();
            let alpha = rat(alpha_num, 8);
            let e = EventSpec::at_least(k, 3).unwrap();
            let base = solve_statewise(&rat(1, 1), &m, &e, DEFAULT_ATOM_LIMIT)
                .unwrap().expect_optimal().value.clone();
            let scaled_l: Vec<Rational> = m.iter().map(|v| v * &alpha).collect();
            let scaled = solve_statewise(&alpha, &scaled_l, &e, DEFAULT_ATOM_LIMIT)
                .unwrap().expect_optimal().value.clone();
            prop_assert_eq!(scaled, base * alpha);
        }
    }
}
