//! Sharp bounds for unions of mutually exclusive conjunctions.
//!
//! Input: k disjoint groups of events, group i carrying probabilities
//! p_{i1} <= ... <= p_{i n_i}, groups ordered by strictly descending maxima.
//! The target is the largest probability that all events of exactly one
//! group occur and none from the others.
//!
//! The answer is sum_i min{p_i_max - t*, p_i_min} over the groups still
//! active at the critical cut t*, where t* is the smallest t at which the
//! non-overlapping stacks to its right fit into the available room:
//!
//!   sum_{i <= r_t} min{p_i_max - t, p_i_min} <= 1 - max{t, p*_1..p*_{r_t}}
//!
//! with r_t the number of groups whose maximum exceeds t and
//! p*_i = p_i_max - p_i_min. Both sides are piecewise linear in t, so t* is
//! found exactly by walking the breakpoints and solving one linear equation
//! on the first satisfying piece; nothing is swept numerically.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::event::EventSpec;
use crate::rational::Rational;
use crate::word::BinaryWord;

/// Validated group probabilities. Groups are stored exactly as given:
/// ascending inside each group, maxima descending across groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSets {
    sets: Vec<Vec<Rational>>,
    tie_tolerant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExclusiveError {
    #[error("no event sets given")]
    Empty,
    #[error("set {set} is empty")]
    EmptySet { set: usize },
    #[error("probability {index} of set {set} is outside (0, 1)")]
    OutOfRange { set: usize, index: usize },
    #[error("set {set} is not sorted ascending at index {index}")]
    NotAscending { set: usize, index: usize },
    #[error("set maxima are not descending between sets {set} and {}", .set + 1)]
    MaximaNotDescending { set: usize },
}

impl EventSets {
    /// Strict ordering: within-set ascending and across-set maxima
    /// descending, both without ties.
    pub fn new(sets: Vec<Vec<Rational>>) -> Result<Self, ExclusiveError> {
        Self::build(sets, false)
    }

    /// Tie-tolerant ordering: non-strict comparisons are accepted and the
    /// formulas are evaluated as written.
    pub fn new_tolerant(sets: Vec<Vec<Rational>>) -> Result<Self, ExclusiveError> {
        Self::build(sets, true)
    }

    fn build(sets: Vec<Vec<Rational>>, tie_tolerant: bool) -> Result<Self, ExclusiveError> {
        if sets.is_empty() {
            return Err(ExclusiveError::Empty);
        }
        for (si, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(ExclusiveError::EmptySet { set: si });
            }
            for (pi, value) in set.iter().enumerate() {
                if !value.is_positive() || value >= &Rational::one() {
                    return Err(ExclusiveError::OutOfRange { set: si, index: pi });
                }
                if pi > 0 {
                    let prev = &set[pi - 1];
                    let ok = if tie_tolerant {
                        value >= prev
                    } else {
                        value > prev
                    };
                    if !ok {
                        return Err(ExclusiveError::NotAscending { set: si, index: pi });
                    }
                }
            }
        }
        for si in 0..sets.len() - 1 {
            let a = sets[si].last().expect("non-empty");
            let b = sets[si + 1].last().expect("non-empty");
            let ok = if tie_tolerant { a >= b } else { a > b };
            if !ok {
                return Err(ExclusiveError::MaximaNotDescending { set: si });
            }
        }
        Ok(EventSets { sets, tie_tolerant })
    }

    pub fn sets(&self) -> &[Vec<Rational>] {
        &self.sets
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    /// Total number of events across all sets.
    pub fn total_events(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    fn max_of(&self, i: usize) -> &Rational {
        self.sets[i].last().expect("non-empty")
    }

    fn min_of(&self, i: usize) -> &Rational {
        self.sets[i].first().expect("non-empty")
    }

    /// p*_i = p_i_max - p_i_min per set.
    pub fn p_star(&self) -> Vec<Rational> {
        (0..self.k())
            .map(|i| self.max_of(i) - self.min_of(i))
            .collect()
    }

    /// The same groups with complementary probabilities (each set reverses
    /// to stay ascending; sets reorder by the new maxima).
    pub fn complement(&self) -> Result<EventSets, ExclusiveError> {
        let mut sets: Vec<Vec<Rational>> = self
            .sets
            .iter()
            .map(|s| s.iter().rev().map(|v| Rational::one() - v).collect())
            .collect();
        sets.sort_by(|a: &Vec<Rational>, b: &Vec<Rational>| {
            b.last()
                .expect("non-empty")
                .cmp(a.last().expect("non-empty"))
        });
        Self::build(sets, self.tie_tolerant)
    }
}

/// Result of the critical-cut computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepResult {
    /// The critical cut.
    pub t_star: Rational,
    /// Number of active sets at the cut (maxima strictly above t*).
    pub r_t_star: usize,
    /// The sharp bound value.
    pub bound: Rational,
    /// p*_i = p_i_max - p_i_min per set.
    pub p_star: Vec<Rational>,
}

fn active_sets(sets: &EventSets, t: &Rational) -> usize {
    (0..sets.k()).filter(|&i| sets.max_of(i) > t).count()
}

/// lhs(t) - rhs(t) of the critical-cut inequality; the cut is feasible
/// where this is <= 0.
fn gap(sets: &EventSets, t: &Rational) -> Rational {
    let mut lhs = Rational::zero();
    let mut cap = t.clone();
    for i in 0..sets.k() {
        if sets.max_of(i) > t {
            let tail = sets.max_of(i) - t;
            lhs += tail.min(sets.min_of(i).clone());
        }
        // Inactive p* never exceed t, so including them is harmless.
        let spread = sets.max_of(i) - sets.min_of(i);
        if spread > cap {
            cap = spread;
        }
    }
    lhs - (Rational::one() - cap)
}

/// Largest probability that all events of exactly one set occur and none
/// from the other sets.
pub fn solve_exclusive_upper(sets: &EventSets) -> SweepResult {
    let top = sets.max_of(0).clone();
    // Candidate kinks of either side: set maxima (terms vanish), p*_i (the
    // min switches branches and the room side may switch to t), plus the
    // endpoints of [0, top].
    let mut cuts: Vec<Rational> = vec![Rational::zero(), top.clone()];
    for i in 0..sets.k() {
        cuts.push(sets.max_of(i).clone());
        cuts.push(sets.max_of(i) - sets.min_of(i));
    }
    cuts.retain(|c| !c.is_negative() && c <= &top);
    cuts.sort();
    cuts.dedup();

    let mut t_star = top.clone();
    let mut prev: Option<(Rational, Rational)> = None;
    for cut in &cuts {
        let g = gap(sets, cut);
        if !g.is_positive() {
            t_star = match prev {
                // First feasible breakpoint: interpolate on the linear piece
                // from the last infeasible one (gap is continuous).
                Some((t_prev, g_prev)) if !g.is_zero() => {
                    let span = cut - &t_prev;
                    &t_prev + span * &g_prev / (&g_prev - &g)
                }
                _ => cut.clone(),
            };
            break;
        }
        prev = Some((cut.clone(), g));
    }
    debug_assert!(!gap(sets, &t_star).is_positive(), "critical cut infeasible");

    let r = active_sets(sets, &t_star);
    let mut bound = Rational::zero();
    for i in 0..r {
        let tail = sets.max_of(i) - &t_star;
        bound += tail.min(sets.min_of(i).clone());
    }
    SweepResult {
        t_star,
        r_t_star: r,
        bound,
        p_star: sets.p_star(),
    }
}

/// Smallest probability of the complementary compound event (every group
/// contributes an event or an outside complement): complement the
/// probabilities, solve the upper problem, flip the bound.
pub fn solve_exclusive_dual(sets: &EventSets) -> Result<SweepResult, ExclusiveError> {
    let comp = sets.complement()?;
    let inner = solve_exclusive_upper(&comp);
    Ok(SweepResult {
        t_star: inner.t_star,
        r_t_star: inner.r_t_star,
        bound: Rational::one() - inner.bound,
        p_star: inner.p_star,
    })
}

/// The weaker bound ignoring exclusivity: sup P(some set fully occurs)
/// = min{sum_i p_i_min, 1}.
pub fn union_of_conjunctions_upper(sets: &EventSets) -> Rational {
    let total: Rational = (0..sets.k())
        .map(|i| sets.min_of(i))
        .fold(Rational::zero(), |a, v| a + v);
    total.min(Rational::one())
}

/// Flattens the sets into one event list and the exclusive-conjunction
/// event over it: words where some set is all-ones and the rest all-zero.
/// Event order is set-major, ascending within each set.
pub fn flatten(sets: &EventSets) -> (Vec<Rational>, EventSpec) {
    let n = sets.total_events();
    let marginals: Vec<Rational> = sets.sets().iter().flatten().cloned().collect();
    let mut words = Vec::with_capacity(sets.k());
    let mut offset = 0usize;
    for set in sets.sets() {
        let word = BinaryWord::from_set_bits(n, offset..offset + set.len());
        words.push(word);
        offset += set.len();
    }
    let event = EventSpec::words(words, n).expect("flattened words share the length");
    (marginals, event)
}

/// The flattened event of the dual problem: every set contributes at least
/// one of its events or at least one outside complement.
pub fn flatten_dual(sets: &EventSets) -> (Vec<Rational>, EventSpec) {
    let (marginals, upper_event) = flatten(sets);
    let n = marginals.len();
    // Complement of "exactly one set all-on, others all-off" with roles of
    // events flipped inside the chosen set: the dual event is the
    // complement of the exclusive event built from complemented words.
    let atoms: Vec<BinaryWord> = BinaryWord::all(n)
        .filter(|w| !upper_event.contains(&w.complement()))
        .collect();
    let event = EventSpec::words(atoms, n).expect("words share the length");
    (marginals, event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{self, Direction, LpProblem};
    use crate::rational::rat;
    use proptest::prelude::*;

    fn sets(groups: &[&[(i64, i64)]]) -> EventSets {
        EventSets::new_tolerant(
            groups
                .iter()
                .map(|g| g.iter().map(|&(a, b)| rat(a, b)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn oracle_upper(s: &EventSets) -> Rational {
        let (marginals, event) = flatten(s);
        let prob = LpProblem::bound_problem(&marginals, event, Direction::Maximize);
        lp::solve(&prob).unwrap().expect_optimal().value.clone()
    }

    #[test]
    fn two_singletons_disjoint_placement() {
        let s = sets(&[&[(3, 5)], &[(3, 10)]]);
        let r = solve_exclusive_upper(&s);
        assert_eq!(r.t_star, rat(0, 1));
        assert_eq!(r.bound, rat(9, 10));
        assert_eq!(r.bound, oracle_upper(&s));
    }

    #[test]
    fn two_singletons_forced_overlap() {
        let s = sets(&[&[(9, 10)], &[(4, 5)]]);
        let r = solve_exclusive_upper(&s);
        assert_eq!(r.t_star, rat(7, 10));
        assert_eq!(r.bound, rat(3, 10));
        assert_eq!(r.bound, oracle_upper(&s));
    }

    #[test]
    fn pair_and_singleton() {
        let s = sets(&[&[(3, 10), (7, 10)], &[(1, 5)]]);
        let r = solve_exclusive_upper(&s);
        assert_eq!(r.t_star, rat(0, 1));
        assert_eq!(r.bound, rat(1, 2));
        assert_eq!(r.bound, oracle_upper(&s));
        // Coincides with the weaker bound in the t* = 0 regime.
        assert_eq!(union_of_conjunctions_upper(&s), rat(1, 2));
    }

    #[test]
    fn spread_dominates_the_room() {
        let s = sets(&[&[(1, 5), (4, 5)], &[(3, 4)]]);
        let r = solve_exclusive_upper(&s);
        assert_eq!(r.t_star, rat(11, 20));
        assert_eq!(r.bound, rat(2, 5));
        assert_eq!(r.bound, oracle_upper(&s));
    }

    #[test]
    fn dual_examples() {
        let s = sets(&[&[(3, 5)], &[(3, 10)]]);
        let d = solve_exclusive_dual(&s).unwrap();
        assert_eq!(d.bound, rat(1, 10));
        let s = sets(&[&[(9, 10)], &[(4, 5)]]);
        let d = solve_exclusive_dual(&s).unwrap();
        assert_eq!(d.bound, rat(7, 10));
        let s = sets(&[&[(1, 2)]]);
        let d = solve_exclusive_dual(&s).unwrap();
        assert_eq!(d.bound, rat(1, 2));
    }

    #[test]
    fn dual_matches_oracle() {
        let s = sets(&[&[(3, 5)], &[(3, 10)]]);
        let (marginals, event) = flatten_dual(&s);
        let prob = LpProblem::bound_problem(&marginals, event, Direction::Minimize);
        let oracle = lp::solve(&prob).unwrap().expect_optimal().value.clone();
        assert_eq!(solve_exclusive_dual(&s).unwrap().bound, oracle);
    }

    #[test]
    fn weaker_bound_examples() {
        let s = sets(&[&[(3, 5)], &[(3, 5)]]);
        assert_eq!(union_of_conjunctions_upper(&s), rat(1, 1));
        let s = sets(&[&[(1, 5), (1, 2)]]);
        assert_eq!(union_of_conjunctions_upper(&s), rat(1, 5));
        let r = solve_exclusive_upper(&s);
        assert_eq!(r.bound, rat(1, 5));
        assert_eq!(r.t_star, rat(0, 1));
    }

    #[test]
    fn ordering_violations_carry_indices() {
        let bad = EventSets::new(vec![vec![rat(1, 2), rat(1, 4)]]);
        assert_eq!(
            bad.unwrap_err(),
            ExclusiveError::NotAscending { set: 0, index: 1 }
        );
        let bad = EventSets::new(vec![vec![rat(1, 4)], vec![rat(1, 2)]]);
        assert_eq!(
            bad.unwrap_err(),
            ExclusiveError::MaximaNotDescending { set: 0 }
        );
        let bad = EventSets::new(vec![vec![rat(1, 1)]]);
        assert!(matches!(
            bad.unwrap_err(),
            ExclusiveError::OutOfRange { .. }
        ));
        let strict_tie = EventSets::new(vec![vec![rat(1, 2)], vec![rat(1, 2)]]);
        assert!(strict_tie.is_err());
        assert!(EventSets::new_tolerant(vec![vec![rat(1, 2)], vec![rat(1, 2)]]).is_ok());
    }

    fn arb_sets() -> impl Strategy<Value = EventSets> {
        // Up to 3 sets with up to 6 events total, probabilities on a coarse
        // grid (ties across sets are common; construction sorts).
        proptest::collection::vec(proptest::collection::vec(1i64..=19, 1..=3), 1..=3).prop_map(
            |raw| {
                let mut groups: Vec<Vec<Rational>> = raw
                    .into_iter()
                    .map(|g| {
                        let mut g: Vec<Rational> = g.into_iter().map(|v| rat(v, 20)).collect();
                        g.sort();
                        g
                    })
                    .collect();
                groups.sort_by(|a, b| b.last().unwrap().cmp(a.last().unwrap()));
                EventSets::new_tolerant(groups).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn oracle_equivalence(s in arb_sets()) {
            let r = solve_exclusive_upper(&s);
            prop_assert_eq!(r.bound, oracle_upper(&s));
        }

        #[test]
        fn predicate_monotone_over_breakpoints(s in arb_sets()) {
            // Once feasible, the cut inequality stays feasible.
            let r = solve_exclusive_upper(&s);
            let top = s.sets()[0].last().unwrap().clone();
            let mut t = r.t_star.clone();
            let step = (&top - &r.t_star) / rat(7, 1);
            for _ in 0..7 {
                prop_assert!(!gap(&s, &t).is_positive());
                t += &step;
                if t > top { break; }
            }
        }

        #[test]
        fn weaker_bound_dominates(s in arb_sets()) {
            let r = solve_exclusive_upper(&s);
            let weak = union_of_conjunctions_upper(&s);
            prop_assert!(weak >= r.bound);
            if r.t_star.is_zero() {
                // In the t* = 0 regime with every min picking p_i_min the
                // two coincide; that happens exactly when each tail
                // p_i_max >= p_i_min, i.e. always at t = 0, unless the
                // union bound clamps at 1.
                if weak < rat(1, 1) {
                    prop_assert_eq!(weak, r.bound);
                }
            }
        }

        #[test]
        fn dual_consistency(s in arb_sets()) {
            if let Ok(d) = solve_exclusive_dual(&s) {
                let comp = s.complement().unwrap();
                let upper = solve_exclusive_upper(&comp);
                prop_assert_eq!(d.bound, rat(1, 1) - upper.bound);
            }
        }
    }
}
