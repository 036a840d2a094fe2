//! Explicit joint distributions attaining the sharp k-out-of-n bounds.
//!
//! The upper at-least bound is attained by a geometric construction on a
//! circle of circumference equal to the bound value: the non-dominating
//! masses are laid end-to-end (wrapping around), covering every point the
//! same number of times, while each dominating event contributes a full
//! layer plus a leftover stacked to the right. Atoms are read off the
//! induced partition of [0, 1]. All other certificates are obtained from
//! this one by passing to complementary events (reverse the word, flip
//! every bit), with one refinement for exactly-k lower bounds: leftover
//! layers are spread to make their common overlap as small as possible
//! instead of nesting them.
//!
//! Every constructor checks its own output: marginals must reproduce the
//! input exactly and the achieved probability must equal the closed form.

use num_traits::{One, Signed, Zero};

use crate::dist::AtomDistribution;
use crate::event::EventSpec;
use crate::kofn::{
    self, find_r_star_counted, lower_at_least, lower_exactly, upper_at_least, upper_exactly,
    BoundFamily, KofnError,
};
use crate::marginals::Marginals;
use crate::rational::Rational;
use crate::word::BinaryWord;

/// Structure of an attaining distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistType {
    /// Every contributing atom has weight exactly k; `dominating` events
    /// (the top of the sorted order) appear in all of them.
    TypeI { dominating: usize },
    /// Every positive atom has weight at least k and the all-zero atom
    /// carries no mass.
    TypeII,
    /// Built by complementing a certificate of the complementary problem.
    Complemented,
    /// Fits neither pattern (only produced by [`classify`]).
    Neither,
}

impl DistType {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistType::TypeI { .. } => "type_i",
            DistType::TypeII => "type_ii",
            DistType::Complemented => "complemented",
            DistType::Neither => "neither",
        }
    }
}

/// A distribution together with the bound it attains. Words are in sorted
/// marginal order; callers translating back to their own ordering go
/// through [`Marginals::perm`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttainmentCertificate {
    pub distribution: AtomDistribution,
    pub achieved: Rational,
    pub bound: Rational,
    pub dist_type: DistType,
}

/// Length-mask segment list: the partition of [0, 1] under construction.
type Segments = Vec<(Rational, u32)>;

fn word_bit(n: usize, event: usize) -> u32 {
    1u32 << (n - 1 - event)
}

fn rational_mod(value: &Rational, modulus: &Rational) -> Rational {
    debug_assert!(modulus.is_positive());
    let q = (value / modulus).floor();
    value - q * modulus
}

/// Lays `arcs` (event bit, length) end-to-end around a circle of the given
/// circumference and reads off the partition into (length, coverage mask)
/// segments. Lengths may be zero (skipped); a length equal to the
/// circumference covers everything. No length may exceed the circumference.
fn wrap_around(arcs: &[(u32, Rational)], circumference: &Rational) -> Segments {
    if circumference.is_zero() {
        assert!(
            arcs.iter().all(|(_, len)| len.is_zero()),
            "wrap-around overflow: positive arc on a zero circle"
        );
        return Vec::new();
    }
    let mut cuts: Vec<Rational> = vec![Rational::zero()];
    let mut spans: Vec<(u32, Rational, Rational, bool)> = Vec::new(); // bit, start, end, full
    let mut cum = Rational::zero();
    for (bit, len) in arcs {
        assert!(
            len <= circumference,
            "wrap-around overflow: arc longer than circle"
        );
        if len.is_zero() {
            continue;
        }
        let start = rational_mod(&cum, circumference);
        cum += len;
        let end = rational_mod(&cum, circumference);
        if len == circumference {
            spans.push((*bit, start.clone(), end.clone(), true));
        } else {
            spans.push((*bit, start.clone(), end.clone(), false));
            cuts.push(end.clone());
        }
        cuts.push(start);
    }
    cuts.sort();
    cuts.dedup();
    let mut segments = Vec::with_capacity(cuts.len());
    for (i, a) in cuts.iter().enumerate() {
        let b = if i + 1 < cuts.len() {
            cuts[i + 1].clone()
        } else {
            circumference.clone()
        };
        if a == &b {
            continue;
        }
        let mut mask = 0u32;
        for (bit, s, e, full) in &spans {
            let covered = *full
                || if s < e {
                    a >= s && a < e
                } else {
                    a >= s || a < e
                };
            if covered {
                mask |= bit;
            }
        }
        segments.push((&b - a, mask));
    }
    segments
}

fn build_distribution(n: usize, segments: Segments) -> AtomDistribution {
    AtomDistribution::from_pieces(
        n,
        segments
            .into_iter()
            .map(|(len, mask)| (BinaryWord::from_index(mask, n), len)),
    )
    .expect("constructed segments form a distribution")
}

fn certify(
    p: &Marginals,
    dist: AtomDistribution,
    event: &EventSpec,
    bound: &Rational,
    dist_type: DistType,
) -> AttainmentCertificate {
    assert_eq!(
        dist.marginals(),
        p.values(),
        "constructed distribution does not reproduce the marginals"
    );
    let achieved = dist.event_probability(event);
    assert_eq!(
        &achieved, bound,
        "constructed distribution does not attain the bound ({dist_type:?})"
    );
    AttainmentCertificate {
        distribution: dist,
        achieved,
        bound: bound.clone(),
        dist_type,
    }
}

/// Builds the attaining distribution for the upper at-least-k bound.
pub fn attain_upper_at_least(p: &Marginals, k: usize) -> Result<AttainmentCertificate, KofnError> {
    let bound = upper_at_least(p, k)?;
    let n = p.n();
    let r = bound.r_star;
    let sums = p.prefix_sums();
    let denom = Rational::from_integer(((k - r) as i64).into());
    let unclamped = &sums[n - r] / &denom;

    let event = EventSpec::at_least(k, n).expect("validated above");
    if unclamped < Rational::one() || r >= 1 {
        // All contributing stacks get exactly k layers: wrap the
        // non-dominating masses at coverage k-r, stack dominating leftovers
        // to the right as a nested chain. With r >= 1 the value never
        // exceeds 1 (the dominating marginals would have to).
        assert!(unclamped <= Rational::one(), "dominated bound exceeds 1");
        let phi = unclamped;
        let mut dominating_mask = 0u32;
        for i in n - r..n {
            dominating_mask |= word_bit(n, i);
        }
        let arcs: Vec<(u32, Rational)> = (0..n - r)
            .map(|i| {
                assert!(
                    p.value(i) <= &phi,
                    "wrap-around validity violated: non-dominating mass exceeds the bound"
                );
                (word_bit(n, i), p.value(i).clone())
            })
            .collect();
        let mut segments = wrap_around(&arcs, &phi);
        for seg in &mut segments {
            seg.1 |= dominating_mask;
        }
        // Right side: nested leftovers [phi, p_i) for dominating events.
        let mut cuts: Vec<Rational> = vec![phi.clone(), Rational::one()];
        for i in n - r..n {
            cuts.push(p.value(i).clone());
        }
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let mut mask = 0u32;
            for i in n - r..n {
                if p.value(i) >= b {
                    mask |= word_bit(n, i);
                }
            }
            segments.push((b - a, mask));
        }
        let dist = build_distribution(n, segments);
        Ok(certify(
            p,
            dist,
            &event,
            &bound.value,
            DistType::TypeI { dominating: r },
        ))
    } else {
        // Total mass reaches k with no dominating events: wrapping
        // everything at circumference 1 covers each point at least k times
        // and kills the all-zero atom.
        let arcs: Vec<(u32, Rational)> = (0..n)
            .map(|i| (word_bit(n, i), p.value(i).clone()))
            .collect();
        let segments = wrap_around(&arcs, &Rational::one());
        let dist = build_distribution(n, segments);
        for word in dist.entries().keys() {
            assert!(
                word.weight() as usize >= k,
                "saturated wrap left a thin stack"
            );
        }
        Ok(certify(p, dist, &event, &bound.value, DistType::TypeII))
    }
}

/// Reverse-and-flip every atom word: the distribution of the complementary
/// problem seen through the original events.
fn complement_map(dist: &AtomDistribution) -> AtomDistribution {
    AtomDistribution::from_pieces(
        dist.n(),
        dist.entries()
            .iter()
            .map(|(w, m)| (w.reverse().complement(), m.clone())),
    )
    .expect("complement mapping preserves distributions")
}

/// Builds the attaining distribution for the lower at-least-k bound by
/// solving the complementary upper problem and flipping.
pub fn attain_lower_at_least(p: &Marginals, k: usize) -> Result<AttainmentCertificate, KofnError> {
    let bound = lower_at_least(p, k)?;
    let n = p.n();
    let q = p.complement();
    let b_cert = attain_upper_at_least(&q, n - k + 1)?;
    let dist = complement_map(&b_cert.distribution);
    let event = EventSpec::at_least(k, n).expect("validated above");
    Ok(certify(
        p,
        dist,
        &event,
        &bound.value,
        DistType::Complemented,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactDirection {
    Upper,
    Lower,
}

/// Builds a distribution attaining the exactly-k bound in either direction.
pub fn attain_exactly(
    p: &Marginals,
    k: usize,
    direction: ExactDirection,
) -> Result<AttainmentCertificate, KofnError> {
    match direction {
        ExactDirection::Upper => attain_exactly_upper(p, k),
        ExactDirection::Lower => attain_exactly_lower(p, k),
    }
}

fn attain_exactly_upper(p: &Marginals, k: usize) -> Result<AttainmentCertificate, KofnError> {
    let n = p.n();
    let bound = upper_exactly(p, k)?;
    let event = EventSpec::exactly(k, n).expect("validated above");
    if k == n {
        let direct = attain_upper_at_least(p, n)?;
        return Ok(certify(
            p,
            direct.distribution,
            &event,
            &bound.value,
            direct.dist_type,
        ));
    }
    if k >= 1 && upper_at_least(p, k)?.value < Rational::one() {
        let direct = attain_upper_at_least(p, k)?;
        return Ok(certify(
            p,
            direct.distribution,
            &event,
            &bound.value,
            direct.dist_type,
        ));
    }
    // k = 0, or the at-least bound saturates: attain on the complements,
    // where the contributing stacks have exactly n-k layers.
    let q = p.complement();
    let b_cert = attain_upper_at_least(&q, n - k)?;
    let dist = complement_map(&b_cert.distribution);
    Ok(certify(
        p,
        dist,
        &event,
        &bound.value,
        DistType::Complemented,
    ))
}

fn attain_exactly_lower(p: &Marginals, k: usize) -> Result<AttainmentCertificate, KofnError> {
    let n = p.n();
    let bound = lower_exactly(p, k)?;
    let event = EventSpec::exactly(k, n).expect("validated above");
    if k == 0 {
        // Minimal no-event mass comes straight from maximizing the union.
        let direct = attain_upper_at_least(p, 1)?;
        return Ok(certify(
            p,
            direct.distribution,
            &event,
            &bound.value,
            direct.dist_type,
        ));
    }
    let q = p.complement();
    if k == n {
        let b_cert = attain_upper_at_least(&q, 1)?;
        let dist = complement_map(&b_cert.distribution);
        return Ok(certify(
            p,
            dist,
            &event,
            &bound.value,
            DistType::Complemented,
        ));
    }

    // Complementary at-least problem with threshold m = n-k+1. The only
    // stacks that can map back to weight exactly k are full overlaps of the
    // dominating leftovers, so spread those leftovers to minimize the
    // overlap instead of nesting them.
    let m = n - k + 1;
    let (r, _) = find_r_star_counted(&q, m, BoundFamily::UpperAtLeast);
    debug_assert_eq!(r, find_r_star_counted(p, k, BoundFamily::LowerAtLeast).0);
    let sums = q.prefix_sums();
    let denom = Rational::from_integer(((m - r) as i64).into());
    let unclamped = &sums[n - r] / &denom;

    let b_dist = if unclamped > Rational::one() {
        assert_eq!(r, 0, "saturated bound must have an empty stopping index");
        let arcs: Vec<(u32, Rational)> = (0..n)
            .map(|i| (word_bit(n, i), q.value(i).clone()))
            .collect();
        build_distribution(n, wrap_around(&arcs, &Rational::one()))
    } else {
        let phi = unclamped;
        let mut segments: Segments = Vec::new();
        let mut dominating_mask = 0u32;
        for i in n - r..n {
            dominating_mask |= word_bit(n, i);
        }
        let arcs: Vec<(u32, Rational)> = (0..n - r)
            .map(|i| {
                assert!(q.value(i) <= &phi, "wrap-around validity violated");
                (word_bit(n, i), q.value(i).clone())
            })
            .collect();
        let mut circle = wrap_around(&arcs, &phi);
        for seg in &mut circle {
            seg.1 |= dominating_mask;
        }
        segments.append(&mut circle);
        if r >= 1 {
            // Leftovers of length L_i = q_i - phi inside a region of length
            // R = 1 - phi. Their smallest possible common overlap is
            // O = max(sum L - (r-1) R, 0); realize it by giving every
            // leftover a common piece of length O and wrapping the rest at
            // coverage r-1 on the remaining circle.
            let region = Rational::one() - &phi;
            let leftovers: Vec<Rational> = (n - r..n).map(|i| q.value(i) - &phi).collect();
            let total: Rational = leftovers.iter().fold(Rational::zero(), |a, v| a + v);
            let raw_overlap = &total - Rational::from_integer(((r - 1) as i64).into()) * &region;
            let overlap = if raw_overlap.is_positive() {
                raw_overlap
            } else {
                Rational::zero()
            };
            let circle2 = &region - &overlap;
            let arcs2: Vec<(u32, Rational)> = (n - r..n)
                .zip(&leftovers)
                .map(|(i, len)| (word_bit(n, i), len - &overlap))
                .collect();
            segments.append(&mut wrap_around(&arcs2, &circle2));
            if !overlap.is_zero() {
                segments.push((overlap, dominating_mask));
            }
        } else {
            // No dominating events: the tail of the interval is empty.
            segments.push((Rational::one() - &phi, 0));
        }
        build_distribution(n, segments)
    };
    let dist = complement_map(&b_dist);
    Ok(certify(
        p,
        dist,
        &event,
        &bound.value,
        DistType::Complemented,
    ))
}

/// Structural classification of an arbitrary distribution against the
/// attainment patterns for threshold `k` (k >= 1).
///
/// A distribution that is simultaneously a full k-cover and has dominating
/// events reports TypeI; a full cover with no dominating events reports
/// TypeII (the saturated regime).
pub fn classify(dist: &AtomDistribution, k: usize) -> DistType {
    assert!(k >= 1, "classification needs a positive threshold");
    let contributing: Vec<&BinaryWord> = dist
        .entries()
        .keys()
        .filter(|w| w.weight() as usize >= k)
        .collect();
    let type2 = dist.entries().keys().all(|w| w.weight() as usize >= k);
    let all_exactly_k =
        !contributing.is_empty() && contributing.iter().all(|w| w.weight() as usize == k);
    let type1 = if !all_exactly_k {
        None
    } else {
        let mask = contributing.iter().fold(u32::MAX, |acc, w| acc & w.index());
        let mask = mask & ((1u32 << dist.n()) - 1);
        let rest_ok = dist.entries().keys().all(|w| {
            let weight = w.weight() as usize;
            weight == k || weight == 0 || (w.index() & !mask) == 0
        });
        rest_ok.then(|| mask.count_ones() as usize)
    };
    match (type1, type2) {
        (Some(r), false) => DistType::TypeI { dominating: r },
        (Some(r), true) if r >= 1 => DistType::TypeI { dominating: r },
        (_, true) => DistType::TypeII,
        (None, false) => DistType::Neither,
    }
}

/// Checks certificate invariants beyond what construction already asserts:
/// the dominating bits of a TypeI certificate appear in every contributing
/// atom, and the partition never needs more than 2n + 2 atoms.
pub fn verify_certificate(
    cert: &AttainmentCertificate,
    p: &Marginals,
    kind: kofn::BoundKind,
    k: usize,
) -> Result<(), String> {
    let n = p.n();
    if cert.distribution.marginals() != p.values() {
        return Err("marginals mismatch".into());
    }
    if cert.achieved != cert.bound {
        return Err("achieved != bound".into());
    }
    if cert.distribution.entries().len() > 2 * n + 2 {
        return Err(format!(
            "too many atoms: {} > {}",
            cert.distribution.entries().len(),
            2 * n + 2
        ));
    }
    if let DistType::TypeI { dominating } = cert.dist_type {
        if dominating >= 1 {
            let mask: u32 = (n - dominating..n).map(|i| word_bit(n, i)).sum();
            for word in cert.distribution.entries().keys() {
                if word.weight() as usize >= k && (word.index() & mask) != mask {
                    return Err(format!(
                        "atom {word} of weight >= {k} misses a dominating event"
                    ));
                }
            }
        }
    }
    let _ = kind;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kofn::{upper_at_most, BoundKind};
    use crate::rational::rat;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn marg(values: &[(i64, i64)]) -> Marginals {
        Marginals::new(values.iter().map(|&(a, b)| rat(a, b)).collect()).unwrap()
    }

    fn atoms(pairs: &[(&str, Rational)]) -> BTreeMap<BinaryWord, Rational> {
        pairs
            .iter()
            .map(|(w, m)| (w.parse().unwrap(), m.clone()))
            .collect()
    }

    #[test]
    fn upper_at_least_type_i_worked_example() {
        let p = marg(&[(1, 10), (2, 10), (9, 10)]);
        let cert = attain_upper_at_least(&p, 2).unwrap();
        assert_eq!(cert.achieved, rat(3, 10));
        assert_eq!(cert.dist_type, DistType::TypeI { dominating: 1 });
        let expected = atoms(&[
            ("101", rat(1, 10)),
            ("011", rat(2, 10)),
            ("001", rat(6, 10)),
            ("000", rat(1, 10)),
        ]);
        assert_eq!(cert.distribution.entries(), &expected);
    }

    #[test]
    fn upper_at_least_type_ii() {
        let p = marg(&[(1, 2), (3, 5), (9, 10)]);
        let cert = attain_upper_at_least(&p, 2).unwrap();
        assert_eq!(cert.achieved, rat(1, 1));
        assert_eq!(cert.dist_type, DistType::TypeII);
        assert!(cert.distribution.entries().keys().all(|w| w.weight() >= 2));
    }

    #[test]
    fn upper_at_least_union_saturation() {
        let p = marg(&[(1, 5), (3, 10), (1, 2)]);
        let cert = attain_upper_at_least(&p, 1).unwrap();
        assert_eq!(cert.achieved, rat(1, 1));
        assert!(cert.distribution.entries().keys().all(|w| w.weight() >= 1));
    }

    #[test]
    fn lower_at_least_examples() {
        let p = marg(&[(1, 2), (3, 5), (7, 10)]);
        assert_eq!(attain_lower_at_least(&p, 2).unwrap().achieved, rat(2, 5));
        assert_eq!(attain_lower_at_least(&p, 1).unwrap().achieved, rat(7, 10));
        let p = marg(&[(1, 5), (3, 10), (1, 2)]);
        assert_eq!(attain_lower_at_least(&p, 3).unwrap().achieved, rat(0, 1));
    }

    #[test]
    fn exactly_upper_examples() {
        let p = marg(&[(1, 2), (3, 5), (7, 10)]);
        let cert = attain_exactly(&p, 2, ExactDirection::Upper).unwrap();
        assert_eq!(cert.achieved, rat(9, 10));
        for w in cert.distribution.entries().keys() {
            assert!(w.weight() == 2 || !EventSpec::exactly(2, 3).unwrap().contains(w));
        }
        let p = marg(&[(1, 2), (3, 5), (9, 10)]);
        let cert = attain_exactly(&p, 1, ExactDirection::Upper).unwrap();
        assert_eq!(cert.achieved, rat(1, 2));
        assert_eq!(cert.dist_type, DistType::Complemented);
    }

    #[test]
    fn exactly_lower_examples() {
        let p = marg(&[(1, 20), (9, 10), (19, 20)]);
        let cert = attain_exactly(&p, 2, ExactDirection::Lower).unwrap();
        assert_eq!(cert.achieved, rat(4, 5));
        let p = marg(&[(9, 10), (19, 20)]);
        let cert = attain_exactly(&p, 2, ExactDirection::Lower).unwrap();
        assert_eq!(cert.achieved, rat(17, 20));
        let p = marg(&[(1, 10), (1, 5), (3, 10)]);
        let cert = attain_exactly(&p, 2, ExactDirection::Lower).unwrap();
        assert_eq!(cert.achieved, rat(0, 1));
    }

    #[test]
    fn classify_examples() {
        let d = AtomDistribution::new(
            3,
            atoms(&[
                ("101", rat(1, 10)),
                ("011", rat(2, 10)),
                ("001", rat(6, 10)),
                ("000", rat(1, 10)),
            ]),
        )
        .unwrap();
        assert_eq!(classify(&d, 2), DistType::TypeI { dominating: 1 });

        let wrap = attain_upper_at_least(&marg(&[(1, 2), (3, 5), (9, 10)]), 2)
            .unwrap()
            .distribution;
        assert_eq!(classify(&wrap, 2), DistType::TypeII);

        let point = AtomDistribution::new(3, atoms(&[("000", rat(1, 1))])).unwrap();
        assert_eq!(classify(&point, 1), DistType::Neither);
    }

    #[test]
    fn classify_keeps_type_i_when_dominated_and_fully_covered() {
        // All stacks have k layers, zero mass on 000, and one event in
        // every stack: reported as TypeI (the informative label).
        let d = AtomDistribution::new(3, atoms(&[("101", rat(1, 2)), ("011", rat(1, 2))])).unwrap();
        assert_eq!(classify(&d, 2), DistType::TypeI { dominating: 1 });
    }

    fn arb_marginals(n: usize) -> impl Strategy<Value = Marginals> {
        proptest::collection::vec(0i64..=20, n)
            .prop_map(|vals| Marginals::new(vals.iter().map(|&v| rat(v, 20)).collect()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn certificates_are_valid(p in arb_marginals(5), k in 1usize..=5) {
            let cert = attain_upper_at_least(&p, k).unwrap();
            verify_certificate(&cert, &p, BoundKind::UpperAtLeast, k).unwrap();
            prop_assert_eq!(&cert.achieved, &upper_at_least(&p, k).unwrap().value);

            let cert = attain_lower_at_least(&p, k).unwrap();
            verify_certificate(&cert, &p, BoundKind::LowerAtLeast, k).unwrap();
            prop_assert_eq!(&cert.achieved, &lower_at_least(&p, k).unwrap().value);
        }

        #[test]
        fn exact_certificates_are_valid(p in arb_marginals(5), k in 0usize..=5) {
            let cert = attain_exactly(&p, k, ExactDirection::Upper).unwrap();
            verify_certificate(&cert, &p, BoundKind::UpperExactly, k).unwrap();
            prop_assert_eq!(&cert.achieved, &upper_exactly(&p, k).unwrap().value);

            let cert = attain_exactly(&p, k, ExactDirection::Lower).unwrap();
            verify_certificate(&cert, &p, BoundKind::LowerExactly, k).unwrap();
            prop_assert_eq!(&cert.achieved, &lower_exactly(&p, k).unwrap().value);
        }

        #[test]
        fn at_most_bounds_attained_via_complements(p in arb_marginals(4), k in 0usize..=3) {
            // The at-most certificates are the complements of at-least ones;
            // spot-check the identity here.
            let q = p.complement();
            let cert = attain_upper_at_least(&q, 4 - k).unwrap();
            let flipped = complement_map(&cert.distribution);
            let at_most = flipped.event_probability(&EventSpec::at_most(k, 4).unwrap());
            prop_assert_eq!(at_most, upper_at_most(&p, k).unwrap().value);
            // Complementarity ties the same certificate to the lower side.
            let at_least = flipped.event_probability(&EventSpec::at_least(k + 1, 4).unwrap());
            prop_assert_eq!(at_least, rat(1, 1) - upper_at_most(&p, k).unwrap().value);
        }
    }
}
