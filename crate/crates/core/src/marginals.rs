//! Sorted marginal probability vectors.
//!
//! All bound formulas index into the ascending order p_1 <= ... <= p_n, so
//! marginals are sorted once at construction and the permutation back to the
//! caller's ordering is kept alongside.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::{format_rational, Rational};
use crate::word::MAX_WORD_LEN;

/// Marginal probabilities in ascending order plus the permutation mapping
/// sorted position -> original (caller) position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marginals {
    values: Vec<Rational>,
    perm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarginalsError {
    #[error("no marginals given")]
    Empty,
    #[error("{0} events exceed the supported maximum {MAX_WORD_LEN}")]
    TooMany(usize),
    #[error("marginal {index} = {} lies outside [0, 1]", format_rational(.value))]
    OutOfRange { index: usize, value: Rational },
}

impl Marginals {
    /// Builds from probabilities in caller order; sorts ascending (stable)
    /// and records the permutation.
    pub fn new(values: Vec<Rational>) -> Result<Self, MarginalsError> {
        if values.is_empty() {
            return Err(MarginalsError::Empty);
        }
        if values.len() > MAX_WORD_LEN {
            return Err(MarginalsError::TooMany(values.len()));
        }
        for (index, value) in values.iter().enumerate() {
            if value < &Rational::zero() || value > &Rational::one() {
                return Err(MarginalsError::OutOfRange {
                    index,
                    value: value.clone(),
                });
            }
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].cmp(&values[b]).then(a.cmp(&b)));
        let sorted = order.iter().map(|&i| values[i].clone()).collect();
        Ok(Marginals {
            values: sorted,
            perm: order,
        })
    }

    /// Builds from already-sorted probabilities with an identity permutation.
    pub fn from_sorted(values: Vec<Rational>) -> Result<Self, MarginalsError> {
        let m = Self::new(values.clone())?;
        debug_assert_eq!(m.values, values, "input not sorted ascending");
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Ascending probabilities.
    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// Probability at sorted position `i` (0-based).
    pub fn value(&self, i: usize) -> &Rational {
        &self.values[i]
    }

    /// Maps sorted position -> original position.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Recovers the caller's original ordering exactly.
    pub fn original_order(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.n()];
        for (sorted_idx, &orig_idx) in self.perm.iter().enumerate() {
            out[orig_idx] = self.values[sorted_idx].clone();
        }
        out
    }

    /// Prefix sums: `prefix(j)` = sum of the first `j` sorted values.
    pub fn prefix_sums(&self) -> Vec<Rational> {
        let mut out = Vec::with_capacity(self.n() + 1);
        let mut acc = Rational::zero();
        out.push(acc.clone());
        for v in &self.values {
            acc += v;
            out.push(acc.clone());
        }
        out
    }

    /// Complement marginals in ascending order: q_i = 1 - p_{n-i+1}.
    /// The sorted-position mapping is `i -> n-1-i`.
    pub fn complement(&self) -> Marginals {
        let values: Vec<Rational> = self
            .values
            .iter()
            .rev()
            .map(|p| Rational::one() - p)
            .collect();
        Marginals::from_sorted(values).expect("complement of valid marginals is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn sorts_and_remembers_permutation() {
        let m = Marginals::new(vec![rat(9, 10), rat(1, 10), rat(2, 10)]).unwrap();
        assert_eq!(m.values(), &[rat(1, 10), rat(1, 5), rat(9, 10)]);
        assert_eq!(m.perm(), &[1, 2, 0]);
        assert_eq!(m.original_order(), vec![rat(9, 10), rat(1, 10), rat(2, 10)]);
    }

    #[test]
    fn admits_ties_and_endpoints() {
        let m = Marginals::new(vec![rat(1, 2), rat(0, 1), rat(1, 2), rat(1, 1)]).unwrap();
        assert_eq!(m.values(), &[rat(0, 1), rat(1, 2), rat(1, 2), rat(1, 1)]);
        // Stable tie-break keeps the earlier caller index first.
        assert_eq!(m.perm(), &[1, 0, 2, 3]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Marginals::new(vec![rat(3, 2)]).is_err());
        assert!(Marginals::new(vec![rat(-1, 2)]).is_err());
        assert!(Marginals::new(vec![]).is_err());
    }

    #[test]
    fn complement_reverses_and_flips() {
        let m = Marginals::new(vec![rat(1, 10), rat(2, 10), rat(9, 10)]).unwrap();
        let q = m.complement();
        assert_eq!(q.values(), &[rat(1, 10), rat(4, 5), rat(9, 10)]);
    }
}
