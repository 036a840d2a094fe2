//! Sparse joint distributions over the 2^n atoms.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::event::EventSpec;
use crate::rational::{format_rational, Rational};
use crate::word::BinaryWord;

/// A joint distribution given by its positive atom masses. Zero-mass atoms
/// are absent and the total mass is exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomDistribution {
    n: usize,
    entries: BTreeMap<BinaryWord, Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistError {
    #[error("atom `{0}` does not have length {1}")]
    WordLength(BinaryWord, usize),
    #[error("atom `{word}` carries non-positive mass {}", format_rational(.mass))]
    NonPositiveMass { word: BinaryWord, mass: Rational },
    #[error("total mass is {}, expected exactly 1", format_rational(.total))]
    TotalMass { total: Rational },
}

impl AtomDistribution {
    /// Validates and builds; drops nothing (zero masses are rejected).
    pub fn new(n: usize, entries: BTreeMap<BinaryWord, Rational>) -> Result<Self, DistError> {
        let mut total = Rational::zero();
        for (word, mass) in &entries {
            if word.len() != n {
                return Err(DistError::WordLength(*word, n));
            }
            if mass <= &Rational::zero() {
                return Err(DistError::NonPositiveMass {
                    word: *word,
                    mass: mass.clone(),
                });
            }
            total += mass;
        }
        if !total.is_one() {
            return Err(DistError::TotalMass { total });
        }
        Ok(AtomDistribution { n, entries })
    }

    /// Builds from possibly-duplicated, possibly-zero pieces by aggregating
    /// masses per word and discarding zeros.
    pub fn from_pieces<I>(n: usize, pieces: I) -> Result<Self, DistError>
    where
        I: IntoIterator<Item = (BinaryWord, Rational)>,
    {
        let mut entries: BTreeMap<BinaryWord, Rational> = BTreeMap::new();
        for (word, mass) in pieces {
            if mass.is_zero() {
                continue;
            }
            *entries.entry(word).or_insert_with(Rational::zero) += mass;
        }
        entries.retain(|_, m| !m.is_zero());
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &BTreeMap<BinaryWord, Rational> {
        &self.entries
    }

    pub fn mass(&self, word: &BinaryWord) -> Rational {
        self.entries
            .get(word)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Component i is the exact sum of masses of atoms where event i occurs.
    pub fn marginals(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.n];
        for (word, mass) in &self.entries {
            for i in word.set_bits() {
                out[i] += mass;
            }
        }
        out
    }

    /// Exact probability of a compound event under this distribution.
    pub fn event_probability(&self, spec: &EventSpec) -> Rational {
        debug_assert_eq!(spec.n(), self.n);
        self.entries
            .iter()
            .filter(|(word, _)| spec.contains(word))
            .fold(Rational::zero(), |acc, (_, mass)| acc + mass)
    }
}

/// Marginal vector of a distribution (sorted-order components as stored).
pub fn marginals_of(dist: &AtomDistribution) -> Vec<Rational> {
    dist.marginals()
}

/// Exact mass assigned to the event by the distribution.
pub fn event_probability(dist: &AtomDistribution, spec: &EventSpec) -> Rational {
    dist.event_probability(spec)
}
