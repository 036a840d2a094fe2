//! Compound event specifications over the 2^n atoms.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::word::BinaryWord;

/// A compound event: a predicate on atom words of a fixed length `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSpec {
    kind: EventKind,
    n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// At least `k` of the `n` events occur.
    AtLeast(usize),
    /// At most `k` of the `n` events occur.
    AtMost(usize),
    /// Exactly `k` of the `n` events occur.
    Exactly(usize),
    /// An explicit, deduplicated set of atoms.
    Words(BTreeSet<BinaryWord>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("k = {k} outside the valid range {lo}..={hi} for this event kind")]
    KOutOfRange { k: usize, lo: usize, hi: usize },
    #[error("word `{0}` does not have length {1}")]
    WordLength(BinaryWord, usize),
}

impl EventSpec {
    /// At least k-out-of-n, 1 <= k <= n.
    pub fn at_least(k: usize, n: usize) -> Result<Self, EventError> {
        if k < 1 || k > n {
            return Err(EventError::KOutOfRange { k, lo: 1, hi: n });
        }
        Ok(EventSpec {
            kind: EventKind::AtLeast(k),
            n,
        })
    }

    /// At most k-out-of-n, 0 <= k <= n-1.
    pub fn at_most(k: usize, n: usize) -> Result<Self, EventError> {
        if n == 0 || k > n - 1 {
            return Err(EventError::KOutOfRange {
                k,
                lo: 0,
                hi: n.saturating_sub(1),
            });
        }
        Ok(EventSpec {
            kind: EventKind::AtMost(k),
            n,
        })
    }

    /// Exactly k-out-of-n, 0 <= k <= n.
    pub fn exactly(k: usize, n: usize) -> Result<Self, EventError> {
        if k > n {
            return Err(EventError::KOutOfRange { k, lo: 0, hi: n });
        }
        Ok(EventSpec {
            kind: EventKind::Exactly(k),
            n,
        })
    }

    /// An explicit atom set; every word must have length `n`.
    pub fn words<I: IntoIterator<Item = BinaryWord>>(
        words: I,
        n: usize,
    ) -> Result<Self, EventError> {
        let mut set = BTreeSet::new();
        for w in words {
            if w.len() != n {
                return Err(EventError::WordLength(w, n));
            }
            set.insert(w);
        }
        Ok(EventSpec {
            kind: EventKind::Words(set),
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &EventKind {
        &self.kind
    }

    /// Whether the atom `word` belongs to the event.
    pub fn contains(&self, word: &BinaryWord) -> bool {
        debug_assert_eq!(word.len(), self.n);
        match &self.kind {
            EventKind::AtLeast(k) => word.weight() as usize >= *k,
            EventKind::AtMost(k) => word.weight() as usize <= *k,
            EventKind::Exactly(k) => word.weight() as usize == *k,
            EventKind::Words(set) => set.contains(word),
        }
    }

    /// Materializes exactly the atoms satisfying the event predicate.
    pub fn atoms(&self) -> BTreeSet<BinaryWord> {
        match &self.kind {
            EventKind::Words(set) => set.clone(),
            _ => BinaryWord::all(self.n)
                .filter(|w| self.contains(w))
                .collect(),
        }
    }

    /// The complementary event (as an explicit word set for `Words`).
    pub fn complement_event(&self) -> EventSpec {
        let kind = match &self.kind {
            EventKind::AtLeast(k) => EventKind::AtMost(k - 1),
            EventKind::AtMost(k) => EventKind::AtLeast(k + 1),
            _ => EventKind::Words(
                BinaryWord::all(self.n)
                    .filter(|w| !self.contains(w))
                    .collect(),
            ),
        };
        EventSpec { kind, n: self.n }
    }

    /// Compact display used in reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            EventKind::AtLeast(k) => format!("at_least {k} of {}", self.n),
            EventKind::AtMost(k) => format!("at_most {k} of {}", self.n),
            EventKind::Exactly(k) => format!("exactly {k} of {}", self.n),
            EventKind::Words(set) => format!("{} explicit atoms of {}", set.len(), self.n),
        }
    }
}

/// Returns exactly the words satisfying the spec's predicate.
pub fn event_atoms(spec: &EventSpec) -> BTreeSet<BinaryWord> {
    spec.atoms()
}
