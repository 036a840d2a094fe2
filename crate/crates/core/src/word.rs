//! Fixed-length binary words indexing joint-distribution atoms.
//!
//! A word of length `n` selects one atom: bit `i` set means event `A_{i+1}`
//! occurs in the atom, clear means its complement does. The leftmost
//! character of the string form is event 1, so `"101"` is the atom where
//! events 1 and 3 occur and event 2 does not.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Hard cap on word length; enumeration of all 2^n atoms must stay tractable.
pub const MAX_WORD_LEN: usize = 24;

/// An `n`-bit atom index. Ordering follows the numeric value of the string
/// form read as binary, so words of equal length sort like their strings.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinaryWord {
    bits: u32,
    len: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("word length {0} exceeds the supported maximum {MAX_WORD_LEN}")]
    TooLong(usize),
    #[error("invalid word `{0}`: expected only 0/1 characters")]
    BadCharacter(String),
    #[error("word `{word}` has length {got}, expected {expected}")]
    LengthMismatch {
        word: String,
        got: usize,
        expected: usize,
    },
}

impl BinaryWord {
    /// The all-zero word of length `n` (no events occur).
    pub fn empty(n: usize) -> Self {
        assert!(n <= MAX_WORD_LEN, "word length {n} out of range");
        BinaryWord {
            bits: 0,
            len: n as u8,
        }
    }

    /// Builds a word from its numeric index in `0..2^n`.
    pub fn from_index(index: u32, n: usize) -> Self {
        assert!(n <= MAX_WORD_LEN, "word length {n} out of range");
        debug_assert!(index < (1u32 << n));
        BinaryWord {
            bits: index,
            len: n as u8,
        }
    }

    /// Builds a word with the given event indices (0-based) set.
    pub fn from_set_bits<I: IntoIterator<Item = usize>>(n: usize, set: I) -> Self {
        let mut w = Self::empty(n);
        for i in set {
            w = w.with_bit(i, true);
        }
        w
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Numeric index of the word, consistent with `Ord`.
    pub fn index(&self) -> u32 {
        self.bits
    }

    /// Hamming weight: how many events occur in this atom.
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Whether event `i` (0-based) occurs.
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        self.bits >> (self.len() - 1 - i) & 1 == 1
    }

    pub fn with_bit(&self, i: usize, value: bool) -> Self {
        debug_assert!(i < self.len());
        let mask = 1u32 << (self.len() - 1 - i);
        BinaryWord {
            bits: if value {
                self.bits | mask
            } else {
                self.bits & !mask
            },
            len: self.len,
        }
    }

    /// Event indices (0-based) that occur in this atom.
    pub fn set_bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.bit(i))
    }

    /// Flips every bit: the atom where exactly the complementary events occur.
    pub fn complement(&self) -> Self {
        let mask = if self.len == 0 {
            0
        } else {
            (1u32 << self.len()) - 1
        };
        BinaryWord {
            bits: !self.bits & mask,
            len: self.len,
        }
    }

    /// Reverses bit order (event 1 swaps with event n, and so on).
    pub fn reverse(&self) -> Self {
        let mut out = Self::empty(self.len());
        for i in 0..self.len() {
            out = out.with_bit(self.len() - 1 - i, self.bit(i));
        }
        out
    }

    /// All 2^n words of length `n` in numeric order.
    pub fn all(n: usize) -> impl Iterator<Item = BinaryWord> {
        assert!(n <= MAX_WORD_LEN, "word length {n} out of range");
        (0..(1u64 << n)).map(move |i| BinaryWord::from_index(i as u32, n))
    }

    /// Parses against an expected length.
    pub fn parse(s: &str, n: usize) -> Result<Self, WordError> {
        let w: BinaryWord = s.parse()?;
        if w.len() != n {
            return Err(WordError::LengthMismatch {
                word: s.to_string(),
                got: w.len(),
                expected: n,
            });
        }
        Ok(w)
    }
}

impl fmt::Display for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryWord({self})")
    }
}

impl FromStr for BinaryWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > MAX_WORD_LEN {
            return Err(WordError::TooLong(s.len()));
        }
        let mut w = BinaryWord::empty(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => w = w.with_bit(i, true),
                _ => return Err(WordError::BadCharacter(s.to_string())),
            }
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_round_trip_and_bit_order() {
        let w: BinaryWord = "101".parse().unwrap();
        assert_eq!(w.to_string(), "101");
        assert!(w.bit(0));
        assert!(!w.bit(1));
        assert!(w.bit(2));
        assert_eq!(w.weight(), 2);
        assert_eq!(w.index(), 0b101);
    }

    #[test]
    fn complement_and_reverse() {
        let w: BinaryWord = "110".parse().unwrap();
        assert_eq!(w.complement().to_string(), "001");
        assert_eq!(w.reverse().to_string(), "011");
        assert_eq!(w.complement().complement(), w);
    }

    #[test]
    fn enumeration_matches_numeric_order() {
        let words: Vec<String> = BinaryWord::all(2).map(|w| w.to_string()).collect();
        assert_eq!(words, ["00", "01", "10", "11"]);
    }

    #[test]
    fn parse_checks_length_and_characters() {
        assert!(BinaryWord::parse("10", 3).is_err());
        assert!(BinaryWord::parse("102", 3).is_err());
        assert!(BinaryWord::parse("101", 3).is_ok());
    }
}
