//! Sharp, attainable bounds on probabilities of compound events when only
//! the marginal probabilities of the individual events are known.
//!
//! Everything is computed in exact rational arithmetic: closed-form bounds
//! for at-least / at-most / exactly k-out-of-n events ([`kofn`]), explicit
//! joint distributions attaining each bound ([`extremal`]), an exact simplex
//! oracle over the 2^n-atom polytope ([`lp`]), a Bellman-style decomposition
//! of optimizers into short move sequences ([`dp`]), and bounds for unions
//! of mutually exclusive conjunctions ([`exclusive`]). The [`cli`] module
//! drives all of it from problem files and runs randomized cross-checks of
//! every closed form against the oracle.

// Error values carry exact rationals by design; index loops mirror the
// matrix algebra they implement.
#![allow(clippy::result_large_err, clippy::needless_range_loop)]

pub mod cli;
pub mod dist;
pub mod dp;
pub mod event;
pub mod exclusive;
pub mod extremal;
pub mod kofn;
pub mod lp;
pub mod marginals;
pub mod rational;
pub mod word;

pub use dist::{event_probability, marginals_of, AtomDistribution};
pub use event::{event_atoms, EventKind, EventSpec};
pub use marginals::Marginals;
pub use rational::{format_rational, parse_rational, rat, Rational};
pub use word::BinaryWord;
