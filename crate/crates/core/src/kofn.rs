//! Closed-form sharp bounds for k-out-of-n probabilities.
//!
//! Each of the four one-sided bound families is governed by a stopping index
//! `r*`: the largest `r` in the family's range whose defining inequality
//! holds (0 when none does). The satisfying set is downward closed, so `r*`
//! is found by binary search; a linear scan coexists as a reference.
//!
//! Bounds for exactly-k events reuse these four families: the upper bound is
//! the at-least bound unless that saturates at 1, in which case the sharp
//! value comes from the complementary at-most form; the lower bound is
//! positive only when the at-least lower family stops at `r* = n-k`.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::marginals::Marginals;
use crate::rational::Rational;

/// Which closed form produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    UpperAtLeast,
    LowerAtMost,
    LowerAtLeast,
    UpperAtMost,
    UpperExactly,
    LowerExactly,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::UpperAtLeast => "upper_at_least",
            BoundKind::LowerAtMost => "lower_at_most",
            BoundKind::LowerAtLeast => "lower_at_least",
            BoundKind::UpperAtMost => "upper_at_most",
            BoundKind::UpperExactly => "upper_exactly",
            BoundKind::LowerExactly => "lower_exactly",
        }
    }
}

/// The four r* searches, named by the bound they serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundFamily {
    UpperAtLeast,
    LowerAtMost,
    LowerAtLeast,
    UpperAtMost,
}

/// A computed bound: the value, the stopping index that selected the branch,
/// and whether the min/max clamp in the closed form was active.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundResult {
    pub value: Rational,
    pub r_star: usize,
    pub saturated: bool,
    pub kind: BoundKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KofnError {
    #[error("k = {k} outside the valid range {lo}..={hi}")]
    KOutOfRange { k: usize, lo: usize, hi: usize },
}

impl BoundFamily {
    /// Inclusive upper end of the r-range `{1, ..., max_r}`; 0 means empty.
    fn max_r(self, n: usize, k: usize) -> usize {
        match self {
            BoundFamily::UpperAtLeast => k - 1,
            BoundFamily::LowerAtMost => k,
            BoundFamily::LowerAtLeast => n - k,
            BoundFamily::UpperAtMost => n - k - 1,
        }
    }

    fn check_k(self, n: usize, k: usize) -> Result<(), KofnError> {
        let (lo, hi) = match self {
            BoundFamily::UpperAtLeast | BoundFamily::LowerAtLeast => (1, n),
            BoundFamily::LowerAtMost | BoundFamily::UpperAtMost => (0, n - 1),
        };
        if k < lo || k > hi {
            return Err(KofnError::KOutOfRange { k, lo, hi });
        }
        Ok(())
    }
}

/// Prefix and complement-suffix sums of the sorted marginals, shared by the
/// family inequalities and the bound values.
struct Sums {
    /// prefix[j] = p_1 + ... + p_j (1-based, prefix[0] = 0).
    prefix: Vec<Rational>,
    /// suffix[j] = (1-p_j) + ... + (1-p_n) (1-based, suffix[n+1] = 0).
    suffix: Vec<Rational>,
}

impl Sums {
    fn new(p: &Marginals) -> Sums {
        let n = p.n();
        let prefix = p.prefix_sums();
        let mut suffix = vec![Rational::zero(); n + 2];
        for j in (1..=n).rev() {
            suffix[j] = &suffix[j + 1] + (Rational::one() - p.value(j - 1));
        }
        Sums { prefix, suffix }
    }

    /// The family's defining inequality at `r` (cross-multiplied, exact).
    fn satisfied(&self, p: &Marginals, k: usize, family: BoundFamily, r: usize) -> bool {
        let n = p.n();
        match family {
            // p_{n-r+1} >= sum_{i<=n-r+1} p_i / (k-r+1)
            BoundFamily::UpperAtLeast => p.value(n - r) * int(k - r + 1) >= self.prefix[n - r + 1],
            // p_{n-r+1} >= sum_{i<=n-r+1} p_i / (k-r+2)
            BoundFamily::LowerAtMost => p.value(n - r) * int(k - r + 2) >= self.prefix[n - r + 1],
            // 1-p_r >= sum_{i>=r} (1-p_i) / (n-k-r+2)
            BoundFamily::LowerAtLeast => {
                (Rational::one() - p.value(r - 1)) * int(n - k - r + 2) >= self.suffix[r]
            }
            // 1-p_r >= sum_{i>=r} (1-p_i) / (n-k-r+1)
            BoundFamily::UpperAtMost => {
                (Rational::one() - p.value(r - 1)) * int(n - k - r + 1) >= self.suffix[r]
            }
        }
    }
}

fn int(v: usize) -> Rational {
    Rational::from_integer((v as i64).into())
}

/// Largest r in the family range whose inequality holds, or 0. Binary search
/// over the downward-closed satisfying set.
pub fn find_r_star(p: &Marginals, k: usize, family: BoundFamily) -> Result<usize, KofnError> {
    family.check_k(p.n(), k)?;
    Ok(find_r_star_counted(p, k, family).0)
}

/// Same, also reporting how many inequality evaluations were spent. The
/// count is exactly ceil(log2(range size + 1)).
pub fn find_r_star_counted(p: &Marginals, k: usize, family: BoundFamily) -> (usize, usize) {
    let sums = Sums::new(p);
    let max_r = family.max_r(p.n(), k);
    let mut evals = 0usize;
    let (mut lo, mut hi) = (0usize, max_r);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        evals += 1;
        if sums.satisfied(p, k, family, mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    (lo, evals)
}

/// Linear-scan reference for the binary search.
pub fn find_r_star_linear(
    p: &Marginals,
    k: usize,
    family: BoundFamily,
) -> Result<usize, KofnError> {
    family.check_k(p.n(), k)?;
    let sums = Sums::new(p);
    let mut r_star = 0;
    for r in 1..=family.max_r(p.n(), k) {
        if sums.satisfied(p, k, family, r) {
            r_star = r;
        }
    }
    Ok(r_star)
}

/// Sharp upper bound on P(at least k of n occur):
/// min{sum_{i<=n-r*} p_i / (k-r*), 1}.
pub fn upper_at_least(p: &Marginals, k: usize) -> Result<BoundResult, KofnError> {
    BoundFamily::UpperAtLeast.check_k(p.n(), k)?;
    let r = find_r_star_counted(p, k, BoundFamily::UpperAtLeast).0;
    let sums = Sums::new(p);
    let raw = &sums.prefix[p.n() - r] / int(k - r);
    let saturated = raw >= Rational::one();
    Ok(BoundResult {
        value: if saturated { Rational::one() } else { raw },
        r_star: r,
        saturated,
        kind: BoundKind::UpperAtLeast,
    })
}

/// Sharp lower bound on P(at most k of n occur):
/// max{1 - sum_{i<=n-r*} p_i / (k+1-r*), 0}.
pub fn lower_at_most(p: &Marginals, k: usize) -> Result<BoundResult, KofnError> {
    BoundFamily::LowerAtMost.check_k(p.n(), k)?;
    let r = find_r_star_counted(p, k, BoundFamily::LowerAtMost).0;
    let sums = Sums::new(p);
    let raw = Rational::one() - &sums.prefix[p.n() - r] / int(k + 1 - r);
    let saturated = raw <= Rational::zero();
    Ok(BoundResult {
        value: if saturated { Rational::zero() } else { raw },
        r_star: r,
        saturated,
        kind: BoundKind::LowerAtMost,
    })
}

/// Sharp lower bound on P(at least k of n occur):
/// max{1 - sum_{i>r*} (1-p_i) / (n-k+1-r*), 0}.
pub fn lower_at_least(p: &Marginals, k: usize) -> Result<BoundResult, KofnError> {
    BoundFamily::LowerAtLeast.check_k(p.n(), k)?;
    let r = find_r_star_counted(p, k, BoundFamily::LowerAtLeast).0;
    let sums = Sums::new(p);
    let raw = Rational::one() - &sums.suffix[r + 1] / int(p.n() - k + 1 - r);
    let saturated = raw <= Rational::zero();
    Ok(BoundResult {
        value: if saturated { Rational::zero() } else { raw },
        r_star: r,
        saturated,
        kind: BoundKind::LowerAtLeast,
    })
}

/// Sharp upper bound on P(at most k of n occur):
/// min{sum_{i>r*} (1-p_i) / (n-k-r*), 1}.
pub fn upper_at_most(p: &Marginals, k: usize) -> Result<BoundResult, KofnError> {
    BoundFamily::UpperAtMost.check_k(p.n(), k)?;
    let r = find_r_star_counted(p, k, BoundFamily::UpperAtMost).0;
    let sums = Sums::new(p);
    let raw = &sums.suffix[r + 1] / int(p.n() - k - r);
    let saturated = raw >= Rational::one();
    Ok(BoundResult {
        value: if saturated { Rational::one() } else { raw },
        r_star: r,
        saturated,
        kind: BoundKind::UpperAtMost,
    })
}

/// Sharp upper bound on P(exactly k of n occur). Equal to the at-least
/// bound unless that saturates at 1; then the complementary at-most form
/// is the sharp value. k = 0 and k = n degenerate to the one-sided bounds.
pub fn upper_exactly(p: &Marginals, k: usize) -> Result<BoundResult, KofnError> {
    let n = p.n();
    if k > n {
        return Err(KofnError::KOutOfRange { k, lo: 0, hi: n });
    }
    let rebrand = |mut b: BoundResult| {
        b.kind = BoundKind::UpperExactly;
        b
    };
    if k == 0 {
        return Ok(rebrand(upper_at_most(p, 0)?));
    }
    if k == n {
        return Ok(rebrand(upper_at_least(p, n)?));
    }
    let at_least = upper_at_least(p, k)?;
    if at_least.value < Rational::one() {
        Ok(rebrand(at_least))
    } else {
        Ok(rebrand(upper_at_most(p, k)?))
    }
}

/// Sharp lower bound on P(exactly k of n occur). Positive only when the
/// at-least lower family stops at r* = n-k, where the leftover layers of
/// the dominating complements cannot avoid a common overlap.
pub fn lower_exactly(p: &Marginals, k: usize) -> Result<BoundResult, KofnError> {
    let n = p.n();
    if k > n {
        return Err(KofnError::KOutOfRange { k, lo: 0, hi: n });
    }
    if k == 0 {
        let mut b = lower_at_most(p, 0)?;
        b.kind = BoundKind::LowerExactly;
        return Ok(b);
    }
    let sums = Sums::new(p);
    if k == n {
        let raw = Rational::one() - &sums.suffix[1];
        let saturated = raw <= Rational::zero();
        return Ok(BoundResult {
            value: if saturated { Rational::zero() } else { raw },
            r_star: 0,
            saturated,
            kind: BoundKind::LowerExactly,
        });
    }
    let r = find_r_star_counted(p, k, BoundFamily::LowerAtLeast).0;
    if r < n - k {
        return Ok(BoundResult {
            value: Rational::zero(),
            r_star: r,
            saturated: true,
            kind: BoundKind::LowerExactly,
        });
    }
    // r = n-k: smallest possible overlap of the n-k leftover complement
    // layers: sum_{i<=n-k}(1-p_i) - sum_{i>n-k}(1-p_i) - (n-k-1).
    let raw =
        (&sums.suffix[1] - &sums.suffix[n - k + 1]) - &sums.suffix[n - k + 1] - int(n - k - 1);
    let saturated = raw <= Rational::zero();
    Ok(BoundResult {
        value: if saturated { Rational::zero() } else { raw },
        r_star: r,
        saturated,
        kind: BoundKind::LowerExactly,
    })
}
