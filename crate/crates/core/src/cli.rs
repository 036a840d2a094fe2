//! Problem files, machine-readable reports, and the verification campaign.
//!
//! Problem files are JSON documents with rational values as strings under
//! the crate's text grammar. Reports are JSON with a fixed field layout so
//! identical inputs produce byte-identical output. Atom words inside
//! reports are given in the caller's original marginal order; the sort
//! permutation used internally is part of every report that sorts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::AtomDistribution;
use crate::dp::{self, DpState, MassMap};
use crate::event::EventSpec;
use crate::exclusive::{self, EventSets};
use crate::extremal::{self, ExactDirection};
use crate::kofn::{self, BoundFamily, BoundResult};
use crate::lp::{self, Direction, ExtraConstraint, LpProblem, LpSolution, Relation};
use crate::marginals::Marginals;
use crate::rational::{decimal_string, format_rational, parse_rational, Rational};
use crate::word::BinaryWord;

const DECIMAL_DIGITS: usize = 12;
/// Percentage of random vectors that get an engineered tie or endpoint.
const SPECIAL_RATE_PERCENT: u32 = 20;

// --------------------------------------------------------------------------
// Problem file schema
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub marginals: Option<Vec<String>>,
    #[serde(default)]
    pub query: Option<QuerySpec>,
    #[serde(default)]
    pub event: Option<EventFileSpec>,
    #[serde(default)]
    pub constraints: Option<Vec<ConstraintSpec>>,
    #[serde(default)]
    pub sets: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub kind: String,
    pub k: usize,
    pub direction: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventFileSpec {
    pub kind: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub words: Option<Vec<String>>,
    pub direction: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub words: Vec<String>,
    pub relation: String,
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub lower: Option<String>,
    #[serde(default)]
    pub upper: Option<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("verification mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Mismatch(_) => 1,
        }
    }
}

fn input_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<ProblemFile, CliError> {
        serde_json::from_str(text).map_err(input_err)
    }

    fn marginals(&self) -> Result<Marginals, CliError> {
        let strings = self
            .marginals
            .as_ref()
            .ok_or_else(|| CliError::Input("problem file is missing `marginals`".into()))?;
        let values = strings
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(input_err)?;
        Marginals::new(values).map_err(input_err)
    }

    fn query(&self) -> Result<&QuerySpec, CliError> {
        self.query
            .as_ref()
            .ok_or_else(|| CliError::Input("problem file is missing `query`".into()))
    }

    fn event_sets(&self, tolerant: bool) -> Result<EventSets, CliError> {
        let raw = self
            .sets
            .as_ref()
            .ok_or_else(|| CliError::Input("problem file is missing `sets`".into()))?;
        let sets = raw
            .iter()
            .map(|group| {
                group
                    .iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(input_err)?;
        if tolerant {
            EventSets::new_tolerant(sets).map_err(input_err)
        } else {
            EventSets::new(sets).map_err(input_err)
        }
    }

    /// Event for the oracle, in the caller's original event order.
    fn oracle_event(&self, n: usize) -> Result<(EventSpec, Direction), CliError> {
        let spec = self
            .event
            .as_ref()
            .ok_or_else(|| CliError::Input("problem file is missing `event`".into()))?;
        let event = match spec.kind.as_str() {
            "words" => {
                let words = spec
                    .words
                    .as_ref()
                    .ok_or_else(|| CliError::Input("event kind `words` needs `words`".into()))?;
                let parsed = words
                    .iter()
                    .map(|w| BinaryWord::parse(w, n))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(input_err)?;
                EventSpec::words(parsed, n).map_err(input_err)?
            }
            kind => {
                let k = spec
                    .k
                    .ok_or_else(|| CliError::Input(format!("event kind `{kind}` needs `k`")))?;
                build_kind_event(kind, k, n)?
            }
        };
        let direction = match spec.direction.as_str() {
            "maximize" | "max" | "upper" => Direction::Maximize,
            "minimize" | "min" | "lower" => Direction::Minimize,
            other => return Err(CliError::Input(format!("unknown direction `{other}`"))),
        };
        Ok((event, direction))
    }

    fn extra_constraints(&self, n: usize) -> Result<Vec<ExtraConstraint>, CliError> {
        let Some(specs) = &self.constraints else {
            return Ok(Vec::new());
        };
        specs
            .iter()
            .map(|c| {
                let atoms = c
                    .words
                    .iter()
                    .map(|w| BinaryWord::parse(w, n))
                    .collect::<Result<_, _>>()
                    .map_err(input_err)?;
                let value = |field: &Option<String>, name: &str| -> Result<Rational, CliError> {
                    field
                        .as_ref()
                        .ok_or_else(|| {
                            CliError::Input(format!(
                                "constraint relation `{}` needs `{name}`",
                                c.relation
                            ))
                        })
                        .and_then(|s| parse_rational(s).map_err(input_err))
                };
                let relation = match c.relation.as_str() {
                    "eq" | "=" => Relation::Eq(value(&c.value, "value")?),
                    "le" | "<=" => Relation::Le(value(&c.value, "value")?),
                    "ge" | ">=" => Relation::Ge(value(&c.value, "value")?),
                    "interval" | "between" => {
                        Relation::Between(value(&c.lower, "lower")?, value(&c.upper, "upper")?)
                    }
                    other => return Err(CliError::Input(format!("unknown relation `{other}`"))),
                };
                Ok(ExtraConstraint { atoms, relation })
            })
            .collect()
    }
}

fn build_kind_event(kind: &str, k: usize, n: usize) -> Result<EventSpec, CliError> {
    match kind {
        "at_least" => EventSpec::at_least(k, n).map_err(input_err),
        "at_most" => EventSpec::at_most(k, n).map_err(input_err),
        "exactly" => EventSpec::exactly(k, n).map_err(input_err),
        other => Err(CliError::Input(format!("unknown event kind `{other}`"))),
    }
}

// --------------------------------------------------------------------------
// Report primitives
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ValueText {
    pub rational: String,
    pub decimal: String,
    pub decimal_exact: bool,
}

fn value_text(r: &Rational) -> ValueText {
    let (decimal, decimal_exact) = decimal_string(r, DECIMAL_DIGITS);
    ValueText {
        rational: format_rational(r),
        decimal,
        decimal_exact,
    }
}

/// Remaps a sorted-order word to the caller's original event order.
fn remap_word(word: &BinaryWord, perm: &[usize]) -> BinaryWord {
    BinaryWord::from_set_bits(word.len(), word.set_bits().map(|i| perm[i]))
}

fn atoms_to_strings(
    entries: &BTreeMap<BinaryWord, Rational>,
    perm: Option<&[usize]>,
) -> BTreeMap<String, String> {
    entries
        .iter()
        .map(|(w, m)| {
            let w = match perm {
                Some(perm) => remap_word(w, perm),
                None => *w,
            };
            (w.to_string(), format_rational(m))
        })
        .collect()
}

// --------------------------------------------------------------------------
// bound
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub kind: String,
    pub k: usize,
    pub direction: String,
    pub bound: String,
    pub bound_decimal: String,
    pub bound_decimal_exact: bool,
    pub r_star: usize,
    pub saturated: bool,
    pub sort_permutation: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist_type: Option<String>,
}

/// Dispatches one of the six bound operations by kind/direction name.
pub fn query_bound(
    p: &Marginals,
    kind: &str,
    k: usize,
    direction: &str,
) -> Result<BoundResult, CliError> {
    let res = match (kind, direction) {
        ("at_least", "upper") => kofn::upper_at_least(p, k),
        ("at_least", "lower") => kofn::lower_at_least(p, k),
        ("at_most", "upper") => kofn::upper_at_most(p, k),
        ("at_most", "lower") => kofn::lower_at_most(p, k),
        ("exactly", "upper") => kofn::upper_exactly(p, k),
        ("exactly", "lower") => kofn::lower_exactly(p, k),
        _ => {
            return Err(CliError::Input(format!(
                "unknown query kind/direction `{kind}`/`{direction}`"
            )))
        }
    };
    res.map_err(input_err)
}

/// Attaining distribution for any of the six bound operations. At-most
/// certificates come from complementing the matching at-least problem.
pub fn query_certificate(
    p: &Marginals,
    kind: &str,
    k: usize,
    direction: &str,
) -> Result<extremal::AttainmentCertificate, CliError> {
    match (kind, direction) {
        ("at_least", "upper") => extremal::attain_upper_at_least(p, k).map_err(input_err),
        ("at_least", "lower") => extremal::attain_lower_at_least(p, k).map_err(input_err),
        ("exactly", "upper") => {
            extremal::attain_exactly(p, k, ExactDirection::Upper).map_err(input_err)
        }
        ("exactly", "lower") => {
            extremal::attain_exactly(p, k, ExactDirection::Lower).map_err(input_err)
        }
        // at-most certificates are the complements of at-least ones.
        ("at_most", "upper") => {
            let q = p.complement();
            let inner = extremal::attain_upper_at_least(&q, p.n() - k).map_err(input_err)?;
            Ok(complemented_certificate(p, inner, k, "at_most"))
        }
        ("at_most", "lower") => {
            let q = p.complement();
            let inner = extremal::attain_lower_at_least(&q, p.n() - k).map_err(input_err)?;
            Ok(complemented_certificate(p, inner, k, "at_most"))
        }
        _ => Err(CliError::Input(format!(
            "unknown query kind/direction `{kind}`/`{direction}`"
        ))),
    }
}

fn complemented_certificate(
    p: &Marginals,
    inner: extremal::AttainmentCertificate,
    k: usize,
    kind: &str,
) -> extremal::AttainmentCertificate {
    let dist = AtomDistribution::from_pieces(
        p.n(),
        inner
            .distribution
            .entries()
            .iter()
            .map(|(w, m)| (w.reverse().complement(), m.clone())),
    )
    .expect("complement mapping preserves distributions");
    let event = build_kind_event(kind, k, p.n()).expect("valid event");
    let achieved = dist.event_probability(&event);
    extremal::AttainmentCertificate {
        distribution: dist,
        achieved: achieved.clone(),
        bound: achieved,
        dist_type: extremal::DistType::Complemented,
    }
}

pub fn cmd_bound(file: &ProblemFile, emit_distribution: bool) -> Result<BoundReport, CliError> {
    let p = file.marginals()?;
    let q = file.query()?;
    let bound = query_bound(&p, &q.kind, q.k, &q.direction)?;
    let mut report = BoundReport {
        n: p.n(),
        kind: q.kind.clone(),
        k: q.k,
        direction: q.direction.clone(),
        bound: format_rational(&bound.value),
        bound_decimal: value_text(&bound.value).decimal,
        bound_decimal_exact: value_text(&bound.value).decimal_exact,
        r_star: bound.r_star,
        saturated: bound.saturated,
        sort_permutation: p.perm().to_vec(),
        atoms: None,
        achieved: None,
        dist_type: None,
    };
    if emit_distribution {
        let cert = query_certificate(&p, &q.kind, q.k, &q.direction)?;
        // Self-checks before emitting: marginals and attainment.
        if cert.distribution.marginals() != p.values() {
            return Err(CliError::Mismatch("certificate marginals diverge".into()));
        }
        if cert.achieved != bound.value {
            return Err(CliError::Mismatch(format!(
                "certificate achieves {} but the bound is {}",
                format_rational(&cert.achieved),
                format_rational(&bound.value)
            )));
        }
        report.atoms = Some(atoms_to_strings(
            cert.distribution.entries(),
            Some(p.perm()),
        ));
        report.achieved = Some(format_rational(&cert.achieved));
        report.dist_type = Some(cert.dist_type.as_str().to_string());
    }
    Ok(report)
}

// --------------------------------------------------------------------------
// oracle
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub n: usize,
    pub event: String,
    pub direction: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_decimal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_decimal_exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<BTreeMap<String, String>>,
    /// 1-based indices of events present in every contributing optimizer atom.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominating_indices: Option<Vec<usize>>,
}

/// Runs the LP oracle in the caller's original event order (no sorting).
pub fn cmd_oracle(
    file: &ProblemFile,
    emit_optimizer: bool,
    atom_limit: usize,
) -> Result<OracleReport, CliError> {
    let strings = file
        .marginals
        .as_ref()
        .ok_or_else(|| CliError::Input("problem file is missing `marginals`".into()))?;
    let marginals = strings
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input_err)?;
    let n = marginals.len();
    let (event, direction) = file.oracle_event(n)?;
    let extra = file.extra_constraints(n)?;
    let prob = LpProblem {
        n,
        objective: event.clone(),
        direction,
        mass_total: Rational::from_integer(1.into()),
        marginal_rhs: marginals,
        extra,
    };
    let sol = lp::solve_with_limit(&prob, atom_limit).map_err(input_err)?;
    let mut report = OracleReport {
        n,
        event: event.describe(),
        direction: match direction {
            Direction::Maximize => "maximize".into(),
            Direction::Minimize => "minimize".into(),
        },
        status: sol.status().to_string(),
        value: None,
        value_decimal: None,
        value_decimal_exact: None,
        optimizer: None,
        dominating_indices: None,
    };
    if let LpSolution::Optimal(opt) = &sol {
        let vt = value_text(&opt.value);
        report.value = Some(vt.rational);
        report.value_decimal = Some(vt.decimal);
        report.value_decimal_exact = Some(vt.decimal_exact);
        if emit_optimizer {
            report.optimizer = Some(atoms_to_strings(&opt.optimizer, None));
            report.dominating_indices = Some(
                lp::dominating_indices(&opt.optimizer, &event, 0)
                    .into_iter()
                    .map(|i| i + 1)
                    .collect(),
            );
        }
    }
    Ok(report)
}

// --------------------------------------------------------------------------
// exclusive
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ExclusiveReport {
    pub k: usize,
    pub set_sizes: Vec<usize>,
    pub bound: String,
    pub bound_decimal: String,
    pub bound_decimal_exact: bool,
    pub t_star: String,
    pub t_star_decimal: String,
    pub r_t: usize,
    pub p_star: Vec<String>,
    pub weaker_bound: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualReport {
    pub value: String,
    pub value_decimal: String,
    pub t_star: String,
    pub r_t: usize,
}

pub fn cmd_exclusive(file: &ProblemFile, with_dual: bool) -> Result<ExclusiveReport, CliError> {
    let sets = file.event_sets(true)?;
    let result = exclusive::solve_exclusive_upper(&sets);
    let weaker = exclusive::union_of_conjunctions_upper(&sets);
    let bound_text = value_text(&result.bound);
    let dual = if with_dual {
        let d = exclusive::solve_exclusive_dual(&sets).map_err(input_err)?;
        Some(DualReport {
            value: format_rational(&d.bound),
            value_decimal: value_text(&d.bound).decimal,
            t_star: format_rational(&d.t_star),
            r_t: d.r_t_star,
        })
    } else {
        None
    };
    Ok(ExclusiveReport {
        k: sets.k(),
        set_sizes: sets.sets().iter().map(|s| s.len()).collect(),
        bound: bound_text.rational,
        bound_decimal: bound_text.decimal,
        bound_decimal_exact: bound_text.decimal_exact,
        t_star: format_rational(&result.t_star),
        t_star_decimal: value_text(&result.t_star).decimal,
        r_t: result.r_t_star,
        p_star: result.p_star.iter().map(format_rational).collect(),
        weaker_bound: format_rational(&weaker),
        dual,
    })
}

// --------------------------------------------------------------------------
// policy
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MoveReport {
    pub delta: String,
    pub consumed: BTreeMap<String, String>,
    pub produced: BTreeMap<String, String>,
    pub reward: String,
    pub cumulative: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyReport {
    pub n: usize,
    pub event: String,
    pub direction: String,
    pub bound: String,
    pub move_count: usize,
    pub moves: Vec<MoveReport>,
    pub total_reward: String,
}

/// Decomposes an exact optimizer of the queried problem into at most n+1
/// admissible moves; the accumulated reward must equal the bound.
pub fn cmd_policy(
    file: &ProblemFile,
    strict_delta: bool,
    atom_limit: usize,
) -> Result<PolicyReport, CliError> {
    let strings = file
        .marginals
        .as_ref()
        .ok_or_else(|| CliError::Input("problem file is missing `marginals`".into()))?;
    let marginals = strings
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input_err)?;
    let n = marginals.len();

    // Either the k-of-n query or an explicit event drives the objective.
    let (event, direction, direction_name) = if let Some(q) = &file.query {
        let event = build_kind_event(&q.kind, q.k, n)?;
        let dir = match q.direction.as_str() {
            "upper" => Direction::Maximize,
            "lower" => Direction::Minimize,
            other => return Err(CliError::Input(format!("unknown direction `{other}`"))),
        };
        (event, dir, q.direction.clone())
    } else {
        let (event, dir) = file.oracle_event(n)?;
        let name = match dir {
            Direction::Maximize => "maximize".to_string(),
            Direction::Minimize => "minimize".to_string(),
        };
        (event, dir, name)
    };

    let prob = LpProblem {
        n,
        objective: event.clone(),
        direction,
        mass_total: Rational::from_integer(1.into()),
        marginal_rhs: marginals.clone(),
        extra: Vec::new(),
    };
    let sol = lp::solve_with_limit(&prob, atom_limit).map_err(input_err)?;
    let opt = sol
        .optimum()
        .ok_or_else(|| CliError::Input("problem is infeasible".into()))?;

    let state = DpState {
        t: Rational::from_integer(1.into()),
        l: marginals.clone(),
        z: MassMap::new(),
    };
    let moves = dp::decompose_optimizer(&opt.optimizer, &state).map_err(input_err)?;
    let mut cursor = state;
    let mut cumulative = Rational::from_integer(0.into());
    let mut move_reports = Vec::with_capacity(moves.len());
    for mv in &moves {
        cursor = dp::apply_move_mode(&cursor, mv, strict_delta)
            .map_err(|e| CliError::Mismatch(format!("decomposed move rejected: {e}")))?;
        let reward = dp::reward(&mv.produced, &event);
        cumulative += &reward;
        move_reports.push(MoveReport {
            delta: format_rational(&mv.delta),
            consumed: atoms_to_strings(&mv.consumed, None),
            produced: atoms_to_strings(&mv.produced, None),
            reward: format_rational(&reward),
            cumulative: format_rational(&cumulative),
        });
    }
    if cumulative != opt.value {
        return Err(CliError::Mismatch(format!(
            "decomposition reward {} does not reach the bound {}",
            format_rational(&cumulative),
            format_rational(&opt.value)
        )));
    }
    Ok(PolicyReport {
        n,
        event: event.describe(),
        direction: direction_name,
        bound: format_rational(&opt.value),
        move_count: move_reports.len(),
        moves: move_reports,
        total_reward: format_rational(&cumulative),
    })
}

// --------------------------------------------------------------------------
// sweep
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub bound: String,
    pub bound_decimal: String,
    pub r_star: usize,
    pub saturated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub n: usize,
    pub kind: String,
    pub direction: String,
    pub rows: Vec<SweepRow>,
    /// Total stopping-index inequality evaluations across all rows.
    pub inequality_evaluations: usize,
    pub sort_permutation: Vec<usize>,
}

/// Bounds for every valid k of the chosen family, sorted once up front.
/// The evaluation counter makes the logarithmic search observable.
pub fn cmd_sweep(
    file: &ProblemFile,
    kind: Option<&str>,
    direction: Option<&str>,
) -> Result<SweepReport, CliError> {
    let p = file.marginals()?;
    let (kind, direction) = match (kind, direction) {
        (Some(k), Some(d)) => (k.to_string(), d.to_string()),
        _ => {
            let q = file.query()?;
            (
                kind.unwrap_or(&q.kind).to_string(),
                direction.unwrap_or(&q.direction).to_string(),
            )
        }
    };
    let n = p.n();
    let ks: Vec<usize> = match kind.as_str() {
        "at_least" => (1..=n).collect(),
        "at_most" => (0..n).collect(),
        "exactly" => (0..=n).collect(),
        other => return Err(CliError::Input(format!("unknown event kind `{other}`"))),
    };
    let mut rows = Vec::with_capacity(ks.len());
    let mut evaluations = 0usize;
    for k in ks {
        // Count the search work for the family the bound actually uses.
        evaluations += match (kind.as_str(), direction.as_str()) {
            ("at_least", "upper") => kofn::find_r_star_counted(&p, k, BoundFamily::UpperAtLeast).1,
            ("at_least", "lower") => kofn::find_r_star_counted(&p, k, BoundFamily::LowerAtLeast).1,
            ("at_most", "upper") => kofn::find_r_star_counted(&p, k, BoundFamily::UpperAtMost).1,
            ("at_most", "lower") => kofn::find_r_star_counted(&p, k, BoundFamily::LowerAtMost).1,
            ("exactly", _) if k >= 1 && k < n => {
                kofn::find_r_star_counted(&p, k, BoundFamily::UpperAtLeast).1
            }
            _ => 0,
        };
        let bound = query_bound(&p, &kind, k, &direction)?;
        rows.push(SweepRow {
            k,
            bound: format_rational(&bound.value),
            bound_decimal: value_text(&bound.value).decimal,
            r_star: bound.r_star,
            saturated: bound.saturated,
        });
    }
    Ok(SweepReport {
        n,
        kind,
        direction,
        rows,
        inequality_evaluations: evaluations,
        sort_permutation: p.perm().to_vec(),
    })
}

// --------------------------------------------------------------------------
// verify
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize)]
pub struct CategoryCount {
    pub checked: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyCategories {
    pub bounds: CategoryCount,
    pub certificates: CategoryCount,
    pub policies: CategoryCount,
    pub bellman: CategoryCount,
    pub simplex_bruteforce: CategoryCount,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub atom_limit: usize,
    pub categories: VerifyCategories,
    pub mismatches_total: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<String>,
}

/// Random marginal vector with denominators <= 1000; roughly every fifth
/// vector gets an engineered tie or endpoint value.
pub fn random_marginals(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    let mut values: Vec<Rational> = (0..n)
        .map(|_| {
            let den = rng.gen_range(1i64..=1000);
            let num = rng.gen_range(0i64..=den);
            Rational::new(num.into(), den.into())
        })
        .collect();
    if rng.gen_range(0u32..100) < SPECIAL_RATE_PERCENT {
        let target = rng.gen_range(0..n);
        match rng.gen_range(0u32..3) {
            0 => values[target] = Rational::from_integer(0.into()),
            1 => values[target] = Rational::from_integer(1.into()),
            _ => {
                let source = rng.gen_range(0..n);
                values[target] = values[source].clone();
            }
        }
    }
    values
}

struct TrialOutcome {
    categories: VerifyCategories,
    findings: Vec<String>,
}

/// Formula-vs-oracle campaign: random instances, all six bounds against the
/// LP, certificates, policy decompositions, one-step optimality checks, and
/// (for n <= 4) the simplex against brute-force enumeration.
pub fn cmd_verify(
    n_max: usize,
    trials: usize,
    seed: u64,
    atom_limit: usize,
) -> Result<VerifyReport, CliError> {
    if n_max == 0 || n_max > atom_limit {
        return Err(CliError::Input(format!(
            "n_max must lie in 1..={atom_limit}"
        )));
    }
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(n_max, seed, trial as u64, atom_limit))
        .collect();
    let mut categories = VerifyCategories::default();
    let mut findings = Vec::new();
    for outcome in outcomes {
        for (total, part) in [
            (&mut categories.bounds, &outcome.categories.bounds),
            (
                &mut categories.certificates,
                &outcome.categories.certificates,
            ),
            (&mut categories.policies, &outcome.categories.policies),
            (&mut categories.bellman, &outcome.categories.bellman),
            (
                &mut categories.simplex_bruteforce,
                &outcome.categories.simplex_bruteforce,
            ),
        ] {
            total.checked += part.checked;
            total.mismatches += part.mismatches;
        }
        findings.extend(outcome.findings);
    }
    findings.truncate(32);
    let mismatches_total = categories.bounds.mismatches
        + categories.certificates.mismatches
        + categories.policies.mismatches
        + categories.bellman.mismatches
        + categories.simplex_bruteforce.mismatches;
    Ok(VerifyReport {
        n_max,
        trials,
        seed,
        atom_limit,
        categories,
        mismatches_total,
        findings,
    })
}

/// The six bound operations with their oracle events and directions.
fn bound_cases(n: usize) -> Vec<(&'static str, usize)> {
    let mut cases = Vec::new();
    for k in 1..=n {
        cases.push(("upper_at_least", k));
        cases.push(("lower_at_least", k));
    }
    for k in 0..n {
        cases.push(("upper_at_most", k));
        cases.push(("lower_at_most", k));
    }
    for k in 0..=n {
        cases.push(("upper_exactly", k));
        cases.push(("lower_exactly", k));
    }
    cases
}

/// Closed form and matching LP problem for one named bound operation.
pub fn bound_vs_oracle(
    p: &Marginals,
    op: &str,
    k: usize,
    atom_limit: usize,
) -> (Rational, Rational) {
    let n = p.n();
    let (bound, event, direction) = match op {
        "upper_at_least" => (
            kofn::upper_at_least(p, k).expect("valid k"),
            EventSpec::at_least(k, n).expect("valid"),
            Direction::Maximize,
        ),
        "lower_at_least" => (
            kofn::lower_at_least(p, k).expect("valid k"),
            EventSpec::at_least(k, n).expect("valid"),
            Direction::Minimize,
        ),
        "upper_at_most" => (
            kofn::upper_at_most(p, k).expect("valid k"),
            EventSpec::at_most(k, n).expect("valid"),
            Direction::Maximize,
        ),
        "lower_at_most" => (
            kofn::lower_at_most(p, k).expect("valid k"),
            EventSpec::at_most(k, n).expect("valid"),
            Direction::Minimize,
        ),
        "upper_exactly" => (
            kofn::upper_exactly(p, k).expect("valid k"),
            EventSpec::exactly(k, n).expect("valid"),
            Direction::Maximize,
        ),
        "lower_exactly" => (
            kofn::lower_exactly(p, k).expect("valid k"),
            EventSpec::exactly(k, n).expect("valid"),
            Direction::Minimize,
        ),
        other => unreachable!("unknown op {other}"),
    };
    let prob = LpProblem::bound_problem(p.values(), event, direction);
    let oracle = lp::solve_with_limit(&prob, atom_limit)
        .expect("plain bound problems are feasible")
        .expect_optimal()
        .value
        .clone();
    (bound.value, oracle)
}

fn run_trial(n_max: usize, seed: u64, trial: u64, atom_limit: usize) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_add(1));
    let n = rng.gen_range(1..=n_max);
    let p = Marginals::new(random_marginals(&mut rng, n)).expect("generated in range");
    let mut cat = VerifyCategories::default();
    let mut findings = Vec::new();
    let mut record = |slot: &mut CategoryCount, ok: bool, msg: String| {
        slot.checked += 1;
        if !ok {
            slot.mismatches += 1;
            findings.push(format!("trial {trial}: {msg}"));
        }
    };

    // 1. All six closed forms against the LP oracle.
    for (op, k) in bound_cases(n) {
        let (formula, oracle) = bound_vs_oracle(&p, op, k, atom_limit);
        record(
            &mut cat.bounds,
            formula == oracle,
            format!(
                "{op}(k={k}) formula {} != oracle {} for p={:?}",
                format_rational(&formula),
                format_rational(&oracle),
                p.values().iter().map(format_rational).collect::<Vec<_>>()
            ),
        );
    }

    // 2. Certificates attain their bounds and reproduce the marginals.
    for k in 1..=n {
        for (cert, kind) in [
            (
                extremal::attain_upper_at_least(&p, k),
                kofn::BoundKind::UpperAtLeast,
            ),
            (
                extremal::attain_lower_at_least(&p, k),
                kofn::BoundKind::LowerAtLeast,
            ),
        ] {
            let cert = cert.expect("valid k");
            let ok = extremal::verify_certificate(&cert, &p, kind, k).is_ok();
            record(
                &mut cat.certificates,
                ok,
                format!("certificate {kind:?} k={k} invalid"),
            );
        }
    }
    for k in 0..=n {
        for dir in [ExactDirection::Upper, ExactDirection::Lower] {
            let cert = extremal::attain_exactly(&p, k, dir).expect("valid k");
            let ok =
                extremal::verify_certificate(&cert, &p, kofn::BoundKind::UpperExactly, k).is_ok();
            record(
                &mut cat.certificates,
                ok,
                format!("exactly-{k} {dir:?} certificate invalid"),
            );
        }
    }

    // 3. Policy decomposition: short, admissible, reward-complete.
    for k in 1..=n {
        let cert = extremal::attain_upper_at_least(&p, k).expect("valid k");
        let y_star: MassMap = cert.distribution.entries().clone();
        let state = DpState::initial(&p);
        let event = EventSpec::at_least(k, n).expect("valid");
        let ok = match dp::decompose_optimizer(&y_star, &state) {
            Ok(moves) if moves.len() <= n + 1 => {
                let mut cursor = state;
                let mut cumulative = Rational::from_integer(0.into());
                let mut monotone = true;
                let mut admissible = true;
                for mv in &moves {
                    match dp::apply_move(&cursor, mv) {
                        Ok(next) => cursor = next,
                        Err(_) => {
                            admissible = false;
                            break;
                        }
                    }
                    let prev = cumulative.clone();
                    cumulative += dp::reward(&mv.produced, &event);
                    monotone &= cumulative >= prev;
                }
                admissible && monotone && cumulative == cert.achieved
            }
            _ => false,
        };
        record(
            &mut cat.policies,
            ok,
            format!("policy decomposition failed at k={k}"),
        );
    }

    // 4. One-step optimality at a sampled reachable state.
    if n <= 6 {
        let k = rng.gen_range(1..=n);
        let event = EventSpec::at_least(k, n).expect("valid");
        let state = DpState::initial(&p);
        let halfway = dp::scaling_move(
            &state,
            &event,
            &(Rational::new(1.into(), 3.into())),
            atom_limit,
        )
        .and_then(|mv| dp::apply_move(&state, &mv));
        if let Ok(mid) = halfway {
            let ok = match dp::scaling_move(
                &mid,
                &event,
                &(&mid.t / Rational::from_integer(2.into())),
                atom_limit,
            ) {
                Ok(mv) => match dp::bellman_check(&mid, &mv, &event, atom_limit) {
                    Ok(chk) => chk.holds && chk.equality,
                    Err(_) => false,
                },
                Err(_) => false,
            };
            record(
                &mut cat.bellman,
                ok,
                format!("one-step equality failed at k={k}"),
            );
        }
    }

    // 5. Simplex against brute-force enumeration on small instances.
    if n <= 4 {
        let k = rng.gen_range(1..=n);
        let event = EventSpec::at_least(k, n).expect("valid");
        for dir in [Direction::Maximize, Direction::Minimize] {
            let prob = LpProblem::bound_problem(p.values(), event.clone(), dir);
            let fast = lp::solve_with_limit(&prob, atom_limit)
                .expect("feasible")
                .expect_optimal()
                .value
                .clone();
            let slow = lp::brute_force_solve(&prob)
                .expect("feasible")
                .expect_optimal()
                .value
                .clone();
            record(
                &mut cat.simplex_bruteforce,
                fast == slow,
                format!(
                    "simplex {} != brute force {}",
                    format_rational(&fast),
                    format_rational(&slow)
                ),
            );
        }
    }

    TrialOutcome {
        categories: cat,
        findings,
    }
}
