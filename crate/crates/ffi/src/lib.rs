//! C ABI for the sharpbounds library.
//!
//! Conventions:
//! - Every function returns an [`SbStatus`]; results come out through
//!   pointer arguments.
//! - Handles (`SbMarginals`, `SbBound`, `SbCertificate`) are opaque; free
//!   them with the matching `_free` function.
//! - Returned strings are heap-allocated, NUL-terminated, and must be
//!   released with `sb_string_free`.
//! - Rationals cross the boundary as strings (`"3/10"`, `"0.3"`); there is
//!   no floating-point representation on purpose.
//! - On failure, `sb_last_error` returns a thread-local message describing
//!   the most recent error on the calling thread.

#![allow(clippy::missing_safety_doc)] // safety contracts are prose lines so the C header carries them

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sharpbounds::cli::{query_bound, query_certificate};
use sharpbounds::exclusive::{self, EventSets};
use sharpbounds::extremal::AttainmentCertificate;
use sharpbounds::kofn::BoundResult;
use sharpbounds::lp;
use sharpbounds::marginals::Marginals;
use sharpbounds::rational::{format_rational, parse_rational};
use sharpbounds::word::BinaryWord;

/// Result code of every ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    SbOk = 0,
    SbErrNullArgument = 1,
    SbErrUtf8 = 2,
    SbErrParse = 3,
    SbErrInvalidArgument = 4,
    SbErrAtomLimit = 5,
    SbErrInfeasible = 6,
    SbErrInternal = 7,
}

/// Compound-event family of a query.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbQueryKind {
    SbAtLeast = 0,
    SbAtMost = 1,
    SbExactly = 2,
}

/// Which side of the sharp range is requested.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbDirection {
    SbUpper = 0,
    SbLower = 1,
}

/// Opaque marginal-probability vector (sorted internally).
pub struct SbMarginals {
    inner: Marginals,
}

/// Opaque bound result.
pub struct SbBound {
    inner: BoundResult,
}

/// Opaque attainment certificate. Atom words are reported in the caller's
/// original event order.
pub struct SbCertificate {
    atoms: Vec<(String, String)>,
    achieved: String,
    dist_type: &'static str,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: SbStatus, message: &str) -> SbStatus {
    set_error(message);
    status
}

/// Message describing the most recent error on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned by this library. NULL is accepted.
/// Safety: `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_string_free(s: *mut c_char) {
    if !s.is_null() {
        unsafe { drop(CString::from_raw(s)) };
    }
}

fn export_string(s: &str) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

fn guard<F: FnOnce() -> SbStatus>(body: F) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in library call".to_string());
            fail(SbStatus::SbErrInternal, &msg)
        }
    }
}

unsafe fn str_array<'a>(
    values: *const *const c_char,
    len: usize,
) -> Result<Vec<&'a str>, SbStatus> {
    if values.is_null() {
        return Err(fail(SbStatus::SbErrNullArgument, "values is NULL"));
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let ptr = *values.add(i);
        if ptr.is_null() {
            return Err(fail(SbStatus::SbErrNullArgument, "values[i] is NULL"));
        }
        match CStr::from_ptr(ptr).to_str() {
            Ok(s) => out.push(s),
            Err(_) => return Err(fail(SbStatus::SbErrUtf8, "values[i] is not UTF-8")),
        }
    }
    Ok(out)
}

fn kind_name(kind: SbQueryKind) -> &'static str {
    match kind {
        SbQueryKind::SbAtLeast => "at_least",
        SbQueryKind::SbAtMost => "at_most",
        SbQueryKind::SbExactly => "exactly",
    }
}

fn direction_name(direction: SbDirection) -> &'static str {
    match direction {
        SbDirection::SbUpper => "upper",
        SbDirection::SbLower => "lower",
    }
}

// --------------------------------------------------------------------------
// Marginals
// --------------------------------------------------------------------------

/// Parses `len` rational strings (`"3/10"` or `"0.3"` forms) into a
/// marginal vector handle.
///
/// Safety: `values` must point to `len` valid NUL-terminated strings and `out` must be a valid location to store the handle.
#[no_mangle]
pub unsafe extern "C" fn sb_marginals_parse(
    values: *const *const c_char,
    len: usize,
    out: *mut *mut SbMarginals,
) -> SbStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbStatus::SbErrNullArgument, "out is NULL");
        }
        let strings = match str_array(values, len) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mut parsed = Vec::with_capacity(len);
        for s in strings {
            match parse_rational(s) {
                Ok(v) => parsed.push(v),
                Err(e) => return fail(SbStatus::SbErrParse, &e.to_string()),
            }
        }
        match Marginals::new(parsed) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SbMarginals { inner }));
                SbStatus::SbOk
            }
            Err(e) => fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
        }
    })
}

/// Frees a marginals handle. NULL is accepted.
/// Safety: `m` must come from `sb_marginals_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_marginals_free(m: *mut SbMarginals) {
    if !m.is_null() {
        unsafe { drop(Box::from_raw(m)) };
    }
}

/// Number of events in the marginal vector (0 for NULL).
#[no_mangle]
pub unsafe extern "C" fn sb_marginals_len(m: *const SbMarginals) -> usize {
    if m.is_null() {
        0
    } else {
        (*m).inner.n()
    }
}

// --------------------------------------------------------------------------
// Bounds
// --------------------------------------------------------------------------

/// Computes the sharp bound for the query, producing an opaque result.
///
/// Safety: `m` must be a live handle from `sb_marginals_parse`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sb_bound_compute(
    m: *const SbMarginals,
    kind: SbQueryKind,
    k: u32,
    direction: SbDirection,
    out: *mut *mut SbBound,
) -> SbStatus {
    guard(|| {
        if m.is_null() || out.is_null() {
            return fail(SbStatus::SbErrNullArgument, "m or out is NULL");
        }
        let p = &(*m).inner;
        match query_bound(p, kind_name(kind), k as usize, direction_name(direction)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SbBound { inner }));
                SbStatus::SbOk
            }
            Err(e) => fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
        }
    })
}

/// Frees a bound handle. NULL is accepted.
/// Safety: `b` must come from `sb_bound_compute` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_bound_free(b: *mut SbBound) {
    if !b.is_null() {
        unsafe { drop(Box::from_raw(b)) };
    }
}

/// The bound value as a rational string (caller frees with sb_string_free).
///
/// Safety: `b` must be a live handle from `sb_bound_compute`.
#[no_mangle]
pub unsafe extern "C" fn sb_bound_value(b: *const SbBound) -> *mut c_char {
    if b.is_null() {
        return ptr::null_mut();
    }
    export_string(&format_rational(&(*b).inner.value))
}

/// Stopping index selected by the bound's closed form.
///
/// Safety: `b` must be a live handle from `sb_bound_compute`.
#[no_mangle]
pub unsafe extern "C" fn sb_bound_r_star(b: *const SbBound) -> u32 {
    if b.is_null() {
        return 0;
    }
    (*b).inner.r_star as u32
}

/// Whether the min/max clamp in the closed form was active.
///
/// Safety: `b` must be a live handle from `sb_bound_compute`.
#[no_mangle]
pub unsafe extern "C" fn sb_bound_saturated(b: *const SbBound) -> bool {
    if b.is_null() {
        return false;
    }
    (*b).inner.saturated
}

// --------------------------------------------------------------------------
// Certificates
// --------------------------------------------------------------------------

/// Builds a distribution attaining the queried bound. Atom words use the
/// caller's original event order (leftmost character = first marginal).
///
/// Safety: `m` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_compute(
    m: *const SbMarginals,
    kind: SbQueryKind,
    k: u32,
    direction: SbDirection,
    out: *mut *mut SbCertificate,
) -> SbStatus {
    guard(|| {
        if m.is_null() || out.is_null() {
            return fail(SbStatus::SbErrNullArgument, "m or out is NULL");
        }
        let p = &(*m).inner;
        let cert: AttainmentCertificate =
            match query_certificate(p, kind_name(kind), k as usize, direction_name(direction)) {
                Ok(c) => c,
                Err(e) => return fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
            };
        let perm = p.perm();
        let atoms = cert
            .distribution
            .entries()
            .iter()
            .map(|(w, mass)| {
                let original = BinaryWord::from_set_bits(w.len(), w.set_bits().map(|i| perm[i]));
                (original.to_string(), format_rational(mass))
            })
            .collect();
        *out = Box::into_raw(Box::new(SbCertificate {
            atoms,
            achieved: format_rational(&cert.achieved),
            dist_type: cert.dist_type.as_str(),
        }));
        SbStatus::SbOk
    })
}

/// Frees a certificate handle. NULL is accepted.
/// Safety: `c` must come from `sb_certificate_compute` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_free(c: *mut SbCertificate) {
    if !c.is_null() {
        unsafe { drop(Box::from_raw(c)) };
    }
}

/// Number of positive atoms in the certificate distribution.
///
/// Safety: `c` must be a live handle from `sb_certificate_compute`.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_atom_count(c: *const SbCertificate) -> usize {
    if c.is_null() {
        0
    } else {
        (*c).atoms.len()
    }
}

/// Copies atom `index` out as a word string and a mass string (both caller
/// freed with sb_string_free).
///
/// Safety: `c` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_atom(
    c: *const SbCertificate,
    index: usize,
    word_out: *mut *mut c_char,
    mass_out: *mut *mut c_char,
) -> SbStatus {
    guard(|| {
        if c.is_null() || word_out.is_null() || mass_out.is_null() {
            return fail(SbStatus::SbErrNullArgument, "NULL argument");
        }
        let cert = &*c;
        let Some((word, mass)) = cert.atoms.get(index) else {
            return fail(SbStatus::SbErrInvalidArgument, "atom index out of range");
        };
        *word_out = export_string(word);
        *mass_out = export_string(mass);
        SbStatus::SbOk
    })
}

/// The probability the certificate achieves, as a rational string.
///
/// Safety: `c` must be a live handle from `sb_certificate_compute`.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_achieved(c: *const SbCertificate) -> *mut c_char {
    if c.is_null() {
        return ptr::null_mut();
    }
    export_string(&(*c).achieved)
}

/// Structure tag of the certificate: "type_i", "type_ii", or "complemented".
///
/// Safety: `c` must be a live handle from `sb_certificate_compute`.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_dist_type(c: *const SbCertificate) -> *mut c_char {
    if c.is_null() {
        return ptr::null_mut();
    }
    export_string((*c).dist_type)
}

// --------------------------------------------------------------------------
// Oracle and exclusive-set bounds
// --------------------------------------------------------------------------

/// Cross-checks a k-of-n query against the exact LP oracle. `atom_limit`
/// caps the event count (pass 0 for the default of 12).
///
/// Safety: `m` must be a live handle; `value_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sb_oracle_kofn(
    m: *const SbMarginals,
    kind: SbQueryKind,
    k: u32,
    direction: SbDirection,
    atom_limit: u32,
    value_out: *mut *mut c_char,
) -> SbStatus {
    guard(|| {
        if m.is_null() || value_out.is_null() {
            return fail(SbStatus::SbErrNullArgument, "m or value_out is NULL");
        }
        let p = &(*m).inner;
        let n = p.n();
        let limit = if atom_limit == 0 {
            lp::DEFAULT_ATOM_LIMIT
        } else {
            atom_limit as usize
        };
        let event = match kind {
            SbQueryKind::SbAtLeast => sharpbounds::event::EventSpec::at_least(k as usize, n),
            SbQueryKind::SbAtMost => sharpbounds::event::EventSpec::at_most(k as usize, n),
            SbQueryKind::SbExactly => sharpbounds::event::EventSpec::exactly(k as usize, n),
        };
        let event = match event {
            Ok(e) => e,
            Err(e) => return fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
        };
        let dir = match direction {
            SbDirection::SbUpper => lp::Direction::Maximize,
            SbDirection::SbLower => lp::Direction::Minimize,
        };
        let prob = lp::LpProblem::bound_problem(p.values(), event, dir);
        match lp::solve_with_limit(&prob, limit) {
            Ok(lp::LpSolution::Optimal(opt)) => {
                *value_out = export_string(&format_rational(&opt.value));
                SbStatus::SbOk
            }
            Ok(lp::LpSolution::Infeasible) => {
                fail(SbStatus::SbErrInfeasible, "problem is infeasible")
            }
            Err(e @ lp::LpError::AtomLimit { .. }) => {
                fail(SbStatus::SbErrAtomLimit, &e.to_string())
            }
            Err(e) => fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
        }
    })
}

/// Sharp bound for unions of mutually exclusive conjunctions. `probs`
/// holds all probabilities group after group; `set_lens[i]` is the size of
/// group i. With `dual` set, computes the intersection-form value instead.
/// Both outputs are rational strings (`t_star_out` may be NULL if unwanted).
///
/// Safety: `probs` must hold `sum(set_lens)` strings, `set_lens` must hold `n_sets` entries, and `bound_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sb_exclusive_bound(
    probs: *const *const c_char,
    set_lens: *const usize,
    n_sets: usize,
    dual: bool,
    bound_out: *mut *mut c_char,
    t_star_out: *mut *mut c_char,
) -> SbStatus {
    guard(|| {
        if probs.is_null() || set_lens.is_null() || bound_out.is_null() {
            return fail(SbStatus::SbErrNullArgument, "NULL argument");
        }
        let lens: Vec<usize> = (0..n_sets).map(|i| *set_lens.add(i)).collect();
        let total: usize = lens.iter().sum();
        let strings = match str_array(probs, total) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mut groups = Vec::with_capacity(n_sets);
        let mut cursor = 0usize;
        for len in lens {
            let mut group = Vec::with_capacity(len);
            for s in &strings[cursor..cursor + len] {
                match parse_rational(s) {
                    Ok(v) => group.push(v),
                    Err(e) => return fail(SbStatus::SbErrParse, &e.to_string()),
                }
            }
            cursor += len;
            groups.push(group);
        }
        let sets = match EventSets::new_tolerant(groups) {
            Ok(s) => s,
            Err(e) => return fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
        };
        let result = if dual {
            match exclusive::solve_exclusive_dual(&sets) {
                Ok(r) => r,
                Err(e) => return fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
            }
        } else {
            exclusive::solve_exclusive_upper(&sets)
        };
        *bound_out = export_string(&format_rational(&result.bound));
        if !t_star_out.is_null() {
            *t_star_out = export_string(&format_rational(&result.t_star));
        }
        SbStatus::SbOk
    })
}

/// Runs the seeded verification campaign; writes the number of mismatches
/// (0 means every check agreed).
///
/// Safety: `mismatches_out` must be a valid location.
#[no_mangle]
pub unsafe extern "C" fn sb_verify(
    n_max: u32,
    trials: u32,
    seed: u64,
    atom_limit: u32,
    mismatches_out: *mut u64,
) -> SbStatus {
    guard(|| {
        if mismatches_out.is_null() {
            return fail(SbStatus::SbErrNullArgument, "mismatches_out is NULL");
        }
        let limit = if atom_limit == 0 {
            lp::DEFAULT_ATOM_LIMIT
        } else {
            atom_limit as usize
        };
        match sharpbounds::cli::cmd_verify(n_max as usize, trials as usize, seed, limit) {
            Ok(report) => {
                *mismatches_out = report.mismatches_total as u64;
                SbStatus::SbOk
            }
            Err(e) => fail(SbStatus::SbErrInvalidArgument, &e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn cstrings(values: &[&str]) -> (Vec<CString>, Vec<*const c_char>) {
        let owned: Vec<CString> = values.iter().map(|s| CString::new(*s).unwrap()).collect();
        let ptrs = owned.iter().map(|s| s.as_ptr()).collect();
        (owned, ptrs)
    }

    unsafe fn take_string(ptr: *mut c_char) -> String {
        assert!(!ptr.is_null());
        let s = CStr::from_ptr(ptr).to_str().unwrap().to_string();
        sb_string_free(ptr);
        s
    }

    #[test]
    fn bound_round_trip() {
        unsafe {
            let (_own, ptrs) = cstrings(&["1/2", "3/5", "7/10"]);
            let mut m: *mut SbMarginals = ptr::null_mut();
            assert_eq!(sb_marginals_parse(ptrs.as_ptr(), 3, &mut m), SbStatus::SbOk);
            assert_eq!(sb_marginals_len(m), 3);

            let mut b: *mut SbBound = ptr::null_mut();
            assert_eq!(
                sb_bound_compute(m, SbQueryKind::SbAtLeast, 2, SbDirection::SbUpper, &mut b),
                SbStatus::SbOk
            );
            assert_eq!(take_string(sb_bound_value(b)), "9/10");
            assert_eq!(sb_bound_r_star(b), 0);
            assert!(!sb_bound_saturated(b));
            sb_bound_free(b);
            sb_marginals_free(m);
        }
    }

    #[test]
    fn certificate_round_trip_unsorted_input() {
        unsafe {
            let (_own, ptrs) = cstrings(&["9/10", "1/10", "1/5"]);
            let mut m: *mut SbMarginals = ptr::null_mut();
            assert_eq!(sb_marginals_parse(ptrs.as_ptr(), 3, &mut m), SbStatus::SbOk);
            let mut c: *mut SbCertificate = ptr::null_mut();
            assert_eq!(
                sb_certificate_compute(m, SbQueryKind::SbAtLeast, 2, SbDirection::SbUpper, &mut c),
                SbStatus::SbOk
            );
            assert_eq!(take_string(sb_certificate_achieved(c)), "3/10");
            assert_eq!(take_string(sb_certificate_dist_type(c)), "type_i");
            let count = sb_certificate_atom_count(c);
            assert!((3..=8).contains(&count));
            let mut masses = std::collections::BTreeMap::new();
            for i in 0..count {
                let mut w: *mut c_char = ptr::null_mut();
                let mut mass: *mut c_char = ptr::null_mut();
                assert_eq!(sb_certificate_atom(c, i, &mut w, &mut mass), SbStatus::SbOk);
                masses.insert(take_string(w), take_string(mass));
            }
            // Original order: event 1 is the 9/10 marginal.
            assert_eq!(masses.get("110").map(String::as_str), Some("1/10"));
            assert_eq!(masses.get("100").map(String::as_str), Some("3/5"));
            sb_certificate_free(c);
            sb_marginals_free(m);
        }
    }

    #[test]
    fn oracle_agrees_with_bound() {
        unsafe {
            let (_own, ptrs) = cstrings(&["1/2", "3/5", "7/10"]);
            let mut m: *mut SbMarginals = ptr::null_mut();
            assert_eq!(sb_marginals_parse(ptrs.as_ptr(), 3, &mut m), SbStatus::SbOk);
            let mut value: *mut c_char = ptr::null_mut();
            assert_eq!(
                sb_oracle_kofn(
                    m,
                    SbQueryKind::SbAtLeast,
                    2,
                    SbDirection::SbLower,
                    0,
                    &mut value
                ),
                SbStatus::SbOk
            );
            assert_eq!(take_string(value), "2/5");
            sb_marginals_free(m);
        }
    }

    #[test]
    fn exclusive_bound_with_dual() {
        unsafe {
            let (_own, ptrs) = cstrings(&["9/10", "4/5"]);
            let lens = [1usize, 1];
            let mut bound: *mut c_char = ptr::null_mut();
            let mut t_star: *mut c_char = ptr::null_mut();
            assert_eq!(
                sb_exclusive_bound(
                    ptrs.as_ptr(),
                    lens.as_ptr(),
                    2,
                    false,
                    &mut bound,
                    &mut t_star
                ),
                SbStatus::SbOk
            );
            assert_eq!(take_string(bound), "3/10");
            assert_eq!(take_string(t_star), "7/10");

            let mut dual: *mut c_char = ptr::null_mut();
            assert_eq!(
                sb_exclusive_bound(
                    ptrs.as_ptr(),
                    lens.as_ptr(),
                    2,
                    true,
                    &mut dual,
                    ptr::null_mut()
                ),
                SbStatus::SbOk
            );
            assert_eq!(take_string(dual), "7/10");
        }
    }

    #[test]
    fn error_paths_set_messages() {
        unsafe {
            let mut m: *mut SbMarginals = ptr::null_mut();
            assert_eq!(
                sb_marginals_parse(ptr::null(), 1, &mut m),
                SbStatus::SbErrNullArgument
            );
            let (_own, ptrs) = cstrings(&["not-a-number"]);
            assert_eq!(
                sb_marginals_parse(ptrs.as_ptr(), 1, &mut m),
                SbStatus::SbErrParse
            );
            let msg = CStr::from_ptr(sb_last_error()).to_str().unwrap();
            assert!(msg.contains("not-a-number"));

            let (_own2, ptrs2) = cstrings(&["1/2"]);
            assert_eq!(
                sb_marginals_parse(ptrs2.as_ptr(), 1, &mut m),
                SbStatus::SbOk
            );
            let mut b: *mut SbBound = ptr::null_mut();
            assert_eq!(
                sb_bound_compute(m, SbQueryKind::SbAtLeast, 5, SbDirection::SbUpper, &mut b),
                SbStatus::SbErrInvalidArgument
            );
            sb_marginals_free(m);
        }
    }

    #[test]
    fn verify_campaign_over_ffi() {
        unsafe {
            let mut mismatches = u64::MAX;
            assert_eq!(sb_verify(3, 4, 11, 0, &mut mismatches), SbStatus::SbOk);
            assert_eq!(mismatches, 0);
        }
    }
}
