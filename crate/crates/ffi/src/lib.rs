//! C ABI for `riskrec`.
//!
//! Objects are opaque handles created by `rr_*_new` or `rr_*_load_csv` and
//! released with the matching `rr_*_free`. Fallible calls return an
//! [`RrStatus`] and write results through out-pointers; on failure
//! [`rr_last_error_message`] describes the most recent error on the calling
//! thread. Panics never cross the boundary; they surface as
//! `RR_STATUS_PANIC`.
//!
//! Strings passed in must be NUL-terminated UTF-8. Strings handed out are
//! borrowed from the owning handle and stay valid until it is freed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use riskrec::cf::{complete_matrix, frequency_scores, CfConfig, FrequencyScores};
use riskrec::evaluation::{apfd, napfd, FaultMatrix};
use riskrec::prioritize::{
    prioritize, ComponentRiskTable, CoverageMatrix, OrderingInputs, OrderingStrategy,
    PrioritizedSuite, Technique,
};
use riskrec::telemetry::RatingMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Invariant = 5,
    Panic = 6,
}

pub struct RrRatingMatrix(RatingMatrix);
pub struct RrFrequencyScores(FrequencyScores);
pub struct RrRiskTable(ComponentRiskTable);
pub struct RrCoverage(CoverageMatrix);
pub struct RrFaultMatrix(FaultMatrix);

pub struct RrSuite {
    suite: PrioritizedSuite,
    ids: Vec<CString>,
}

type Failure = (RrStatus, String);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn from_core(err: riskrec::Error) -> Failure {
    use riskrec::Error as E;
    let status = match &err {
        E::Io { .. } => RrStatus::Io,
        E::Parse { .. } => RrStatus::Parse,
        E::Invalid(_) => RrStatus::InvalidArgument,
        E::Invariant(_) => RrStatus::Invariant,
    };
    (status, err.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RrStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic inside riskrec");
            RrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (RrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RrStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn text_list<'a>(
    p: *const *const c_char,
    n: usize,
    what: &str,
) -> Result<Vec<&'a str>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|&s| text(s, what))
        .collect()
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rr_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message for the most recent failure on this thread, or NULL if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rr_rating_matrix_new() -> *mut RrRatingMatrix {
    Box::into_raw(Box::new(RrRatingMatrix(RatingMatrix::new())))
}

/// Adds `count` accesses of `component` by `user`.
///
/// # Safety
/// `matrix` must be a live handle; the strings must be valid C strings.
#[no_mangle]
pub unsafe extern "C" fn rr_rating_matrix_record(
    matrix: *mut RrRatingMatrix,
    user: *const c_char,
    component: *const c_char,
    count: u32,
) -> RrStatus {
    guard(|| {
        let m = borrow_mut(matrix, "matrix")?;
        let (u, c) = (text(user, "user")?, text(component, "component")?);
        if count == 0 {
            return Err((RrStatus::InvalidArgument, "count must be positive".into()));
        }
        m.0.record(u, c, count);
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_rating_matrix_load_csv(
    path: *const c_char,
    out: *mut *mut RrRatingMatrix,
) -> RrStatus {
    guard(|| {
        let m = RatingMatrix::read_file(Path::new(text(path, "path")?)).map_err(from_core)?;
        put(out, RrRatingMatrix(m))
    })
}

/// # Safety
/// `matrix` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_rating_matrix_free(matrix: *mut RrRatingMatrix) {
    release(matrix)
}

/// Completes the matrix with `neighbors` nearest components and derives
/// min-max scaled frequency scores.
///
/// # Safety
/// `matrix` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_frequency_scores(
    matrix: *const RrRatingMatrix,
    neighbors: usize,
    out: *mut *mut RrFrequencyScores,
) -> RrStatus {
    guard(|| {
        let m = borrow(matrix, "matrix")?;
        let cfg = CfConfig {
            neighbors,
            ..CfConfig::default()
        };
        let completed = complete_matrix(&m.0, &cfg).map_err(from_core)?;
        put(out, RrFrequencyScores(frequency_scores(&completed)))
    })
}

/// Scaled frequency of `component`.
///
/// # Safety
/// `scores` must be a live handle, `component` a valid C string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rr_frequency_get(
    scores: *const RrFrequencyScores,
    component: *const c_char,
    out: *mut f64,
) -> RrStatus {
    guard(|| {
        let s = borrow(scores, "scores")?;
        let c = text(component, "component")?;
        let out = borrow_mut(out, "out")?;
        *out = s.0.scaled_of(c).ok_or_else(|| {
            (
                RrStatus::InvalidArgument,
                format!("unknown component `{c}`"),
            )
        })?;
        Ok(())
    })
}

/// # Safety
/// `scores` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_frequency_free(scores: *mut RrFrequencyScores) {
    release(scores)
}

#[no_mangle]
pub extern "C" fn rr_risk_table_new() -> *mut RrRiskTable {
    Box::into_raw(Box::new(RrRiskTable(ComponentRiskTable::new())))
}

/// Sets a component's frequency `f` and change risk `i`; `r = f * i`.
///
/// # Safety
/// `table` must be a live handle and `component` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn rr_risk_table_insert(
    table: *mut RrRiskTable,
    component: *const c_char,
    f: f64,
    i: f64,
) -> RrStatus {
    guard(|| {
        let t = borrow_mut(table, "table")?;
        let c = text(component, "component")?;
        if !(f.is_finite() && i.is_finite() && f >= 0.0 && i >= 0.0) {
            return Err((
                RrStatus::InvalidArgument,
                "scores must be finite and non-negative".into(),
            ));
        }
        t.0.insert(c, f, i);
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_risk_table_load_csv(
    path: *const c_char,
    out: *mut *mut RrRiskTable,
) -> RrStatus {
    guard(|| {
        let t = ComponentRiskTable::read_file(Path::new(text(path, "path")?)).map_err(from_core)?;
        put(out, RrRiskTable(t))
    })
}

/// # Safety
/// `table` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_risk_table_free(table: *mut RrRiskTable) {
    release(table)
}

/// Empty coverage over the given component and test ids.
///
/// # Safety
/// Each list must hold `n_*` valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_coverage_new(
    components: *const *const c_char,
    n_components: usize,
    tests: *const *const c_char,
    n_tests: usize,
    out: *mut *mut RrCoverage,
) -> RrStatus {
    guard(|| {
        let comps = text_list(components, n_components, "components")?;
        let tests = text_list(tests, n_tests, "tests")?;
        let cov = CoverageMatrix::new(&comps, &tests).map_err(from_core)?;
        put(out, RrCoverage(cov))
    })
}

/// # Safety
/// `coverage` must be a live handle; the strings must be valid C strings.
#[no_mangle]
pub unsafe extern "C" fn rr_coverage_set(
    coverage: *mut RrCoverage,
    test: *const c_char,
    component: *const c_char,
    covered: bool,
) -> RrStatus {
    guard(|| {
        let cov = borrow_mut(coverage, "coverage")?;
        let (t, c) = (text(test, "test")?, text(component, "component")?);
        let ti = cov.0.tests().get_index_of(t);
        let ci = cov.0.components().get_index_of(c);
        match (ti, ci) {
            (Some(ti), Some(ci)) => {
                cov.0.set(ci, ti, covered);
                Ok(())
            }
            _ => Err((
                RrStatus::InvalidArgument,
                format!("unknown test `{t}` or component `{c}`"),
            )),
        }
    })
}

/// # Safety
/// `path` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_coverage_load_csv(
    path: *const c_char,
    out: *mut *mut RrCoverage,
) -> RrStatus {
    guard(|| {
        let cov = CoverageMatrix::read_file(Path::new(text(path, "path")?)).map_err(from_core)?;
        put(out, RrCoverage(cov))
    })
}

/// # Safety
/// `coverage` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_coverage_free(coverage: *mut RrCoverage) {
    release(coverage)
}

/// Orders the tests of `coverage` with `technique` (`hcf`, `ch`, `mfm`,
/// `random` or `greedy`). `seed` only affects `random`.
///
/// # Safety
/// `table` and `coverage` must be live handles, `technique` a valid C string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_prioritize(
    table: *const RrRiskTable,
    coverage: *const RrCoverage,
    technique: *const c_char,
    seed: u64,
    out: *mut *mut RrSuite,
) -> RrStatus {
    guard(|| {
        let t = borrow(table, "table")?;
        let cov = borrow(coverage, "coverage")?;
        let kind: Technique = text(technique, "technique")?.parse().map_err(from_core)?;
        let inputs = OrderingInputs {
            table: &t.0,
            coverage: &cov.0,
            strategy: OrderingStrategy::default(),
            seed,
        };
        let suite = prioritize(kind, &inputs).map_err(from_core)?;
        let ids = suite
            .order
            .iter()
            .map(|id| {
                CString::new(id.as_str())
                    .map_err(|_| (RrStatus::InvalidArgument, "test id contains NUL".into()))
            })
            .collect::<Result<_, Failure>>()?;
        put(out, RrSuite { suite, ids })
    })
}

/// Number of tests in `suite`, 0 for NULL.
///
/// # Safety
/// `suite` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_suite_len(suite: *const RrSuite) -> usize {
    suite.as_ref().map_or(0, |s| s.ids.len())
}

/// Test id at 0-based `position`, or NULL when out of range.
///
/// # Safety
/// `suite` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_suite_test_id(suite: *const RrSuite, position: usize) -> *const c_char {
    suite
        .as_ref()
        .and_then(|s| s.ids.get(position))
        .map_or(ptr::null(), |id| id.as_ptr())
}

/// # Safety
/// `suite` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_suite_free(suite: *mut RrSuite) {
    release(suite)
}

/// Fault matrix over the given test and fault ids with no detections.
///
/// # Safety
/// Each list must hold `n_*` valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_fault_matrix_new(
    tests: *const *const c_char,
    n_tests: usize,
    faults: *const *const c_char,
    n_faults: usize,
    out: *mut *mut RrFaultMatrix,
) -> RrStatus {
    guard(|| {
        let tests = text_list(tests, n_tests, "tests")?;
        let faults = text_list(faults, n_faults, "faults")?;
        let fm = FaultMatrix::new(&tests, &faults).map_err(from_core)?;
        put(out, RrFaultMatrix(fm))
    })
}

/// # Safety
/// `matrix` must be a live handle; the strings must be valid C strings.
#[no_mangle]
pub unsafe extern "C" fn rr_fault_matrix_set(
    matrix: *mut RrFaultMatrix,
    test: *const c_char,
    fault: *const c_char,
    detects: bool,
) -> RrStatus {
    guard(|| {
        let fm = borrow_mut(matrix, "matrix")?;
        let (t, f) = (text(test, "test")?, text(fault, "fault")?);
        fm.0.set_by_id(t, f, detects).map_err(from_core)
    })
}

/// # Safety
/// `path` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_fault_matrix_load_csv(
    path: *const c_char,
    out: *mut *mut RrFaultMatrix,
) -> RrStatus {
    guard(|| {
        let fm = FaultMatrix::read_file(Path::new(text(path, "path")?)).map_err(from_core)?;
        put(out, RrFaultMatrix(fm))
    })
}

/// # Safety
/// `matrix` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_fault_matrix_free(matrix: *mut RrFaultMatrix) {
    release(matrix)
}

/// APFD of `suite`; every fault must be detected by some test.
///
/// # Safety
/// `suite` and `faults` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_apfd(
    suite: *const RrSuite,
    faults: *const RrFaultMatrix,
    out: *mut f64,
) -> RrStatus {
    guard(|| {
        let s = borrow(suite, "suite")?;
        let fm = borrow(faults, "faults")?;
        let out = borrow_mut(out, "out")?;
        *out = apfd(&s.suite, &fm.0).map_err(from_core)?;
        Ok(())
    })
}

/// NAPFD of `suite` when only the first `budget_fraction` of it runs.
///
/// # Safety
/// `suite` and `faults` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_napfd(
    suite: *const RrSuite,
    faults: *const RrFaultMatrix,
    budget_fraction: f64,
    out: *mut f64,
) -> RrStatus {
    guard(|| {
        let s = borrow(suite, "suite")?;
        let fm = borrow(faults, "faults")?;
        let out = borrow_mut(out, "out")?;
        *out = napfd(&s.suite, &fm.0, budget_fraction).map_err(from_core)?;
        Ok(())
    })
}
