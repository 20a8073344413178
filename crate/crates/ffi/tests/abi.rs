use std::ffi::{c_char, CStr, CString};
use std::ptr;

use riskrec_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = rr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn suite_ids(suite: *const RrSuite) -> Vec<String> {
    (0..rr_suite_len(suite))
        .map(|k| {
            CStr::from_ptr(rr_suite_test_id(suite, k))
                .to_string_lossy()
                .into_owned()
        })
        .collect()
}

/// Coverage of the five-test example: T1 {c5,c3}, T2 {c1}, T3 {c4,c2},
/// T4 {c2,c5}, T5 {c2}.
unsafe fn example_coverage() -> *mut RrCoverage {
    let comps: Vec<CString> = ["c1", "c2", "c3", "c4", "c5"]
        .iter()
        .map(|s| c(s))
        .collect();
    let tests: Vec<CString> = ["T1", "T2", "T3", "T4", "T5"]
        .iter()
        .map(|s| c(s))
        .collect();
    let cp: Vec<*const c_char> = comps.iter().map(|s| s.as_ptr()).collect();
    let tp: Vec<*const c_char> = tests.iter().map(|s| s.as_ptr()).collect();
    let mut cov = ptr::null_mut();
    assert_eq!(
        rr_coverage_new(cp.as_ptr(), 5, tp.as_ptr(), 5, &mut cov),
        RrStatus::Ok
    );
    for (t, cs) in [
        ("T1", &["c5", "c3"][..]),
        ("T2", &["c1"]),
        ("T3", &["c4", "c2"]),
        ("T4", &["c2", "c5"]),
        ("T5", &["c2"]),
    ] {
        for comp in cs {
            assert_eq!(
                rr_coverage_set(cov, c(t).as_ptr(), c(comp).as_ptr(), true),
                RrStatus::Ok
            );
        }
    }
    cov
}

unsafe fn example_table() -> *mut RrRiskTable {
    let table = rr_risk_table_new();
    for (comp, r) in [
        ("c1", 0.0014),
        ("c2", 0.251),
        ("c3", 0.034),
        ("c4", 0.561),
        ("c5", 0.138),
    ] {
        assert_eq!(
            rr_risk_table_insert(table, c(comp).as_ptr(), 1.0, r),
            RrStatus::Ok
        );
    }
    table
}

#[test]
fn version_matches_core() {
    let v = unsafe { CStr::from_ptr(rr_version()) };
    assert_eq!(v.to_str().unwrap(), riskrec::VERSION);
}

#[test]
fn prioritize_and_score_through_handles() {
    unsafe {
        let cov = example_coverage();
        let table = example_table();
        let mut suite = ptr::null_mut();
        assert_eq!(
            rr_prioritize(table, cov, c("hcf").as_ptr(), 0, &mut suite),
            RrStatus::Ok
        );
        assert_eq!(suite_ids(suite), ["T3", "T4", "T1", "T2", "T5"]);
        assert!(rr_suite_test_id(suite, 5).is_null());

        let tests: Vec<CString> = ["T1", "T2", "T3", "T4", "T5"]
            .iter()
            .map(|s| c(s))
            .collect();
        let tp: Vec<*const c_char> = tests.iter().map(|s| s.as_ptr()).collect();
        let faults = [c("f1"), c("f2")];
        let fp: Vec<*const c_char> = faults.iter().map(|s| s.as_ptr()).collect();
        let mut fm = ptr::null_mut();
        assert_eq!(
            rr_fault_matrix_new(tp.as_ptr(), 5, fp.as_ptr(), 2, &mut fm),
            RrStatus::Ok
        );
        // First detections at positions 1 (T3) and 3 (T1).
        assert_eq!(
            rr_fault_matrix_set(fm, c("T3").as_ptr(), c("f1").as_ptr(), true),
            RrStatus::Ok
        );
        assert_eq!(
            rr_fault_matrix_set(fm, c("T1").as_ptr(), c("f2").as_ptr(), true),
            RrStatus::Ok
        );
        let mut value = f64::NAN;
        assert_eq!(rr_apfd(suite, fm, &mut value), RrStatus::Ok);
        assert!((value - 0.7).abs() < 1e-12);
        assert_eq!(rr_napfd(suite, fm, 1.0, &mut value), RrStatus::Ok);
        assert!((value - 0.7).abs() < 1e-12);
        assert_eq!(rr_napfd(suite, fm, 0.2, &mut value), RrStatus::Ok);
        // n = 1, one of two faults found at position 1: 0.5 - 1/2 + 0.5/2.
        assert!((value - 0.25).abs() < 1e-12);

        let mut random = ptr::null_mut();
        assert_eq!(
            rr_prioritize(table, cov, c("random").as_ptr(), 9, &mut random),
            RrStatus::Ok
        );
        let mut ids = suite_ids(random);
        ids.sort();
        assert_eq!(ids, ["T1", "T2", "T3", "T4", "T5"]);

        rr_suite_free(random);
        rr_fault_matrix_free(fm);
        rr_suite_free(suite);
        rr_risk_table_free(table);
        rr_coverage_free(cov);
    }
}

#[test]
fn frequency_scores_through_handles() {
    unsafe {
        let m = rr_rating_matrix_new();
        for (u, comp, n) in [
            ("u1", "a", 5),
            ("u1", "b", 1),
            ("u2", "a", 4),
            ("u2", "c", 2),
            ("u3", "b", 3),
        ] {
            assert_eq!(
                rr_rating_matrix_record(m, c(u).as_ptr(), c(comp).as_ptr(), n),
                RrStatus::Ok
            );
        }
        let mut scores = ptr::null_mut();
        assert_eq!(rr_frequency_scores(m, 2, &mut scores), RrStatus::Ok);
        let mut values = Vec::new();
        for comp in ["a", "b", "c"] {
            let mut v = f64::NAN;
            assert_eq!(
                rr_frequency_get(scores, c(comp).as_ptr(), &mut v),
                RrStatus::Ok
            );
            assert!((0.0..=1.0).contains(&v));
            values.push(v);
        }
        assert!(values.contains(&1.0) && values.contains(&0.0));
        let mut v = 0.0;
        assert_eq!(
            rr_frequency_get(scores, c("zzz").as_ptr(), &mut v),
            RrStatus::InvalidArgument
        );
        assert!(last_error().contains("zzz"));
        rr_frequency_free(scores);
        rr_rating_matrix_free(m);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            rr_coverage_load_csv(ptr::null(), &mut out),
            RrStatus::NullPointer
        );
        assert!(last_error().contains("path"));
        assert_eq!(
            rr_coverage_load_csv(c("/nonexistent/cov.csv").as_ptr(), &mut out),
            RrStatus::Io
        );
        assert!(out.is_null());

        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("cov.csv");
        std::fs::write(&bad, "component_id,T1\nc1,7\n").unwrap();
        let path = c(bad.to_str().unwrap());
        assert_eq!(
            rr_coverage_load_csv(path.as_ptr(), &mut out),
            RrStatus::Parse
        );
        assert!(last_error().contains("line 2"));

        let table = example_table();
        let cov = example_coverage();
        let mut suite = ptr::null_mut();
        assert_eq!(
            rr_prioritize(table, cov, c("nope").as_ptr(), 0, &mut suite),
            RrStatus::InvalidArgument
        );
        assert_eq!(
            rr_prioritize(table, cov, c("hcf").as_ptr(), 0, ptr::null_mut()),
            RrStatus::NullPointer
        );
        assert_eq!(
            rr_risk_table_insert(table, c("c9").as_ptr(), -1.0, 0.5),
            RrStatus::InvalidArgument
        );
        assert_eq!(rr_suite_len(ptr::null()), 0);
        rr_suite_free(ptr::null_mut());
        rr_risk_table_free(table);
        rr_coverage_free(cov);
    }
}

#[test]
fn load_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.csv");
    std::fs::write(
        &path,
        "# header\nuser_id,component_id,count\nu1,a,2\nu2,b,1\n",
    )
    .unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            rr_rating_matrix_load_csv(c(path.to_str().unwrap()).as_ptr(), &mut m),
            RrStatus::Ok
        );
        assert!(!m.is_null());
        rr_rating_matrix_free(m);
    }
}
