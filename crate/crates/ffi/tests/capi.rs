use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use minsum_ffi::*;

fn data(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = minsum_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut MinsumProblem {
    let mut p = ptr::null_mut();
    let st = unsafe { minsum_problem_from_file(data(name).as_ptr(), &mut p) };
    assert_eq!(st, MinsumStatus::Ok);
    p
}

#[test]
fn two_node_from_triplets() {
    let rows = [0usize, 0, 1];
    let cols = [0usize, 1, 1];
    let vals = [2.0, 1.0, 2.0];
    let b = [1.0, 0.0];
    let mut p = ptr::null_mut();
    let st = unsafe {
        minsum_problem_from_triplets(2, rows.as_ptr(), cols.as_ptr(), vals.as_ptr(), 3, b.as_ptr(), &mut p)
    };
    assert_eq!(st, MinsumStatus::Ok);
    assert!(minsum_last_error_message().is_null());
    unsafe {
        assert_eq!(minsum_problem_dimension(p), 2);
        assert_eq!(minsum_problem_is_quadratic(p), 1);

        let mut x = [0.0; 2];
        let (mut it, mut conv) = (0usize, 0i32);
        let st = minsum_solve(p, ptr::null(), 100, 1e-14, 0, x.as_mut_ptr(), &mut it, &mut conv);
        assert_eq!(st, MinsumStatus::Ok);
        assert_eq!(conv, 1);
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-12 && (x[1] + 1.0 / 3.0).abs() < 1e-12);

        let mut exact = [0.0; 2];
        assert_eq!(minsum_exact(p, exact.as_mut_ptr()), MinsumStatus::Ok);
        assert!((exact[0] - x[0]).abs() < 1e-12);

        let mut kind = MinsumCertificateKind::Refuted;
        let mut lambda = f64::NAN;
        let mut w = [0.0; 2];
        let st = minsum_certify(p, -1.0, 1.0, 0, &mut kind, &mut lambda, w.as_mut_ptr());
        assert_eq!(st, MinsumStatus::Ok);
        assert_eq!(kind, MinsumCertificateKind::ExactQuadratic);
        assert!((lambda - 0.5).abs() < 1e-10);

        let mut diff = f64::NAN;
        for t in 1..=4 {
            assert_eq!(minsum_key_property(p, ptr::null(), 1, t, 0, &mut diff), MinsumStatus::Ok);
            assert!(diff < 1e-12);
        }
        minsum_problem_free(p);
    }
}

#[test]
fn dense_instance_is_refuted_and_diverges_with_a_located_error() {
    let p = load("dense_06.txt");
    unsafe {
        let mut kind = MinsumCertificateKind::ExactQuadratic;
        let mut lambda = 0.0;
        let st = minsum_certify(p, -1.0, 1.0, 0, &mut kind, &mut lambda, ptr::null_mut());
        assert_eq!(st, MinsumStatus::Ok);
        assert_eq!(kind, MinsumCertificateKind::Refuted);
        assert!((lambda - 1.2).abs() < 1e-10);

        let mut x = [0.0; 3];
        let st = minsum_solve(p, ptr::null(), 200, 1e-12, 0, x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(st, MinsumStatus::IllPosed);
        assert!(last_error().contains("iteration"), "{}", last_error());
        minsum_problem_free(p);
    }
}

#[test]
fn quartic_cycle_on_the_grid() {
    let p = load("quartic_cycle.txt");
    unsafe {
        assert_eq!(minsum_problem_is_quadratic(p), 0);
        let mut kind = MinsumCertificateKind::Refuted;
        let mut lambda = 0.0;
        let st = minsum_certify(p, -5.0, 5.0, 64, &mut kind, &mut lambda, ptr::null_mut());
        assert_eq!(st, MinsumStatus::Ok);
        assert_eq!(kind, MinsumCertificateKind::ClosedForm);
        assert!((lambda - 0.6).abs() < 1e-9);

        let mut x = [0.0; 3];
        let mut exact = [0.0; 3];
        let mut conv = 0;
        let st = minsum_solve(p, ptr::null(), 60, 1e-10, 1025, x.as_mut_ptr(), ptr::null_mut(), &mut conv);
        assert_eq!(st, MinsumStatus::Ok, "{}", last_error());
        assert_eq!(conv, 1);
        assert_eq!(minsum_exact(p, exact.as_mut_ptr()), MinsumStatus::Ok);
        for i in 0..3 {
            assert!((x[i] - exact[i]).abs() < 1e-6);
        }
        minsum_problem_free(p);
    }
}

#[test]
fn bad_inputs_report_status_and_message() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(minsum_problem_from_file(ptr::null(), &mut p), MinsumStatus::NullPointer);
        assert!(last_error().contains("null"));

        let missing = CString::new("/nonexistent/problem.txt").unwrap();
        assert_eq!(minsum_problem_from_file(missing.as_ptr(), &mut p), MinsumStatus::Io);
        assert!(p.is_null());

        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "format_version 1\nn 2\nsection quadratic\nentry 1 1\n").unwrap();
        let bad = CString::new(bad.to_str().unwrap()).unwrap();
        assert_eq!(minsum_problem_from_file(bad.as_ptr(), &mut p), MinsumStatus::Parse);
        assert!(last_error().contains("line 4"), "{}", last_error());

        let rows = [0usize, 0];
        let cols = [1usize, 1];
        let vals = [1.0, 2.0];
        let b = [0.0, 0.0];
        let st = minsum_problem_from_triplets(2, rows.as_ptr(), cols.as_ptr(), vals.as_ptr(), 2, b.as_ptr(), &mut p);
        assert_ne!(st, MinsumStatus::Ok);

        let mut x = [0.0; 2];
        let st = minsum_solve(ptr::null(), ptr::null(), 10, 1e-9, 0, x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(st, MinsumStatus::NullPointer);
        assert_eq!(minsum_problem_dimension(ptr::null()), 0);
        minsum_problem_free(ptr::null_mut());

        let q = load("two_node.txt");
        let mut diff = 0.0;
        assert_eq!(minsum_key_property(q, ptr::null(), 5, 1, 0, &mut diff), MinsumStatus::InvalidArgument);
        let mut kind = MinsumCertificateKind::Refuted;
        let mut lambda = 0.0;
        assert_eq!(
            minsum_certify(q, 1.0, -1.0, 0, &mut kind, &mut lambda, ptr::null_mut()),
            MinsumStatus::InvalidArgument
        );
        minsum_problem_free(q);
    }
}

fn c_compiler() -> Option<PathBuf> {
    ["cc", "gcc", "clang"].iter().find_map(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|_| PathBuf::from(c))
    })
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "minsum.h"
int probe(const char *path) {
    MinsumProblem *p = NULL;
    if (minsum_problem_from_file(path, &p) != MINSUM_STATUS_OK) return -1;
    double x[8];
    size_t it = 0;
    int32_t conv = 0;
    MinsumStatus st = minsum_solve(p, NULL, 100, 1e-12, 0, x, &it, &conv);
    minsum_problem_free(p);
    return (int)st;
}
"#,
    )
    .unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
