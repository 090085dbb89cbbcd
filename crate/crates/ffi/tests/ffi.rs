use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use cbmfem_ffi::*;

fn last_error() -> String {
    let p = cbmfem_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn preset(name: &str) -> *mut CbmfemProblem {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cbmfem_problem_from_preset(name.as_ptr(), &mut p) }, CbmfemStatus::Ok);
    p
}

#[test]
fn solves_a_preset_and_reads_values() {
    let p = preset("ex2");
    unsafe {
        assert_eq!(cbmfem_problem_set_levels(p, 4), CbmfemStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(cbmfem_solve(p, &mut r), CbmfemStatus::Ok);
        let mut levels = 0;
        assert_eq!(cbmfem_result_level_count(r, &mut levels), CbmfemStatus::Ok);
        assert_eq!(levels, 5);
        let mut n = 0;
        assert_eq!(cbmfem_result_solution_count(r, 4, &mut n), CbmfemStatus::Ok);
        assert_eq!(n, 2);
        assert!(cbmfem_result_failure(r).is_null());

        let mut len = 0;
        assert_eq!(cbmfem_result_values(r, 4, 0, 0, ptr::null_mut(), &mut len), CbmfemStatus::Ok);
        assert_eq!(len, 33);
        let mut small = vec![0.0; 3];
        let mut cap = small.len();
        assert_eq!(cbmfem_result_values(r, 4, 0, 0, small.as_mut_ptr(), &mut cap), CbmfemStatus::BufferTooSmall);
        assert_eq!(cap, 33);
        let mut buf = vec![0.0; len];
        assert_eq!(cbmfem_result_values(r, 4, 0, 0, buf.as_mut_ptr(), &mut len), CbmfemStatus::Ok);
        // Right end is Dirichlet zero.
        assert_eq!(buf[32], 0.0);
        assert!(buf[0] > 0.4);

        let mut res = 1.0;
        assert_eq!(cbmfem_result_residual(r, 4, 1, &mut res), CbmfemStatus::Ok);
        assert!(res < 1e-10);

        let mut json = ptr::null_mut();
        assert_eq!(cbmfem_result_json(r, 4, &mut json), CbmfemStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        cbmfem_string_free(json);
        assert!(text.starts_with("{\"level\":4"));

        assert_eq!(cbmfem_result_solution_count(r, 9, &mut n), CbmfemStatus::OutOfRange);
        assert!(last_error().contains("level 9"));
        assert_eq!(cbmfem_result_values(r, 4, 5, 0, buf.as_mut_ptr(), &mut len), CbmfemStatus::OutOfRange);
        assert_eq!(cbmfem_result_values(r, 4, 0, 1, buf.as_mut_ptr(), &mut len), CbmfemStatus::OutOfRange);
        cbmfem_result_free(r);
        cbmfem_problem_free(p);
    }
}

#[test]
fn two_field_results_have_two_fields() {
    let p = preset("schnakenberg");
    unsafe {
        let mut fields = 0;
        assert_eq!(cbmfem_problem_field_count(p, &mut fields), CbmfemStatus::Ok);
        assert_eq!(fields, 2);
        cbmfem_problem_set_levels(p, 2);
        let mut r = ptr::null_mut();
        assert_eq!(cbmfem_solve(p, &mut r), CbmfemStatus::Ok);
        let mut n = 0;
        assert_eq!(cbmfem_result_solution_count(r, 2, &mut n), CbmfemStatus::Ok);
        assert!(n >= 1);
        let mut len = 0;
        assert_eq!(cbmfem_result_values(r, 2, 0, 1, ptr::null_mut(), &mut len), CbmfemStatus::Ok);
        assert_eq!(len, 9);
        cbmfem_result_free(r);
        cbmfem_problem_free(p);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut p = ptr::null_mut();
        let bad = CString::new("[domain]\nkind = \"disk\"\n").unwrap();
        assert_eq!(cbmfem_problem_from_toml(bad.as_ptr(), &mut p), CbmfemStatus::Config);
        assert!(p.is_null());
        assert!(last_error().contains("disk"));

        assert_eq!(cbmfem_problem_from_toml(ptr::null(), &mut p), CbmfemStatus::NullPointer);
        let bytes = [0xffu8, 0xfe, 0];
        assert_eq!(cbmfem_problem_from_toml(bytes.as_ptr().cast(), &mut p), CbmfemStatus::InvalidUtf8);

        let q = preset("ex3");
        let name = CString::new("nope").unwrap();
        assert_eq!(cbmfem_problem_set_parameter(q, name.as_ptr(), 1.0), CbmfemStatus::Config);
        let name = CString::new("p").unwrap();
        assert_eq!(cbmfem_problem_set_parameter(q, name.as_ptr(), 1.0), CbmfemStatus::Ok);
        assert!(cbmfem_last_error().is_null());
        assert_eq!(cbmfem_problem_set_filters(q, -1.0, 1.0, 1.0), CbmfemStatus::Config);
        assert_eq!(cbmfem_problem_set_filters(q, 10.0, f64::INFINITY, 100.0), CbmfemStatus::Ok);
        cbmfem_problem_free(q);

        let mut r = ptr::null_mut();
        assert_eq!(cbmfem_solve(ptr::null(), &mut r), CbmfemStatus::NullPointer);
        assert!(r.is_null());
        cbmfem_problem_free(ptr::null_mut());
        cbmfem_result_free(ptr::null_mut());
        cbmfem_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(cbmfem_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/cbmfem.h")).unwrap();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

// Builds a small C program against the header and static library when a C
// compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libcbmfem_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("main.c");
    std::fs::write(
        &c,
        r#"#include <stdio.h>
#include "cbmfem.h"
int main(void) {
    CbmfemProblem *p = NULL;
    CbmfemResult *r = NULL;
    size_t n = 0;
    if (cbmfem_problem_from_preset("ex2", &p) != CBMFEM_STATUS_OK) return 10;
    if (cbmfem_problem_set_levels(p, 3) != CBMFEM_STATUS_OK) return 11;
    if (cbmfem_solve(p, &r) != CBMFEM_STATUS_OK) return 12;
    if (cbmfem_result_solution_count(r, 3, &n) != CBMFEM_STATUS_OK) return 13;
    if (cbmfem_problem_from_preset("missing", &p) != CBMFEM_STATUS_CONFIG) return 14;
    printf("%zu %s\n", n, cbmfem_last_error() ? "err" : "none");
    cbmfem_result_free(r);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = std::process::Command::new(&cc)
        .arg(&c)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2 err");
}
