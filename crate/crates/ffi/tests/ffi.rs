use std::ffi::CStr;
use std::ptr;

use skewprod_ffi::*;

fn system(eps: f64) -> *mut SpSystem {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { sp_system_new(1.1, eps, 0.5, &mut s) }, SpStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn invalid_split_reports_an_error() {
    let mut s = ptr::null_mut();
    let st = unsafe { sp_system_new(1.1, 0.1, 1.5, &mut s) };
    assert_eq!(st, SpStatus::InvalidArgument);
    assert!(s.is_null());
    let msg = unsafe { CStr::from_ptr(sp_last_error()) }.to_str().unwrap();
    assert!(!msg.is_empty());
}

#[test]
fn null_arguments_are_rejected() {
    assert_eq!(unsafe { sp_system_new(1.1, 0.1, 0.5, ptr::null_mut()) }, SpStatus::NullPointer);
    let mut c = SpCertificate::default();
    assert_eq!(unsafe { sp_check_hypotheses(ptr::null(), -0.8, 0.8, -0.86, 0.86, 200, &mut c) }, SpStatus::NullPointer);
    assert_eq!(unsafe { sp_graph_len(ptr::null()) }, 0);
    assert!(unsafe { sp_graph_eval(ptr::null(), 0.5) }.is_nan());
    assert_eq!(unsafe { sp_report_case(ptr::null()) }, 0);
    unsafe {
        sp_system_free(ptr::null_mut());
        sp_graph_free(ptr::null_mut());
        sp_report_free(ptr::null_mut());
    }
}

#[test]
fn certificate_through_the_c_interface() {
    let s = system(0.1);
    let mut c = SpCertificate::default();
    assert_eq!(unsafe { sp_check_hypotheses(s, -0.858, 0.858, -0.86, 0.86, 300, &mut c) }, SpStatus::Ok);
    assert!(c.pass);
    assert!(c.expansion_margin > 0.15);
    // J too wide: expansion fails, which is data rather than an error
    assert_eq!(unsafe { sp_check_hypotheses(s, -1.5, 1.5, -2.0, 2.0, 300, &mut c) }, SpStatus::Ok);
    assert!(!c.pass);
    unsafe { sp_system_free(s) };
}

#[test]
fn fixed_points_and_buffer_size() {
    let s = system(0.019);
    let mut ys = [0.0; 4];
    let mut slopes = [0.0; 4];
    let mut n = 0usize;
    let st = unsafe { sp_fixed_points(s, 1.0 / 3.0, -0.86, 0.86, ys.as_mut_ptr(), slopes.as_mut_ptr(), 4, &mut n) };
    assert_eq!(st, SpStatus::Ok);
    assert_eq!(n, 3);
    assert!((ys[0] + 0.568).abs() < 5e-3 && (ys[2] - 0.451).abs() < 5e-3);
    let st = unsafe { sp_fixed_points(s, 1.0 / 3.0, -0.86, 0.86, ys.as_mut_ptr(), slopes.as_mut_ptr(), 1, &mut n) };
    assert_eq!(st, SpStatus::BufferTooSmall);
    assert_eq!(n, 3);
    unsafe { sp_system_free(s) };
}

#[test]
fn graphs_exponents_and_dimension() {
    let s = system(0.019);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { sp_graph_new(s, SpGraphKind::Upper, 512, 200, 0.86, 1, &mut g) }, SpStatus::Ok);
    let n = unsafe { sp_graph_len(g) };
    assert_eq!(n, 512);
    let mut xs = vec![0.0; n];
    let mut vs = vec![0.0; n];
    assert_eq!(unsafe { sp_graph_values(g, xs.as_mut_ptr(), vs.as_mut_ptr(), n) }, SpStatus::Ok);
    assert!(vs.iter().all(|v| *v > 0.3));
    assert_eq!(unsafe { sp_graph_values(g, xs.as_mut_ptr(), vs.as_mut_ptr(), n - 1) }, SpStatus::BufferTooSmall);

    let (mut v, mut se) = (0.0, 0.0);
    assert_eq!(unsafe { sp_graph_exponent(s, g, SpMeasure::Lebesgue, 0.0, 1000, 1, &mut v, &mut se) }, SpStatus::Ok);
    assert!(v < 0.0);
    assert_eq!(unsafe { sp_graph_exponent(s, g, SpMeasure::Bernoulli, 2.0, 1000, 1, &mut v, &mut se) }, SpStatus::InvalidArgument);

    let mut d = SpDimension::default();
    assert_eq!(unsafe { sp_dimension(s, g, 6, true, &mut d) }, SpStatus::Ok);
    assert!(d.feasible);
    assert_eq!(d.dimension, 2.0);
    unsafe {
        sp_graph_free(g);
        sp_system_free(s);
    }
}

#[test]
fn classification_and_crossings() {
    let s = system(0.019);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { sp_classify(s, 1024, 200, 1, &mut r) }, SpStatus::Ok);
    assert_eq!(unsafe { sp_report_case(r) }, b'B' as std::ffi::c_char);
    let text = unsafe { CStr::from_ptr(sp_report_text(r)) }.to_str().unwrap();
    assert!(text.starts_with("case: B"));
    unsafe { sp_report_free(r) };

    let mut count = 0u64;
    assert_eq!(unsafe { sp_count_crossings(s, 1, -1.0, 100_000, &mut count) }, SpStatus::Ok);
    assert_eq!(count, 0);
    unsafe { sp_system_free(s) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/skewprod.h")).unwrap();
    for f in [
        "sp_last_error",
        "sp_system_new",
        "sp_system_free",
        "sp_check_hypotheses",
        "sp_fixed_points",
        "sp_graph_new",
        "sp_graph_free",
        "sp_graph_len",
        "sp_graph_eval",
        "sp_graph_values",
        "sp_graph_exponent",
        "sp_classify",
        "sp_report_free",
        "sp_report_case",
        "sp_report_min_gap",
        "sp_report_text",
        "sp_dimension",
        "sp_count_crossings",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct SpSystem SpSystem;"));
}

#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libskewprod_ffi.a");
    if !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = env!("CARGO_MANIFEST_DIR");
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(format!("{dir}/include"))
        .arg(format!("{dir}/tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let y: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((y - 0.610).abs() < 5e-3);
}
