use std::ffi::c_char;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use kdvfb_ffi::*;

const N2_LENGTH: f64 = 9.597_724_091_861_606;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { kdvfb_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn classification_through_the_abi() {
    let mut class = KdvfbClass::C;
    let mut dim = usize::MAX;
    for (len, want, d) in [
        (2.0 * std::f64::consts::PI, KdvfbClass::N1, 1),
        (N2_LENGTH, KdvfbClass::N2, 2),
        (1.0, KdvfbClass::C, 0),
    ] {
        assert_eq!(
            unsafe { kdvfb_classify(len, &mut class, &mut dim) },
            KdvfbStatus::Ok
        );
        assert_eq!((class, dim), (want, d));
    }
    assert_eq!(
        unsafe { kdvfb_classify(-1.0, &mut class, &mut dim) },
        KdvfbStatus::InvalidArgument
    );
    assert!(last_error().contains("positive"));
    assert_eq!(
        unsafe { kdvfb_classify(1.0, ptr::null_mut(), &mut dim) },
        KdvfbStatus::NullPointer
    );
}

#[test]
fn unsupported_length_reports_synthesis_failure() {
    let mut p = ptr::null_mut();
    let s = unsafe { kdvfb_problem_new(2.0 * std::f64::consts::PI, 64, 0.05, &mut p) };
    assert_eq!(s, KdvfbStatus::SynthesisFailed);
    assert!(p.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn closed_loop_round_trip() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { kdvfb_problem_new(N2_LENGTH, 128, 0.0, &mut p) },
        KdvfbStatus::Ok
    );
    let (mut period, mut dt, mut m, mut delta) = (0.0, 0.0, 0usize, 0.0);
    assert_eq!(
        unsafe { kdvfb_problem_info(p, &mut period, &mut dt, &mut m, &mut delta) },
        KdvfbStatus::Ok
    );
    assert_eq!(m, 2);
    assert!(period > 0.0 && dt > 0.0 && delta > 0.0);

    let a = [6e-7, 8e-7];
    let mut u = f64::NAN;
    assert_eq!(
        unsafe { kdvfb_feedback(p, 0.1, 0.0, a.as_ptr(), 2, &mut u) },
        KdvfbStatus::Ok
    );
    assert!(u.is_finite());
    assert_eq!(
        unsafe { kdvfb_feedback(p, 0.1, 0.0, a.as_ptr(), 1, &mut u) },
        KdvfbStatus::InvalidArgument
    );

    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { kdvfb_state_new(p, a.as_ptr(), 2, ptr::null(), 0, &mut s) },
        KdvfbStatus::Ok
    );
    let (mut h0, mut m0) = (0.0, 0.0);
    unsafe { kdvfb_state_norms(s, &mut h0, &mut m0) };
    assert!(h0 == 0.0 && (m0 - 1e-6).abs() < 1e-15);
    let st = unsafe { kdvfb_closed_loop(p, 0.1, KdvfbMode::Delayed, 2.0 * period, s) };
    assert_eq!(st, KdvfbStatus::Ok);
    let (mut h1, mut m1) = (0.0, 0.0);
    unsafe { kdvfb_state_norms(s, &mut h1, &mut m1) };
    assert!(m1 < m0 * 0.999, "M norm {m1} vs {m0}");

    let mut small = vec![0.0; 4];
    assert_eq!(
        unsafe { kdvfb_state_values(s, small.as_mut_ptr(), small.len()) },
        KdvfbStatus::BufferTooSmall
    );
    let mut vals = vec![0.0; 128];
    assert_eq!(
        unsafe { kdvfb_state_values(s, vals.as_mut_ptr(), 128) },
        KdvfbStatus::Ok
    );
    assert_eq!((vals[0], vals[127]), (0.0, 0.0));

    let dir = tempfile::tempdir().unwrap();
    let path = std::ffi::CString::new(dir.path().join("lib.bin").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { kdvfb_problem_save_library(p, path.as_ptr()) },
        KdvfbStatus::Ok
    );
    assert!(dir.path().join("lib.bin").exists());

    unsafe {
        kdvfb_state_free(s);
        kdvfb_problem_free(p);
        kdvfb_problem_free(ptr::null_mut());
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("kdvfb.h")
}

#[test]
fn header_declares_the_abi() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "kdvfb_last_error_message",
        "kdvfb_classify",
        "kdvfb_problem_new",
        "kdvfb_problem_free",
        "kdvfb_problem_info",
        "kdvfb_feedback",
        "kdvfb_state_new",
        "kdvfb_state_free",
        "kdvfb_closed_loop",
        "typedef struct KdvfbProblem KdvfbProblem;",
        "KDVFB_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

/// Compiles and links a C program against the static library when a C
/// compiler is available.
#[test]
fn c_program_links_against_the_static_library() {
    let deps = std::env::current_exe().unwrap();
    let profile_dir = deps
        .parent()
        .and_then(|d| d.parent())
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libkdvfb_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include "kdvfb.h"
#include <stdio.h>
int main(void) {
    KdvfbClass c; size_t dim; char msg[128];
    if (kdvfb_classify(9.597724091861606, &c, &dim) != KDVFB_STATUS_OK) return 1;
    if (c != KDVFB_CLASS_N2 || dim != 2) return 2;
    if (kdvfb_classify(0.0, &c, &dim) != KDVFB_STATUS_INVALID_ARGUMENT) return 3;
    if (kdvfb_last_error_message(msg, sizeof msg) == 0) return 4;
    puts(msg);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
}
