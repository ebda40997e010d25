use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use bpsmooth_ffi::*;

fn k22() -> *mut BpsInstance {
    let w = [0.9, 0.6, 0.7, 0.2];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { bps_instance_from_matrix(2, 2, w.as_ptr(), &mut h) }, BpsStatus::Ok);
    h
}

#[test]
fn run_and_oracle_agree_on_k22() {
    let h = k22();
    let mut a = [0i64; 2];
    let mut r = BpsRunResult::default();
    assert_eq!(unsafe { bps_run(h, 1000, 4, a.as_mut_ptr(), &mut r) }, BpsStatus::Ok);
    assert!(r.converged && r.is_matching);
    assert_eq!(a, [1, 0]);

    let mut b = [0i64; 2];
    let mut w = 0.0;
    assert_eq!(unsafe { bps_max_weight_matching(h, b.as_mut_ptr(), &mut w) }, BpsStatus::Ok);
    assert_eq!(b, a);
    assert!((w - 1.3).abs() < 1e-12);

    let mut d = 0.0;
    assert_eq!(unsafe { bps_matching_delta(h, &mut d) }, BpsStatus::Ok);
    assert!((d - 0.2).abs() < 1e-12);
    unsafe { bps_instance_free(h) };
}

#[test]
fn edges_constructor_leaves_unmatched_nodes() {
    let (l, r, w) = ([0usize], [1usize], [0.5]);
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { bps_instance_from_edges(2, 2, l.as_ptr(), r.as_ptr(), w.as_ptr(), 1, &mut h) },
        BpsStatus::Ok
    );
    let (mut nl, mut nr) = (0, 0);
    assert_eq!(unsafe { bps_instance_size(h, &mut nl, &mut nr) }, BpsStatus::Ok);
    assert_eq!((nl, nr), (2, 2));
    let mut a = [0i64; 2];
    let mut w = 0.0;
    assert_eq!(unsafe { bps_max_weight_matching(h, a.as_mut_ptr(), &mut w) }, BpsStatus::Ok);
    assert_eq!(a, [1, -1]);
    unsafe { bps_instance_free(h) };
}

#[test]
fn parsed_flow_reports_cycle_gap() {
    let text = CString::new("flow 2 2\nnode 1 1\nnode 2 -1\n1 2 1 0.2\n1 2 1 0.7\n").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { bps_instance_parse(text.as_ptr(), &mut h) }, BpsStatus::Ok);
    assert_eq!(unsafe { bps_instance_is_flow(h) }, 1);
    let (mut cost, mut gap) = (0.0, 0.0);
    assert_eq!(unsafe { bps_flow_gap(h, &mut cost, &mut gap) }, BpsStatus::Ok);
    assert!((cost - 0.2).abs() < 1e-12 && (gap - 0.5).abs() < 1e-12);

    let mut d = 0.0;
    assert_eq!(unsafe { bps_matching_delta(h, &mut d) }, BpsStatus::WrongKind);
    unsafe { bps_instance_free(h) };
}

#[test]
fn errors_set_status_and_message() {
    let mut h = ptr::null_mut();
    let w = [0.5, 1.5];
    assert_eq!(unsafe { bps_instance_from_matrix(1, 2, w.as_ptr(), &mut h) }, BpsStatus::InvalidInstance);
    assert!(h.is_null());
    let msg = unsafe { CStr::from_ptr(bps_last_error()) }.to_str().unwrap();
    assert!(msg.contains("weight"), "{msg}");

    let bad = CString::new("bip 2 2\n1 x 0.3\n").unwrap();
    assert_eq!(unsafe { bps_instance_parse(bad.as_ptr(), &mut h) }, BpsStatus::Parse);
    assert_eq!(unsafe { bps_instance_parse(ptr::null(), &mut h) }, BpsStatus::NullPointer);
    assert_eq!(unsafe { bps_instance_is_flow(ptr::null()) }, -1);

    let h = k22();
    let mut r = BpsRunResult::default();
    let mut a = [0i64; 2];
    assert_eq!(unsafe { bps_run(h, 10, 0, a.as_mut_ptr(), &mut r) }, BpsStatus::Parameter);
    assert_eq!(unsafe { bps_run(h, 10, 4, ptr::null_mut(), &mut r) }, BpsStatus::NullPointer);
    unsafe { bps_instance_free(h) };
    unsafe { bps_instance_free(ptr::null_mut()) };
}

#[test]
fn status_names_are_distinct() {
    let name = |s| unsafe { CStr::from_ptr(bps_status_name(s)) }.to_str().unwrap().to_string();
    assert_eq!(name(BpsStatus::Ok), "ok");
    assert_ne!(name(BpsStatus::Cap), name(BpsStatus::Parse));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/bpsmooth.h")).unwrap();
    let src = std::fs::read_to_string(format!("{dir}/src/lib.rs")).unwrap();
    for line in src.lines().filter(|l| l.contains("extern \"C\" fn ")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror", "-"])
        .arg(format!("-I{dir}/include"))
        .stdin(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            use std::io::Write;
            c.stdin.take().unwrap().write_all(b"#include \"bpsmooth.h\"\nint main(void) { return BPS_STATUS_OK; }\n")?;
            c.wait_with_output()
        })
    else {
        eprintln!("no C compiler, header syntax not checked");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
