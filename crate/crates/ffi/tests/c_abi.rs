use std::ffi::{c_char, CStr};
use std::ptr;

use rsma_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { rsma_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn two_user_channels() -> *mut RsmaChannels {
    let az = [0.0, std::f64::consts::PI / 18.0];
    let el = [0.0; 2];
    let kappa = [10.0; 2];
    let mut h = ptr::null_mut();
    let s = unsafe { rsma_channels_sample(2, 1, 2, az.as_ptr(), el.as_ptr(), kappa.as_ptr(), 7, 0, &mut h) };
    assert_eq!(s, RsmaStatus::Ok);
    h
}

#[test]
fn version_is_terminated() {
    let v = unsafe { CStr::from_ptr(rsma_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_out_pointer_is_reported() {
    let s = unsafe { rsma_dictionary_new(2, 6, ptr::null_mut()) };
    assert_eq!(s, RsmaStatus::NullPointer);
    assert!(last_error().contains("out"));
}

#[test]
fn bad_dictionary_maps_error() {
    let mut d = ptr::null_mut();
    let s = unsafe { rsma_dictionary_new(5, 6, &mut d) };
    assert_ne!(s, RsmaStatus::Ok);
    assert!(d.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn mmf_allocation_levels_weak_users() {
    let r_p = [0.2, 1.0, 3.0];
    let mut c = [0.0; 3];
    let mut min = 0.0;
    let s = unsafe { rsma_mmf_allocation(1.0, r_p.as_ptr(), 3, c.as_mut_ptr(), &mut min) };
    assert_eq!(s, RsmaStatus::Ok);
    assert!((min - 1.1).abs() < 1e-12);
    assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(c[2], 0.0);
}

#[test]
fn channels_round_trip() {
    let entries = [1.0, 0.0, 0.0, 1.0, 0.5, -0.5, 2.0, 0.0];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rsma_channels_new(2, 2, entries.as_ptr(), &mut h) }, RsmaStatus::Ok);
    let mut back = [0.0; 8];
    assert_eq!(unsafe { rsma_channels_get(h, back.as_mut_ptr(), back.len()) }, RsmaStatus::Ok);
    assert_eq!(back, entries);
    let mut short = [0.0; 4];
    assert_eq!(unsafe { rsma_channels_get(h, short.as_mut_ptr(), short.len()) }, RsmaStatus::InvalidArgument);
    unsafe { rsma_channels_free(h) };
}

#[test]
fn optimize_then_evaluate_matches() {
    let h = two_user_channels();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { rsma_dictionary_new(2, 6, &mut d) }, RsmaStatus::Ok);
    let mut n_modes = 0;
    assert_eq!(unsafe { rsma_dictionary_len(d, &mut n_modes) }, RsmaStatus::Ok);
    assert_eq!(n_modes, 4);
    let mut res = ptr::null_mut();
    let s = unsafe { rsma_optimize(h, d, 1, RsmaReceiver::Sic, RsmaObjective::Wsr, ptr::null(), 10.0, 1.0, 3, &mut res) };
    assert_eq!(s, RsmaStatus::Ok, "{}", last_error());

    let (mut rows, mut cols) = (0, 0);
    assert_eq!(unsafe { rsma_result_precoder(res, ptr::null_mut(), 0, &mut rows, &mut cols) }, RsmaStatus::Ok);
    let mut streams = 0;
    assert_eq!(unsafe { rsma_dictionary_streams(d, 1, &mut streams) }, RsmaStatus::Ok);
    assert_eq!((rows, cols), (2, streams));
    let mut p = vec![0.0; 2 * rows * cols];
    assert_eq!(unsafe { rsma_result_precoder(res, p.as_mut_ptr(), p.len(), &mut rows, &mut cols) }, RsmaStatus::Ok);
    let power: f64 = p.iter().map(|x| x * x).sum();
    assert!((power - 10.0).abs() < 1e-9);

    let (mut r_c, mut sic, mut free) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    let s = unsafe {
        rsma_rates(h, d, 1, p.as_ptr(), 1.0, RsmaMethod::Approx, 0, 0, r_c.as_mut_ptr(), sic.as_mut_ptr(), free.as_mut_ptr())
    };
    assert_eq!(s, RsmaStatus::Ok, "{}", last_error());
    let mut objective = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    assert_eq!(
        unsafe { rsma_result_summary(res, &mut objective, &mut iterations, &mut converged, ptr::null_mut()) },
        RsmaStatus::Ok
    );
    let r_common = r_c[0].min(r_c[1]);
    assert!((objective - (r_common + sic[0] + sic[1])).abs() < 1e-9);
    let mut totals = [0.0; 2];
    assert_eq!(unsafe { rsma_result_user_rates(res, totals.as_mut_ptr(), 2) }, RsmaStatus::Ok);
    assert!((totals.iter().sum::<f64>() - objective).abs() < 1e-9);
    unsafe {
        rsma_result_free(res);
        rsma_dictionary_free(d);
        rsma_channels_free(h);
    }
}

#[test]
fn mode_out_of_range() {
    let h = two_user_channels();
    let mut d = ptr::null_mut();
    unsafe { rsma_dictionary_new(2, 6, &mut d) };
    let mut res = ptr::null_mut();
    let s = unsafe { rsma_optimize(h, d, 9, RsmaReceiver::Sic, RsmaObjective::Mmf, ptr::null(), 1.0, 1.0, 0, &mut res) };
    assert_eq!(s, RsmaStatus::InvalidArgument);
    assert!(last_error().contains("mode 9"));
    unsafe {
        rsma_dictionary_free(d);
        rsma_channels_free(h);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/rsma_ffi.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let src = format!("#include \"{dir}/include/rsma_ffi.h\"\nint main(void) {{ return rsma_version() == 0; }}\n");
    let path = std::env::temp_dir().join(format!("rsma_ffi_check_{}.c", std::process::id()));
    std::fs::write(&path, src).unwrap();
    let out = std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror"]).arg(&path).output();
    let _ = std::fs::remove_file(&path);
    match out {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(e) => eprintln!("no C compiler, header check skipped: {e}"),
    }
}
