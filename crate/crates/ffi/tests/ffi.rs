use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use typdiv_ffi::*;

fn fixture(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn cstrings(ids: &[&str]) -> Vec<CString> {
    ids.iter().map(|s| CString::new(*s).unwrap()).collect()
}

fn ptrs(v: &[CString]) -> Vec<*const c_char> {
    v.iter().map(|s| s.as_ptr()).collect()
}

fn last_error() -> String {
    let p = typdiv_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn mpd_over_loaded_matrix() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            typdiv_distance_matrix_load(fixture("syn_distances.csv").as_ptr(), &mut m),
            TypdivStatus::Ok
        );
        assert_eq!(typdiv_distance_matrix_len(m), 4);
        let ids = cstrings(&["dan", "nor"]);
        let mut r = TypdivMetric::default();
        assert_eq!(typdiv_mpd(m, ptrs(&ids).as_ptr(), ids.len(), &mut r), TypdivStatus::Ok);
        assert_eq!(r.value, 0.22);
        assert_eq!((r.used, r.excluded, r.count), (2, 0, 1));

        let one = cstrings(&["dan"]);
        assert_eq!(typdiv_mpd(m, ptrs(&one).as_ptr(), 1, &mut r), TypdivStatus::Sample);
        assert!(last_error().contains("need at least 2 usable languages"));
        typdiv_distance_matrix_free(m);
    }
}

#[test]
fn built_matrix_matches_hand_mean() {
    let ids = cstrings(&["a", "b", "c"]);
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            typdiv_distance_matrix_new(ptrs(&ids).as_ptr(), 3, &mut m),
            TypdivStatus::Ok
        );
        for (i, j, d) in [(0, 1, 0.2), (0, 2, 0.4), (1, 2, 0.9)] {
            assert_eq!(typdiv_distance_matrix_set(m, i, j, d), TypdivStatus::Ok);
        }
        assert_eq!(typdiv_distance_matrix_set(m, 0, 1, 1.5), TypdivStatus::Data);
        let mut r = TypdivMetric::default();
        assert_eq!(typdiv_mpd(m, ptrs(&ids).as_ptr(), 3, &mut r), TypdivStatus::Ok);
        assert!((r.value - 0.5).abs() < 1e-12);
        typdiv_distance_matrix_free(m);
    }
}

#[test]
fn mpsd_fvi_and_registry() {
    let ids = cstrings(&["dan", "spa", "jpn", "tur", "kal"]);
    let mut r = TypdivMetric::default();
    unsafe {
        let mut vs = ptr::null_mut();
        assert_eq!(
            typdiv_vector_set_load(fixture("syntax.tsv").as_ptr(), &mut vs),
            TypdivStatus::Ok
        );
        assert_eq!(
            typdiv_mpsd(vs, ptrs(&ids).as_ptr(), ids.len(), 0.05, false, &mut r),
            TypdivStatus::Ok
        );
        assert!(r.value > 0.0 && r.value <= 1.0);
        // The all-missing language falls below the coverage threshold.
        assert_eq!((r.used, r.excluded), (4, 1));
        typdiv_vector_set_free(vs);

        let mut fm = ptr::null_mut();
        assert_eq!(
            typdiv_feature_matrix_load(fixture("mini_grambank").as_ptr(), &mut fm),
            TypdivStatus::Ok
        );
        // Grambank languages are keyed by glottocode.
        let glotto = cstrings(&["dani1285", "stan1288"]);
        assert_eq!(
            typdiv_fvi(fm, ptrs(&glotto).as_ptr(), glotto.len(), &mut r),
            TypdivStatus::Ok
        );
        assert!(r.value > 0.0 && r.value <= 1.0);
        typdiv_feature_matrix_free(fm);

        let registry = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/registry.csv");
        let registry = CString::new(registry.to_str().unwrap()).unwrap();
        let mut reg = ptr::null_mut();
        assert_eq!(typdiv_registry_load(registry.as_ptr(), &mut reg), TypdivStatus::Ok);
        for kind in [TypdivRegistryDistance::Geographic, TypdivRegistryDistance::Genetic] {
            assert_eq!(
                typdiv_registry_mpd(reg, kind, ptrs(&ids).as_ptr(), ids.len(), &mut r),
                TypdivStatus::Ok
            );
            assert!(r.value > 0.0 && r.value <= 1.0);
        }
        typdiv_registry_free(reg);
    }
}

#[test]
fn load_failures_leave_null_handles() {
    let mut m = ptr::dangling_mut::<TypdivDistanceMatrix>();
    unsafe {
        let missing = CString::new("/nonexistent/d.csv").unwrap();
        assert_eq!(
            typdiv_distance_matrix_load(missing.as_ptr(), &mut m),
            TypdivStatus::Data
        );
        assert!(m.is_null());
        assert!(last_error().contains("/nonexistent/d.csv"));
        assert_eq!(typdiv_distance_matrix_load(ptr::null(), &mut m), TypdivStatus::Usage);
        assert_eq!(
            typdiv_distance_matrix_load(missing.as_ptr(), ptr::null_mut()),
            TypdivStatus::Usage
        );
        typdiv_distance_matrix_free(ptr::null_mut());
    }
}

#[test]
fn audit_groups_and_policies() {
    let langs = cstrings(&["a", "b", "c", "d"]);
    let groups = cstrings(&["x", "x", "y"]);
    let mut group_ptrs = ptrs(&groups);
    group_ptrs.push(ptr::null());
    let scores = [10.0, 20.0, 40.0, 100.0];
    let mut r = TypdivAudit::default();
    unsafe {
        let status = typdiv_audit(
            ptrs(&langs).as_ptr(),
            scores.as_ptr(),
            group_ptrs.as_ptr(),
            4,
            TypdivNaPolicy::Group,
            &mut r,
        );
        assert_eq!(status, TypdivStatus::Ok);
        assert_eq!(r.overall_mean, 42.5);
        // Groups x = 15, y = 40, NA = 100.
        assert!((r.by_feature_mean - 155.0 / 3.0).abs() < 1e-12);
        assert_eq!((r.n_groups, r.by_feature_count), (3, 3));

        let status = typdiv_audit(
            ptrs(&langs).as_ptr(),
            scores.as_ptr(),
            group_ptrs.as_ptr(),
            4,
            TypdivNaPolicy::Exclude,
            &mut r,
        );
        assert_eq!(status, TypdivStatus::Ok);
        assert_eq!(r.by_feature_mean, 27.5);
        assert!((r.delta - (27.5 - 42.5)).abs() < 1e-12);
    }
}

#[test]
fn kappa_and_claims() {
    let a = cstrings(&["yes", "yes", "no", "no"]);
    let b = cstrings(&["yes", "no", "no", "no"]);
    let mut k = 0.0;
    unsafe {
        assert_eq!(
            typdiv_kappa(ptrs(&a).as_ptr(), ptrs(&b).as_ptr(), 4, &mut k),
            TypdivStatus::Ok
        );
        // po = 0.75, pe = 0.5 * 0.25 + 0.5 * 0.75 = 0.5.
        assert!((k - 0.5).abs() < 1e-12);
        assert_eq!(
            typdiv_kappa(ptrs(&a).as_ptr(), ptrs(&a).as_ptr(), 4, &mut k),
            TypdivStatus::Ok
        );
        assert_eq!(k, 1.0);
        let same = cstrings(&["no", "no"]);
        assert_eq!(
            typdiv_kappa(ptrs(&same).as_ptr(), ptrs(&same).as_ptr(), 2, &mut k),
            TypdivStatus::Data
        );

        let title = CString::new("Parsing for all").unwrap();
        let abs = CString::new("We use a Typologically diverse set of languages.").unwrap();
        let mut c = TypdivClaim::default();
        assert_eq!(
            typdiv_scan_claim(title.as_ptr(), abs.as_ptr(), &mut c),
            TypdivStatus::Ok
        );
        assert_eq!(c.field, 2);
        assert_eq!(&abs.to_str().unwrap()[c.start..c.start + 7], "Typolog");
        let none = CString::new("").unwrap();
        assert_eq!(
            typdiv_scan_claim(title.as_ptr(), none.as_ptr(), &mut c),
            TypdivStatus::Ok
        );
        assert_eq!(c.field, 0);
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(typdiv_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/typdiv.h")).unwrap();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

/// Compiles and runs a small C program against the static library when a C
/// compiler is on PATH.
#[test]
fn c_program_links_against_header() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| {
        std::process::Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    }) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().unwrap().parent().unwrap();
    // The test harness links the rlib only, so build the static library.
    let mut build = std::process::Command::new(env!("CARGO"));
    build
        .args(["build", "--quiet", "-p", "typdiv-ffi", "--lib", "--target-dir"])
        .arg(target_dir.parent().unwrap());
    if target_dir.file_name().is_some_and(|n| n == "release") {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success());
    let lib = target_dir.join("libtypdiv_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = std::env::temp_dir().join(format!("typdiv_ffi_c_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bin = dir.join("smoke");
    let status = std::process::Command::new(cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin)
        .arg(fixture("syn_distances.csv").to_str().unwrap())
        .output()
        .unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "mpd 0.2200 pairs 1");
}
