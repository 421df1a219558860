use std::f64::consts::PI;
use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use giant_atoms_ffi::*;

const WG: GaWaveguide = GaWaveguide { v: 1.0, gamma: 1.0 };

fn layout(xs: &[f64]) -> *mut GaLayout {
    let s = vec![1.0; xs.len()];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ga_layout_from_points(xs.as_ptr(), s.as_ptr(), xs.len(), &mut out) }, GA_OK);
    out
}

#[test]
fn rates_through_handles() {
    let mut l = ptr::null_mut();
    unsafe {
        assert_eq!(ga_layout_equidistant(2, 1.0, 1.0, &mut l), GA_OK);
        assert_eq!(ga_layout_len(l), 2);
        let mut g = f64::NAN;
        assert_eq!(ga_relaxation_rate(l, WG, PI, &mut g), GA_OK);
        assert!(g.abs() < 1e-12);
        let mut d = f64::NAN;
        assert_eq!(ga_lamb_shift(l, WG, PI / 2.0, &mut d), GA_OK);
        assert!((d - 1.0).abs() < 1e-12);
        ga_layout_free(l);
    }
    assert_eq!(ga_relaxation_rate_equidistant(10, 2.0 * PI, 1.0), 100.0);
    assert!(ga_lamb_shift_equidistant(2, PI / 2.0, 1.0) - 1.0 < 1e-12);
}

#[test]
fn braided_pair() {
    let (a, b) = (layout(&[0.0, 2.0]), layout(&[1.0, 3.0]));
    let mut c = GaTwoAtom::default();
    let mut t = -1;
    unsafe {
        assert_eq!(ga_two_atom_coefficients(a, b, WG, PI / 2.0, &mut c), GA_OK);
        assert_eq!(ga_classify_topology(a, b, &mut t), GA_OK);
        ga_layout_free(a);
        ga_layout_free(b);
    }
    assert_eq!(t, GA_TOPOLOGY_BRAIDED);
    assert!((c.g - 1.0).abs() < 1e-12);
    assert!(c.gamma_a.abs() < 1e-12 && c.gamma_b.abs() < 1e-12 && c.gamma_coll.abs() < 1e-12);
}

#[test]
fn trajectory_copy() {
    let l = layout(&[0.0]);
    let mut tr = ptr::null_mut();
    unsafe {
        assert_eq!(ga_dde_evolve(l, WG, 1.0, 1.0, 1e-3, &mut tr), GA_OK);
        let n = ga_trajectory_len(tr);
        let (mut t, mut re, mut im) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        assert_eq!(ga_trajectory_copy(tr, t.as_mut_ptr(), re.as_mut_ptr(), im.as_mut_ptr(), ptr::null_mut(), n), GA_OK);
        let p = re[n - 1].powi(2) + im[n - 1].powi(2);
        assert!((p - (-t[n - 1]).exp()).abs() < 1e-8);
        assert_eq!(
            ga_trajectory_copy(tr, t.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), n - 1),
            GA_ERR_INVALID
        );
        ga_trajectory_free(tr);
        ga_layout_free(l);
    }
}

#[test]
fn errors_are_reported() {
    let mut l = ptr::null_mut();
    unsafe {
        assert_eq!(ga_layout_equidistant(0, 1.0, 1.0, &mut l), GA_ERR_INVALID);
        assert!(l.is_null());
        assert!(!ga_last_error().is_null());
        assert_eq!(ga_layout_equidistant(2, 1.0, 1.0, ptr::null_mut()), GA_ERR_NULL);
        let mut g = 0.0;
        assert_eq!(ga_relaxation_rate(ptr::null(), WG, 1.0, &mut g), GA_ERR_NULL);
        let bad = GaWaveguide { v: 1.0, gamma: 0.0 };
        assert_eq!(ga_layout_equidistant(2, 1.0, 1.0, &mut l), GA_OK);
        assert_eq!(ga_relaxation_rate(l, bad, 1.0, &mut g), GA_ERR_INVALID);
        ga_layout_free(l);
        let path = c"/nonexistent/layout.toml";
        assert_eq!(ga_layout_load(path.as_ptr(), &mut l), GA_ERR_IO);
        let msg = CStr::from_ptr(ga_last_error()).to_str().unwrap();
        assert!(msg.contains("No such file"), "{msg}");
        assert_eq!(ga_layout_len(ptr::null()), 0);
        ga_layout_free(ptr::null_mut());
        ga_trajectory_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(ga_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compile a C program against the generated header and the static library.
#[test]
fn header_compiles_and_links() {
    let Ok(status) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler on PATH; header check not run");
        return;
    };
    assert!(status.status.success());
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Test binaries live in <profile>/deps, next to the library built for them.
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = [deps.join("libgiant_atoms_ffi.a"), deps.parent().unwrap().join("libgiant_atoms_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("static library next to the test binary");
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("ffi_smoke.c");
    let exe = tmp.join("ffi_smoke");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "giant_atoms.h"
int main(void) {
    GaLayout *l = NULL;
    if (ga_layout_equidistant(3, 1.0, 1.0, &l) != GA_OK) return 1;
    GaWaveguide wg = {1.0, 1.0};
    double g = -1.0;
    if (ga_relaxation_rate(l, wg, 2.0 * 3.14159265358979323846 / 3.0, &g) != GA_OK) return 2;
    ga_layout_free(l);
    if (fabs(g) > 1e-12) return 3;
    if (ga_layout_equidistant(0, 1.0, 1.0, &l) != GA_ERR_INVALID) return 4;
    printf("%s\n", ga_version());
    return 0;
}
"#,
    )
    .unwrap();
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
