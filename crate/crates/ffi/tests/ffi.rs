use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use stlsynth_ffi::*;

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn last_error() -> String {
    let p = stlsynth_last_error();
    assert!(!p.is_null(), "no error message recorded");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn car_data() -> *mut StlsynthTrajectory {
    let mut data = ptr::null_mut();
    let name = CString::new("car").unwrap();
    assert_eq!(unsafe { stlsynth_generate_data(name.as_ptr(), 200, -2.0, 2.0, 7, &mut data) }, StlsynthCode::Ok);
    data
}

fn traj(u: &[f64], y: &[f64]) -> *mut StlsynthTrajectory {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { stlsynth_trajectory_new(1, 1, u.len(), u.as_ptr(), y.as_ptr(), &mut out) }, StlsynthCode::Ok);
    out
}

fn formula(src: &str) -> *mut StlsynthFormula {
    let mut out = ptr::null_mut();
    let src = CString::new(src).unwrap();
    assert_eq!(unsafe { stlsynth_formula_parse(src.as_ptr(), 1, &mut out) }, StlsynthCode::Ok);
    out
}

fn car_options() -> StlsynthOptions {
    StlsynthOptions { n_x_bound: 3, u_lo: -2.0, u_hi: 2.0, ..stlsynth_options_default() }
}

#[test]
fn scenario_one_round_trip() {
    unsafe {
        let data = car_data();
        assert_eq!(stlsynth_trajectory_len(data), 200);
        let init = traj(&[0.6058, 0.0, 0.0], &[-0.1636, 0.0, 0.0]);
        let phi = formula("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)");
        assert_eq!(stlsynth_formula_horizon(phi), 10);
        for cost in [StlsynthCost::InputNorm, StlsynthCost::OutputNorm] {
            let mut res = ptr::null_mut();
            let opts = StlsynthOptions { cost: cost as i32, ..car_options() };
            assert_eq!(stlsynth_synthesize(data, init, phi, &opts, &mut res), StlsynthCode::Ok);
            assert_eq!(stlsynth_result_status(res), StlsynthStatus::Feasible);
            assert!(stlsynth_result_optimal(res));
            assert_eq!(stlsynth_result_horizon(res), 10);
            assert!(stlsynth_result_objective(res).is_finite());

            let mut u = [0.0; 11];
            let mut n = 0;
            assert_eq!(stlsynth_result_inputs(res, u.as_mut_ptr(), 3, &mut n), StlsynthCode::BufferTooSmall);
            assert_eq!(n, 11);
            assert_eq!(stlsynth_result_inputs(res, u.as_mut_ptr(), u.len(), &mut n), StlsynthCode::Ok);
            assert!(u.iter().all(|v| (-2.0 - 1e-9..=2.0 + 1e-9).contains(v)));
            let mut y = [0.0; 11];
            assert_eq!(stlsynth_result_outputs(res, y.as_mut_ptr(), y.len(), &mut n), StlsynthCode::Ok);
            assert!(y[5..].iter().all(|v| (2.0 - 1e-9..=3.0 + 1e-9).contains(&v.abs())));

            let mut start = ptr::null_mut();
            assert_eq!(stlsynth_result_initialization(res, &mut start), StlsynthCode::Ok);
            assert_eq!(stlsynth_trajectory_len(start), 3);
            let (mut ok, mut t_fail) = (false, 0);
            let car = CString::new("car").unwrap();
            assert_eq!(
                stlsynth_verify(car.as_ptr(), start, u.as_ptr(), 11, phi, &mut ok, &mut t_fail),
                StlsynthCode::Ok
            );
            assert!(ok);
            assert_eq!(t_fail, usize::MAX);
            stlsynth_trajectory_free(start);
            stlsynth_result_free(res);
        }
        stlsynth_formula_free(phi);
        stlsynth_trajectory_free(init);
        stlsynth_trajectory_free(data);
    }
}

#[test]
fn infeasible_is_a_successful_call() {
    unsafe {
        let data = car_data();
        let init = traj(&[0.0; 3], &[0.0; 3]);
        let phi = formula("G[0,5] y1 > 1e6");
        let mut res = ptr::null_mut();
        assert_eq!(stlsynth_synthesize(data, init, phi, &car_options(), &mut res), StlsynthCode::Ok);
        assert_eq!(stlsynth_result_status(res), StlsynthStatus::Infeasible);
        assert!(stlsynth_result_objective(res).is_nan());
        let mut n = 7;
        assert_eq!(stlsynth_result_inputs(res, ptr::null_mut(), 0, &mut n), StlsynthCode::Ok);
        assert_eq!(n, 0);
        stlsynth_result_free(res);
        stlsynth_formula_free(phi);
        stlsynth_trajectory_free(init);
        stlsynth_trajectory_free(data);
    }
}

#[test]
fn verify_reports_the_failing_step() {
    unsafe {
        let init = traj(&[0.0; 3], &[50.0; 3]);
        let phi = formula("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)");
        let u = [0.0; 11];
        let (mut ok, mut t_fail) = (true, 0);
        let car = CString::new("car").unwrap();
        assert_eq!(stlsynth_verify(car.as_ptr(), init, u.as_ptr(), 11, phi, &mut ok, &mut t_fail), StlsynthCode::Ok);
        assert!(!ok);
        assert_eq!(t_fail, 5);
        stlsynth_formula_free(phi);
        stlsynth_trajectory_free(init);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut phi = ptr::null_mut();
        let bad = CString::new("G[0,2] (y1 >").unwrap();
        assert_eq!(stlsynth_formula_parse(bad.as_ptr(), 1, &mut phi), StlsynthCode::Parse);
        assert!(phi.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(stlsynth_formula_parse(ptr::null(), 1, &mut phi), StlsynthCode::NullPointer);
        assert!(last_error().contains("src"));

        let mut data = ptr::null_mut();
        let plane = CString::new("plane").unwrap();
        assert_eq!(stlsynth_generate_data(plane.as_ptr(), 10, -1.0, 1.0, 1, &mut data), StlsynthCode::InvalidArgument);
        assert!(last_error().contains("plane"));

        let missing = CString::new("/nonexistent/data.csv").unwrap();
        assert_eq!(stlsynth_trajectory_read_csv(missing.as_ptr(), &mut data), StlsynthCode::Io);

        let mut t = ptr::null_mut();
        assert_eq!(stlsynth_trajectory_new(1, 1, 3, ptr::null(), ptr::null(), &mut t), StlsynthCode::NullPointer);

        let data = car_data();
        let init = traj(&[0.0; 3], &[0.0; 3]);
        let phi = formula("y1 > 0");
        let mut two = ptr::null_mut();
        let src = CString::new("y2 > 0").unwrap();
        assert_eq!(stlsynth_formula_parse(src.as_ptr(), 2, &mut two), StlsynthCode::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(stlsynth_synthesize(data, init, two, &car_options(), &mut res), StlsynthCode::Dimension);
        stlsynth_formula_free(two);
        let opts = StlsynthOptions { cost: 9, ..car_options() };
        assert_eq!(stlsynth_synthesize(data, init, phi, &opts, &mut res), StlsynthCode::InvalidArgument);
        let opts = StlsynthOptions { eps: -1.0, ..car_options() };
        let init3 = traj(&[0.0; 3], &[0.0; 3]);
        assert_eq!(stlsynth_synthesize(data, init3, phi, &opts, &mut res), StlsynthCode::InvalidArgument);
        assert_eq!(stlsynth_synthesize(data, init3, phi, ptr::null(), &mut res), StlsynthCode::NullPointer);
        assert!(res.is_null());

        let inconsistent = traj(&[0.0; 3], &[0.0, 1.0, 0.0]);
        let (mut ok, mut tf) = (false, 0);
        let car = CString::new("car").unwrap();
        let u = [0.0];
        assert_eq!(
            stlsynth_verify(car.as_ptr(), inconsistent, u.as_ptr(), 1, phi, &mut ok, &mut tf),
            StlsynthCode::InconsistentInitialization
        );

        // A successful call clears the message.
        assert_eq!(stlsynth_formula_horizon(phi), 0);
        let mut p2 = ptr::null_mut();
        let good = CString::new("F[0,2] y1 > 0").unwrap();
        assert_eq!(stlsynth_formula_parse(good.as_ptr(), 1, &mut p2), StlsynthCode::Ok);
        assert!(stlsynth_last_error().is_null());
        assert_eq!(stlsynth_formula_horizon(p2), 2);

        for f in [phi, p2] {
            stlsynth_formula_free(f);
        }
        for t in [data, init, init3, inconsistent] {
            stlsynth_trajectory_free(t);
        }
        stlsynth_trajectory_free(ptr::null_mut());
        stlsynth_result_free(ptr::null_mut());
        stlsynth_formula_free(ptr::null_mut());
    }
}

#[test]
fn null_handles_read_as_empty() {
    unsafe {
        assert_eq!(stlsynth_trajectory_len(ptr::null()), 0);
        assert_eq!(stlsynth_result_status(ptr::null()), StlsynthStatus::Unknown);
        assert!(stlsynth_result_objective(ptr::null()).is_nan());
        assert_eq!(stlsynth_result_inputs(ptr::null(), ptr::null_mut(), 0, ptr::null_mut()), StlsynthCode::NullPointer);
    }
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(stlsynth_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Every exported function and public type appears in the generated header.
#[test]
fn header_declares_the_whole_interface() {
    let header = std::fs::read_to_string(crate_dir().join("include/stlsynth.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    assert!(header.contains("#ifndef STLSYNTH_H"));
    let exported: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 18, "{exported:?}");
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "`{name}` missing from the header");
    }
    for ty in ["typedef struct StlsynthTrajectory", "typedef struct StlsynthFormula", "typedef struct StlsynthResult"] {
        assert!(header.contains(ty), "{ty}");
    }
    for c in [
        "STLSYNTH_CODE_OK = 0",
        "STLSYNTH_CODE_PANIC = 10",
        "STLSYNTH_STATUS_INFEASIBLE = 1",
        "STLSYNTH_COST_OUTPUT_NORM = 1",
    ] {
        assert!(header.contains(c), "{c}");
    }
}

/// `deps/` of the current profile, where cargo builds the library for the
/// test run (the copy one level up is only refreshed by `cargo build`).
fn artifact_dir() -> PathBuf {
    std::env::current_exe().unwrap().parent().unwrap().to_path_buf()
}

/// Compiles the C smoke test against the header and static library and
/// runs it. Skipped when no C compiler is installed.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler `{cc}`");
        return;
    }
    let lib = artifact_dir().join("libstlsynth_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-I"])
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}{}", String::from_utf8_lossy(&run.stdout), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
