//! Exercise the C ABI through the exported symbols, as a foreign caller would.

use annulus_capi::*;
use std::ffi::CString;

#[test]
fn grid_lifecycle_and_errors() {
    unsafe {
        let mut grid: *mut AnnGrid = std::ptr::null_mut();
        // Invalid domain reports a validation error and leaves a message.
        let st = ann_grid_new(2.0, 1.0, 16, 16, &mut grid);
        assert_eq!(st, AnnStatus::Validation);
        let mut buf = [0i8; 256];
        let n = ann_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(n > 0);

        let st = ann_grid_new(1.0, 2.0, 16, 16, &mut grid);
        assert_eq!(st, AnnStatus::Ok);
        assert!(!grid.is_null());
        ann_grid_free(grid);
    }
}

#[test]
fn classify_and_growth_rate_through_ffi() {
    unsafe {
        let mut grid: *mut AnnGrid = std::ptr::null_mut();
        assert_eq!(ann_grid_new(1.0, 2.0, 20, 16, &mut grid), AnnStatus::Ok);

        // Stable linear family.
        let mut eq: *mut AnnEquilibrium = std::ptr::null_mut();
        let st = ann_equilibrium_new(
            grid,
            AnnPotential::LogRadial,
            1.0,
            AnnProfile::Linear,
            1.0,
            0.0,
            0.1,
            1.0,
            0.0,
            &mut eq,
        );
        assert_eq!(st, AnnStatus::Ok);
        let mut class = AnnStability::Indeterminate;
        let mut h = f64::NAN;
        assert_eq!(ann_classify(eq, &mut class, &mut h), AnnStatus::Ok);
        assert_eq!(class, AnnStability::Stable);
        assert!((h + 1.0).abs() < 1e-12);
        let mut found = -1;
        let mut lambda = f64::NAN;
        let mut mode = -2i64;
        assert_eq!(ann_growth_rate(eq, 4, &mut found, &mut lambda, &mut mode), AnnStatus::Ok);
        assert_eq!(found, 0);
        ann_equilibrium_free(eq);

        // Unstable rho_s = r.
        let mut eq: *mut AnnEquilibrium = std::ptr::null_mut();
        let st = ann_equilibrium_new(
            grid,
            AnnPotential::LogRadial,
            1.0,
            AnnProfile::Exp,
            1.0,
            0.0,
            0.1,
            1.0,
            0.0,
            &mut eq,
        );
        assert_eq!(st, AnnStatus::Ok);
        let mut found = 0;
        let mut lambda = 0.0;
        let mut mode = -1i64;
        assert_eq!(ann_growth_rate(eq, 4, &mut found, &mut lambda, &mut mode), AnnStatus::Ok);
        assert_eq!(found, 1);
        assert!(lambda > 0.0);
        assert!(mode >= 1);
        let mut alpha = f64::NAN;
        assert_eq!(ann_alpha_of_s(eq, 2, 0.05, &mut alpha), AnnStatus::Ok);
        assert!(alpha < 0.0);
        ann_equilibrium_free(eq);
        ann_grid_free(grid);
    }
}

#[test]
fn run_simulation_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(
        &cfg,
        "[grid]\nnr = 12\nntheta = 8\n\n[time]\ndt = 1e-3\nt_end = 0.01\n\n[seed]\nkind = random\namplitude = 1e-4\nrng_seed = 3\n\n[output]\ncadence = 5\n",
    )
    .unwrap();
    let out = dir.path().join("runs");
    let c_cfg = CString::new(cfg.to_str().unwrap()).unwrap();
    let c_out = CString::new(out.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(ann_run_simulation(c_cfg.as_ptr(), c_out.as_ptr()), AnnStatus::Ok);
    }
    // One run directory with the standard artifacts.
    let entries: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let run_dir = entries[0].as_ref().unwrap().path();
    assert!(run_dir.join("timeseries.csv").exists());
    assert!(run_dir.join("config.ini").exists());
}

#[test]
fn version_and_header_exist() {
    unsafe {
        let v = std::ffi::CStr::from_ptr(ann_version());
        assert!(v.to_str().unwrap().starts_with("annulus"));
    }
    // cbindgen output committed alongside the crate.
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/annulus.h");
    assert!(header.exists(), "generated C header missing");
}
