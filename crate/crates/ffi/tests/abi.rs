//! Exercise the C surface from Rust and keep the committed header in
//! sync with the exported symbols.

use std::ffi::{CStr, CString};

use lakes_ffi::*;

const SCENARIO: &str = r#"
circulations = [0.3]

[outer]
kind = "circle"
center = [0.0, 0.0]
radius = 1.0

[[islands]]
kind = "circle"
center = [0.0, 0.0]
radius = 0.25

[depth]
kind = "constant"
value = 1.0

[grid]
h = 0.015

[vorticity]
kind = "patch"
center = [0.55, 0.0]
radius = 0.2
value = 1.0

[scheme]
t_end = 0.5
snapshots = 10
cfl = 0.4
"#;

#[test]
fn full_lifecycle_through_the_c_surface() {
    let text = CString::new(SCENARIO).unwrap();
    unsafe {
        let scenario = lakes_scenario_from_string(text.as_ptr());
        assert!(!scenario.is_null(), "scenario failed: {}", last_error());
        let sim = lakes_sim_new(scenario);
        assert!(!sim.is_null(), "sim failed: {}", last_error());

        let (mut nx, mut ny, mut h) = (0usize, 0usize, 0f64);
        assert_eq!(
            lakes_sim_grid_dims(sim, &mut nx, &mut ny, &mut h, std::ptr::null_mut(), std::ptr::null_mut()),
            LakesStatus::Ok
        );
        assert!(nx > 10 && ny > 10);
        assert!((h - 0.015).abs() < 1e-15);

        assert_eq!(lakes_sim_island_count(sim), 1);
        let mass0 = lakes_sim_mass(sim);
        assert!(mass0 > 0.0);
        let sup0 = lakes_sim_sup_vorticity(sim);
        assert!((sup0 - 1.0).abs() < 1e-12);

        let mut gamma = 0.0f64;
        assert_eq!(lakes_sim_circulation(sim, 0, &mut gamma), LakesStatus::Ok);
        assert!((gamma - 0.3).abs() < 0.05, "circulation {gamma}");

        assert_eq!(lakes_sim_step(sim), LakesStatus::Ok);
        assert_eq!(lakes_sim_step_count(sim), 1);
        assert_eq!(lakes_sim_advance_to(sim, 0.1), LakesStatus::Ok);
        assert!(lakes_sim_time(sim) >= 0.1 - 1e-12);

        // conservation across the C boundary
        let mass = lakes_sim_mass(sim);
        assert!((mass - mass0).abs() <= 1e-12 * mass0.abs(), "{mass} vs {mass0}");
        let sup = lakes_sim_sup_vorticity(sim);
        assert!(sup <= sup0 * (1.0 + 1e-12));

        let mut buf = vec![0.0f64; nx * ny];
        assert_eq!(lakes_sim_vorticity(sim, buf.as_mut_ptr(), buf.len()), LakesStatus::Ok);
        assert!(buf.iter().any(|&v| v != 0.0));
        assert_eq!(
            lakes_sim_stream_function(sim, buf.as_mut_ptr(), buf.len()),
            LakesStatus::Ok
        );

        // undersized buffer is rejected
        assert_eq!(
            lakes_sim_vorticity(sim, buf.as_mut_ptr(), 3),
            LakesStatus::InvalidArgument
        );
        // island index out of range
        assert_eq!(
            lakes_sim_circulation(sim, 7, &mut gamma),
            LakesStatus::InvalidArgument
        );

        lakes_sim_free(sim);
        lakes_scenario_free(scenario);
    }
}

#[test]
fn null_handles_give_status_not_crashes() {
    unsafe {
        assert_eq!(lakes_sim_step(std::ptr::null_mut()), LakesStatus::NullPointer);
        assert!(lakes_sim_time(std::ptr::null()).is_nan());
        assert_eq!(lakes_sim_island_count(std::ptr::null()), 0);
        lakes_sim_free(std::ptr::null_mut());
        lakes_scenario_free(std::ptr::null_mut());
        let bad = CString::new("not toml at all [").unwrap();
        let sc = lakes_scenario_from_string(bad.as_ptr());
        assert!(sc.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn header_lists_every_exported_symbol() {
    let header = include_str!("../include/lakes.h");
    for symbol in [
        "lakes_last_error",
        "lakes_version",
        "lakes_scenario_load",
        "lakes_scenario_from_string",
        "lakes_scenario_free",
        "lakes_sim_new",
        "lakes_sim_free",
        "lakes_sim_step",
        "lakes_sim_advance_to",
        "lakes_sim_time",
        "lakes_sim_step_count",
        "lakes_sim_mass",
        "lakes_sim_sup_vorticity",
        "lakes_sim_island_count",
        "lakes_sim_circulation",
        "lakes_sim_grid_dims",
        "lakes_sim_vorticity",
        "lakes_sim_stream_function",
    ] {
        assert!(header.contains(symbol), "header misses `{symbol}`");
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(lakes_last_error()).to_string_lossy().into_owned() }
}
