use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use cinecam::*;

fn corpus(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.json"));
    CString::new(p.display().to_string()).unwrap()
}

fn last_error() -> String {
    let p = cinecam_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    cinecam_string_free(p);
    s
}

#[test]
fn plan_through_handles() {
    unsafe {
        let mut scenario = ptr::null_mut();
        assert_eq!(cinecam_scenario_load(corpus("narrow_gap").as_ptr(), &mut scenario), CinecamStatus::Ok);
        assert_eq!(cinecam_scenario_num_uavs(scenario), 2);
        let mut planner = ptr::null_mut();
        assert_eq!(cinecam_planner_new(scenario, &mut planner), CinecamStatus::Ok);
        cinecam_scenario_free(scenario);
        assert_eq!(cinecam_planner_num_states(planner), 576);

        let positions = [-10.0, 1.5, 3.0, -10.0, -1.5, 3.0];
        let mut json = ptr::null_mut();
        assert_eq!(cinecam_planner_plan(planner, positions.as_ptr(), 2, 0.0, &mut json), CinecamStatus::Ok);
        let dump: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(dump["uavs"].as_array().unwrap().len(), 2);
        assert_eq!(dump["uavs"][1]["steps"].as_array().unwrap().len(), 5);
        cinecam_planner_free(planner);
    }
}

#[test]
fn config_errors_carry_messages() {
    unsafe {
        let bad = CString::new(r#"{"scene": {"bounds_min": [0,0,0], "bounds_max": [1,1,1], "resolution": 0.5}, "bogus": 1}"#).unwrap();
        let mut scenario = ptr::null_mut();
        let origin = CString::new("inline").unwrap();
        assert_eq!(cinecam_scenario_from_json(bad.as_ptr(), origin.as_ptr(), &mut scenario), CinecamStatus::Config);
        assert!(scenario.is_null());
        let msg = last_error();
        assert!(msg.contains("inline") && msg.contains("bogus"), "{msg}");

        let missing = CString::new("/nonexistent.json").unwrap();
        assert_eq!(cinecam_scenario_load(missing.as_ptr(), &mut scenario), CinecamStatus::Io);
        assert_eq!(cinecam_scenario_load(ptr::null(), &mut scenario), CinecamStatus::NullPointer);
        assert!(last_error().contains("path"));
        assert_eq!(cinecam_scenario_load(corpus("minimal").as_ptr(), ptr::null_mut()), CinecamStatus::NullPointer);
    }
}

#[test]
fn run_exposes_trajectories() {
    unsafe {
        let mut scenario = ptr::null_mut();
        assert_eq!(cinecam_scenario_load(corpus("minimal").as_ptr(), &mut scenario), CinecamStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(cinecam_run(scenario, &mut report), CinecamStatus::Ok);
        let (mut samples, mut len) = (ptr::null(), 0usize);
        assert_eq!(cinecam_report_trajectory(report, 0, &mut samples, &mut len), CinecamStatus::Ok);
        assert_eq!(len, 501);
        let traj = std::slice::from_raw_parts(samples, len);
        assert_eq!(traj[0].t, 0.0);
        assert!((traj[len - 1].t - 10.0).abs() < 1e-12);
        assert_eq!(cinecam_report_trajectory(report, 1, &mut samples, &mut len), CinecamStatus::Config);
        let (mut clearance, mut separation) = (0.0, 0.0);
        assert_eq!(cinecam_report_audit(report, &mut clearance, &mut separation), CinecamStatus::Ok);
        assert_eq!(clearance, f64::INFINITY);
        let mut json = ptr::null_mut();
        assert_eq!(cinecam_report_to_json(report, &mut json), CinecamStatus::Ok);
        assert!(take_string(json).contains("\"timeline\""));
        cinecam_report_free(report);
        cinecam_scenario_free(scenario);
    }
}

#[test]
fn selector_alternates() {
    unsafe {
        let mut sel = ptr::null_mut();
        let cfg = CString::new(r#"{"min_shot": 1.0, "max_shot": 2.0}"#).unwrap();
        assert_eq!(cinecam_selector_new(2, cfg.as_ptr(), &mut sel), CinecamStatus::Ok);
        let zeros = [0.0, 0.0];
        let mut cams = Vec::new();
        for k in 0..50 {
            let mut cam = usize::MAX;
            let st = cinecam_selector_step(sel, k as f64 * 0.1, zeros.as_ptr(), zeros.as_ptr(), 2, 0.1, &mut cam);
            assert_eq!(st, CinecamStatus::Ok);
            cams.push(cam);
        }
        assert!(cams.contains(&0) && cams.contains(&1));
        let mut cam = 0;
        assert_eq!(
            cinecam_selector_step(sel, 5.0, zeros.as_ptr(), zeros.as_ptr(), 1, 0.1, &mut cam),
            CinecamStatus::Config
        );
        let mut json = ptr::null_mut();
        assert_eq!(cinecam_selector_timeline(sel, &mut json), CinecamStatus::Ok);
        let shots: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        for s in shots.as_array().unwrap().iter().rev().skip(1) {
            let len = s["t_end"].as_f64().unwrap() - s["t_start"].as_f64().unwrap();
            assert!((1.0 - 1e-9..=2.0 + 1e-9).contains(&len), "{len}");
        }
        cinecam_selector_free(sel);

        let bad = CString::new(r#"{"decay_rate": 2.0}"#).unwrap();
        assert_eq!(cinecam_selector_new(2, bad.as_ptr(), &mut sel), CinecamStatus::Config);
        assert!(last_error().contains("SelectorConfig"));
    }
}

#[test]
fn version_and_null_frees() {
    let v = unsafe { CStr::from_ptr(cinecam_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    unsafe {
        cinecam_string_free(ptr::null_mut());
        cinecam_scenario_free(ptr::null_mut());
        cinecam_planner_free(ptr::null_mut());
        cinecam_report_free(ptr::null_mut());
        cinecam_selector_free(ptr::null_mut());
    }
}
