use std::path::PathBuf;
use std::process::{Command, Output};

fn cinecam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cinecam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

#[test]
fn run_minimal_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let o = cinecam(&["run", &scenario("minimal"), "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.json", "cycles.csv", "trajectory_uav0.csv", "selector.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let traj = std::fs::read_to_string(out.join("trajectory_uav0.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 501);
    assert!(o.stderr.is_empty());
}

#[test]
fn run_narrow_gap_reproduces_audit() {
    let dir = tempfile::tempdir().unwrap();
    let o = cinecam(&["run", &scenario("narrow_gap"), "--out", dir.path().to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let clearance = summary["audit"]["min_clearance"].as_f64().unwrap();
    let separation = summary["audit"]["min_separation"].as_f64().unwrap();
    assert!(clearance >= 0.25, "{clearance}");
    assert!(separation >= 0.9, "{separation}");
}

#[test]
fn invalid_diversity_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(scenario("minimal")).unwrap()).unwrap();
    doc["diversity"] = serde_json::json!({"d_min_div": 5.0, "d_max_div": 2.0});
    let path = dir.path().join("bad.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let o = cinecam(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("DiversityParams"));
}

#[test]
fn unknown_key_cites_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("minimal")).unwrap().replace("\"duration\"", "\"duratoin\"");
    let path = dir.path().join("typo.json");
    std::fs::write(&path, text).unwrap();
    let o = cinecam(&["plan", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("duratoin") && err.contains("line"), "{err}");
}

#[test]
fn missing_scenario_fails() {
    let o = cinecam(&["plan", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("/nonexistent/scenario.json") && err.contains("No such file"), "{err}");
}

#[test]
fn plan_minimal_is_zero_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.json");
    let o = cinecam(&["plan", &scenario("minimal"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dump: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(dump["total_cost"].as_f64(), Some(0.0));
    let steps = dump["uavs"][0]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 5);
    assert!(steps[0]["index"]["i_theta"].is_u64());
}

#[test]
fn bench_single_config_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.json");
    std::fs::write(&sweep, r#"{"lattices": [[16, 6, 6]], "repetitions": 3}"#).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = cinecam(&["bench", sweep.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let rows: Vec<&str> = a.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("state_space,computed_states,mean_ms,std_ms,table_bytes"));
    // computed_states and table_bytes are deterministic, timings are not
    let fixed = |csv: &str| {
        csv.lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.rsplitn(6, ',').collect();
                (f[5].to_string(), f[2].to_string())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(fixed(&a), fixed(&b));
    assert!(a.contains("\"(16,6,6)\",2880,"));
}

#[test]
fn init_writes_valid_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref.json");
    let o = cinecam(&["init", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let o = cinecam(&["plan", out.to_str().unwrap(), "--out", dir.path().join("p.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_lists_defaults() {
    let o = cinecam(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for key in ["lambda_occ", "d_min_div", "min_shot", "replan_hz", "w_smooth", "Exit codes"] {
        assert!(text.contains(key), "{key}");
    }
}
