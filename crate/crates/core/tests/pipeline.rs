use std::path::PathBuf;

use cinecam_core::harness::{run_scenario, World};
use cinecam_core::lattice::Vec3;
use cinecam_core::Scenario;

fn corpus() -> Vec<(String, Scenario)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    ["minimal", "narrow_gap", "tree_line"]
        .iter()
        .map(|n| (n.to_string(), Scenario::load(&dir.join(format!("{n}.json"))).unwrap()))
        .collect()
}

#[test]
fn corpus_round_trips() {
    for (name, s) in corpus() {
        let json = s.to_json();
        let again = Scenario::from_json(&json, &name).unwrap();
        assert_eq!(s, again, "{name}");
        assert_eq!(json, again.to_json(), "{name}");
    }
}

#[test]
fn second_camera_pays_pairwise_terms() {
    let (_, s) = corpus().into_iter().find(|(n, _)| n == "narrow_gap").unwrap();
    let world = World::build(&s).unwrap();
    let (plan, _) = world.plan(&s.uav_positions(), 0.0).unwrap();
    let dump = plan.dump(&world.lattice, 0.0);
    let first: f64 = dump.uavs[0].steps.iter().map(|st| st.cost.pairwise()).sum();
    let second: f64 = dump.uavs[1].steps.iter().map(|st| st.cost.pairwise()).sum();
    assert_eq!(first, 0.0);
    assert!(second > 0.0);
    // the dump's terms are the planner's path costs
    for (u, c) in dump.uavs.iter().zip(&plan.costs) {
        let total: f64 = u.steps.iter().map(|st| st.cost.total()).sum();
        assert!((total - c).abs() <= 1e-9 * c.abs().max(1.0));
    }
}

#[test]
fn corpus_trajectories_are_consistent() {
    for (name, s) in corpus() {
        let report = run_scenario(&s).unwrap();
        let expected = s.run.total_samples();
        for traj in &report.trajectories {
            assert_eq!(traj.samples.len(), expected, "{name}");
            // no teleportation between replan cycles
            for w in traj.samples.windows(2) {
                let d = (Vec3::from(w[1].position) - Vec3::from(w[0].position)).norm();
                assert!(d < 0.3, "{name}: {d} m jump at {}", w[1].t);
            }
        }
        let covered: f64 = report.timeline.iter().map(|s| s.length()).sum();
        assert!((covered - s.run.duration).abs() < 1e-6, "{name}");
    }
}
