//! Receding-horizon simulation and the planner benchmark.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costmodel::{visibility_pair, CineRule, CinePrior, CostBreakdown, CostModel, CostParams, DiversityParams, PairTables, Weights};
use crate::error::{Error, Result};
use crate::lattice::{ActorPose, CameraPose, Lattice, LatticeSpec, Vec3};
use crate::planner::{plan_greedy, PlanContext, PlanResult};
use crate::scenario::Scenario;
use crate::selector::{Selector, Shot, ViewCosts};
use crate::smoother::{initialize, optimize, FinePath, ObjectiveTerms, SmoothContext, SmoothOutcome};
use crate::world::{distance_field, spherical_regrid, voxelize, ActorScript, DistanceField, Primitive, SceneDescription, SphericalGrid, VoxelGrid};

/// Everything built once per scenario.
pub struct World {
    pub lattice: Lattice,
    pub grid: VoxelGrid,
    pub field: DistanceField,
    pub model: CostModel,
    pub script: ActorScript,
}

impl World {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let lattice = Lattice::new(scenario.lattice.clone())?;
        let grid = voxelize(&scenario.scene, scenario.scene.resolution)?;
        let field = distance_field(&grid);
        let prior = CinePrior::from_rules(&lattice, &scenario.prior)?;
        let model = CostModel::build(&lattice, &scenario.weights, &scenario.diversity, &scenario.costs, prior)?;
        Ok(Self {
            lattice,
            grid,
            field,
            model,
            script: scenario.actor_script()?,
        })
    }

    /// Actor poses at the planning steps of a horizon starting at `t0`,
    /// holding the final pose past the end of the script.
    pub fn actor_window(&self, t0: f64) -> Vec<ActorPose> {
        let dt = self.lattice.spec().step_dt;
        (0..self.lattice.horizon_steps())
            .map(|k| self.script.actor_at_clamped(t0 + k as f64 * dt))
            .collect()
    }

    pub fn regrid(&self, actor_path: &[ActorPose]) -> SphericalGrid {
        spherical_regrid(&self.grid, actor_path, &self.lattice)
    }

    /// Greedy plan for cameras at `positions` at time `t0`.
    pub fn plan(&self, positions: &[Vec3], t0: f64) -> Result<(PlanResult, SphericalGrid)> {
        let actor_path = self.actor_window(t0);
        let sgrid = self.regrid(&actor_path);
        let starts = positions
            .iter()
            .map(|p| self.lattice.nearest_state(p, &actor_path[0]))
            .collect::<Result<Vec<_>>>()?;
        let ctx = PlanContext::new(&self.lattice, &self.model, &sgrid)?;
        let plan = plan_greedy(&starts, &ctx)?;
        Ok((plan, sgrid))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: [f64; 3],
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub uav: usize,
    pub samples: Vec<TrajectorySample>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub t: f64,
    /// Planner cost terms summed over cameras and steps.
    pub plan_terms: CostBreakdown,
    pub plan_cost: f64,
    /// Smoother objective terms summed over cameras, after optimization.
    pub smooth_terms: ObjectiveTerms,
    pub smooth_iterations: Vec<usize>,
    /// Whether every camera's objective history was non-increasing.
    pub smooth_monotone: bool,
    pub waypoints: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TimingStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub samples: usize,
}

impl TimingStats {
    pub fn from_ms(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean_ms: mean,
            std_ms: var.sqrt(),
            samples: n,
        }
    }
}

/// Minimum obstacle clearance and camera separation over all emitted samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SafetyAudit {
    pub min_clearance: f64,
    pub min_separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub duration: f64,
    pub sample_hz: f64,
    pub replan_hz: f64,
    pub trajectories: Vec<Trajectory>,
    pub cycles: Vec<CycleRecord>,
    pub timeline: Vec<Shot>,
    pub audit: SafetyAudit,
    /// Bytes held by the pairwise cost tables.
    pub table_bytes: usize,
    /// Wall time of each cycle's greedy plan. Excluded from equality checks
    /// of otherwise deterministic runs.
    pub plan_ms: Vec<f64>,
    pub timing: TimingStats,
}

impl RunReport {
    /// The report with its wall-clock fields cleared.
    pub fn without_timing(&self) -> Self {
        Self {
            plan_ms: Vec::new(),
            timing: TimingStats::default(),
            ..self.clone()
        }
    }
}

fn audit(trajectories: &[Trajectory], field: &DistanceField) -> SafetyAudit {
    let mut min_clearance = f64::INFINITY;
    let mut min_separation = f64::INFINITY;
    let n = trajectories.first().map_or(0, |t| t.samples.len());
    for k in 0..n {
        for (i, a) in trajectories.iter().enumerate() {
            let pa = Vec3::from(a.samples[k].position);
            min_clearance = min_clearance.min(field.sample(&pa));
            for b in &trajectories[i + 1..] {
                min_separation = min_separation.min((pa - Vec3::from(b.samples[k].position)).norm());
            }
        }
    }
    SafetyAudit { min_clearance, min_separation }
}

/// Other cameras' previous paths resampled onto the fine grid starting at `t0`.
fn aligned(path: &FinePath, t0: f64, n: usize, dt: f64) -> Vec<Vec3> {
    (0..n).map(|i| path.sample_clamped(t0 + i as f64 * dt - path.t0)).collect()
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunReport> {
    let world = World::build(scenario)?;
    let run = &scenario.run;
    let cfg = &scenario.smoother;
    let stride = cfg.stride(scenario.lattice.step_dt)?;
    let per_cycle = run.samples_per_cycle()?;
    let total_ticks = run.total_samples() - 1;
    let n_uav = scenario.uavs.len();
    let n_fine = scenario.lattice.horizon_steps * stride + 1;
    let fov = scenario.costs.fov()?;
    let sample_dt = 1.0 / run.sample_hz;

    let mut positions = scenario.uav_positions();
    let mut previous: Option<Vec<FinePath>> = None;
    let mut selector = Selector::new(n_uav, scenario.selector.clone())?;
    let mut trajectories: Vec<Trajectory> = (0..n_uav).map(|uav| Trajectory { uav, samples: Vec::new() }).collect();
    let mut cycles = Vec::new();
    let mut plan_ms = Vec::new();

    let mut cycle = 0;
    while cycle * per_cycle < total_ticks {
        let first_tick = cycle * per_cycle;
        let t0 = first_tick as f64 * sample_dt;
        let wrap = |e: Error| Error::Cycle {
            cycle,
            time: t0,
            source: Box::new(e),
        };
        let (plan, _) = world.plan(&positions, t0).map_err(wrap)?;
        plan_ms.push(plan.duration.as_secs_f64() * 1e3);

        let waypoints: Vec<Vec<Vec3>> = plan
            .paths
            .iter()
            .map(|p| {
                p.states
                    .iter()
                    .zip(&plan.actor_path)
                    .map(|(&s, actor)| world.lattice.world_position(s, actor))
                    .collect()
            })
            .collect();
        let others_of = |uav: usize| -> Vec<Vec<Vec3>> {
            (0..n_uav)
                .filter(|&j| j != uav)
                .map(|j| match &previous {
                    Some(prev) => aligned(&prev[j], t0, n_fine, cfg.fine_dt),
                    None => initialize(positions[j], &waypoints[j], stride),
                })
                .collect()
        };
        let outcomes: Vec<SmoothOutcome> = (0..n_uav)
            .into_par_iter()
            .map(|uav| {
                let others = others_of(uav);
                let ctx = SmoothContext {
                    waypoints: &waypoints[uav],
                    stride,
                    field: Some(&world.field),
                    others: &others,
                };
                optimize(uav, positions[uav], t0, &ctx, cfg)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;

        let last_tick = if (cycle + 1) * per_cycle >= total_ticks {
            total_ticks + 1
        } else {
            (cycle + 1) * per_cycle
        };
        for tick in first_tick..last_tick {
            let t = tick as f64 * sample_dt;
            let actor = world.script.actor_at_clamped(t);
            let here: Vec<Vec3> = outcomes
                .iter()
                .map(|o| o.path.sample(t - t0).map_err(wrap))
                .collect::<Result<_>>()?;
            for (traj, p) in trajectories.iter_mut().zip(&here) {
                let pose = CameraPose::facing(*p, &actor.position);
                traj.samples.push(TrajectorySample {
                    t,
                    position: [p.x, p.y, p.z],
                    yaw: pose.yaw,
                });
            }
            if tick < total_ticks {
                let costs = view_costs(&here, &actor, fov, &world);
                selector.step(t, &costs, sample_dt);
            }
        }

        let mut smooth_terms = ObjectiveTerms::default();
        for o in &outcomes {
            smooth_terms.smooth += o.terms.smooth;
            smooth_terms.track += o.terms.track;
            smooth_terms.obs += o.terms.obs;
            smooth_terms.sep += o.terms.sep;
        }
        cycles.push(CycleRecord {
            cycle,
            t: t0,
            plan_terms: plan.term_totals(),
            plan_cost: plan.total_cost(),
            smooth_terms,
            smooth_iterations: outcomes.iter().map(|o| o.iterations).collect(),
            smooth_monotone: outcomes.iter().all(|o| o.is_monotone()),
            waypoints: plan.paths.iter().map(|p| p.states.clone()).collect(),
        });
        let handoff = per_cycle as f64 * sample_dt;
        positions = outcomes
            .iter()
            .map(|o| o.path.sample_clamped(handoff))
            .collect();
        previous = Some(outcomes.into_iter().map(|o| o.path).collect());
        cycle += 1;
    }

    let audit = audit(&trajectories, &world.field);
    let timing = TimingStats::from_ms(&plan_ms);
    Ok(RunReport {
        seed: run.seed,
        duration: run.duration,
        sample_hz: run.sample_hz,
        replan_hz: run.replan_hz,
        trajectories,
        cycles,
        timeline: selector.timeline(),
        audit,
        table_bytes: world.model.pairs.memory_bytes(),
        plan_ms,
        timing,
    })
}

/// Selector inputs: how many peers each camera sees, and the prior at the
/// camera's nearest lattice state.
fn view_costs(positions: &[Vec3], actor: &ActorPose, fov: f64, world: &World) -> Vec<ViewCosts> {
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let seen = positions
                .iter()
                .enumerate()
                .filter(|&(j, q)| j != i && visibility_pair(p, q, &actor.position, fov).unwrap_or(false))
                .count();
            let cine = world
                .lattice
                .nearest_state(p, actor)
                .map_or(0.0, |s| world.model.prior.cost(s));
            ViewCosts {
                vis_cost: seen as f64,
                cine_cost: cine,
            }
        })
        .collect()
}

/// Writes `summary.json`, `cycles.csv`, `trajectory_uav<i>.csv` and
/// `selector.csv` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
    };
    write("summary.json", serde_json::to_string_pretty(report).expect("report serializes"))?;

    let mut csv = String::from("cycle,t,plan_ms,plan_cost,occ,obs,cine,div,col,vis,smooth,track,smooth_obs,sep\n");
    for (c, ms) in report.cycles.iter().zip(&report.plan_ms) {
        let (p, s) = (&c.plan_terms, &c.smooth_terms);
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.cycle, c.t, ms, c.plan_cost, p.occ, p.obs, p.cine, p.div, p.col, p.vis, s.smooth, s.track, s.obs, s.sep
        )
        .unwrap();
    }
    write("cycles.csv", csv)?;

    for traj in &report.trajectories {
        let mut csv = String::from("t,x,y,z,yaw\n");
        for s in &traj.samples {
            writeln!(csv, "{},{},{},{},{}", s.t, s.position[0], s.position[1], s.position[2], s.yaw).unwrap();
        }
        write(&format!("trajectory_uav{}.csv", traj.uav), csv)?;
    }

    let mut csv = String::from("t_start,t_end,camera\n");
    for s in &report.timeline {
        writeln!(csv, "{},{},{}", s.t_start, s.t_end, s.camera).unwrap();
    }
    write("selector.csv", csv)
}

/// Benchmark configuration. Lattices are `(n_theta, n_phi, n_rho)` with
/// radii one metre apart from 2 m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSweep {
    pub lattices: Vec<[usize; 3]>,
    pub n_uavs: Vec<usize>,
    pub horizon_steps: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub weights: Weights,
    pub diversity: DiversityParams,
    pub costs: CostParams,
}

pub const TABLE_LATTICES: [[usize; 3]; 8] = [
    [3, 3, 8],
    [16, 6, 6],
    [24, 9, 9],
    [32, 12, 12],
    [40, 15, 15],
    [48, 18, 18],
    [52, 21, 21],
    [64, 24, 24],
];

impl Default for BenchSweep {
    fn default() -> Self {
        Self {
            lattices: TABLE_LATTICES.to_vec(),
            n_uavs: vec![3],
            horizon_steps: vec![5],
            repetitions: 10,
            seed: 7,
            weights: Weights::default(),
            diversity: DiversityParams::default(),
            costs: CostParams::default(),
        }
    }
}

impl BenchSweep {
    pub fn validate(&self) -> Result<()> {
        if self.lattices.is_empty() || self.n_uavs.is_empty() || self.horizon_steps.is_empty() || self.repetitions == 0 {
            return Err(Error::config("BenchSweep", "sweep must contain at least one configuration and repetition"));
        }
        if self.n_uavs.contains(&0) {
            return Err(Error::config("BenchSweep", "n_uavs entries must be positive"));
        }
        for &[nt, np, nr] in &self.lattices {
            LatticeSpec::with_bins(nt, np, nr, 1).validate()?;
        }
        self.weights.validate()?;
        self.diversity.validate()?;
        self.costs.fov()?;
        Ok(())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sweep: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: format!("key `{}`: {}", e.path(), e.inner()),
        })?;
        sweep.validate()?;
        Ok(sweep)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub state_space: [usize; 3],
    pub horizon_steps: usize,
    pub n_uavs: usize,
    pub states: usize,
    pub computed_states: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Dense pair-table size `|S|²` entries, whether or not it was built.
    pub table_bytes: usize,
    pub table_entries: usize,
    pub repetitions: usize,
}

/// Fixed random obstacle field around the origin shared by every benchmark
/// configuration: 1 m voxels, boxes kept clear of the actor.
pub fn bench_scene(seed: u64) -> SceneDescription {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut primitives = Vec::new();
    while primitives.len() < 40 {
        let cx: f64 = rng.gen_range(-28.0..28.0);
        let cy: f64 = rng.gen_range(-28.0..28.0);
        if cx.hypot(cy) < 4.0 {
            continue;
        }
        let (hx, hy, h) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(1.0..12.0));
        primitives.push(Primitive::Box {
            min: [cx - hx, cy - hy, 0.0],
            max: [cx + hx, cy + hy, h],
        });
    }
    SceneDescription {
        bounds_min: [-32.0, -32.0, 0.0],
        bounds_max: [32.0, 32.0, 30.0],
        resolution: 1.0,
        primitives,
    }
}

pub fn benchmark(sweep: &BenchSweep) -> Result<Vec<BenchRow>> {
    benchmark_with(sweep, |_| {})
}

/// Like [`benchmark`], reporting each row as it completes.
pub fn benchmark_with(sweep: &BenchSweep, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    sweep.validate()?;
    let scene = bench_scene(sweep.seed);
    let grid = voxelize(&scene, scene.resolution)?;
    let actor = ActorPose::new(0.0, 0.0, 1.0, 0.0);
    let mut rows = Vec::new();
    for &[nt, np, nr] in &sweep.lattices {
        let max_t = *sweep.horizon_steps.iter().max().expect("validated");
        // the model does not depend on the horizon; build it once per lattice
        let full = Lattice::new(LatticeSpec::with_bins(nt, np, nr, max_t))?;
        let prior = CinePrior::from_rules(&full, &[CineRule { phi: Some([0.0, 0.3]), cost: 1.0, ..CineRule::default() }])?;
        let model = CostModel::build(&full, &sweep.weights, &sweep.diversity, &sweep.costs, prior)?;
        let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed ^ (nt * 10_000 + np * 100 + nr) as u64);
        for &steps in &sweep.horizon_steps {
            let lattice = Lattice::new(LatticeSpec::with_bins(nt, np, nr, steps))?;
            let sgrid = spherical_regrid(&grid, &vec![actor; steps], &lattice);
            let ctx = PlanContext::new(&lattice, &model, &sgrid)?;
            for &n in &sweep.n_uavs {
                let starts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..lattice.len())).collect();
                let mut times = Vec::with_capacity(sweep.repetitions);
                for _ in 0..sweep.repetitions {
                    let clock = Instant::now();
                    let plan = plan_greedy(&starts, &ctx)?;
                    times.push(clock.elapsed().as_secs_f64() * 1e3);
                    std::hint::black_box(plan);
                }
                let stats = TimingStats::from_ms(&times);
                let states = lattice.len();
                let row = BenchRow {
                    state_space: [nt, np, nr],
                    horizon_steps: steps,
                    n_uavs: n,
                    states,
                    computed_states: states * steps,
                    mean_ms: stats.mean_ms,
                    std_ms: stats.std_ms,
                    table_bytes: PairTables::estimated_bytes(states),
                    table_entries: states * states,
                    repetitions: sweep.repetitions,
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut csv = String::from("state_space,computed_states,mean_ms,std_ms,table_bytes,n_uavs,horizon_steps\n");
    for r in rows {
        let [a, b, c] = r.state_space;
        writeln!(
            csv,
            "\"({a},{b},{c})\",{},{:.4},{:.4},{},{},{}",
            r.computed_states, r.mean_ms, r.std_ms, r.table_bytes, r.n_uavs, r.horizon_steps
        )
        .unwrap();
    }
    csv
}

/// Least-squares line fit, returning `(slope, intercept, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
