//! Centralized greedy planning over the lattice × time graph.
//!
//! Cameras are planned one at a time in the order given. Each pass builds the
//! cost map of every (state, step) cell given the already fixed cameras,
//! computes the cost-to-go with a single backward sweep, and follows the
//! least cost-to-go neighbours forward from the camera's start state.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::costmodel::{CostBreakdown, CostModel};
use crate::error::{Error, Result};
use crate::lattice::{ActorPose, Lattice, SphericalIndex};
use crate::world::SphericalGrid;

/// Row-major `[t][s]` table of per-cell values.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMap {
    n: usize,
    steps: usize,
    values: Vec<f64>,
}

/// Instantaneous cost of every (state, step) cell.
pub type CostMap = StepMap;
/// Cost-to-go of every (state, step) cell.
pub type ValueMap = StepMap;

impl StepMap {
    pub fn zeros(n: usize, steps: usize) -> Self {
        Self {
            n,
            steps,
            values: vec![0.0; n * steps],
        }
    }

    pub fn from_fn(n: usize, steps: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n, steps);
        for t in 0..steps {
            for s in 0..n {
                m.values[t * n + s] = f(s, t);
            }
        }
        m
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.values[t * self.n + s]
    }

    #[inline]
    pub fn set(&mut self, s: usize, t: usize, v: f64) {
        self.values[t * self.n + s] = v;
    }

    pub fn layer(&self, t: usize) -> &[f64] {
        &self.values[t * self.n..(t + 1) * self.n]
    }

    pub fn layer_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.values[t * self.n..(t + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One backward sweep: `V(s, T-1) = C(s, T-1)` and
/// `V(s, t) = C(s, t) + min over s' in N(s) of V(s', t+1)`.
pub fn backward_induction(costmap: &CostMap, lattice: &Lattice) -> ValueMap {
    let (n, steps) = (costmap.n, costmap.steps);
    let mut v = costmap.clone();
    for t in (0..steps.saturating_sub(1)).rev() {
        let (head, tail) = v.values.split_at_mut((t + 1) * n);
        let next = &tail[..n];
        let cur = &mut head[t * n..];
        for (s, out) in cur.iter_mut().enumerate() {
            let best = lattice
                .neighbors(s)
                .iter()
                .map(|&m| next[m as usize])
                .fold(f64::INFINITY, f64::min);
            *out += best;
        }
    }
    v
}

/// Follows the least cost-to-go neighbour at each step, ties to the lowest index.
pub fn extract_path(valuemap: &ValueMap, lattice: &Lattice, start: usize) -> Vec<usize> {
    let mut path = Vec::with_capacity(valuemap.steps);
    let mut s = start;
    path.push(s);
    for t in 1..valuemap.steps {
        let layer = valuemap.layer(t);
        let mut best = usize::MAX;
        let mut best_v = f64::INFINITY;
        for &m in lattice.neighbors(s) {
            let v = layer[m as usize];
            if v < best_v {
                best_v = v;
                best = m as usize;
            }
        }
        s = best;
        path.push(s);
    }
    path
}

/// Left-to-right sum of the path's cells.
pub fn path_cost(costmap: &CostMap, path: &[usize]) -> f64 {
    path.iter().enumerate().fold(0.0, |acc, (t, &s)| acc + costmap.get(s, t))
}

/// Maximum relative Bellman residual over the given cells.
pub fn bellman_residual(costmap: &CostMap, valuemap: &ValueMap, lattice: &Lattice, cells: impl IntoIterator<Item = (usize, usize)>) -> f64 {
    let steps = costmap.steps;
    cells
        .into_iter()
        .map(|(s, t)| {
            let expect = if t + 1 == steps {
                costmap.get(s, t)
            } else {
                costmap.get(s, t)
                    + lattice
                        .neighbors(s)
                        .iter()
                        .map(|&m| valuemap.get(m as usize, t + 1))
                        .fold(f64::INFINITY, f64::min)
            };
            let got = valuemap.get(s, t);
            (got - expect).abs() / expect.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WaypointPath {
    pub uav: usize,
    /// Linear lattice index per planning step.
    pub states: Vec<usize>,
}

/// The cost and cost-to-go maps of one planner pass.
#[derive(Clone, Debug)]
pub struct PlanPass {
    pub costmap: CostMap,
    pub valuemap: ValueMap,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub paths: Vec<WaypointPath>,
    /// Path cost of each camera given the cameras planned before it.
    pub costs: Vec<f64>,
    /// Per camera, per step weighted cost terms.
    pub breakdowns: Vec<Vec<CostBreakdown>>,
    pub duration: Duration,
    /// Actor poses the plan was built against.
    pub actor_path: Vec<ActorPose>,
    /// Empty for the exhaustive planner.
    pub passes: Vec<PlanPass>,
}

impl PlanResult {
    /// Joint objective: unary terms of every camera plus pairwise terms of
    /// every unordered camera pair.
    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn term_totals(&self) -> CostBreakdown {
        let mut b = CostBreakdown::default();
        for per_uav in &self.breakdowns {
            for step in per_uav {
                b += *step;
            }
        }
        b
    }
}

#[derive(Clone, Copy)]
pub struct PlanContext<'a> {
    pub lattice: &'a Lattice,
    pub model: &'a CostModel,
    pub sgrid: &'a SphericalGrid,
}

impl<'a> PlanContext<'a> {
    pub fn new(lattice: &'a Lattice, model: &'a CostModel, sgrid: &'a SphericalGrid) -> Result<Self> {
        if sgrid.num_states() != lattice.len() || sgrid.steps() != lattice.horizon_steps() {
            return Err(Error::config(
                "PlanContext",
                format!(
                    "spherical grid is {}x{}, lattice needs {}x{}",
                    sgrid.num_states(),
                    sgrid.steps(),
                    lattice.len(),
                    lattice.horizon_steps()
                ),
            ));
        }
        Ok(Self { lattice, model, sgrid })
    }

    fn steps(&self) -> usize {
        self.lattice.horizon_steps()
    }

    fn check_starts(&self, starts: &[usize]) -> Result<()> {
        if starts.is_empty() {
            return Err(Error::config("plan", "at least one camera is required"));
        }
        if let Some(&s) = starts.iter().find(|&&s| s >= self.lattice.len()) {
            return Err(Error::config("plan", format!("start state {s} outside the lattice")));
        }
        Ok(())
    }

    fn unary_map(&self) -> CostMap {
        StepMap::from_fn(self.lattice.len(), self.steps(), |s, t| self.model.unary_cost(s, t, self.sgrid))
    }

    fn breakdown(&self, paths: &[WaypointPath], uav: usize) -> Vec<CostBreakdown> {
        (0..self.steps())
            .map(|t| {
                let s = paths[uav].states[t];
                let fixed: Vec<usize> = paths[..uav].iter().map(|p| p.states[t]).collect();
                let mut b = self.model.unary_breakdown(s, t, self.sgrid);
                b += self.model.pairwise_breakdown(s, &fixed);
                b
            })
            .collect()
    }

    /// Joint cost of a set of paths, attributing pairwise terms to the later camera.
    pub fn joint_costs(&self, paths: &[Vec<usize>]) -> Vec<f64> {
        (0..paths.len())
            .map(|i| {
                (0..self.steps()).fold(0.0, |acc, t| {
                    let fixed: Vec<usize> = paths[..i].iter().map(|p| p[t]).collect();
                    acc + self.model.state_cost(paths[i][t], t, &fixed, self.sgrid)
                })
            })
            .collect()
    }
}

/// Greedy sequential planning. Pairwise costs of fixed cameras are folded
/// into a running map, so each pass costs the same regardless of how many
/// cameras were planned before it; cell values equal a from-scratch
/// [`CostModel::state_cost`] bit for bit.
pub fn plan_greedy(starts: &[usize], ctx: &PlanContext) -> Result<PlanResult> {
    ctx.check_starts(starts)?;
    let clock = Instant::now();
    let (n, steps) = (ctx.lattice.len(), ctx.steps());
    let unary = ctx.unary_map();
    let mut pairwise = StepMap::zeros(n, steps);
    let mut paths = Vec::with_capacity(starts.len());
    let mut costs = Vec::with_capacity(starts.len());
    let mut passes = Vec::with_capacity(starts.len());
    for (uav, &start) in starts.iter().enumerate() {
        let mut costmap = unary.clone();
        for (c, p) in costmap.values.iter_mut().zip(&pairwise.values) {
            *c += p;
        }
        let valuemap = backward_induction(&costmap, ctx.lattice);
        let states = extract_path(&valuemap, ctx.lattice, start);
        costs.push(path_cost(&costmap, &states));
        if uav + 1 < starts.len() {
            for (t, &s) in states.iter().enumerate() {
                ctx.model.pairs.accumulate(s, &ctx.model.weights, pairwise.layer_mut(t));
            }
        }
        paths.push(WaypointPath { uav, states });
        passes.push(PlanPass { costmap, valuemap });
    }
    let duration = clock.elapsed();
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::numeric("planner", "non-finite path cost"));
    }
    let breakdowns = (0..paths.len()).map(|i| ctx.breakdown(&paths, i)).collect();
    Ok(PlanResult {
        paths,
        costs,
        breakdowns,
        duration,
        actor_path: ctx.sgrid.actor_path().to_vec(),
        passes,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ExhaustiveLimits {
    /// Upper bound on the number of joint path tuples enumerated.
    pub max_joint_paths: u64,
}

impl Default for ExhaustiveLimits {
    fn default() -> Self {
        Self {
            max_joint_paths: 20_000_000,
        }
    }
}

/// All neighbour-feasible paths from `start`, in lexicographic order.
pub fn enumerate_paths(lattice: &Lattice, start: usize, steps: usize) -> Vec<Vec<usize>> {
    fn rec(l: &Lattice, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == steps {
            out.push(cur.clone());
            return;
        }
        let last = *cur.last().unwrap();
        for &m in l.neighbors(last) {
            cur.push(m as usize);
            rec(l, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(lattice, steps, &mut vec![start], &mut out);
    out
}

/// Number of neighbour-feasible paths from `start`, without materializing them.
fn count_paths(lattice: &Lattice, start: usize, steps: usize) -> u128 {
    let n = lattice.len();
    let mut counts = vec![1u128; n];
    for _ in 1..steps {
        let next: Vec<u128> = (0..n)
            .map(|s| lattice.neighbors(s).iter().map(|&m| counts[m as usize]).sum())
            .collect();
        counts = next;
    }
    counts[start]
}

/// Jointly optimal plan by enumerating every tuple of feasible paths. Ties go
/// to the lexicographically smallest tuple (camera 0's path most significant).
pub fn plan_exhaustive(starts: &[usize], ctx: &PlanContext, limits: &ExhaustiveLimits) -> Result<PlanResult> {
    ctx.check_starts(starts)?;
    let steps = ctx.steps();
    let joint = starts
        .iter()
        .map(|&s| count_paths(ctx.lattice, s, steps))
        .fold(1u128, |a, b| a.saturating_mul(b));
    if joint > limits.max_joint_paths as u128 {
        return Err(Error::SizeLimit {
            joint_paths: joint,
            limit: limits.max_joint_paths,
        });
    }
    let clock = Instant::now();
    let unary = ctx.unary_map();
    let candidates: Vec<Vec<Vec<usize>>> = starts.iter().map(|&s| enumerate_paths(ctx.lattice, s, steps)).collect();
    let unary_costs: Vec<Vec<f64>> = candidates
        .iter()
        .map(|paths| paths.iter().map(|p| path_cost(&unary, p)).collect())
        .collect();
    let model = ctx.model;
    let k = starts.len();
    let mut choice = vec![0usize; k];
    let mut best = f64::INFINITY;
    let mut best_choice = choice.clone();
    loop {
        let mut total = 0.0;
        for i in 0..k {
            let pi = &candidates[i][choice[i]];
            let mut cost = unary_costs[i][choice[i]];
            for pj in candidates[..i].iter().zip(&choice[..i]).map(|(c, &x)| &c[x]) {
                for t in 0..steps {
                    cost += model.pairs.pair_cost(pi[t], pj[t], &model.weights);
                }
            }
            total += cost;
        }
        if total < best {
            best = total;
            best_choice.copy_from_slice(&choice);
        }
        // odometer, last camera fastest
        let mut i = k;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < candidates[i].len() {
                break;
            }
            choice[i] = 0;
            if i == 0 {
                i = usize::MAX;
                break;
            }
        }
        if i == usize::MAX {
            break;
        }
    }
    let duration = clock.elapsed();
    let states: Vec<Vec<usize>> = best_choice.iter().enumerate().map(|(i, &c)| candidates[i][c].clone()).collect();
    let costs = ctx.joint_costs(&states);
    let paths: Vec<WaypointPath> = states
        .into_iter()
        .enumerate()
        .map(|(uav, states)| WaypointPath { uav, states })
        .collect();
    let breakdowns = (0..paths.len()).map(|i| ctx.breakdown(&paths, i)).collect();
    Ok(PlanResult {
        paths,
        costs,
        breakdowns,
        duration,
        actor_path: ctx.sgrid.actor_path().to_vec(),
        passes: Vec::new(),
    })
}

#[derive(Serialize)]
pub struct StepDump {
    pub t: f64,
    pub index: SphericalIndex,
    pub state: usize,
    pub position: [f64; 3],
    pub yaw: f64,
    pub cost: CostBreakdown,
}

#[derive(Serialize)]
pub struct UavDump {
    pub uav: usize,
    pub cost: f64,
    pub steps: Vec<StepDump>,
}

#[derive(Serialize)]
pub struct PlanDump {
    pub planning_ms: f64,
    pub total_cost: f64,
    pub uavs: Vec<UavDump>,
}

impl PlanResult {
    /// Structured dump: per camera and step, the lattice index, world pose
    /// and weighted cost terms. `t0` offsets the step times.
    pub fn dump(&self, lattice: &Lattice, t0: f64) -> PlanDump {
        let dt = lattice.spec().step_dt;
        PlanDump {
            planning_ms: self.duration.as_secs_f64() * 1e3,
            total_cost: self.total_cost(),
            uavs: self
                .paths
                .iter()
                .enumerate()
                .map(|(i, p)| UavDump {
                    uav: p.uav,
                    cost: self.costs[i],
                    steps: p
                        .states
                        .iter()
                        .enumerate()
                        .map(|(t, &s)| {
                            let pose = lattice.to_world(s, &self.actor_path[t]);
                            StepDump {
                                t: t0 + t as f64 * dt,
                                index: lattice.index(s),
                                state: s,
                                position: pose.position.into(),
                                yaw: pose.yaw,
                                cost: self.breakdowns[i][t],
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}
