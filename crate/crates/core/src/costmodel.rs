//! Viewpoint cost terms on the lattice.
//!
//! Per-state terms (occlusion, obstacle proximity, cinematography prior) come
//! from the spherical occupancy grid; pairwise terms (shot diversity,
//! inter-camera collision and mutual visibility) depend only on the
//! actor-relative positions of two states and are precomputed in `|S|²` tables.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{wrap_angle, Lattice, Vec3};
use crate::world::SphericalGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub lambda_occ: f64,
    pub lambda_obs: f64,
    pub lambda_div: f64,
    pub lambda_vis: f64,
    pub lambda_cine: f64,
    pub lambda_col: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            lambda_occ: 2.0,
            lambda_obs: 5.0,
            lambda_div: 1.0,
            lambda_vis: 1.0,
            lambda_cine: 1.0,
            lambda_col: 5.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_occ,
            self.lambda_obs,
            self.lambda_div,
            self.lambda_vis,
            self.lambda_cine,
            self.lambda_col,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("Weights", format!("weights must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            lambda_occ: self.lambda_occ * k,
            lambda_obs: self.lambda_obs * k,
            lambda_div: self.lambda_div * k,
            lambda_vis: self.lambda_vis * k,
            lambda_cine: self.lambda_cine * k,
            lambda_col: self.lambda_col * k,
        }
    }

    pub fn has_pairwise(&self) -> bool {
        self.lambda_div > 0.0 || self.lambda_col > 0.0 || self.lambda_vis > 0.0
    }
}

/// Distance thresholds of the diversity and collision ramps, metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversityParams {
    pub d_min_div: f64,
    pub d_max_div: f64,
    pub d_min_col: f64,
    pub d_max_col: f64,
}

impl Default for DiversityParams {
    fn default() -> Self {
        Self {
            d_min_div: 1.0,
            d_max_div: 6.0,
            d_min_col: 0.5,
            d_max_col: 1.0,
        }
    }
}

impl DiversityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [
            ("div", self.d_min_div, self.d_max_div),
            ("col", self.d_min_col, self.d_max_col),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                return Err(Error::config(
                    "DiversityParams",
                    format!("need 0 <= d_min_{name} < d_max_{name}, got {lo} and {hi}"),
                ));
            }
        }
        Ok(())
    }
}

/// 1 below `d_min`, 0 above `d_max`, linear in between.
#[inline]
pub fn ramp(d: f64, d_min: f64, d_max: f64) -> f64 {
    if d < d_min {
        1.0
    } else if d > d_max {
        0.0
    } else {
        (d_max - d) / (d_max - d_min)
    }
}

pub fn diversity_pair(p1: &Vec3, p2: &Vec3, params: &DiversityParams) -> f64 {
    ramp((p1 - p2).norm(), params.d_min_div, params.d_max_div)
}

pub fn collision_pair(p1: &Vec3, p2: &Vec3, params: &DiversityParams) -> f64 {
    ramp((p1 - p2).norm(), params.d_min_col, params.d_max_col)
}

/// Whether `p_j` lies inside the viewing cone of a camera at `p_i` aimed at
/// the actor. A coincident `p_j` counts as visible.
pub fn visibility_pair(p_i: &Vec3, p_j: &Vec3, actor: &Vec3, fov_half_angle: f64) -> Result<bool> {
    let axis = actor - p_i;
    if axis.norm() < 1e-12 {
        return Err(Error::DegeneratePose("camera coincides with the actor".into()));
    }
    let to_j = p_j - p_i;
    if to_j.norm() == 0.0 {
        return Ok(true);
    }
    let angle = axis.cross(&to_j).norm().atan2(axis.dot(&to_j));
    Ok(angle <= fov_half_angle)
}

/// Pairwise lattice costs, addressed by linear state index. Visibility is
/// directional: `visible(i, j)` means the camera at `i` sees `j`.
pub trait PairCosts: Send + Sync {
    fn num_states(&self) -> usize;
    fn diversity(&self, i: usize, j: usize) -> f64;
    fn collision(&self, i: usize, j: usize) -> f64;
    fn visible(&self, i: usize, j: usize) -> bool;

    /// Weighted pairwise cost between a candidate state and a fixed one.
    #[inline]
    fn pair_cost(&self, s: usize, fixed: usize, w: &Weights) -> f64 {
        let vis = self.visible(s, fixed) as u8 as f64 + self.visible(fixed, s) as u8 as f64;
        w.lambda_div * self.diversity(s, fixed) + w.lambda_col * self.collision(s, fixed) + w.lambda_vis * vis
    }

    /// `out[s] += pair_cost(s, fixed, w)` for every state.
    fn accumulate(&self, fixed: usize, w: &Weights, out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            *o += self.pair_cost(s, fixed, w);
        }
    }

    /// Bytes held by this implementation.
    fn memory_bytes(&self) -> usize;
}

/// Dense `|S|×|S|` lookup tables over canonical (actor at origin, heading 0)
/// lattice positions. Since every camera shares the actor frame, the tables
/// hold for any actor pose.
#[derive(Clone, Debug)]
pub struct PairTables {
    n: usize,
    /// Row-major bitset, bit `i * n + j` set iff `i` sees `j`.
    visibility: Vec<u64>,
    diversity: Vec<f64>,
    collision: Vec<f64>,
}

impl PairTables {
    pub fn build(lattice: &Lattice, params: &DiversityParams, fov_half_angle: f64) -> Result<Self> {
        params.validate()?;
        let n = lattice.len();
        let pos = lattice.canonical_positions();
        let origin = Vec3::zeros();
        let mut diversity = vec![0.0; n * n];
        let mut collision = vec![0.0; n * n];
        diversity
            .par_chunks_mut(n)
            .zip(collision.par_chunks_mut(n))
            .enumerate()
            .for_each(|(i, (div, col))| {
                for j in 0..n {
                    div[j] = diversity_pair(&pos[i], &pos[j], params);
                    col[j] = collision_pair(&pos[i], &pos[j], params);
                }
            });
        let words = (n * n).div_ceil(64);
        let bits: Vec<bool> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..n).map(move |j| {
                    visibility_pair(&pos[i], &pos[j], &origin, fov_half_angle).expect("lattice radii are positive")
                })
            })
            .collect();
        let mut visibility = vec![0u64; words];
        for (k, b) in bits.into_iter().enumerate() {
            if b {
                visibility[k / 64] |= 1 << (k % 64);
            }
        }
        Ok(Self {
            n,
            visibility,
            diversity,
            collision,
        })
    }

    /// Entries held in each of the dense tables.
    pub fn entries(&self) -> usize {
        debug_assert_eq!(self.diversity.len(), self.collision.len());
        self.diversity.len()
    }

    /// Memory needed for dense tables over `n` states: two `f64` tables plus
    /// a visibility bitset.
    pub fn estimated_bytes(n: usize) -> usize {
        let entries = n * n;
        entries * 2 * std::mem::size_of::<f64>() + entries.div_ceil(64) * 8
    }
}

impl PairCosts for PairTables {
    fn num_states(&self) -> usize {
        self.n
    }

    #[inline]
    fn diversity(&self, i: usize, j: usize) -> f64 {
        self.diversity[i * self.n + j]
    }

    #[inline]
    fn collision(&self, i: usize, j: usize) -> f64 {
        self.collision[i * self.n + j]
    }

    #[inline]
    fn visible(&self, i: usize, j: usize) -> bool {
        let k = i * self.n + j;
        self.visibility[k / 64] >> (k % 64) & 1 == 1
    }

    fn accumulate(&self, fixed: usize, w: &Weights, out: &mut [f64]) {
        let n = self.n;
        // diversity and collision are symmetric, so the fixed state's row is the column
        let div = &self.diversity[fixed * n..(fixed + 1) * n];
        let col = &self.collision[fixed * n..(fixed + 1) * n];
        for s in 0..n {
            let vis = self.visible(s, fixed) as u8 as f64 + self.visible(fixed, s) as u8 as f64;
            out[s] += w.lambda_div * div[s] + w.lambda_col * col[s] + w.lambda_vis * vis;
        }
    }

    fn memory_bytes(&self) -> usize {
        (self.diversity.len() + self.collision.len()) * 8 + self.visibility.len() * 8
    }
}

/// Pairwise costs evaluated on demand, for lattices whose dense tables would
/// not fit in memory. Values are identical to [`PairTables`].
#[derive(Clone, Debug)]
pub struct DirectPairs {
    positions: Vec<Vec3>,
    params: DiversityParams,
    fov_half_angle: f64,
}

impl DirectPairs {
    pub fn new(lattice: &Lattice, params: &DiversityParams, fov_half_angle: f64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            positions: lattice.canonical_positions().to_vec(),
            params: params.clone(),
            fov_half_angle,
        })
    }
}

impl PairCosts for DirectPairs {
    fn num_states(&self) -> usize {
        self.positions.len()
    }

    fn diversity(&self, i: usize, j: usize) -> f64 {
        diversity_pair(&self.positions[i], &self.positions[j], &self.params)
    }

    fn collision(&self, i: usize, j: usize) -> f64 {
        collision_pair(&self.positions[i], &self.positions[j], &self.params)
    }

    fn visible(&self, i: usize, j: usize) -> bool {
        visibility_pair(&self.positions[i], &self.positions[j], &Vec3::zeros(), self.fov_half_angle)
            .expect("lattice radii are positive")
    }

    fn memory_bytes(&self) -> usize {
        self.positions.len() * std::mem::size_of::<Vec3>()
    }
}

/// One prior rule: states whose yaw, tilt and radius all fall in the given
/// closed ranges get `cost` added. Yaw ranges with `lo > hi` wrap through 0.
/// Angles are radians unless given through the `_deg` keys.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CineRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<[f64; 2]>,
    pub cost: f64,
}

type AngleRange = Option<[f64; 2]>;

impl CineRule {
    fn ranges(&self) -> Result<(AngleRange, AngleRange)> {
        let pick = |rad: Option<[f64; 2]>, deg: Option<[f64; 2]>, key: &str| match (rad, deg) {
            (Some(_), Some(_)) => Err(Error::config("CinePrior", format!("both {key} and {key}_deg given"))),
            (Some(r), None) => Ok(Some(r)),
            (None, Some(d)) => Ok(Some([d[0].to_radians(), d[1].to_radians()])),
            (None, None) => Ok(None),
        };
        Ok((pick(self.theta, self.theta_deg, "theta")?, pick(self.phi, self.phi_deg, "phi")?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(Error::config("CinePrior", format!("rule cost must be non-negative, got {}", self.cost)));
        }
        self.ranges().map(|_| ())
    }
}

/// Operator-supplied per-state penalty.
#[derive(Clone, Debug, PartialEq)]
pub struct CinePrior {
    costs: Vec<f64>,
}

impl CinePrior {
    pub fn zeros(n: usize) -> Self {
        Self { costs: vec![0.0; n] }
    }

    pub fn from_costs(costs: Vec<f64>) -> Result<Self> {
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::config("CinePrior", "costs must be finite and non-negative"));
        }
        Ok(Self { costs })
    }

    pub fn from_rules(lattice: &Lattice, rules: &[CineRule]) -> Result<Self> {
        const EPS: f64 = 1e-9;
        let spec = lattice.spec();
        let mut costs = vec![0.0; lattice.len()];
        for rule in rules {
            rule.validate()?;
            let (theta, phi) = rule.ranges()?;
            for (s, c) in costs.iter_mut().enumerate() {
                let idx = lattice.index(s);
                let th = spec.theta(idx.i_theta);
                let ph = spec.phi(idx.i_phi);
                let rh = spec.rho(idx.i_rho);
                let in_theta = theta.is_none_or(|[lo, hi]| {
                    let (lo, hi) = (wrap_angle(lo), if hi >= TAU - EPS { TAU } else { wrap_angle(hi) });
                    if lo <= hi {
                        th >= lo - EPS && th <= hi + EPS
                    } else {
                        th >= lo - EPS || th <= hi + EPS
                    }
                });
                let in_phi = phi.is_none_or(|[lo, hi]| ph >= lo - EPS && ph <= hi + EPS);
                let in_rho = rule.rho.is_none_or(|[lo, hi]| rh >= lo - EPS && rh <= hi + EPS);
                if in_theta && in_phi && in_rho {
                    *c += rule.cost;
                }
            }
        }
        Ok(Self { costs })
    }

    #[inline]
    pub fn cost(&self, s: usize) -> f64 {
        self.costs[s]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
}

/// For each state, the states within `r_max` of it (itself included) with
/// their volume weights, from canonical positions.
#[derive(Clone, Debug)]
pub struct ObstacleStencil {
    r_max: f64,
    offsets: Vec<u32>,
    members: Vec<u32>,
    weights: Vec<f64>,
}

impl ObstacleStencil {
    pub fn build(lattice: &Lattice, r_max: f64) -> Result<Self> {
        if !(r_max.is_finite() && r_max >= 0.0) {
            return Err(Error::config("CostParams", format!("r_max must be non-negative, got {r_max}")));
        }
        let pos = lattice.canonical_positions();
        // shells exactly r_max apart must not depend on rounding
        let reach = r_max + 1e-9;
        // uniform hash grid with cell size reach
        let cell = reach.max(1e-6);
        let key = |p: &Vec3| {
            (
                (p.x / cell).floor() as i64,
                (p.y / cell).floor() as i64,
                (p.z / cell).floor() as i64,
            )
        };
        let mut buckets: std::collections::HashMap<(i64, i64, i64), Vec<u32>> = Default::default();
        for (s, p) in pos.iter().enumerate() {
            buckets.entry(key(p)).or_default().push(s as u32);
        }
        let mut offsets = vec![0u32];
        let mut members = Vec::new();
        let mut weights = Vec::new();
        let mut near = Vec::new();
        for p in pos {
            let (kx, ky, kz) = key(p);
            near.clear();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(b) = buckets.get(&(kx + dx, ky + dy, kz + dz)) {
                            near.extend(b.iter().copied().filter(|&m| (pos[m as usize] - p).norm() <= reach));
                        }
                    }
                }
            }
            near.sort_unstable();
            for &m in &near {
                members.push(m);
                weights.push(lattice.cell_volume(m as usize));
            }
            offsets.push(members.len() as u32);
        }
        Ok(Self {
            r_max,
            offsets,
            members,
            weights,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn members(&self, s: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[s] as usize..self.offsets[s + 1] as usize;
        (&self.members[r.clone()], &self.weights[r])
    }
}

/// Volume-weighted occupancy of the lattice cells within `r_max` of state `s`.
pub fn obstacle_cost(s: usize, t: usize, sgrid: &SphericalGrid, stencil: &ObstacleStencil) -> f64 {
    let (members, weights) = stencil.members(s);
    members
        .iter()
        .zip(weights)
        .map(|(&m, &w)| sgrid.occupancy(m as usize, t) * w)
        .sum()
}

/// Arc-length-weighted occupancy along the sight line from state `s` to the actor.
pub fn occlusion_cost(s: usize, t: usize, sgrid: &SphericalGrid) -> f64 {
    sgrid.ray_samples(s, t).iter().sum::<f64>() * sgrid.ray_step(s)
}

/// Weighted cost terms of one state (or a sum of states).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub occ: f64,
    pub obs: f64,
    pub cine: f64,
    pub div: f64,
    pub col: f64,
    pub vis: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.unary() + self.pairwise()
    }

    pub fn unary(&self) -> f64 {
        self.occ + self.obs + self.cine
    }

    pub fn pairwise(&self) -> f64 {
        self.div + self.col + self.vis
    }
}

impl std::ops::AddAssign for CostBreakdown {
    fn add_assign(&mut self, o: Self) {
        self.occ += o.occ;
        self.obs += o.obs;
        self.cine += o.cine;
        self.div += o.div;
        self.col += o.col;
        self.vis += o.vis;
    }
}

/// Everything the cost of a lattice state depends on besides the other cameras.
pub struct CostModel {
    pub weights: Weights,
    pub pairs: Box<dyn PairCosts>,
    pub prior: CinePrior,
    pub stencil: ObstacleStencil,
}

/// Parameters needed to assemble a [`CostModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Half-angle of the camera viewing cone, radians.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov_half_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov_half_angle_deg: Option<f64>,
    /// Obstacle cost radius, metres.
    pub r_max: f64,
    /// Dense pair tables are built only below this size; larger lattices
    /// evaluate pairwise costs on demand.
    pub max_table_bytes: usize,
}

pub const DEFAULT_FOV_HALF_ANGLE_DEG: f64 = 50.0;

impl Default for CostParams {
    fn default() -> Self {
        Self {
            fov_half_angle: None,
            fov_half_angle_deg: None,
            r_max: 1.0,
            max_table_bytes: 1 << 30,
        }
    }
}

impl CostParams {
    pub fn fov(&self) -> Result<f64> {
        let fov = match (self.fov_half_angle, self.fov_half_angle_deg) {
            (Some(_), Some(_)) => {
                return Err(Error::config("CostParams", "give fov_half_angle or fov_half_angle_deg, not both"))
            }
            (Some(r), None) => r,
            (None, Some(d)) => d.to_radians(),
            (None, None) => DEFAULT_FOV_HALF_ANGLE_DEG.to_radians(),
        };
        if !(fov > 0.0 && fov < std::f64::consts::PI) {
            return Err(Error::config("CostParams", format!("fov half angle must be in (0, π), got {fov}")));
        }
        Ok(fov)
    }
}

impl CostModel {
    pub fn build(
        lattice: &Lattice,
        weights: &Weights,
        diversity: &DiversityParams,
        params: &CostParams,
        prior: CinePrior,
    ) -> Result<Self> {
        weights.validate()?;
        diversity.validate()?;
        if prior.costs().len() != lattice.len() {
            return Err(Error::config("CinePrior", "prior size does not match the lattice"));
        }
        let fov = params.fov()?;
        let pairs: Box<dyn PairCosts> = if PairTables::estimated_bytes(lattice.len()) <= params.max_table_bytes {
            Box::new(PairTables::build(lattice, diversity, fov)?)
        } else {
            Box::new(DirectPairs::new(lattice, diversity, fov)?)
        };
        Ok(Self {
            weights: weights.clone(),
            pairs,
            prior,
            stencil: ObstacleStencil::build(lattice, params.r_max)?,
        })
    }

    /// Weighted per-state terms at timestep `t`.
    #[inline]
    pub fn unary_breakdown(&self, s: usize, t: usize, sgrid: &SphericalGrid) -> CostBreakdown {
        let w = &self.weights;
        CostBreakdown {
            occ: w.lambda_occ * occlusion_cost(s, t, sgrid),
            obs: w.lambda_obs * obstacle_cost(s, t, sgrid, &self.stencil),
            cine: w.lambda_cine * self.prior.cost(s),
            ..Default::default()
        }
    }

    #[inline]
    pub fn unary_cost(&self, s: usize, t: usize, sgrid: &SphericalGrid) -> f64 {
        self.unary_breakdown(s, t, sgrid).unary()
    }

    /// Weighted pairwise terms of `s` against each fixed state.
    pub fn pairwise_breakdown(&self, s: usize, fixed: &[usize]) -> CostBreakdown {
        let w = &self.weights;
        let mut b = CostBreakdown::default();
        for &f in fixed {
            b.div += w.lambda_div * self.pairs.diversity(s, f);
            b.col += w.lambda_col * self.pairs.collision(s, f);
            let vis = self.pairs.visible(s, f) as u8 as f64 + self.pairs.visible(f, s) as u8 as f64;
            b.vis += w.lambda_vis * vis;
        }
        b
    }

    /// Full cost of occupying `s` at timestep `t` given the states of the
    /// already planned cameras at `t`: unary terms plus the sum of pairwise
    /// terms, accumulated in the order of `fixed`.
    pub fn state_cost(&self, s: usize, t: usize, fixed: &[usize], sgrid: &SphericalGrid) -> f64 {
        let pairwise = fixed
            .iter()
            .fold(0.0, |acc, &f| acc + self.pairs.pair_cost(s, f, &self.weights));
        self.unary_cost(s, t, sgrid) + pairwise
    }
}
