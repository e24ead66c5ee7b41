//! Actor-centred spherical viewpoint lattice.
//!
//! Camera positions live on a grid of yaw `θ`, tilt `φ` (measured from the
//! vertical) and radius `ρ` around the actor:
//!
//! ```text
//! camera = actor + ρ · (cos(ψa + θ) sin φ, sin(ψa + θ) sin φ, cos φ)
//! ```
//!
//! States are addressed by a linear index
//! `(i_theta · n_phi + i_phi) · n_rho + i_rho`, and transitions between
//! planning steps are restricted to the 3×3×3 block of neighbouring bins
//! (yaw wraps, tilt and radius clamp).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Distances closer than this are treated as ties when snapping to the lattice.
const TIE_EPS: f64 = 1e-9;

/// Normalizes an angle to `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed shortest angular difference `b - a` in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Radii in metres, strictly increasing. Its length is the radius bin count.
    pub rho_values: Vec<f64>,
    pub horizon_steps: usize,
    /// Seconds between planning steps.
    pub step_dt: f64,
    /// Place the lowest tilt bin exactly overhead (φ = 0). Off by default,
    /// in which case tilt bins split `(0, π/2]` evenly.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub include_pole: bool,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            n_theta: 16,
            n_phi: 6,
            rho_values: vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            horizon_steps: 5,
            step_dt: 2.0,
            include_pole: false,
        }
    }
}

impl LatticeSpec {
    /// A spec with `n_rho` radii spaced one metre apart starting at 2 m.
    pub fn with_bins(n_theta: usize, n_phi: usize, n_rho: usize, horizon_steps: usize) -> Self {
        Self {
            n_theta,
            n_phi,
            rho_values: (0..n_rho).map(|k| 2.0 + k as f64).collect(),
            horizon_steps,
            step_dt: 2.0,
            include_pole: false,
        }
    }

    pub fn n_rho(&self) -> usize {
        self.rho_values.len()
    }

    /// Number of lattice positions `n_theta · n_phi · n_rho`.
    pub fn num_states(&self) -> usize {
        self.n_theta * self.n_phi * self.n_rho()
    }

    /// Positions times planning steps, the work unit of one planner pass.
    pub fn computed_states(&self) -> usize {
        self.num_states() * self.horizon_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon_steps as f64 * self.step_dt
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::config("LatticeSpec", m));
        if self.n_theta < 2 {
            return err(format!("n_theta must be >= 2, got {}", self.n_theta));
        }
        if self.n_phi < 1 {
            return err("n_phi must be >= 1".into());
        }
        if self.include_pole && self.n_phi < 2 {
            return err("include_pole needs n_phi >= 2".into());
        }
        if self.rho_values.is_empty() {
            return err("rho_values must not be empty".into());
        }
        if self.rho_values.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return err("rho_values must be finite and positive".into());
        }
        if self.rho_values.windows(2).any(|w| w[1] <= w[0]) {
            return err("rho_values must be strictly increasing".into());
        }
        if self.horizon_steps < 1 {
            return err("horizon_steps must be >= 1".into());
        }
        if !(self.step_dt.is_finite() && self.step_dt > 0.0) {
            return err(format!("step_dt must be positive, got {}", self.step_dt));
        }
        Ok(())
    }

    pub fn theta(&self, i_theta: usize) -> f64 {
        i_theta as f64 * TAU / self.n_theta as f64
    }

    pub fn phi(&self, i_phi: usize) -> f64 {
        if self.include_pole {
            i_phi as f64 * FRAC_PI_2 / (self.n_phi - 1) as f64
        } else {
            (i_phi + 1) as f64 * FRAC_PI_2 / self.n_phi as f64
        }
    }

    pub fn rho(&self, i_rho: usize) -> f64 {
        self.rho_values[i_rho]
    }

    /// World pose of a lattice point for the given actor pose. The camera yaw
    /// faces the actor.
    pub fn to_world(&self, idx: SphericalIndex, actor: &ActorPose) -> CameraPose {
        let position = actor.position + self.offset(idx, actor.heading);
        CameraPose::facing(position, &actor.position)
    }

    fn offset(&self, idx: SphericalIndex, heading: f64) -> Vec3 {
        let rho = self.rho(idx.i_rho);
        let phi = self.phi(idx.i_phi);
        let yaw = heading + self.theta(idx.i_theta);
        let s = phi.sin();
        Vec3::new(rho * yaw.cos() * s, rho * yaw.sin() * s, rho * phi.cos())
    }
}

/// Discrete lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SphericalIndex {
    pub i_theta: usize,
    pub i_phi: usize,
    pub i_rho: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActorPose {
    pub position: Vec3,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
}

impl ActorPose {
    pub fn new(x: f64, y: f64, z: f64, heading: f64) -> Self {
        Self {
            position: Vec3::new(x, y, z),
            heading: wrap_angle(heading),
        }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    /// Radians in `[0, 2π)`, pointing horizontally towards the actor.
    pub yaw: f64,
}

impl CameraPose {
    pub fn facing(position: Vec3, target: &Vec3) -> Self {
        let d = target - position;
        Self {
            position,
            yaw: wrap_angle(d.y.atan2(d.x)),
        }
    }
}

/// The viewpoint lattice with its neighbour graph, immutable once built.
#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    /// Positions relative to an actor at the origin with heading 0.
    canonical: Vec<Vec3>,
    /// CSR layout: neighbours of `s` are `neighbors[offsets[s]..offsets[s + 1]]`,
    /// sorted by linear index.
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    volumes: Vec<f64>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_states();
        let (nt, np, nr) = (spec.n_theta, spec.n_phi, spec.n_rho());

        let mut canonical = Vec::with_capacity(n);
        let mut volumes = Vec::with_capacity(n);
        let d_theta = TAU / nt as f64;
        let d_phi = FRAC_PI_2 / np as f64;
        for s in 0..n {
            let idx = index_of(s, np, nr);
            canonical.push(spec.offset(idx, 0.0));
            let rho = spec.rho(idx.i_rho);
            let d_rho = radial_extent(&spec.rho_values, idx.i_rho);
            volumes.push(rho * rho * spec.phi(idx.i_phi).sin() * d_rho * d_theta * d_phi);
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(n * 27);
        offsets.push(0u32);
        let mut scratch = Vec::with_capacity(27);
        for s in 0..n {
            let idx = index_of(s, np, nr);
            scratch.clear();
            for dt in [-1i64, 0, 1] {
                let it = (idx.i_theta as i64 + dt).rem_euclid(nt as i64) as usize;
                for dp in [-1i64, 0, 1] {
                    let ip = (idx.i_phi as i64 + dp).clamp(0, np as i64 - 1) as usize;
                    for dr in [-1i64, 0, 1] {
                        let ir = (idx.i_rho as i64 + dr).clamp(0, nr as i64 - 1) as usize;
                        scratch.push(((it * np + ip) * nr + ir) as u32);
                    }
                }
            }
            scratch.sort_unstable();
            scratch.dedup();
            neighbors.extend_from_slice(&scratch);
            offsets.push(neighbors.len() as u32);
        }

        Ok(Self {
            spec,
            canonical,
            offsets,
            neighbors,
            volumes,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    pub fn horizon_steps(&self) -> usize {
        self.spec.horizon_steps
    }

    pub fn index(&self, s: usize) -> SphericalIndex {
        index_of(s, self.spec.n_phi, self.spec.n_rho())
    }

    pub fn linear(&self, idx: SphericalIndex) -> usize {
        (idx.i_theta * self.spec.n_phi + idx.i_phi) * self.spec.n_rho() + idx.i_rho
    }

    pub fn contains(&self, idx: SphericalIndex) -> bool {
        idx.i_theta < self.spec.n_theta
            && idx.i_phi < self.spec.n_phi
            && idx.i_rho < self.spec.n_rho()
    }

    /// Offset of state `s` from an actor at the origin facing +x.
    pub fn canonical(&self, s: usize) -> Vec3 {
        self.canonical[s]
    }

    pub fn canonical_positions(&self) -> &[Vec3] {
        &self.canonical
    }

    /// Approximate spherical volume element `ρ² sin φ Δρ Δθ Δφ` of state `s`.
    pub fn cell_volume(&self, s: usize) -> f64 {
        self.volumes[s]
    }

    pub fn neighbors(&self, s: usize) -> &[u32] {
        &self.neighbors[self.offsets[s] as usize..self.offsets[s + 1] as usize]
    }

    pub fn is_neighbor(&self, s: usize, other: usize) -> bool {
        self.neighbors(s).binary_search(&(other as u32)).is_ok()
    }

    pub fn to_world(&self, s: usize, actor: &ActorPose) -> CameraPose {
        self.spec.to_world(self.index(s), actor)
    }

    pub fn world_position(&self, s: usize, actor: &ActorPose) -> Vec3 {
        self.to_world(s, actor).position
    }

    /// Lattice state closest (Euclidean) to `position`, ties going to the
    /// lowest linear index.
    ///
    /// For a fixed tilt and radius the distance only depends on yaw through
    /// `-cos Δθ`, so only the two yaw bins bracketing the pose's azimuth can
    /// win. All tilt and radius bins are scanned for those yaws.
    pub fn nearest_state(&self, position: &Vec3, actor: &ActorPose) -> Result<usize> {
        let rel = position - actor.position;
        let r = rel.norm();
        if !r.is_finite() {
            return Err(Error::DegeneratePose(format!(
                "non-finite camera position {position:?}"
            )));
        }
        if r < 1e-12 {
            return Err(Error::DegeneratePose(
                "camera coincides with the actor position".into(),
            ));
        }
        let spec = &self.spec;
        let nt = spec.n_theta;
        let horizontal = rel.x.hypot(rel.y);

        let thetas: Vec<usize> = if horizontal <= 1e-9 * r {
            (0..nt).collect()
        } else {
            let az = wrap_angle(rel.y.atan2(rel.x) - actor.heading);
            let lo = ((az / (TAU / nt as f64)).floor() as usize) % nt;
            vec![lo, (lo + 1) % nt]
        };
        let mut candidates: Vec<(usize, usize)> = thetas
            .iter()
            .flat_map(|&it| (0..spec.n_phi).map(move |ip| (it, ip)))
            .collect();
        if spec.include_pole {
            // the pole is shared by every yaw; its lowest index has i_theta = 0
            candidates.push((0, 0));
        }
        candidates.sort_unstable();
        candidates.dedup();

        // candidates are visited in increasing linear index
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (it, ip) in candidates {
            for ir in 0..spec.n_rho() {
                let idx = SphericalIndex {
                    i_theta: it,
                    i_phi: ip,
                    i_rho: ir,
                };
                let d = (spec.to_world(idx, actor).position - position).norm();
                if d < best_d - TIE_EPS {
                    best_d = d;
                    best = self.linear(idx);
                }
            }
        }
        Ok(best)
    }
}

fn index_of(s: usize, n_phi: usize, n_rho: usize) -> SphericalIndex {
    SphericalIndex {
        i_theta: s / (n_phi * n_rho),
        i_phi: (s / n_rho) % n_phi,
        i_rho: s % n_rho,
    }
}

/// Radial thickness of shell `k`: half the span to its neighbours, one-sided
/// at the ends, 1 m for a single shell.
fn radial_extent(rho: &[f64], k: usize) -> f64 {
    match rho.len() {
        1 => 1.0,
        _ if k == 0 => rho[1] - rho[0],
        n if k == n - 1 => rho[n - 1] - rho[n - 2],
        _ => 0.5 * (rho[k + 1] - rho[k - 1]),
    }
}
