//! Obstacle environment and scripted actor motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{angle_diff, wrap_angle, ActorPose, Lattice, Vec3};

/// Occupancy at or above this value counts as an obstacle for the distance field.
pub const OCCUPIED: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// Axis-aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Vertical cylinder.
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
}

impl Primitive {
    /// Whether the primitive overlaps the open box `(lo, hi)` with positive volume.
    fn overlaps_cell(&self, lo: &Vec3, hi: &Vec3) -> bool {
        match self {
            Primitive::Box { min, max } => (0..3).all(|a| lo[a] < max[a] && hi[a] > min[a]),
            Primitive::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                if !(lo.z < *z_max && hi.z > *z_min) {
                    return false;
                }
                let cx = center[0].clamp(lo.x, hi.x);
                let cy = center[1].clamp(lo.y, hi.y);
                (cx - center[0]).hypot(cy - center[1]) < *radius
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Primitive::Box { min, max } => (0..3).all(|a| min[a].is_finite() && max[a].is_finite() && min[a] < max[a]),
            Primitive::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => center.iter().all(|c| c.is_finite()) && *radius > 0.0 && z_min < z_max,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("Primitive", format!("degenerate primitive {self:?}")))
        }
    }

    /// Translated copy.
    pub fn translated(&self, by: &Vec3) -> Primitive {
        match self {
            Primitive::Box { min, max } => Primitive::Box {
                min: [min[0] + by.x, min[1] + by.y, min[2] + by.z],
                max: [max[0] + by.x, max[1] + by.y, max[2] + by.z],
            },
            Primitive::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => Primitive::Cylinder {
                center: [center[0] + by.x, center[1] + by.y],
                radius: *radius,
                z_min: z_min + by.z,
                z_max: z_max + by.z,
            },
        }
    }
}

/// Scene bounds plus the obstacle primitives inside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    /// Voxel edge length in metres.
    pub resolution: f64,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

impl SceneDescription {
    pub fn empty(bounds_min: [f64; 3], bounds_max: [f64; 3], resolution: f64) -> Self {
        Self {
            bounds_min,
            bounds_max,
            resolution,
            primitives: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims(self.resolution).map(|_| ())
    }

    /// Grid dimensions at `resolution`, after checking bounds and primitives.
    pub fn dims(&self, resolution: f64) -> Result<[usize; 3]> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::config(
                "SceneDescription",
                format!("resolution must be positive, got {resolution}"),
            ));
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let extent = self.bounds_max[a] - self.bounds_min[a];
            if !(extent.is_finite() && extent > 0.0) {
                return Err(Error::config(
                    "SceneDescription",
                    format!("empty bounds on axis {a}: [{}, {}]", self.bounds_min[a], self.bounds_max[a]),
                ));
            }
            dims[a] = ((extent / resolution) - 1e-9).ceil().max(1.0) as usize;
        }
        for p in &self.primitives {
            p.validate()?;
        }
        Ok(dims)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
    /// x-fastest layout, values in `[0, 1]`.
    pub occupancy: Vec<f64>,
}

impl VoxelGrid {
    pub fn empty(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Self {
        Self {
            origin,
            resolution,
            dims,
            occupancy: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    #[inline]
    pub fn flat(&self, i: [usize; 3]) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }

    pub fn unflat(&self, k: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [k % nx, (k / nx) % ny, k / (nx * ny)]
    }

    pub fn cell_center(&self, i: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(i[0] as f64 + 0.5, i[1] as f64 + 0.5, i[2] as f64 + 0.5) * self.resolution
    }

    /// Cell containing `p`, or `None` outside the grid.
    #[inline]
    pub fn cell_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let u = ((p[a] - self.origin[a]) / self.resolution).floor();
            if !(u >= 0.0 && u < self.dims[a] as f64) {
                return None;
            }
            out[a] = u as usize;
        }
        Some(out)
    }

    /// Occupancy of the cell containing `p`; free outside the grid.
    #[inline]
    pub fn occupancy_at(&self, p: &Vec3) -> f64 {
        self.cell_of(p).map_or(0.0, |i| self.occupancy[self.flat(i)])
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o >= OCCUPIED).count()
    }

    /// Writes a flat little-endian `f32` occupancy sidecar plus a JSON header.
    pub fn export(&self, stem: &std::path::Path) -> Result<()> {
        let header = serde_json::json!({
            "origin": [self.origin.x, self.origin.y, self.origin.z],
            "resolution": self.resolution,
            "dims": self.dims,
            "layout": "x-fastest",
            "dtype": "f32le",
        });
        let header_path = stem.with_extension("json");
        std::fs::write(&header_path, serde_json::to_string_pretty(&header).unwrap())
            .map_err(|e| Error::io(&header_path, e))?;
        let bytes: Vec<u8> = self
            .occupancy
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect();
        let bin_path = stem.with_extension("bin");
        std::fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))
    }
}

/// Rasterizes scene primitives: a cell is occupied iff it overlaps a primitive.
pub fn voxelize(scene: &SceneDescription, resolution: f64) -> Result<VoxelGrid> {
    let dims = scene.dims(resolution)?;
    let lo = Vec3::from(scene.bounds_min);
    let mut grid = VoxelGrid::empty(lo, resolution, dims);
    for prim in &scene.primitives {
        // only visit cells inside the primitive's bounding box
        let (pmin, pmax) = match prim {
            Primitive::Box { min, max } => (Vec3::from(*min), Vec3::from(*max)),
            Primitive::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => (
                Vec3::new(center[0] - radius, center[1] - radius, *z_min),
                Vec3::new(center[0] + radius, center[1] + radius, *z_max),
            ),
        };
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            let first = ((pmin[a] - lo[a]) / resolution).floor().max(0.0);
            let last = ((pmax[a] - lo[a]) / resolution).ceil().min(dims[a] as f64);
            if last <= first {
                range[a] = (0, 0);
            } else {
                range[a] = (first as usize, last as usize);
            }
        }
        for iz in range[2].0..range[2].1 {
            for iy in range[1].0..range[1].1 {
                for ix in range[0].0..range[0].1 {
                    let c_lo = lo + Vec3::new(ix as f64, iy as f64, iz as f64) * resolution;
                    let c_hi = c_lo + Vec3::repeat(resolution);
                    if prim.overlaps_cell(&c_lo, &c_hi) {
                        let k = grid.flat([ix, iy, iz]);
                        grid.occupancy[k] = 1.0;
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Signed Euclidean distance on cell centres.
///
/// Free cells hold the distance to the nearest occupied cell centre. Occupied
/// cells hold `resolution - d` where `d` is the distance to the nearest free
/// centre, so boundary obstacle cells read 0 and deeper cells are negative.
/// A grid without obstacles is `+∞` everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

pub fn distance_field(grid: &VoxelGrid) -> DistanceField {
    let occupied: Vec<bool> = grid.occupancy.iter().map(|&o| o >= OCCUPIED).collect();
    let to_occupied = squared_edt(grid.dims, |k| occupied[k]);
    let to_free = squared_edt(grid.dims, |k| !occupied[k]);
    let res = grid.resolution;
    let values = occupied
        .iter()
        .enumerate()
        .map(|(k, &occ)| {
            if occ {
                res - to_free[k].sqrt() * res
            } else {
                to_occupied[k].sqrt() * res
            }
        })
        .collect();
    DistanceField {
        origin: grid.origin,
        resolution: res,
        dims: grid.dims,
        values,
    }
}

/// Exact squared distance (in cell units) to the nearest `site` cell, by
/// separable lower envelopes of parabolas along each axis.
fn squared_edt(dims: [usize; 3], site: impl Fn(usize) -> bool) -> Vec<f64> {
    let n = dims[0] * dims[1] * dims[2];
    let mut d: Vec<f64> = (0..n).map(|k| if site(k) { 0.0 } else { f64::INFINITY }).collect();
    let longest = *dims.iter().max().unwrap();
    let mut f = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut v = vec![0usize; longest];
    let mut z = vec![0.0; longest + 1];
    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let len = dims[axis];
        let stride = strides[axis];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..dims[b] {
            for i in 0..dims[a] {
                let base = i * strides[a] + j * strides[b];
                for q in 0..len {
                    f[q] = d[base + q * stride];
                }
                envelope_1d(&f[..len], &mut out[..len], &mut v, &mut z);
                for q in 0..len {
                    d[base + q * stride] = out[q];
                }
            }
        }
    }
    d
}

fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    // envelope only over finite samples
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[j + 1] < qf {
            j += 1;
        }
        let p = v[j] as f64;
        *o = (qf - p) * (qf - p) + f[v[j]];
    }
}

impl DistanceField {
    #[inline]
    fn flat(&self, i: [usize; 3]) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }

    pub fn at_cell(&self, i: [usize; 3]) -> f64 {
        self.values[self.flat(i)]
    }

    /// Trilinear interpolation between cell centres. Points outside the grid
    /// are clamped to it, which never overestimates clearance since every
    /// obstacle lies inside.
    pub fn sample(&self, p: &Vec3) -> f64 {
        self.sample_with_gradient(p).0
    }

    /// Interpolated distance and its gradient. The gradient is the exact
    /// derivative of the trilinear interpolant, i.e. differences of
    /// neighbouring cell values, and is zero along clamped axes.
    pub fn sample_with_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut inside = [true; 3];
        for a in 0..3 {
            let n = self.dims[a];
            let u = (p[a] - self.origin[a]) / self.resolution - 0.5;
            let hi = (n - 1) as f64;
            let uc = if u < 0.0 {
                inside[a] = false;
                0.0
            } else if u > hi {
                inside[a] = false;
                hi
            } else {
                u
            };
            if n == 1 {
                base[a] = 0;
                frac[a] = 0.0;
                inside[a] = false;
            } else {
                let i0 = (uc.floor() as usize).min(n - 2);
                base[a] = i0;
                frac[a] = uc - i0 as f64;
            }
        }
        let mut c = [[[0.0f64; 2]; 2]; 2];
        for (dx, cx) in c.iter_mut().enumerate() {
            for (dy, cy) in cx.iter_mut().enumerate() {
                for (dz, cz) in cy.iter_mut().enumerate() {
                    let i = [
                        (base[0] + dx).min(self.dims[0] - 1),
                        (base[1] + dy).min(self.dims[1] - 1),
                        (base[2] + dz).min(self.dims[2] - 1),
                    ];
                    *cz = self.at_cell(i);
                }
            }
        }
        if c.iter().flatten().flatten().any(|v| !v.is_finite()) {
            let v = c[0][0][0];
            return (v, Vec3::zeros());
        }
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        // collapse z, then y, then x
        let c00 = lerp(c[0][0][0], c[0][0][1], fz);
        let c01 = lerp(c[0][1][0], c[0][1][1], fz);
        let c10 = lerp(c[1][0][0], c[1][0][1], fz);
        let c11 = lerp(c[1][1][0], c[1][1][1], fz);
        let c0 = lerp(c00, c01, fy);
        let c1 = lerp(c10, c11, fy);
        let value = lerp(c0, c1, fx);

        let inv = 1.0 / self.resolution;
        let gx = (c1 - c0) * inv;
        let gy = lerp(c01 - c00, c11 - c10, fx) * inv;
        let dz00 = c[0][0][1] - c[0][0][0];
        let dz01 = c[0][1][1] - c[0][1][0];
        let dz10 = c[1][0][1] - c[1][0][0];
        let dz11 = c[1][1][1] - c[1][1][0];
        let gz = lerp(lerp(dz00, dz01, fy), lerp(dz10, dz11, fy), fx) * inv;
        let mask = |g: f64, a: usize| if inside[a] { g } else { 0.0 };
        (value, Vec3::new(mask(gx, 0), mask(gy, 1), mask(gz, 2)))
    }
}

/// Occupancy re-expressed on the lattice for each planning step: the value at
/// every state's world position, plus occupancy samples along the sight line
/// from each state to the actor.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalGrid {
    n_states: usize,
    steps: usize,
    /// `[t * n_states + s]`
    occupancy: Vec<f64>,
    /// Ray layout per state: `ray_offsets[s]..ray_offsets[s + 1]` within a
    /// timestep block of `ray_len` samples.
    ray_offsets: Vec<usize>,
    ray_len: usize,
    /// Arc length represented by one sample of state `s`'s ray.
    ray_step: Vec<f64>,
    rays: Vec<f64>,
    actor_path: Vec<ActorPose>,
}

impl SphericalGrid {
    pub fn num_states(&self) -> usize {
        self.n_states
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn actor_path(&self) -> &[ActorPose] {
        &self.actor_path
    }

    #[inline]
    pub fn occupancy(&self, s: usize, t: usize) -> f64 {
        self.occupancy[t * self.n_states + s]
    }

    pub fn ray_samples(&self, s: usize, t: usize) -> &[f64] {
        let base = t * self.ray_len;
        &self.rays[base + self.ray_offsets[s]..base + self.ray_offsets[s + 1]]
    }

    pub fn ray_step(&self, s: usize) -> f64 {
        self.ray_step[s]
    }
}

/// Resamples the voxel grid into the actor-centred lattice frame for each
/// actor pose in `actor_path` (one per planning step).
pub fn spherical_regrid(grid: &VoxelGrid, actor_path: &[ActorPose], lattice: &Lattice) -> SphericalGrid {
    let n = lattice.len();
    let res = grid.resolution;
    let mut ray_offsets = Vec::with_capacity(n + 1);
    let mut ray_step = Vec::with_capacity(n);
    ray_offsets.push(0);
    for s in 0..n {
        let rho = lattice.canonical(s).norm();
        let k = ((rho / res) - 1e-9).ceil().max(1.0) as usize;
        ray_offsets.push(ray_offsets[s] + k);
        ray_step.push(rho / k as f64);
    }
    let ray_len = ray_offsets[n];
    let steps = actor_path.len();
    let mut occupancy = vec![0.0; n * steps];
    let mut rays = vec![0.0; ray_len * steps];
    for (t, actor) in actor_path.iter().enumerate() {
        for s in 0..n {
            let p = lattice.world_position(s, actor);
            occupancy[t * n + s] = grid.occupancy_at(&p);
            let k = ray_offsets[s + 1] - ray_offsets[s];
            let to_actor = actor.position - p;
            let out = &mut rays[t * ray_len + ray_offsets[s]..t * ray_len + ray_offsets[s + 1]];
            for (j, o) in out.iter_mut().enumerate() {
                let q = p + to_actor * ((j as f64 + 0.5) / k as f64);
                *o = grid.occupancy_at(&q);
            }
        }
    }
    SphericalGrid {
        n_states: n,
        steps,
        occupancy,
        ray_offsets,
        ray_len,
        ray_step,
        rays,
        actor_path: actor_path.to_vec(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActorWaypoint {
    pub t: f64,
    pub pose: ActorPose,
}

/// Timestamped actor poses, interpolated linearly in position and along the
/// shortest arc in heading.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorScript {
    waypoints: Vec<ActorWaypoint>,
}

impl ActorScript {
    pub fn new(waypoints: Vec<ActorWaypoint>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::config("ActorScript", "no waypoints"));
        }
        if waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::config("ActorScript", "timestamps must be strictly increasing"));
        }
        if waypoints
            .iter()
            .any(|w| !w.t.is_finite() || w.pose.position.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::config("ActorScript", "non-finite waypoint"));
        }
        Ok(Self { waypoints })
    }

    pub fn stationary(pose: ActorPose, duration: f64) -> Self {
        Self {
            waypoints: vec![
                ActorWaypoint { t: 0.0, pose },
                ActorWaypoint { t: duration, pose },
            ],
        }
    }

    pub fn waypoints(&self) -> &[ActorWaypoint] {
        &self.waypoints
    }

    pub fn start(&self) -> f64 {
        self.waypoints[0].t
    }

    pub fn end(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].t
    }

    pub fn actor_at(&self, t: f64) -> Result<ActorPose> {
        let (start, end) = (self.start(), self.end());
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        let i = self.waypoints.partition_point(|w| w.t <= t);
        if i == 0 {
            return Ok(self.waypoints[0].pose);
        }
        let a = &self.waypoints[i - 1];
        if a.t == t || i == self.waypoints.len() {
            return Ok(a.pose);
        }
        let b = &self.waypoints[i];
        let u = (t - a.t) / (b.t - a.t);
        let position = a.pose.position + (b.pose.position - a.pose.position) * u;
        let heading = wrap_angle(a.pose.heading + angle_diff(a.pose.heading, b.pose.heading) * u);
        Ok(ActorPose { position, heading })
    }

    /// Like [`actor_at`](Self::actor_at) but holds the end poses outside the script.
    pub fn actor_at_clamped(&self, t: f64) -> ActorPose {
        self.actor_at(t.clamp(self.start(), self.end()))
            .expect("clamped time is in range")
    }

    pub fn translated(&self, by: &Vec3) -> Self {
        Self {
            waypoints: self
                .waypoints
                .iter()
                .map(|w| ActorWaypoint {
                    t: w.t,
                    pose: ActorPose {
                        position: w.pose.position + by,
                        heading: w.pose.heading,
                    },
                })
                .collect(),
        }
    }
}
