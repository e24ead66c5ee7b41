//! Per-camera trajectory refinement.
//!
//! The coarse lattice path is resampled at a fine step and optimized by
//! covariant gradient descent: gradients are preconditioned by the inverse of
//! the smoothness metric `M = AᵀA`, where `A` stacks the second differences
//! of the free samples with one-sided rows at both ends (zero initial
//! velocity, free final sample). The first sample is the camera's current
//! position and never moves.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Vec3;
use crate::world::DistanceField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmootherConfig {
    pub w_smooth: f64,
    pub w_track: f64,
    pub w_obs: f64,
    pub w_sep: f64,
    /// Minimum distance to other cameras, metres.
    pub sep_distance: f64,
    /// Clearance below which the obstacle potential activates, metres.
    pub obstacle_margin: f64,
    /// Seconds between fine samples.
    pub fine_dt: f64,
    pub max_iters: usize,
    pub step_size: f64,
    pub convergence_tol: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            w_smooth: 1.0,
            w_track: 1.0,
            w_obs: 100.0,
            w_sep: 100.0,
            sep_distance: 1.0,
            obstacle_margin: 0.5,
            fine_dt: 0.5,
            max_iters: 100,
            step_size: 0.1,
            convergence_tol: 1e-6,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_smooth, self.w_track, self.w_obs, self.w_sep];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("SmootherConfig", "weights must be finite and non-negative"));
        }
        if !(self.sep_distance > 0.0) {
            return Err(Error::config("SmootherConfig", "sep_distance must be positive"));
        }
        if !(self.obstacle_margin >= 0.0) {
            return Err(Error::config("SmootherConfig", "obstacle_margin must be non-negative"));
        }
        if !(self.fine_dt > 0.0 && self.step_size > 0.0 && self.convergence_tol >= 0.0) {
            return Err(Error::config("SmootherConfig", "fine_dt and step_size must be positive"));
        }
        Ok(())
    }

    /// Fine samples per planning step; the planning step must be a whole
    /// multiple of `fine_dt`.
    pub fn stride(&self, step_dt: f64) -> Result<usize> {
        let k = step_dt / self.fine_dt;
        let r = k.round();
        if r < 1.0 || (k - r).abs() > 1e-9 {
            return Err(Error::config(
                "SmootherConfig",
                format!("planning step {step_dt} s is not a multiple of fine_dt {} s", self.fine_dt),
            ));
        }
        Ok(r as usize)
    }
}

/// Densely sampled camera trajectory over the planning horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct FinePath {
    pub uav: usize,
    /// Absolute time of the first sample.
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Vec3>,
}

impl FinePath {
    pub fn horizon(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Position at time `t` after the first sample: Catmull-Rom between
    /// samples, linear on the first and last interval.
    pub fn sample(&self, t: f64) -> Result<Vec3> {
        let h = self.horizon();
        if !(t >= 0.0 && t <= h + 1e-9) {
            return Err(Error::OutOfRange { t, start: 0.0, end: h });
        }
        let n = self.samples.len();
        if n == 1 {
            return Ok(self.samples[0]);
        }
        let u = (t / self.dt).min((n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let f = u - i as f64;
        let p = &self.samples;
        if f == 0.0 {
            return Ok(p[i]);
        }
        if i == 0 || i + 2 >= n {
            return Ok(p[i] + (p[i + 1] - p[i]) * f);
        }
        let (p0, p1, p2, p3) = (p[i - 1], p[i], p[i + 1], p[i + 2]);
        let f2 = f * f;
        let f3 = f2 * f;
        Ok((p1 * 2.0 + (p2 - p0) * f + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * f2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * f3) * 0.5)
    }

    /// Like [`sample`](Self::sample), holding the end position past the horizon.
    pub fn sample_clamped(&self, t: f64) -> Vec3 {
        self.sample(t.clamp(0.0, self.horizon())).expect("clamped")
    }
}

/// Inputs of one camera's refinement, all aligned with the fine samples.
pub struct SmoothContext<'a> {
    /// Greedy waypoint world positions, one per planning step; waypoint `k`
    /// is tracked by sample `k * stride`.
    pub waypoints: &'a [Vec3],
    pub stride: usize,
    pub field: Option<&'a DistanceField>,
    /// Other cameras' expected positions at each fine sample.
    pub others: &'a [Vec<Vec3>],
}

impl SmoothContext<'_> {
    pub fn num_samples(&self) -> usize {
        self.waypoints.len() * self.stride + 1
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    pub smooth: f64,
    pub track: f64,
    pub obs: f64,
    pub sep: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.smooth + self.track + self.obs + self.sep
    }
}

#[inline]
fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

pub fn objective(samples: &[Vec3], ctx: &SmoothContext, cfg: &SmootherConfig) -> ObjectiveTerms {
    let mut terms = ObjectiveTerms::default();
    for w in samples.windows(3) {
        terms.smooth += (w[0] - w[1] * 2.0 + w[2]).norm_squared();
    }
    terms.smooth *= cfg.w_smooth;
    for (k, g) in ctx.waypoints.iter().enumerate() {
        terms.track += (samples[k * ctx.stride] - g).norm_squared();
    }
    terms.track *= cfg.w_track;
    if let Some(field) = ctx.field {
        for x in samples {
            let h = hinge(cfg.obstacle_margin - field.sample(x));
            terms.obs += h * h;
        }
        terms.obs *= cfg.w_obs;
    }
    for other in ctx.others {
        for (x, o) in samples.iter().zip(other) {
            let h = hinge(cfg.sep_distance - (x - o).norm());
            terms.sep += h * h;
        }
    }
    terms.sep *= cfg.w_sep;
    terms
}

/// Analytic gradient with respect to the free samples `1..N`.
pub fn gradient(samples: &[Vec3], ctx: &SmoothContext, cfg: &SmootherConfig) -> Vec<Vec3> {
    let n = samples.len();
    let mut g = vec![Vec3::zeros(); n];
    for i in 1..n.saturating_sub(1) {
        let a = (samples[i - 1] - samples[i] * 2.0 + samples[i + 1]) * (2.0 * cfg.w_smooth);
        g[i - 1] += a;
        g[i] -= a * 2.0;
        g[i + 1] += a;
    }
    for (k, wp) in ctx.waypoints.iter().enumerate() {
        let i = k * ctx.stride;
        g[i] += (samples[i] - wp) * (2.0 * cfg.w_track);
    }
    if let Some(field) = ctx.field {
        for (i, x) in samples.iter().enumerate() {
            let (d, grad) = field.sample_with_gradient(x);
            let h = hinge(cfg.obstacle_margin - d);
            if h > 0.0 {
                g[i] -= grad * (2.0 * cfg.w_obs * h);
            }
        }
    }
    for other in ctx.others {
        for (i, (x, o)) in samples.iter().zip(other).enumerate() {
            let diff = x - o;
            let r = diff.norm();
            let h = hinge(cfg.sep_distance - r);
            if h > 0.0 && r > 0.0 {
                g[i] -= diff * (2.0 * cfg.w_sep * h / r);
            }
        }
    }
    g.remove(0);
    g
}

/// Linear interpolation through the waypoints starting from the camera's
/// actual position, constant after the last waypoint.
pub fn initialize(start: Vec3, waypoints: &[Vec3], stride: usize) -> Vec<Vec3> {
    let n = waypoints.len() * stride + 1;
    let mut out = Vec::with_capacity(n);
    let knot = |k: usize| if k == 0 { start } else { waypoints[k] };
    for i in 0..n {
        let k = i / stride;
        if k + 1 >= waypoints.len() {
            out.push(if waypoints.len() == 1 && i == 0 { start } else { knot(waypoints.len() - 1) });
            continue;
        }
        let f = (i - k * stride) as f64 / stride as f64;
        out.push(knot(k) + (knot(k + 1) - knot(k)) * f);
    }
    out
}

/// The boundary-adjusted smoothness metric over the free samples.
pub fn smoothness_metric(n_samples: usize) -> DMatrix<f64> {
    let m = n_samples - 1;
    // free variable j is sample j + 1
    let mut a = DMatrix::zeros(n_samples, m);
    a[(0, 0)] = 1.0;
    for i in 1..n_samples - 1 {
        for (sample, c) in [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)] {
            if sample >= 1 {
                a[(i, sample - 1)] += c;
            }
        }
    }
    a[(n_samples - 1, m - 1)] -= 1.0;
    if m >= 2 {
        a[(n_samples - 1, m - 2)] += 1.0;
    }
    a.transpose() * a
}

#[derive(Clone, Debug)]
pub struct SmoothOutcome {
    pub path: FinePath,
    pub initial: ObjectiveTerms,
    pub terms: ObjectiveTerms,
    /// Objective after initialization and after each accepted iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
}

impl SmoothOutcome {
    pub fn is_monotone(&self) -> bool {
        self.history.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Refines the path starting at `start` (time `t0`).
pub fn optimize(uav: usize, start: Vec3, t0: f64, ctx: &SmoothContext, cfg: &SmootherConfig) -> Result<SmoothOutcome> {
    let samples = initialize(start, ctx.waypoints, ctx.stride);
    optimize_from(uav, samples, t0, ctx, cfg)
}

/// Refines an explicit initial guess; `samples[0]` stays fixed.
pub fn optimize_from(uav: usize, mut samples: Vec<Vec3>, t0: f64, ctx: &SmoothContext, cfg: &SmootherConfig) -> Result<SmoothOutcome> {
    let n = samples.len();
    if n != ctx.num_samples() {
        return Err(Error::config(
            "SmoothContext",
            format!("{} samples, context expects {}", n, ctx.num_samples()),
        ));
    }
    if ctx.others.iter().any(|o| o.len() != n) {
        return Err(Error::config("SmoothContext", "other paths must be aligned with the samples"));
    }
    let initial = objective(&samples, ctx, cfg);
    let mut f = initial.total();
    if !f.is_finite() {
        return Err(Error::numeric("smoother", format!("non-finite initial objective {initial:?}")));
    }
    let mut history = vec![f];
    let mut iterations = 0;
    if n > 1 {
        let chol = smoothness_metric(n)
            .cholesky()
            .ok_or_else(|| Error::numeric("smoother", "smoothness metric is not positive definite"))?;
        let mut trial = samples.clone();
        while iterations < cfg.max_iters && f > 0.0 {
            let g = gradient(&samples, ctx, cfg);
            let rhs = DMatrix::from_fn(n - 1, 3, |i, c| g[i][c]);
            let step = chol.solve(&rhs);
            let mut eta = cfg.step_size;
            let mut accepted = None;
            for _ in 0..40 {
                for i in 1..n {
                    trial[i] = samples[i] - Vec3::new(step[(i - 1, 0)], step[(i - 1, 1)], step[(i - 1, 2)]) * eta;
                }
                let f_new = objective(&trial, ctx, cfg).total();
                if !f_new.is_finite() {
                    return Err(Error::numeric("smoother", "objective became non-finite"));
                }
                if f_new <= f {
                    accepted = Some(f_new);
                    break;
                }
                eta *= 0.5;
            }
            let Some(f_new) = accepted else { break };
            iterations += 1;
            samples.copy_from_slice(&trial);
            let decrease = (f - f_new) / f;
            f = f_new;
            history.push(f);
            if decrease < cfg.convergence_tol {
                break;
            }
        }
    }
    let terms = objective(&samples, ctx, cfg);
    Ok(SmoothOutcome {
        path: FinePath {
            uav,
            t0,
            dt: cfg.fine_dt,
            samples,
        },
        initial,
        terms,
        history,
        iterations,
    })
}
