//! Live stream selection among the cameras.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on shot-length comparisons so accumulated sample steps do not
/// shift a switch by one tick.
const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorConfig {
    pub w_vis: f64,
    pub w_cine: f64,
    /// Multiplicative decay per second of the selected camera's score.
    pub decay_rate: f64,
    /// Linear recovery per second of unselected multipliers toward 1.
    pub recovery_rate: f64,
    pub min_shot: f64,
    pub max_shot: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            w_vis: 1.0,
            w_cine: 1.0,
            decay_rate: 0.7,
            recovery_rate: 0.2,
            min_shot: 3.0,
            max_shot: 8.0,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_vis >= 0.0 && self.w_cine >= 0.0 && self.w_vis.is_finite() && self.w_cine.is_finite()) {
            return Err(Error::config("SelectorConfig", "w_vis and w_cine must be finite and non-negative"));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate < 1.0) {
            return Err(Error::config("SelectorConfig", "decay_rate must lie in (0, 1)"));
        }
        if !(self.recovery_rate >= 0.0 && self.recovery_rate.is_finite()) {
            return Err(Error::config("SelectorConfig", "recovery_rate must be finite and non-negative"));
        }
        if !(self.min_shot > 0.0 && self.min_shot < self.max_shot && self.max_shot.is_finite()) {
            return Err(Error::config("SelectorConfig", "shot limits must satisfy 0 < min_shot < max_shot"));
        }
        Ok(())
    }
}

/// Per-camera costs at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewCosts {
    pub vis_cost: f64,
    pub cine_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectorState {
    pub current: usize,
    /// Seconds the current camera has been on air, including the last step.
    pub time_in_shot: f64,
    pub multipliers: Vec<f64>,
}

impl SelectorState {
    pub fn new(num_cameras: usize, first: usize) -> Self {
        Self {
            current: first,
            time_in_shot: 0.0,
            multipliers: vec![1.0; num_cameras],
        }
    }
}

pub fn score(costs: &[ViewCosts], state: &SelectorState, cfg: &SelectorConfig) -> Vec<f64> {
    costs
        .iter()
        .zip(&state.multipliers)
        .map(|(c, m)| m * (-(cfg.w_vis * c.vis_cost + cfg.w_cine * c.cine_cost)).exp())
        .collect()
}

/// Highest score among cameras other than `exclude`, ties to the lowest id.
fn best_other(q: &[f64], exclude: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        if best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// Chooses the camera on air for the next `dt` seconds and updates the
/// multipliers. A switch is forced when keeping the current camera would
/// run past `max_shot`.
pub fn step(state: &SelectorState, q: &[f64], dt: f64, cfg: &SelectorConfig) -> SelectorState {
    assert!(dt > 0.0, "selector step must advance time");
    let cur = state.current;
    let next = if q.len() < 2 || state.time_in_shot < cfg.min_shot - TIME_EPS {
        cur
    } else if state.time_in_shot + dt > cfg.max_shot + TIME_EPS {
        best_other(q, Some(cur)).unwrap_or(cur)
    } else {
        match best_other(q, Some(cur)) {
            Some(b) if q[b] > q[cur] => b,
            _ => cur,
        }
    };
    let decay = cfg.decay_rate.powf(dt);
    let multipliers = state
        .multipliers
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if i == next {
                (m * decay).max(f64::MIN_POSITIVE)
            } else {
                (m + cfg.recovery_rate * dt).min(1.0)
            }
        })
        .collect();
    SelectorState {
        current: next,
        time_in_shot: if next == cur { state.time_in_shot + dt } else { dt },
        multipliers,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shot {
    pub t_start: f64,
    pub t_end: f64,
    pub camera: usize,
}

impl Shot {
    pub fn length(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Stateful stepper that records the selection timeline.
#[derive(Clone, Debug)]
pub struct Selector {
    cfg: SelectorConfig,
    state: Option<SelectorState>,
    num_cameras: usize,
    clock: f64,
    shot_start: f64,
    timeline: Vec<Shot>,
}

impl Selector {
    pub fn new(num_cameras: usize, cfg: SelectorConfig) -> Result<Self> {
        cfg.validate()?;
        if num_cameras == 0 {
            return Err(Error::config("SelectorConfig", "at least one camera is required"));
        }
        Ok(Self {
            cfg,
            state: None,
            num_cameras,
            clock: 0.0,
            shot_start: 0.0,
            timeline: Vec::new(),
        })
    }

    pub fn config(&self) -> &SelectorConfig {
        &self.cfg
    }

    pub fn num_cameras(&self) -> usize {
        self.num_cameras
    }

    pub fn state(&self) -> Option<&SelectorState> {
        self.state.as_ref()
    }

    /// Selects the camera for `[t, t + dt)` from the costs observed at `t`.
    /// The first call puts the best-scoring camera on air.
    pub fn step(&mut self, t: f64, costs: &[ViewCosts], dt: f64) -> usize {
        assert_eq!(costs.len(), self.num_cameras, "one cost entry per camera");
        let state = match self.state.take() {
            Some(s) => s,
            None => {
                self.clock = t;
                self.shot_start = t;
                let fresh = SelectorState::new(self.num_cameras, 0);
                let q = score(costs, &fresh, &self.cfg);
                let first = best_other(&q, None).unwrap_or(0);
                SelectorState::new(self.num_cameras, first)
            }
        };
        let q = score(costs, &state, &self.cfg);
        let next = step(&state, &q, dt, &self.cfg);
        if next.current != state.current {
            self.timeline.push(Shot {
                t_start: self.shot_start,
                t_end: t,
                camera: state.current,
            });
            self.shot_start = t;
        }
        self.clock = t + dt;
        let cam = next.current;
        self.state = Some(next);
        cam
    }

    /// Completed shots so far.
    pub fn completed(&self) -> &[Shot] {
        &self.timeline
    }

    /// Completed shots followed by the ongoing one.
    pub fn timeline(&self) -> Vec<Shot> {
        let mut out = self.timeline.clone();
        if let Some(s) = &self.state {
            out.push(Shot {
                t_start: self.shot_start,
                t_end: self.clock,
                camera: s.current,
            });
        }
        out
    }
}
