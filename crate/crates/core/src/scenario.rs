//! Scenario documents: strict JSON with SI units, degrees only under `_deg` keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costmodel::{CineRule, CostParams, DiversityParams, Weights};
use crate::error::{Error, Result};
use crate::lattice::{ActorPose, LatticeSpec, Vec3};
use crate::selector::SelectorConfig;
use crate::smoother::SmootherConfig;
use crate::world::{ActorScript, ActorWaypoint, SceneDescription};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorWaypointSpec {
    pub t: f64,
    pub position: [f64; 3],
    /// Radians; `heading_deg` is the degree alternative. Defaults to 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_deg: Option<f64>,
}

impl ActorWaypointSpec {
    fn heading(&self) -> Result<f64> {
        match (self.heading, self.heading_deg) {
            (Some(_), Some(_)) => Err(Error::config("ActorScript", "give heading or heading_deg, not both")),
            (Some(h), None) => Ok(h),
            (None, Some(d)) => Ok(d.to_radians()),
            (None, None) => Ok(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub waypoints: Vec<ActorWaypointSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    /// Initial world position, metres.
    pub position: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Simulated seconds.
    pub duration: f64,
    pub replan_hz: f64,
    pub sample_hz: f64,
    /// Recorded in reports; the simulation itself draws no random numbers.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration: 10.0,
            replan_hz: 5.0,
            sample_hz: 50.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Samples per replan cycle; `sample_hz` must be a multiple of `replan_hz`.
    pub fn samples_per_cycle(&self) -> Result<usize> {
        let k = self.sample_hz / self.replan_hz;
        let r = k.round();
        if r < 1.0 || (k - r).abs() > 1e-9 {
            return Err(Error::config("RunConfig", "sample_hz must be a whole multiple of replan_hz"));
        }
        Ok(r as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config("RunConfig", "duration must be positive"));
        }
        if !(self.replan_hz > 0.0 && self.sample_hz > 0.0 && self.sample_hz.is_finite()) {
            return Err(Error::config("RunConfig", "rates must be positive"));
        }
        self.samples_per_cycle()?;
        let ticks = self.duration * self.sample_hz;
        if (ticks - ticks.round()).abs() > 1e-6 {
            return Err(Error::config("RunConfig", "duration must be a whole number of sample periods"));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        (self.duration * self.sample_hz).round() as usize + 1
    }
}

/// A complete simulation setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scene: SceneDescription,
    pub actor: ActorSpec,
    pub uavs: Vec<UavSpec>,
    #[serde(default)]
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub diversity: DiversityParams,
    #[serde(default)]
    pub costs: CostParams,
    /// Cinematography prior rules, summed per state.
    #[serde(default)]
    pub prior: Vec<CineRule>,
    #[serde(default)]
    pub smoother: SmootherConfig,
    #[serde(default)]
    pub selector: SelectorConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::Parse {
                path: origin.to_string(),
                message: format!(
                    "line {} column {}, key `{}`: {}",
                    inner.line(),
                    inner.column(),
                    e.path(),
                    strip_position(&inner.to_string())
                ),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.lattice.validate()?;
        self.weights.validate()?;
        self.diversity.validate()?;
        self.costs.fov()?;
        if !(self.costs.r_max >= 0.0 && self.costs.r_max.is_finite()) {
            return Err(Error::config("CostParams", "r_max must be finite and non-negative"));
        }
        for rule in &self.prior {
            rule.validate()?;
        }
        self.smoother.validate()?;
        self.smoother.stride(self.lattice.step_dt)?;
        self.selector.validate()?;
        self.run.validate()?;
        if self.uavs.is_empty() {
            return Err(Error::config("Scenario", "at least one UAV is required"));
        }
        if self.uavs.iter().flat_map(|u| u.position).any(|c| !c.is_finite()) {
            return Err(Error::config("Scenario", "UAV positions must be finite"));
        }
        let script = self.actor_script()?;
        if script.start() > 0.0 || script.end() < self.run.duration {
            return Err(Error::config(
                "ActorScript",
                format!(
                    "script covers [{}, {}] s but the run needs [0, {}] s",
                    script.start(),
                    script.end(),
                    self.run.duration
                ),
            ));
        }
        Ok(())
    }

    pub fn actor_script(&self) -> Result<ActorScript> {
        let wps = self
            .actor
            .waypoints
            .iter()
            .map(|w| {
                Ok(ActorWaypoint {
                    t: w.t,
                    pose: ActorPose::new(w.position[0], w.position[1], w.position[2], w.heading()?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ActorScript::new(wps)
    }

    pub fn uav_positions(&self) -> Vec<Vec3> {
        self.uavs.iter().map(|u| Vec3::from(u.position)).collect()
    }

    /// Reference document listing every section with its defaults.
    pub fn reference() -> Self {
        Scenario {
            scene: SceneDescription {
                bounds_min: [-12.0, -12.0, 0.0],
                bounds_max: [12.0, 12.0, 10.0],
                resolution: 0.25,
                primitives: Vec::new(),
            },
            actor: ActorSpec {
                waypoints: vec![
                    ActorWaypointSpec { t: 0.0, position: [0.0, 0.0, 1.0], heading: Some(0.0), heading_deg: None },
                    ActorWaypointSpec { t: 20.0, position: [0.0, 0.0, 1.0], heading: Some(0.0), heading_deg: None },
                ],
            },
            uavs: vec![UavSpec { position: [3.0, 0.0, 4.0] }],
            lattice: LatticeSpec::default(),
            weights: Weights::default(),
            diversity: DiversityParams::default(),
            costs: CostParams::default(),
            prior: Vec::new(),
            smoother: SmootherConfig::default(),
            selector: SelectorConfig::default(),
            run: RunConfig::default(),
        }
    }
}

/// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(msg: &str) -> &str {
    match msg.rfind(" at line ") {
        Some(i) => &msg[..i],
        None => msg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "scene": {"bounds_min": [-10, -10, 0], "bounds_max": [10, 10, 8], "resolution": 0.5, "primitives": []},
        "actor": {"waypoints": [{"t": 0, "position": [0, 0, 1]}, {"t": 5, "position": [1, 0, 1], "heading_deg": 90}]},
        "uavs": [{"position": [3, 0, 3]}],
        "run": {"duration": 5}
    }"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let s = Scenario::from_json(MINIMAL, "minimal").unwrap();
        assert_eq!(s.lattice, LatticeSpec::default());
        assert_eq!(s.run.replan_hz, 5.0);
        assert_eq!(s.run.total_samples(), 251);
        let script = s.actor_script().unwrap();
        assert!((script.actor_at(5.0).unwrap().heading - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_names_path() {
        let text = MINIMAL.replace("\"duration\"", "\"duraton\"");
        let err = Scenario::from_json(&text, "typo.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("typo.json") && msg.contains("run") && msg.contains("duraton"), "{msg}");
        assert!(msg.contains("line 5"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn validation_names_invariant() {
        let text = MINIMAL.replace(
            "\"uavs\"",
            "\"diversity\": {\"d_min_div\": 4, \"d_max_div\": 2}, \"uavs\"",
        );
        let msg = Scenario::from_json(&text, "x").unwrap_err().to_string();
        assert!(msg.contains("DiversityParams"), "{msg}");
    }

    #[test]
    fn short_script_rejected() {
        let text = MINIMAL.replace("\"duration\": 5", "\"duration\": 6");
        let msg = Scenario::from_json(&text, "x").unwrap_err().to_string();
        assert!(msg.contains("ActorScript"), "{msg}");
    }

    #[test]
    fn round_trip_is_identical() {
        for text in [MINIMAL.to_string(), Scenario::reference().to_json()] {
            let a = Scenario::from_json(&text, "a").unwrap();
            let json = a.to_json();
            let b = Scenario::from_json(&json, "b").unwrap();
            assert_eq!(a, b);
            assert_eq!(json, b.to_json());
        }
    }

    #[test]
    fn reference_is_valid() {
        Scenario::reference().validate().unwrap();
    }
}
