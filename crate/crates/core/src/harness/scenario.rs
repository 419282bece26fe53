//! Scenario files: world constants, vehicles and simulation settings in TOML.
//!
//! ```toml
//! [world]
//! L = 2
//! T = 3
//! tau = 3.0
//! d_bar = 100.0
//! d_hat = 20.0
//! eps_game = 1e-3
//! eps_strict = 1e-4
//!
//! [sim]
//! steps = 10
//! seed = 0
//! player_order = "cyclic"
//!
//! [[vehicles]]
//! id = 1
//! pos = 0.0
//! v = 20.0
//! z = 2
//! v_max = 36.0
//! delta = 4.0
//! r = 1.0
//! d0 = 5.0
//! h = 0.0
//! v_ref = [20.0]
//! z_ref = [1]
//! ```
//!
//! Reference entry `k` is the target at simulation step `k + 1`; profiles
//! shorter than the run repeat their last entry.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::PlayerOrder;
use crate::mld_model::{Lane, RuleSet, VehicleParams, VehicleState, WorldParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldSection {
    #[serde(rename = "L")]
    lanes: Lane,
    #[serde(rename = "T")]
    horizon: usize,
    tau: f64,
    d_bar: f64,
    d_hat: f64,
    #[serde(default = "default_eps_game")]
    eps_game: f64,
    #[serde(default = "default_eps_strict")]
    eps_strict: f64,
    #[serde(default)]
    rules: RuleSet,
}

fn default_eps_game() -> f64 {
    1e-3
}

fn default_eps_strict() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleSection {
    id: usize,
    pos: f64,
    v: f64,
    z: Lane,
    v_max: f64,
    delta: f64,
    r: f64,
    d0: f64,
    h: f64,
    v_ref: Vec<f64>,
    z_ref: Vec<Lane>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub player_order: PlayerOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    world: WorldSection,
    #[serde(default)]
    vehicles: Vec<VehicleSection>,
    sim: SimSettings,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: WorldParams,
    /// Full reference profiles, indexed by simulation step minus one.
    pub params: Vec<VehicleParams>,
    pub initial: Vec<VehicleState>,
    pub sim: SimSettings,
}

impl Scenario {
    /// Lists every violated invariant.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.world.validate();
        if self.params.is_empty() {
            errs.push("vehicle list is empty".into());
        }
        if self.params.len() != self.initial.len() {
            errs.push("parameter and state lists differ in length".into());
        }
        let mut ids = BTreeSet::new();
        for (p, s) in self.params.iter().zip(&self.initial) {
            let tag = format!("vehicle {}", p.id);
            if !ids.insert(p.id) {
                errs.push(format!("{tag}: duplicate id"));
            }
            if !(p.v_max > 0.0) {
                errs.push(format!("{tag}: v_max must be positive"));
            }
            if !(p.delta > 0.0) {
                errs.push(format!("{tag}: delta must be positive"));
            }
            if !(p.r > 0.0) {
                errs.push(format!("{tag}: r must be positive"));
            }
            if !(p.d0 > 0.0) {
                errs.push(format!("{tag}: d0 must be positive"));
            }
            if !(p.h >= 0.0) {
                errs.push(format!("{tag}: h must be non-negative"));
            }
            if p.v_ref.is_empty() || p.z_ref.is_empty() {
                errs.push(format!("{tag}: reference profiles must not be empty"));
            }
            for &v in &p.v_ref {
                if !(0.0..=p.v_max).contains(&v) {
                    errs.push(format!(
                        "{tag}: reference speed {v} outside [0, {}]",
                        p.v_max
                    ));
                }
            }
            for &z in &p.z_ref {
                if z < 1 || z > self.world.lanes {
                    errs.push(format!(
                        "{tag}: reference lane {z} outside 1..={}",
                        self.world.lanes
                    ));
                }
            }
            if !s.pos.is_finite() {
                errs.push(format!("{tag}: position must be finite"));
            }
            if !(s.v >= 0.0 && s.v <= p.v_max) {
                errs.push(format!("{tag}: speed {} outside [0, {}]", s.v, p.v_max));
            }
            if s.z < 1 || s.z > self.world.lanes {
                errs.push(format!(
                    "{tag}: lane {} outside 1..={}",
                    s.z, self.world.lanes
                ));
            }
        }
        // Initial same-lane gaps must respect each follower's and leader's safety distance.
        for i in 0..self.initial.len().min(self.params.len()) {
            for j in 0..self.initial.len().min(self.params.len()) {
                let (si, sj) = (&self.initial[i], &self.initial[j]);
                if i == j || si.z != sj.z {
                    continue;
                }
                let d = (sj.pos - si.pos).abs();
                let ds = self.params[i].safety_distance(si.v);
                if d < ds {
                    errs.push(format!(
                        "vehicles {} and {}: initial gap {d} below safety distance {ds} on lane {}",
                        self.params[i].id, self.params[j].id, si.z
                    ));
                }
            }
        }
        if self.sim.steps == 0 {
            errs.push("sim.steps must be at least 1".into());
        }
        errs
    }

    pub fn vehicle_ids(&self) -> Vec<usize> {
        self.params.iter().map(|p| p.id).collect()
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let w = file.world;
    let world = WorldParams {
        lanes: w.lanes,
        horizon: w.horizon,
        tau: w.tau,
        d_bar: w.d_bar,
        d_hat: w.d_hat,
        eps_game: w.eps_game,
        eps_strict: w.eps_strict,
        rules: w.rules,
    };
    let params = file
        .vehicles
        .iter()
        .map(|v| VehicleParams {
            id: v.id,
            v_max: v.v_max,
            delta: v.delta,
            r: v.r,
            d0: v.d0,
            h: v.h,
            v_ref: v.v_ref.clone(),
            z_ref: v.z_ref.clone(),
        })
        .collect();
    let initial = file
        .vehicles
        .iter()
        .map(|v| VehicleState {
            pos: v.pos,
            v: v.v,
            z: v.z,
            a_l: false,
            a_r: false,
        })
        .collect();
    let scenario = Scenario {
        world,
        params,
        initial,
        sim: file.sim,
    };
    let errs = scenario.validate();
    if errs.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(errs))
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}
