//! JSON scenario files.
//!
//! Every field has a default, so `{"schema_version": 1}` is a complete
//! scenario: 20 human drivers at equilibrium behind the synthetic
//! stop-and-go leader, one AV directly behind the leader.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{InitialState, LeaderTrajectory, Platoon, PlatoonLayout, StateGrid};
use crate::error::{PlatoonError, Result};
use crate::model::ModelParams;
use crate::objective::{EnergyParams, ObjectiveConfig};
use crate::optimizer::SolverOptions;
use crate::problem::Problem;
use crate::scenario::leader::{load_leader_csv, StopAndGo};
use crate::scenario::sweep::NewAvSeed;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Horizon `T` (s).
    pub horizon: f64,
    /// State grid step (s).
    pub state_step: f64,
    /// Control interval width (s); a multiple of `state_step`.
    pub control_step: f64,
    pub model: ModelParams<f64>,
    pub platoon: PlatoonConfig,
    pub leader: LeaderConfig,
    pub objective: ObjectiveConfig<f64>,
    pub solver: SolverOptions<f64>,
    pub energy: EnergyParams<f64>,
    pub sweep: SweepConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            horizon: 600.0,
            state_step: 0.1,
            control_step: 5.0,
            model: ModelParams::default(),
            platoon: PlatoonConfig::default(),
            leader: LeaderConfig::default(),
            objective: ObjectiveConfig::default(),
            solver: SolverOptions::default(),
            energy: EnergyParams::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatoonConfig {
    pub n_vehicles: usize,
    /// 1-based numbers of the autonomous vehicles.
    pub av_positions: Vec<usize>,
    pub initial: InitialConfig,
    /// Smallest admissible initial headway (m).
    pub min_initial_gap: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 20,
            av_positions: vec![1],
            initial: InitialConfig::default(),
            min_initial_gap: 5.0,
        }
    }
}

/// Either explicit `x0`/`v0` arrays, or uniform spacing `gap` at `speed`.
/// A missing speed means the leader's initial speed, a missing gap the
/// equilibrium headway of that speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub gap: Option<f64>,
    pub speed: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LeaderSource {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct LeaderConfig {
    pub source: LeaderSource,
    /// CSV file, relative paths resolve against the scenario file.
    pub path: Option<PathBuf>,
    pub synthetic: StopAndGo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub max_avs: usize,
    /// Warm-start each leg from the previous one.
    pub warm_start: bool,
    pub new_av_seed: NewAvSeed,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            max_avs: 5,
            warm_start: true,
            new_av_seed: NewAvSeed::default(),
        }
    }
}

fn lookup<'a>(v: &'a Value, path: &[&str]) -> Option<&'a Value> {
    path.iter().try_fold(v, |cur, key| cur.as_object()?.get(*key))
}

/// Applies `key.path=value` overrides to a JSON document. Keys must name
/// fields of the schema; values parse as JSON, falling back to a string.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    let schema = serde_json::to_value(ScenarioConfig::default())
        .map_err(|e| PlatoonError::Config(e.to_string()))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| PlatoonError::Config(format!("override `{item}` is not of the form key=value")))?;
        let path: Vec<&str> = key.trim().split('.').collect();
        if path.iter().any(|p| p.is_empty()) || lookup(&schema, &path).is_none() {
            return Err(PlatoonError::Config(format!("unknown configuration key `{key}`")));
        }
        let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut cur = &mut *doc;
        for (depth, part) in path.iter().enumerate() {
            let obj = match cur {
                Value::Object(map) => map,
                other => {
                    *other = Value::Object(Default::default());
                    other.as_object_mut().expect("just created")
                }
            };
            if depth + 1 == path.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            cur = obj.entry(part.to_string()).or_insert(Value::Object(Default::default()));
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            }
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_value(doc: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(doc).map_err(|e| PlatoonError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| PlatoonError::Parse(format!("scenario JSON: {e}")))?;
        apply_overrides(&mut doc, overrides)?;
        Self::from_value(doc)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PlatoonError::io(path, e))?;
        Self::from_json_str(&text, overrides)
    }

    /// Defaults with overrides applied.
    pub fn with_overrides(overrides: &[String]) -> Result<Self> {
        let mut doc = serde_json::to_value(Self::default()).map_err(|e| PlatoonError::Config(e.to_string()))?;
        apply_overrides(&mut doc, overrides)?;
        Self::from_value(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PlatoonError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let grid = self.grid()?;
        crate::dynamics::ControlSchedule::<f64>::uniform(self.horizon, self.control_step, 0)?;
        if crate::dynamics::grid::integer_ratio(self.control_step, self.state_step).map_or(true, |k| k == 0) {
            return bad(format!(
                "control_step {} s is not a multiple of state_step {} s",
                self.control_step, self.state_step
            ));
        }
        self.model.validate()?;
        self.objective.validate()?;
        self.solver.validate()?;
        self.energy.validate()?;
        self.layout()?;
        if !(self.platoon.min_initial_gap > 0.0) {
            return bad("min_initial_gap must be positive".into());
        }
        if self.objective.d_safe > self.platoon.min_initial_gap {
            return bad(format!(
                "d_safe ({}) must not exceed min_initial_gap ({})",
                self.objective.d_safe, self.platoon.min_initial_gap
            ));
        }
        match self.leader.source {
            LeaderSource::Synthetic => self.leader.synthetic.validate(grid.horizon())?,
            LeaderSource::Csv if self.leader.path.is_none() => {
                return bad("leader.source is csv but leader.path is missing".into())
            }
            LeaderSource::Csv => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<StateGrid<f64>> {
        StateGrid::new(self.horizon, self.state_step)
    }

    pub fn layout(&self) -> Result<PlatoonLayout> {
        PlatoonLayout::from_positions(self.platoon.n_vehicles, &self.platoon.av_positions)
    }

    pub fn leader(&self, base_dir: &Path) -> Result<LeaderTrajectory<f64>> {
        let grid = self.grid()?;
        match self.leader.source {
            LeaderSource::Synthetic => self.leader.synthetic.sample(&grid),
            LeaderSource::Csv => {
                let rel = self.leader.path.as_ref().expect("validated");
                load_leader_csv(&base_dir.join(rel), self.state_step, self.horizon)
            }
        }
    }

    pub fn initial_state(&self, leader: &LeaderTrajectory<f64>) -> Result<InitialState<f64>> {
        let n = self.platoon.n_vehicles;
        let l = self.model.vehicle_length;
        let ic = &self.platoon.initial;
        let init = match (&ic.x0, &ic.v0) {
            (Some(x0), Some(v0)) => InitialState {
                x0: x0.clone(),
                v0: v0.clone(),
            },
            (None, None) => {
                let speed = ic.speed.unwrap_or(leader.velocities()[0]);
                let gap = match ic.gap {
                    Some(g) => g,
                    None => self.model.equilibrium_headway(speed).map_err(|_| {
                        PlatoonError::InfeasibleInitial(format!(
                            "no equilibrium headway for speed {speed} m/s; set platoon.initial.gap"
                        ))
                    })?,
                };
                InitialState::uniform(n, leader.positions()[0], gap, speed, l)
            }
            _ => {
                return Err(PlatoonError::Config(
                    "platoon.initial.x0 and platoon.initial.v0 must be given together".into(),
                ))
            }
        };
        init.validate(n, leader.positions()[0], l, self.platoon.min_initial_gap)?;
        Ok(init)
    }

    /// Builds every runtime object; `base_dir` resolves relative paths.
    pub fn build(&self, base_dir: &Path) -> Result<Scenario> {
        self.validate()?;
        let leader = self.leader(base_dir)?;
        let init = self.initial_state(&leader)?;
        let platoon = Platoon::new(self.model, self.layout()?, leader)?;
        let problem = Problem::uniform(platoon, init, self.grid()?, self.control_step, self.objective)?
            .with_scheme(self.solver.costate);
        Ok(Scenario {
            config: self.clone(),
            problem,
        })
    }
}

/// A validated scenario ready to simulate or optimize.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub problem: Problem<f64>,
}

impl Scenario {
    /// Same scenario with a different AV set (0-based slots).
    pub fn with_layout(&self, layout: PlatoonLayout) -> Result<Scenario> {
        let mut config = self.config.clone();
        config.platoon.av_positions = layout.av_slots().iter().map(|s| s + 1).collect();
        let p = &self.problem;
        let platoon = Platoon::new(p.platoon.params, layout, p.platoon.leader.clone())?;
        let problem = Problem::uniform(platoon, p.init.clone(), p.grid, config.control_step, p.objective)?
            .with_scheme(p.scheme);
        Ok(Scenario { config, problem })
    }
}
