//! Scenario loading and output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use platoon_core::optimizer::{OuterPass, StopReason};
use platoon_core::scenario::export::{write_controls_csv, TrajectoryTable};
use platoon_core::scenario::{Scenario, ScenarioConfig};
use platoon_core::{ControlSchedule, Metrics, OptimizationResult, StateTrajectory, ViolationReport};

use crate::{CliError, Common};

/// Loads and builds the scenario; every failure here is an input error.
pub fn load_scenario(common: &Common) -> Result<Scenario, CliError> {
    let invalid = |e: platoon_core::PlatoonError| CliError::Invalid(e.to_string());
    let (config, base) = match &common.config {
        Some(path) => {
            let cfg = ScenarioConfig::load(path, &common.overrides).map_err(invalid)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        None => (ScenarioConfig::with_overrides(&common.overrides).map_err(invalid)?, PathBuf::new()),
    };
    config.build(&base).map_err(invalid)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    write_file(path, text.as_bytes())
}

pub fn write_controls(path: &Path, controls: &ControlSchedule<f64>, av_slots: &[usize]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_controls_csv(&mut buf, controls, av_slots).expect("writing to memory");
    write_file(path, &buf)
}

pub fn write_trajectories(
    path: &Path,
    scenario: &Scenario,
    traj: &StateTrajectory<f64>,
    controls: &ControlSchedule<f64>,
) -> Result<(), CliError> {
    let table = TrajectoryTable::from_run(&scenario.problem.platoon, traj, controls)?;
    table.save(path).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Reads a control CSV (`t_start,t_end,vehicle,value`) onto the scenario's
/// control grid.
pub fn read_controls(path: &Path, scenario: &Scenario) -> Result<ControlSchedule<f64>, CliError> {
    let invalid = |m: String| CliError::Invalid(format!("{}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
    let p = &scenario.problem;
    let mut controls = p.zero_controls();
    let slots = p.platoon.layout.av_slots().to_vec();
    let mut seen = vec![false; controls.values().len()];
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t_start,t_end,vehicle,value") {
        return Err(invalid("expected header t_start,t_end,vehicle,value".into()));
    }
    for (row, line) in lines.enumerate().map(|(k, l)| (k + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| invalid(format!("row {row}: bad number `{s}`")));
        if f.len() != 4 {
            return Err(invalid(format!("row {row}: expected 4 fields")));
        }
        let (t0, vehicle, value) = (num(f[0])?, num(f[2])? as usize, num(f[3])?);
        let k = controls.interval_at(t0).map_err(|e| invalid(e.to_string()))?;
        if (controls.tau()[k] - t0).abs() > 1e-9 * (1.0 + t0.abs()) {
            return Err(invalid(format!("row {row}: {t0} s is not a control boundary")));
        }
        let col = slots
            .iter()
            .position(|&s| s + 1 == vehicle)
            .ok_or_else(|| invalid(format!("row {row}: vehicle {vehicle} is not autonomous in this scenario")))?;
        controls.set(k, col, value);
        seen[k * slots.len() + col] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(invalid("controls do not cover every interval and AV".into()));
    }
    Ok(controls)
}

/// Contents of `metrics.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub av_positions: Vec<usize>,
    pub metrics: Metrics<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub optimization: Option<OptimizationSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub objective: f64,
    pub reason: String,
    pub evaluations: usize,
    pub violations: serde_json::Value,
    pub passes: serde_json::Value,
    pub objective_history: Vec<f64>,
}

impl OptimizationSummary {
    pub fn from_result(r: &OptimizationResult<f64>) -> Self {
        let reason = match r.reason {
            StopReason::Converged => "converged",
            StopReason::FeasibleNotStationary => "feasible_not_stationary",
            StopReason::PenaltyLimit => "penalty_limit",
        };
        let passes: &[OuterPass<f64>] = &r.passes;
        let violations: &ViolationReport<f64> = &r.violations;
        Self {
            objective: r.objective,
            reason: reason.to_string(),
            evaluations: r.evaluations,
            violations: serde_json::to_value(violations).expect("serializes"),
            passes: serde_json::to_value(passes).expect("serializes"),
            objective_history: r.objective_history.clone(),
        }
    }
}

pub fn read_summary(dir: &Path) -> Result<RunSummary, CliError> {
    let path = dir.join("metrics.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}
