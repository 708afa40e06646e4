//! Configuration, leader sources, baselines, reporting and export.

pub mod config;
pub mod export;
pub mod leader;
pub mod report;
pub mod sweep;

pub use config::{Scenario, ScenarioConfig};
pub use export::TrajectoryTable;
pub use leader::{load_leader_csv, synth_leader_stop_and_go, write_leader_csv, StopAndGo};
pub use sweep::{baseline_all_human, next_leg, single_av_reference, sweep_warm, NewAvSeed};
