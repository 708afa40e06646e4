//! Baseline runs and the penetration-rate sweep.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSchedule, InitialState, LeaderTrajectory, Platoon, PlatoonLayout, StateTrajectory};
use crate::error::Result;
use crate::metrics::Metrics;
use crate::optimizer::{solve, warm_start_penetration, OptimizationResult};
use crate::problem::Problem;
use crate::scenario::config::Scenario;

/// Simulates the scenario with every vehicle human-driven.
pub fn baseline_all_human(scenario: &Scenario) -> Result<(StateTrajectory<f64>, Metrics<f64>)> {
    let sc = scenario.with_layout(PlatoonLayout::all_human(scenario.config.platoon.n_vehicles)?)?;
    let p = &sc.problem;
    let controls = p.zero_controls();
    let traj = p.simulate(&controls)?;
    let metrics = Metrics::compute(&p.platoon, &traj, &controls, &sc.config.energy)?;
    Ok((traj, metrics))
}

/// Optimal controls of a lone AV behind the leader, started where the
/// first follower of `scenario` starts. Its schedule seeds new AVs in the
/// sweep.
pub fn single_av_reference(scenario: &Scenario) -> Result<OptimizationResult<f64>> {
    let p = &scenario.problem;
    lone_av_reference(scenario, p.platoon.leader.clone(), p.init.x0[0], p.init.v0[0])
}

/// Optimal controls of a single AV following `leader` from `(x0, v0)`,
/// on the grid, control intervals and objective of `scenario`.
pub fn lone_av_reference(
    scenario: &Scenario,
    leader: LeaderTrajectory<f64>,
    x0: f64,
    v0: f64,
) -> Result<OptimizationResult<f64>> {
    let cfg = &scenario.config;
    let p = &scenario.problem;
    let platoon = Platoon::new(p.platoon.params, PlatoonLayout::all_autonomous(1)?, leader)?;
    let init = InitialState {
        x0: vec![x0],
        v0: vec![v0],
    };
    let problem = Problem::new(platoon, init, p.grid, p.tau().to_vec(), p.objective)?.with_scheme(p.scheme);
    solve(&problem, &cfg.solver, &problem.zero_controls(), &cfg.energy)
}

/// How a warm-started sweep seeds the AV it adds in each leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NewAvSeed {
    /// Lone-AV optimum behind the new AV's predecessor, as that vehicle
    /// moved in the previous leg. Equals `Leader` for the first AV.
    #[default]
    Predecessor,
    /// Lone-AV optimum behind the platoon leader, for every new AV.
    Leader,
}

/// Vehicle `slot` of a finished run, replayed as a leader.
fn vehicle_as_leader(
    sc: &Scenario,
    traj: &StateTrajectory<f64>,
    controls: &ControlSchedule<f64>,
    slot: usize,
) -> Result<LeaderTrajectory<f64>> {
    let n = traj.n_vehicles();
    let acc = sc.problem.platoon.accelerations(traj, controls)?;
    let column = |v: &[f64]| v.iter().skip(slot).step_by(n).copied().collect::<Vec<_>>();
    LeaderTrajectory::new(
        traj.grid().step(),
        column(traj.positions()),
        column(traj.velocities()),
        column(&acc),
    )
}

/// Schedule for a new AV at `slot`, given the previous leg (`None` when the
/// platoon had no AVs yet).
pub fn new_av_schedule(scenario: &Scenario, prev: Option<&SweepLeg>, slot: usize, seed: NewAvSeed) -> Result<Vec<f64>> {
    if slot == 0 || seed == NewAvSeed::Leader {
        return Ok(u_init_values(&single_av_reference(scenario)?));
    }
    let leader = match prev {
        Some(leg) => {
            let sc = scenario.with_layout(leg.layout.clone())?;
            vehicle_as_leader(&sc, &leg.result.trajectory, &leg.result.controls, slot - 1)?
        }
        None => {
            let sc = scenario.with_layout(PlatoonLayout::all_human(scenario.config.platoon.n_vehicles)?)?;
            let controls = sc.problem.zero_controls();
            let traj = sc.problem.simulate(&controls)?;
            vehicle_as_leader(&sc, &traj, &controls, slot - 1)?
        }
    };
    let p = &scenario.problem;
    Ok(u_init_values(&lone_av_reference(scenario, leader, p.init.x0[slot], p.init.v0[slot])?))
}

/// One optimization of the sweep.
#[derive(Debug, Clone)]
pub struct SweepLeg {
    pub n_av: usize,
    pub layout: PlatoonLayout,
    pub result: OptimizationResult<f64>,
}

/// Starting controls for a leg with `n_av` AVs: every AV follows `u_init`.
pub fn cold_start(scenario: &Scenario, layout: &PlatoonLayout, u_init: &[f64]) -> Result<ControlSchedule<f64>> {
    let sc = scenario.with_layout(layout.clone())?;
    let mut c = sc.problem.zero_controls();
    for (k, &u) in u_init.iter().enumerate() {
        for i in 0..layout.n_av() {
            c.set(k, i, u);
        }
    }
    Ok(c)
}

/// Optimizes `scenario` with the AV set `layout` from `init`.
pub fn run_leg(scenario: &Scenario, layout: &PlatoonLayout, init: &ControlSchedule<f64>) -> Result<SweepLeg> {
    let sc = scenario.with_layout(layout.clone())?;
    let result = solve(&sc.problem, &sc.config.solver, init, &sc.config.energy)?;
    Ok(SweepLeg {
        n_av: layout.n_av(),
        layout: layout.clone(),
        result,
    })
}

/// Leg with one more spaced AV than `prev`, warm-started from it.
pub fn next_leg(scenario: &Scenario, prev: Option<&SweepLeg>, seed: NewAvSeed) -> Result<SweepLeg> {
    let n = scenario.config.platoon.n_vehicles;
    let m = prev.map_or(0, |l| l.n_av) + 1;
    let layout = PlatoonLayout::spaced(n, m)?;
    let (prev_layout, prev_controls) = match prev {
        Some(leg) => (leg.layout.clone(), leg.result.controls.clone()),
        None => (
            PlatoonLayout::all_human(n)?,
            ControlSchedule::new(scenario.problem.tau().to_vec(), 0, Vec::new())?,
        ),
    };
    let u = new_av_schedule(scenario, prev, layout.av_slots()[m - 1], seed)?;
    let init = warm_start_penetration(&prev_controls, &prev_layout, &layout, &u)?;
    run_leg(scenario, &layout, &init)
}

/// Sequential sweep over `1..=max_avs` spaced AVs, each leg warm-started
/// from the previous one.
pub fn sweep_warm(scenario: &Scenario, max_avs: usize, seed: NewAvSeed) -> Result<Vec<SweepLeg>> {
    let mut legs: Vec<SweepLeg> = Vec::with_capacity(max_avs);
    for _ in 0..max_avs {
        let leg = next_leg(scenario, legs.last(), seed)?;
        legs.push(leg);
    }
    Ok(legs)
}

/// `u_init` as one value per control interval.
pub fn u_init_values(reference: &OptimizationResult<f64>) -> Vec<f64> {
    reference.controls.values().to_vec()
}
