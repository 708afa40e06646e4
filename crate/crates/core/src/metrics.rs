//! Squared-acceleration and fuel totals of a simulated platoon.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSchedule, Platoon, StateTrajectory};
use crate::error::Result;
use crate::objective::{energy_metric, trapezoid_weight, EnergyParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics<S> {
    /// `int a_i^2 dt` per vehicle.
    pub sq_acceleration: Vec<S>,
    pub total_sq_acceleration: S,
    pub fuel: Vec<S>,
    pub total_fuel: S,
}

impl<S: Scalar> Metrics<S> {
    /// Controlled vehicles integrate their piecewise-constant control
    /// exactly, human drivers use the trapezoid rule; this matches the
    /// full-mode objective without penalties.
    pub fn compute(
        platoon: &Platoon<S>,
        traj: &StateTrajectory<S>,
        controls: &ControlSchedule<S>,
        energy: &EnergyParams<S>,
    ) -> Result<Self> {
        let grid = traj.grid();
        let n = traj.n_vehicles();
        let acc = platoon.accelerations(traj, controls)?;
        let intervals = grid.step_intervals(controls.tau())?;
        let mut sq = vec![S::zero(); n];
        for (i, total) in sq.iter_mut().enumerate() {
            *total = match platoon.layout.av_column(i) {
                Some(col) => intervals
                    .iter()
                    .map(|&k| {
                        let u = controls.get(k, col);
                        grid.step() * u * u
                    })
                    .sum(),
                None => (0..grid.n_samples())
                    .map(|j| {
                        let a = acc[j * n + i];
                        trapezoid_weight(grid, j) * a * a
                    })
                    .sum(),
            };
        }
        let (fuel, total_fuel) = energy_metric(traj, &acc, energy)?;
        Ok(Self {
            total_sq_acceleration: sq.iter().copied().sum(),
            sq_acceleration: sq,
            fuel,
            total_fuel,
        })
    }
}
