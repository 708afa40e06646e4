//! A fully specified optimal-control instance.

use crate::adjoint::{assemble_gradient, simulate_adjoint_backward, CostateScheme};
use crate::dynamics::{ControlSchedule, InitialState, Platoon, StateGrid, StateTrajectory};
use crate::error::{PlatoonError, Result};
use crate::objective::{total_objective, ObjectiveConfig};
use crate::scalar::Scalar;

/// Platoon, initial state, grids and objective of one optimal-control
/// problem. Control values are passed as flat slices laid out like
/// [`ControlSchedule::values`].
#[derive(Debug, Clone)]
pub struct Problem<S> {
    pub platoon: Platoon<S>,
    pub init: InitialState<S>,
    pub grid: StateGrid<S>,
    pub objective: ObjectiveConfig<S>,
    pub scheme: CostateScheme,
    template: ControlSchedule<S>,
}

/// Objective value, gradient and the trajectory they were computed on.
#[derive(Debug, Clone)]
pub struct Evaluation<S> {
    pub value: S,
    pub gradient: Vec<S>,
    pub trajectory: StateTrajectory<S>,
}

impl<S: Scalar> Problem<S> {
    /// `tau` is the control grid; its interval boundaries must lie on `grid`.
    pub fn new(
        platoon: Platoon<S>,
        init: InitialState<S>,
        grid: StateGrid<S>,
        tau: Vec<S>,
        objective: ObjectiveConfig<S>,
    ) -> Result<Self> {
        objective.validate()?;
        let n_av = platoon.layout.n_av();
        let p = tau.len().saturating_sub(1);
        let template = ControlSchedule::new(tau, n_av, vec![S::zero(); p * n_av])?;
        platoon.check_inputs(&template, &init, &grid)?;
        Ok(Self {
            platoon,
            init,
            grid,
            objective,
            scheme: CostateScheme::default(),
            template,
        })
    }

    /// Problem with equal control intervals of width `dtau`.
    pub fn uniform(
        platoon: Platoon<S>,
        init: InitialState<S>,
        grid: StateGrid<S>,
        dtau: S,
        objective: ObjectiveConfig<S>,
    ) -> Result<Self> {
        let n_av = platoon.layout.n_av();
        let tau = ControlSchedule::uniform(grid.horizon(), dtau, n_av)?.tau().to_vec();
        Self::new(platoon, init, grid, tau, objective)
    }

    pub fn with_objective(&self, objective: ObjectiveConfig<S>) -> Self {
        Self {
            objective,
            ..self.clone()
        }
    }

    pub fn with_scheme(mut self, scheme: CostateScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn n_controls(&self) -> usize {
        self.template.values().len()
    }

    pub fn n_av(&self) -> usize {
        self.template.n_av()
    }

    pub fn tau(&self) -> &[S] {
        self.template.tau()
    }

    pub fn zero_controls(&self) -> ControlSchedule<S> {
        self.template.clone()
    }

    pub fn controls(&self, omega: &[S]) -> Result<ControlSchedule<S>> {
        if omega.len() != self.n_controls() {
            return Err(PlatoonError::GridMismatch(format!(
                "expected {} control values, got {}",
                self.n_controls(),
                omega.len()
            )));
        }
        self.template.with_values(omega.to_vec())
    }

    pub fn simulate(&self, controls: &ControlSchedule<S>) -> Result<StateTrajectory<S>> {
        self.platoon.simulate(controls, &self.init, &self.grid)
    }

    /// Objective of an already simulated trajectory.
    pub fn objective_of(&self, traj: &StateTrajectory<S>, controls: &ControlSchedule<S>) -> Result<S> {
        total_objective(&self.platoon, &self.objective, traj, controls)
    }

    pub fn evaluate(&self, omega: &[S]) -> Result<S> {
        let c = self.controls(omega)?;
        let traj = self.simulate(&c)?;
        self.objective_of(&traj, &c)
    }

    pub fn value_and_gradient(&self, omega: &[S]) -> Result<Evaluation<S>> {
        let (value, trajectory) = self.value_and_trajectory(omega)?;
        self.complete(omega, value, trajectory)
    }

    /// Objective and trajectory without the costate sweep.
    pub fn value_and_trajectory(&self, omega: &[S]) -> Result<(S, StateTrajectory<S>)> {
        let c = self.controls(omega)?;
        let trajectory = self.simulate(&c)?;
        let value = self.objective_of(&trajectory, &c)?;
        Ok((value, trajectory))
    }

    /// Adds the gradient to a result of [`Problem::value_and_trajectory`].
    pub fn complete(&self, omega: &[S], value: S, trajectory: StateTrajectory<S>) -> Result<Evaluation<S>> {
        let c = self.controls(omega)?;
        let adj = simulate_adjoint_backward(&self.platoon, &self.objective, &trajectory, &c, self.scheme)?;
        let gradient = assemble_gradient(&adj, &c)?;
        Ok(Evaluation {
            value,
            gradient,
            trajectory,
        })
    }
}
