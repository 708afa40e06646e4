use crate::dynamics::grid::StateGrid;
use crate::scalar::Scalar;

/// Positions and velocities of every follower on the state grid.
///
/// Storage is sample-major: row `j` holds the `n` vehicles at `t_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory<S> {
    grid: StateGrid<S>,
    n: usize,
    x: Vec<S>,
    v: Vec<S>,
}

impl<S: Scalar> StateTrajectory<S> {
    pub(crate) fn with_capacity(grid: StateGrid<S>, n: usize) -> Self {
        let cap = grid.n_samples() * n;
        Self {
            grid,
            n,
            x: Vec::with_capacity(cap),
            v: Vec::with_capacity(cap),
        }
    }

    pub(crate) fn push(&mut self, x: &[S], v: &[S]) {
        self.x.extend_from_slice(x);
        self.v.extend_from_slice(v);
    }

    pub fn grid(&self) -> &StateGrid<S> {
        &self.grid
    }

    pub fn n_vehicles(&self) -> usize {
        self.n
    }

    /// Number of stored samples; equals `grid().n_samples()` after a
    /// complete run.
    pub fn n_samples(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.x.len() / self.n
        }
    }

    #[inline]
    pub fn x(&self, j: usize) -> &[S] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn v(&self, j: usize) -> &[S] {
        &self.v[j * self.n..(j + 1) * self.n]
    }

    pub fn positions(&self) -> &[S] {
        &self.x
    }

    pub fn velocities(&self) -> &[S] {
        &self.v
    }

    /// Position history of vehicle `slot`.
    pub fn position_series(&self, slot: usize) -> Vec<S> {
        self.x.iter().skip(slot).step_by(self.n).copied().collect()
    }

    /// Velocity history of vehicle `slot`.
    pub fn velocity_series(&self, slot: usize) -> Vec<S> {
        self.v.iter().skip(slot).step_by(self.n).copied().collect()
    }
}
