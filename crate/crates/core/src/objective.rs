//! Running cost, headway and velocity penalties, and the fuel model.
//!
//! The running cost splits into a state part and a control part:
//!
//! ```text
//! L(t, y, u) = sum_{AV} u_i^2 + [full mode] sum_{HV} Acc_i^2
//!            + mu * sum_{AV} (P_min(gap_i) + P_max(gap_i) + P_vel(v_i))
//! ```
//!
//! The state part is integrated with the trapezoid rule on the state grid.
//! The control part is piecewise constant per step and integrated exactly.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSchedule, Platoon, StateGrid, StateTrajectory};
use crate::error::{PlatoonError, Result};
use crate::scalar::Scalar;

/// Which vehicles' accelerations enter the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// Every vehicle of the platoon.
    #[default]
    Full,
    /// Autonomous vehicles only.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCost {
    #[default]
    Zero,
    /// `0.5 * sum_i v_i(T)^2`.
    HalfSquaredSpeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyDirection {
    /// Penalizes `gap < threshold`.
    Min,
    /// Penalizes `gap > threshold`.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig<S> {
    pub mode: ObjectiveMode,
    /// Penalty weight.
    pub mu: S,
    /// Minimum AV headway (m).
    pub d_safe: S,
    /// Maximum AV headway (m).
    pub d_max: S,
    pub terminal_cost: TerminalCost,
    /// Penalize negative AV velocities.
    pub velocity_penalty: bool,
}

impl<S: Scalar> Default for ObjectiveConfig<S> {
    fn default() -> Self {
        Self {
            mode: ObjectiveMode::Full,
            mu: S::lit(10.0),
            d_safe: S::lit(5.0),
            d_max: S::lit(120.0),
            terminal_cost: TerminalCost::Zero,
            velocity_penalty: true,
        }
    }
}

impl<S: Scalar> ObjectiveConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= S::zero()) || !self.mu.is_finite() {
            return Err(PlatoonError::Config(format!("mu must be nonnegative, got {}", self.mu)));
        }
        if !(self.d_safe > S::zero() && self.d_safe < self.d_max) || !self.d_max.is_finite() {
            return Err(PlatoonError::Config(format!(
                "need 0 < d_safe < d_max, got d_safe {} and d_max {}",
                self.d_safe, self.d_max
            )));
        }
        Ok(())
    }

    pub fn with_mu(mut self, mu: S) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_mode(mut self, mode: ObjectiveMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Quadratic one-sided penalty and its derivative with respect to `gap`.
#[inline]
pub fn headway_penalty<S: Scalar>(gap: S, threshold: S, direction: PenaltyDirection) -> (S, S) {
    let two = S::lit(2.0);
    match direction {
        PenaltyDirection::Min => {
            let m = (gap - threshold).min(S::zero());
            (m * m, two * m)
        }
        PenaltyDirection::Max => {
            let m = (threshold - gap).min(S::zero());
            (m * m, -two * m)
        }
    }
}

#[inline]
fn velocity_penalty<S: Scalar>(v: S) -> (S, S) {
    let m = v.min(S::zero());
    (m * m, S::lit(2.0) * m)
}

/// Trapezoid weight of sample `j`.
#[inline]
pub fn trapezoid_weight<S: Scalar>(grid: &StateGrid<S>, j: usize) -> S {
    if j == 0 || j == grid.n_steps() {
        grid.step() * S::lit(0.5)
    } else {
        grid.step()
    }
}

/// State-dependent part of the running cost at one instant.
pub fn state_cost<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    t: S,
    lead: (S, S),
    x: &[S],
    v: &[S],
) -> Result<S> {
    state_cost_impl(platoon, obj, t, lead, x, v, None)
}

/// Like [`state_cost`], additionally accumulating its gradient with respect
/// to `(x, v)` into `grad_x` and `grad_v`.
#[allow(clippy::too_many_arguments)]
pub fn state_cost_with_grad<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    t: S,
    lead: (S, S),
    x: &[S],
    v: &[S],
    grad_x: &mut [S],
    grad_v: &mut [S],
) -> Result<S> {
    state_cost_impl(platoon, obj, t, lead, x, v, Some((grad_x, grad_v)))
}

fn state_cost_impl<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    t: S,
    lead: (S, S),
    x: &[S],
    v: &[S],
    mut grad: Option<(&mut [S], &mut [S])>,
) -> Result<S> {
    let p = &platoon.params;
    let two = S::lit(2.0);
    let full = obj.mode == ObjectiveMode::Full;
    let kernel = p.kernel();
    let mut cost = S::zero();
    let (mut xl, mut vl) = lead;
    for i in 0..x.len() {
        let gap = p.headway(x[i], xl);
        if platoon.layout.is_av(i) {
            let (pmin, dmin) = headway_penalty(gap, obj.d_safe, PenaltyDirection::Min);
            let (pmax, dmax) = headway_penalty(gap, obj.d_max, PenaltyDirection::Max);
            let (pvel, dvel) = if obj.velocity_penalty {
                velocity_penalty(v[i])
            } else {
                (S::zero(), S::zero())
            };
            cost += obj.mu * (pmin + pmax + pvel);
            if let Some((gx, gv)) = grad.as_mut() {
                let dgap = obj.mu * (dmin + dmax);
                gx[i] -= dgap;
                if i > 0 {
                    gx[i - 1] += dgap;
                }
                gv[i] += obj.mu * dvel;
            }
        } else if full {
            if !(gap > S::zero()) {
                return Err(PlatoonError::Collision {
                    vehicle: i + 1,
                    time: t.as_f64(),
                    gap: gap.as_f64(),
                });
            }
            if let Some((gx, gv)) = grad.as_mut() {
                let (acc, d) = kernel.with_partials(gap, v[i], vl);
                cost += acc * acc;
                let s = two * acc;
                gx[i] += s * d.d_x;
                gv[i] += s * d.d_v;
                if i > 0 {
                    gx[i - 1] += s * d.d_x_lead;
                    gv[i - 1] += s * d.d_v_lead;
                }
            } else {
                let acc = kernel.acceleration(gap, v[i], vl);
                cost += acc * acc;
            }
        }
        xl = x[i];
        vl = v[i];
    }
    Ok(cost)
}

/// Control part of the running cost, `sum_i u_i^2`.
#[inline]
pub fn control_cost<S: Scalar>(u: &[S]) -> S {
    u.iter().map(|&w| w * w).sum()
}

/// Full running cost `L(t, y, u)`.
pub fn running_cost<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    t: S,
    lead: (S, S),
    x: &[S],
    v: &[S],
    u: &[S],
) -> Result<S> {
    Ok(state_cost(platoon, obj, t, lead, x, v)? + control_cost(u))
}

/// Partials `(L_y, L_u)` of the running cost; `L_y` is laid out as
/// `(x_1..x_n, v_1..v_n)`.
pub fn running_cost_partials<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    t: S,
    lead: (S, S),
    x: &[S],
    v: &[S],
    u: &[S],
) -> Result<(Vec<S>, Vec<S>)> {
    let n = x.len();
    let mut ly = vec![S::zero(); 2 * n];
    let (gx, gv) = ly.split_at_mut(n);
    state_cost_with_grad(platoon, obj, t, lead, x, v, gx, gv)?;
    let lu = u.iter().map(|&w| S::lit(2.0) * w).collect();
    Ok((ly, lu))
}

/// Terminal cost and its gradient with respect to the final velocities.
pub fn terminal_cost<S: Scalar>(kind: TerminalCost, v: &[S]) -> (S, Vec<S>) {
    match kind {
        TerminalCost::Zero => (S::zero(), vec![S::zero(); v.len()]),
        TerminalCost::HalfSquaredSpeed => {
            let value = S::lit(0.5) * v.iter().map(|&w| w * w).sum::<S>();
            (value, v.to_vec())
        }
    }
}

/// Discretized objective: trapezoid rule for the state cost, exact
/// integration of the piecewise-constant control cost, plus terminal cost.
pub fn total_objective<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    traj: &StateTrajectory<S>,
    controls: &ControlSchedule<S>,
) -> Result<S> {
    let grid = traj.grid();
    if traj.n_samples() != grid.n_samples() {
        return Err(PlatoonError::GridMismatch(
            "trajectory does not cover the state grid".into(),
        ));
    }
    let intervals = grid.step_intervals(controls.tau())?;
    let mut total = S::zero();
    for j in 0..grid.n_samples() {
        let lead = platoon.leader.sample_step(j, S::zero());
        total += trapezoid_weight(grid, j) * state_cost(platoon, obj, grid.time(j), lead, traj.x(j), traj.v(j))?;
    }
    let h = grid.step();
    for &k in &intervals {
        total += h * control_cost(controls.interval(k));
    }
    let (term, _) = terminal_cost(obj.terminal_cost, traj.v(grid.n_steps()));
    Ok(total + term)
}

/// Coefficients of the integrated instantaneous fuel model.
///
/// The defaults are a placeholder set of plausible magnitudes for a
/// passenger car, not a calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams<S> {
    pub c0: S,
    pub c1: S,
    pub c2: S,
    pub c3: S,
    pub p0: S,
    pub p1: S,
    pub p2: S,
    pub q0: S,
    pub q1: S,
}

impl<S: Scalar> Default for EnergyParams<S> {
    fn default() -> Self {
        Self {
            c0: S::zero(),
            c1: S::zero(),
            c2: S::lit(6.0e-6),
            c3: S::lit(1.5e-7),
            p0: S::lit(1.0e-3),
            p1: S::lit(1.0e-4),
            p2: S::lit(2.0e-6),
            q0: S::lit(2.0e-3),
            q1: S::lit(4.0e-4),
        }
    }
}

impl<S: Scalar> EnergyParams<S> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c0, self.c1, self.c2, self.c3, self.p0, self.p1, self.p2, self.q0, self.q1,
        ];
        if all.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(PlatoonError::Config("energy coefficients must be finite".into()))
        }
    }
}

/// Fuel of every vehicle and their sum.
///
/// `accelerations` is sample-major like the trajectory. Integrals use the
/// trapezoid rule on the state grid.
pub fn energy_metric<S: Scalar>(
    traj: &StateTrajectory<S>,
    accelerations: &[S],
    ep: &EnergyParams<S>,
) -> Result<(Vec<S>, S)> {
    let n = traj.n_vehicles();
    let grid = traj.grid();
    if accelerations.len() != traj.n_samples() * n || traj.n_samples() != grid.n_samples() {
        return Err(PlatoonError::GridMismatch(
            "acceleration series does not match the trajectory".into(),
        ));
    }
    let r = grid.n_steps();
    let (half, third) = (S::lit(0.5), S::one() / S::lit(3.0));
    let mut per = vec![S::zero(); n];
    for (i, fuel) in per.iter_mut().enumerate() {
        let (x_end, v_end) = (traj.x(r)[i], traj.v(r)[i]);
        let mut e = ep.c0 + ep.c1 * x_end + ep.p0 * v_end + half * ep.p1 * v_end * v_end
            + third * ep.p2 * v_end * v_end * v_end;
        for j in 0..=r {
            let v = traj.v(j)[i];
            let up = accelerations[j * n + i].max(S::zero());
            let rate = ep.c2 * v * v + ep.c3 * v * v * v + ep.q0 * up * up + ep.q1 * up * up * v;
            e += trapezoid_weight(grid, j) * rate;
        }
        *fuel = e;
    }
    let total = per.iter().copied().sum();
    Ok((per, total))
}
