//! Penalty-escalation solver with projected descent and Armijo backtracking.
//!
//! The outer loop raises the penalty weight until the audited constraint
//! violations fall below tolerance; every outer pass warm-starts an inner
//! descent from the previous controls.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::adjoint::CostateScheme;
use crate::dynamics::{ControlSchedule, Platoon, PlatoonLayout, StateTrajectory};
use crate::error::{PlatoonError, Result};
use crate::metrics::Metrics;
use crate::objective::{EnergyParams, ObjectiveConfig};
use crate::problem::{Evaluation, Problem};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Negative gradient with Barzilai–Borwein initial steps.
    Steepest,
    /// Limited-memory BFGS two-loop recursion.
    #[default]
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions<S> {
    pub mu0: S,
    pub mu_growth: S,
    pub mu_max: S,
    pub outer_max: usize,
    pub inner_max: usize,
    pub armijo_c: S,
    pub armijo_shrink: S,
    /// Max-norm of the first trial move (m/s²).
    pub step0: S,
    /// Stop when `|projected gradient|_inf <= grad_tol * (1 + |J|)`.
    pub grad_tol: S,
    /// Admissible constraint violation (m and m/s).
    pub violation_tol: S,
    /// Optional `(a_min, a_max)` box on the controls.
    pub bounds: Option<(S, S)>,
    pub direction: Direction,
    pub lbfgs_memory: usize,
    pub costate: CostateScheme,
}

impl<S: Scalar> Default for SolverOptions<S> {
    fn default() -> Self {
        Self {
            mu0: S::lit(10.0),
            mu_growth: S::lit(10.0),
            mu_max: S::lit(1e8),
            outer_max: 8,
            inner_max: 200,
            armijo_c: S::lit(1e-4),
            armijo_shrink: S::lit(0.5),
            step0: S::one(),
            grad_tol: S::lit(1e-6),
            violation_tol: S::lit(1e-3),
            bounds: None,
            direction: Direction::Lbfgs,
            lbfgs_memory: 30,
            costate: CostateScheme::Discrete,
        }
    }
}

impl<S: Scalar> SolverOptions<S> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PlatoonError::Config(m.to_string()));
        if !(self.mu0 >= S::zero() && self.mu_max >= self.mu0) {
            return bad("need 0 <= mu0 <= mu_max");
        }
        if !(self.mu_growth > S::one()) {
            return bad("mu_growth must exceed 1");
        }
        if !(self.armijo_c > S::zero() && self.armijo_c < S::one()) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.armijo_shrink > S::zero() && self.armijo_shrink < S::one()) {
            return bad("armijo_shrink must lie in (0, 1)");
        }
        if !(self.step0 > S::zero() && self.grad_tol > S::zero() && self.violation_tol > S::zero()) {
            return bad("step0, grad_tol and violation_tol must be positive");
        }
        if self.outer_max == 0 || self.lbfgs_memory == 0 {
            return bad("outer_max and lbfgs_memory must be positive");
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo <= hi) {
                return bad("control bounds must satisfy a_min <= a_max");
            }
        }
        Ok(())
    }
}

/// Worst signed margin of one constraint family; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margin<S> {
    pub worst: S,
    pub time: S,
    /// 1-based vehicle number.
    pub vehicle: usize,
}

/// Constraint margins of the controlled vehicles over the state grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationReport<S> {
    pub min_headway: Option<Margin<S>>,
    pub max_headway: Option<Margin<S>>,
    pub velocity: Option<Margin<S>>,
}

impl<S: Scalar> ViolationReport<S> {
    /// Largest violation over all families, zero when every margin holds.
    pub fn max_violation(&self) -> S {
        [self.min_headway, self.max_headway, self.velocity]
            .iter()
            .flatten()
            .map(|m| (-m.worst).max(S::zero()))
            .fold(S::zero(), S::max)
    }

    pub fn is_feasible(&self, tol: S) -> bool {
        self.max_violation() <= tol
    }
}

fn update_margin<S: Scalar>(slot: &mut Option<Margin<S>>, value: S, time: S, vehicle: usize) {
    if slot.map_or(true, |m| value < m.worst) {
        *slot = Some(Margin {
            worst: value,
            time,
            vehicle,
        });
    }
}

/// Scans every sample for headway and velocity margins of the AVs.
pub fn audit_feasibility<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    traj: &StateTrajectory<S>,
) -> ViolationReport<S> {
    let mut rep = ViolationReport {
        min_headway: None,
        max_headway: None,
        velocity: None,
    };
    let grid = traj.grid();
    for j in 0..traj.n_samples() {
        let t = grid.time(j);
        let (x, v) = (traj.x(j), traj.v(j));
        for &i in platoon.layout.av_slots() {
            let xl = if i == 0 { platoon.leader.positions()[j] } else { x[i - 1] };
            let gap = platoon.params.headway(x[i], xl);
            update_margin(&mut rep.min_headway, gap - obj.d_safe, t, i + 1);
            update_margin(&mut rep.max_headway, obj.d_max - gap, t, i + 1);
            update_margin(&mut rep.velocity, v[i], t, i + 1);
        }
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Constraints hold within tolerance after a converged inner pass.
    Converged,
    /// Constraints hold but the last inner pass hit its iteration cap or
    /// stalled in the line search.
    FeasibleNotStationary,
    /// Penalty reached `mu_max` (or passes ran out) with violations left.
    PenaltyLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStop {
    Stationary,
    IterationLimit,
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterPass<S> {
    pub mu: S,
    pub iterations: usize,
    pub stop: InnerStop,
    pub objective: S,
    pub violations: ViolationReport<S>,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult<S> {
    pub controls: ControlSchedule<S>,
    pub trajectory: StateTrajectory<S>,
    /// Objective after every accepted inner step, including each pass's
    /// starting value; the penalty weight changes between passes.
    pub objective_history: Vec<S>,
    pub passes: Vec<OuterPass<S>>,
    /// Objective at the final penalty weight.
    pub objective: S,
    pub violations: ViolationReport<S>,
    pub metrics: Metrics<S>,
    pub reason: StopReason,
    pub evaluations: usize,
}

impl<S: Scalar> OptimizationResult<S> {
    pub fn converged(&self) -> bool {
        self.reason == StopReason::Converged
    }

    pub fn violation_history(&self) -> Vec<S> {
        self.passes.iter().map(|p| p.violations.max_violation()).collect()
    }
}

fn project<S: Scalar>(w: &mut [S], bounds: Option<(S, S)>) {
    if let Some((lo, hi)) = bounds {
        for x in w {
            *x = x.max(lo).min(hi);
        }
    }
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&p, &q)| p * q).sum()
}

fn inf_norm<S: Scalar>(a: &[S]) -> S {
    a.iter().map(|x| x.abs()).fold(S::zero(), S::max)
}

/// Projected gradient `omega - P(omega - g)`.
fn projected_gradient<S: Scalar>(omega: &[S], g: &[S], bounds: Option<(S, S)>) -> Vec<S> {
    match bounds {
        None => g.to_vec(),
        Some((lo, hi)) => omega
            .iter()
            .zip(g)
            .map(|(&w, &d)| w - (w - d).max(lo).min(hi))
            .collect(),
    }
}

/// Outcome of [`line_search`].
#[derive(Debug, Clone)]
pub enum LineSearch<S> {
    Accepted { step: S, omega: Vec<S>, eval: Evaluation<S>, trials: usize },
    Stalled { trials: usize },
}

/// Backtracking from `step` along `dir` until
/// `J(P(omega + s dir)) <= J(omega) + c <g, P(omega + s dir) - omega>`.
///
/// Trial points whose simulation collides count as infinitely expensive.
pub fn line_search<S: Scalar>(
    problem: &Problem<S>,
    omega: &[S],
    current: &Evaluation<S>,
    dir: &[S],
    step: S,
    opts: &SolverOptions<S>,
) -> Result<LineSearch<S>> {
    let mut s = step;
    let scale = S::one() + inf_norm(omega);
    let mut trials = 0;
    let dir_norm = inf_norm(dir);
    if dir_norm == S::zero() {
        return Ok(LineSearch::Stalled { trials });
    }
    loop {
        if s * dir_norm <= S::epsilon() * scale {
            return Ok(LineSearch::Stalled { trials });
        }
        let mut trial: Vec<S> = omega.iter().zip(dir).map(|(&w, &d)| w + s * d).collect();
        project(&mut trial, opts.bounds);
        let moved: Vec<S> = trial.iter().zip(omega).map(|(&a, &b)| a - b).collect();
        trials += 1;
        match problem.value_and_trajectory(&trial) {
            Ok((value, traj)) => {
                let bound = current.value + opts.armijo_c * dot(&current.gradient, &moved);
                if value.is_finite() && value <= bound && value < current.value {
                    let eval = problem.complete(&trial, value, traj)?;
                    return Ok(LineSearch::Accepted {
                        step: s,
                        omega: trial,
                        eval,
                        trials,
                    });
                }
            }
            Err(PlatoonError::Collision { .. }) | Err(PlatoonError::Domain { .. }) => {}
            Err(e) => return Err(e),
        }
        s *= opts.armijo_shrink;
    }
}

struct InnerOutcome<S> {
    omega: Vec<S>,
    eval: Evaluation<S>,
    iterations: usize,
    stop: InnerStop,
    evaluations: usize,
}

fn lbfgs_direction<S: Scalar>(g: &[S], memory: &VecDeque<(Vec<S>, Vec<S>, S)>) -> Vec<S> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|&x| -x).collect()
}

fn inner_descent<S: Scalar>(
    problem: &Problem<S>,
    omega: Vec<S>,
    eval: Evaluation<S>,
    opts: &SolverOptions<S>,
    memory: &mut VecDeque<(Vec<S>, Vec<S>, S)>,
    history: &mut Vec<S>,
) -> Result<InnerOutcome<S>> {
    let mut omega = omega;
    let mut eval = eval;
    let mut prev_step: Option<(Vec<S>, Vec<S>)> = None;
    let mut evaluations = 0;
    history.push(eval.value);

    for it in 0..opts.inner_max {
        let pg = projected_gradient(&omega, &eval.gradient, opts.bounds);
        if inf_norm(&pg) <= opts.grad_tol * (S::one() + eval.value.abs()) {
            return Ok(InnerOutcome { omega, eval, iterations: it, stop: InnerStop::Stationary, evaluations });
        }
        let steepest: Vec<S> = eval.gradient.iter().map(|&g| -g).collect();
        let (dir, step) = match opts.direction {
            Direction::Lbfgs if !memory.is_empty() && opts.bounds.is_none() => {
                let d = lbfgs_direction(&eval.gradient, memory);
                if dot(&d, &eval.gradient) < S::zero() {
                    (d, S::one())
                } else {
                    memory.clear();
                    let s = opts.step0 / inf_norm(&steepest);
                    (steepest, s)
                }
            }
            _ => {
                let s = match &prev_step {
                    Some((s, y)) if dot(s, y) > S::zero() => dot(s, s) / dot(s, y),
                    _ => opts.step0 / inf_norm(&steepest),
                };
                (steepest, s)
            }
        };
        let ls = line_search(problem, &omega, &eval, &dir, step, opts)?;
        match ls {
            LineSearch::Accepted { omega: next, eval: next_eval, trials, .. } => {
                evaluations += trials;
                let s: Vec<S> = next.iter().zip(&omega).map(|(&a, &b)| a - b).collect();
                let y: Vec<S> = next_eval.gradient.iter().zip(&eval.gradient).map(|(&a, &b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > S::epsilon() * dot(&y, &y) {
                    memory.push_back((s.clone(), y.clone(), S::one() / sy));
                    if memory.len() > opts.lbfgs_memory {
                        memory.pop_front();
                    }
                }
                prev_step = Some((s, y));
                omega = next;
                eval = next_eval;
                history.push(eval.value);
            }
            LineSearch::Stalled { trials } => {
                evaluations += trials;
                if !memory.is_empty() {
                    // retry once from the steepest-descent direction
                    memory.clear();
                    prev_step = None;
                    continue;
                }
                return Ok(InnerOutcome { omega, eval, iterations: it, stop: InnerStop::Stalled, evaluations });
            }
        }
    }
    Ok(InnerOutcome {
        omega,
        eval,
        iterations: opts.inner_max,
        stop: InnerStop::IterationLimit,
        evaluations,
    })
}

/// Runs the penalty loop from `init`.
pub fn solve<S: Scalar>(
    problem: &Problem<S>,
    opts: &SolverOptions<S>,
    init: &ControlSchedule<S>,
    energy: &EnergyParams<S>,
) -> Result<OptimizationResult<S>> {
    opts.validate()?;
    let mut omega = problem.controls(init.values())?.values().to_vec();
    project(&mut omega, opts.bounds);
    let mut mu = opts.mu0;
    let mut history = Vec::new();
    let mut passes = Vec::new();
    let mut evaluations = 0;
    let base = problem.clone().with_scheme(opts.costate);
    // curvature pairs carry over between penalty passes
    let mut memory = VecDeque::new();

    loop {
        let current = base.with_objective(base.objective.with_mu(mu));
        let eval = current.value_and_gradient(&omega)?;
        evaluations += 1;
        let out = inner_descent(&current, omega, eval, opts, &mut memory, &mut history)?;
        evaluations += out.evaluations;
        omega = out.omega;
        let violations = audit_feasibility(&current.platoon, &current.objective, &out.eval.trajectory);
        passes.push(OuterPass {
            mu,
            iterations: out.iterations,
            stop: out.stop,
            objective: out.eval.value,
            violations,
        });
        let feasible = violations.is_feasible(opts.violation_tol);
        let exhausted = mu >= opts.mu_max || passes.len() >= opts.outer_max;
        if feasible || exhausted {
            let reason = match (feasible, out.stop) {
                (true, InnerStop::Stationary) => StopReason::Converged,
                (true, _) => StopReason::FeasibleNotStationary,
                (false, _) => StopReason::PenaltyLimit,
            };
            let controls = current.controls(&omega)?;
            let metrics = Metrics::compute(&current.platoon, &out.eval.trajectory, &controls, energy)?;
            return Ok(OptimizationResult {
                controls,
                trajectory: out.eval.trajectory,
                objective_history: history,
                passes,
                objective: out.eval.value,
                violations,
                metrics,
                reason,
                evaluations,
            });
        }
        mu = (mu * opts.mu_growth).min(opts.mu_max);
    }
}

/// Initial controls for a layout that adds AVs downstream of `prev_layout`:
/// existing AVs keep their schedules from `prev`, every new one gets
/// `u_init` (one value per control interval).
pub fn warm_start_penetration<S: Scalar>(
    prev: &ControlSchedule<S>,
    prev_layout: &PlatoonLayout,
    new_layout: &PlatoonLayout,
    u_init: &[S],
) -> Result<ControlSchedule<S>> {
    let old = prev_layout.av_slots();
    let new = new_layout.av_slots();
    let mismatch = |m: String| Err(PlatoonError::Config(m));
    if new.len() <= old.len() || new[..old.len()] != *old {
        return mismatch(format!(
            "warm start needs the new AV set {new:?} to extend {old:?} by downstream vehicles"
        ));
    }
    if prev.n_av() != old.len() {
        return mismatch("previous controls do not match the previous layout".into());
    }
    let p = prev.n_intervals();
    if u_init.len() != p {
        return mismatch(format!("u_init has {} values, expected {p}", u_init.len()));
    }
    let m = new.len();
    let mut omega = Vec::with_capacity(p * m);
    for (k, &u) in u_init.iter().enumerate() {
        omega.extend_from_slice(prev.interval(k));
        omega.extend(std::iter::repeat(u).take(m - old.len()));
    }
    ControlSchedule::new(prev.tau().to_vec(), m, omega)
}
