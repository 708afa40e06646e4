//! Costate integration and gradients with respect to the control values.
//!
//! With `y = (x, v)` and running cost `L`, the costate satisfies
//!
//! ```text
//! lambda' = -L_y - f_y^T lambda,   lambda(T) = S_y,
//! f_y = [[0, I], [C, D]],
//! ```
//!
//! where `C` and `D` hold the car-following partials and are lower
//! bidiagonal with zero rows at controlled vehicles. The gradient
//! integrand at an AV slot is `L_u + lambda^v`.
//!
//! Two discretizations are available. [`CostateScheme::Discrete`] is the
//! exact reverse-mode derivative of the RK3 step and of the quadrature,
//! so it agrees with finite differences of the discrete objective to
//! round-off. [`CostateScheme::ContinuousRk3`] integrates the costate ODE
//! backward with the same RK3 tableau and reduces the integrand by the
//! trapezoid rule; it is consistent to second order in the state step.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rk3, ControlSchedule, Platoon, StateGrid, StateTrajectory};
use crate::error::{PlatoonError, Result};
use crate::interp::hermite;
use crate::objective::{state_cost_with_grad, terminal_cost, trapezoid_weight, ObjectiveConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostateScheme {
    #[default]
    Discrete,
    ContinuousRk3,
}

/// Nonzero entries of the lower-bidiagonal blocks `C` and `D`.
///
/// `c_sub[i]` is `C[i][i-1]`; `c_sub[0]` is unused and stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks<S> {
    pub c_diag: Vec<S>,
    pub c_sub: Vec<S>,
    pub d_diag: Vec<S>,
    pub d_sub: Vec<S>,
}

impl<S: Scalar> JacobianBlocks<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            c_diag: vec![S::zero(); n],
            c_sub: vec![S::zero(); n],
            d_diag: vec![S::zero(); n],
            d_sub: vec![S::zero(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.c_diag.len()
    }

    /// Fills the blocks at state `(x, v)` behind leader state `lead`.
    pub fn fill(&mut self, platoon: &Platoon<S>, t: S, lead: (S, S), x: &[S], v: &[S]) -> Result<()> {
        self.fill_impl(platoon, t, lead, x, v, None)
    }

    /// Like [`JacobianBlocks::fill`], also writing the accelerations under
    /// controls `u` into `acc`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fill_with_accelerations(
        &mut self,
        platoon: &Platoon<S>,
        t: S,
        lead: (S, S),
        x: &[S],
        v: &[S],
        u: &[S],
        acc: &mut [S],
    ) -> Result<()> {
        self.fill_impl(platoon, t, lead, x, v, Some((u, acc)))
    }

    fn fill_impl(
        &mut self,
        platoon: &Platoon<S>,
        t: S,
        lead: (S, S),
        x: &[S],
        v: &[S],
        mut acc: Option<(&[S], &mut [S])>,
    ) -> Result<()> {
        let p = &platoon.params;
        let kernel = p.kernel();
        let (mut xl, mut vl) = lead;
        for i in 0..x.len() {
            if let Some(col) = platoon.layout.av_column(i) {
                self.c_diag[i] = S::zero();
                self.c_sub[i] = S::zero();
                self.d_diag[i] = S::zero();
                self.d_sub[i] = S::zero();
                if let Some((u, out)) = acc.as_mut() {
                    out[i] = u[col];
                }
            } else {
                let h = p.headway(x[i], xl);
                if !(h > S::zero()) {
                    return Err(PlatoonError::Collision {
                        vehicle: i + 1,
                        time: t.as_f64(),
                        gap: h.as_f64(),
                    });
                }
                let (a, d) = kernel.with_partials(h, v[i], vl);
                if let Some((_, out)) = acc.as_mut() {
                    out[i] = a;
                }
                self.c_diag[i] = d.d_x;
                self.d_diag[i] = d.d_v;
                // the leader is not part of the state
                let lead_in_state = i > 0;
                self.c_sub[i] = if lead_in_state { d.d_x_lead } else { S::zero() };
                self.d_sub[i] = if lead_in_state { d.d_v_lead } else { S::zero() };
            }
            xl = x[i];
            vl = v[i];
        }
        Ok(())
    }

    /// `out = f_y^T (w_x, w_v)`, i.e. `out_x = C^T w_v`, `out_v = w_x + D^T w_v`.
    pub fn transpose_apply(&self, w_x: &[S], w_v: &[S], out_x: &mut [S], out_v: &mut [S]) {
        let n = self.n();
        for k in 0..n {
            let (mut cx, mut dv) = (self.c_diag[k] * w_v[k], self.d_diag[k] * w_v[k]);
            if k + 1 < n {
                cx += self.c_sub[k + 1] * w_v[k + 1];
                dv += self.d_sub[k + 1] * w_v[k + 1];
            }
            out_x[k] = cx;
            out_v[k] = w_x[k] + dv;
        }
    }

    /// Dense `2n x 2n` Jacobian of the right-hand side, row-major.
    pub fn to_dense(&self) -> Vec<S> {
        let n = self.n();
        let m = 2 * n;
        let mut a = vec![S::zero(); m * m];
        for i in 0..n {
            a[i * m + n + i] = S::one();
            a[(n + i) * m + i] = self.c_diag[i];
            a[(n + i) * m + n + i] = self.d_diag[i];
            if i > 0 {
                a[(n + i) * m + i - 1] = self.c_sub[i];
                a[(n + i) * m + n + i - 1] = self.d_sub[i];
            }
        }
        a
    }
}

/// Jacobian blocks of the right-hand side at time `t` and state `y = (x, v)`.
pub fn jacobian_state<S: Scalar>(platoon: &Platoon<S>, t: S, y: &[S]) -> Result<JacobianBlocks<S>> {
    let n = platoon.n_vehicles();
    let lead = platoon.leader.sample(t)?;
    let mut blocks = JacobianBlocks::zeros(n);
    blocks.fill(platoon, t, lead, &y[..n], &y[n..])?;
    Ok(blocks)
}

/// Costates on the state grid and the per-step control sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory<S> {
    grid: StateGrid<S>,
    n: usize,
    n_av: usize,
    scheme: CostateScheme,
    /// Sample-major rows `(lambda_x, lambda_v)`.
    zeta: Vec<S>,
    /// Sensitivity of the state part of the objective to the control held
    /// over each step, `n_steps x n_av`.
    step_sens: Vec<S>,
}

impl<S: Scalar> AdjointTrajectory<S> {
    pub fn grid(&self) -> &StateGrid<S> {
        &self.grid
    }

    pub fn scheme(&self) -> CostateScheme {
        self.scheme
    }

    /// Position costates at sample `j`.
    pub fn zeta_x(&self, j: usize) -> &[S] {
        &self.zeta[2 * self.n * j..2 * self.n * j + self.n]
    }

    /// Velocity costates at sample `j`.
    pub fn zeta_v(&self, j: usize) -> &[S] {
        &self.zeta[2 * self.n * j + self.n..2 * self.n * (j + 1)]
    }

    pub fn step_sensitivity(&self, j: usize) -> &[S] {
        &self.step_sens[j * self.n_av..(j + 1) * self.n_av]
    }
}

/// Scratch buffers reused across steps of the backward sweep.
struct Workspace<S> {
    blocks: [JacobianBlocks<S>; 3],
    tx: Vec<S>,
    tv: Vec<S>,
    a: [Vec<S>; 2],
    x2: Vec<S>,
    v2: Vec<S>,
    x3: Vec<S>,
    v3: Vec<S>,
    lx1: Vec<S>,
    lv1: Vec<S>,
    kx: [Vec<S>; 3],
    kv: [Vec<S>; 3],
    yx: [Vec<S>; 2],
    yv: [Vec<S>; 2],
    gx: Vec<S>,
    gv: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    fn new(n: usize) -> Self {
        let z = || vec![S::zero(); n];
        Self {
            blocks: [JacobianBlocks::zeros(n), JacobianBlocks::zeros(n), JacobianBlocks::zeros(n)],
            tx: z(),
            tv: z(),
            a: [z(), z()],
            x2: z(),
            v2: z(),
            x3: z(),
            v3: z(),
            lx1: z(),
            lv1: z(),
            kx: [z(), z(), z()],
            kv: [z(), z(), z()],
            yx: [z(), z()],
            yv: [z(), z()],
            gx: z(),
            gv: z(),
        }
    }
}

/// Integrates the costate backward over the grid of `states`.
pub fn simulate_adjoint_backward<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    states: &StateTrajectory<S>,
    controls: &ControlSchedule<S>,
    scheme: CostateScheme,
) -> Result<AdjointTrajectory<S>> {
    let grid = *states.grid();
    if states.n_samples() != grid.n_samples() || states.n_vehicles() != platoon.n_vehicles() {
        return Err(PlatoonError::GridMismatch(
            "state trajectory does not match the platoon and its grid".into(),
        ));
    }
    if controls.n_av() != platoon.layout.n_av() {
        return Err(PlatoonError::GridMismatch(format!(
            "controls for {} AVs, layout has {}",
            controls.n_av(),
            platoon.layout.n_av()
        )));
    }
    let intervals = grid.step_intervals(controls.tau())?;
    let n = platoon.n_vehicles();
    let r = grid.n_steps();
    let mut adj = AdjointTrajectory {
        grid,
        n,
        n_av: controls.n_av(),
        scheme,
        zeta: vec![S::zero(); 2 * n * (r + 1)],
        step_sens: vec![S::zero(); r * controls.n_av()],
    };

    // terminal condition
    let (_, sy) = terminal_cost(obj.terminal_cost, states.v(r));
    let mut lx = vec![S::zero(); n];
    let mut lv = sy;
    let mut ws = Workspace::new(n);
    if scheme == CostateScheme::Discrete {
        let w = trapezoid_weight(&grid, r);
        add_weighted_state_grad(platoon, obj, states, r, w, &mut lx, &mut lv, &mut ws.gx, &mut ws.gv)?;
    }
    store(&mut adj, r, &lx, &lv);

    for j in (0..r).rev() {
        let u = controls.interval(intervals[j]);
        match scheme {
            CostateScheme::Discrete => {
                discrete_step(platoon, obj, states, j, u, &mut lx, &mut lv, &mut adj, &mut ws)?
            }
            CostateScheme::ContinuousRk3 => {
                continuous_step(platoon, obj, states, j, u, &mut lx, &mut lv, &mut adj, &mut ws)?
            }
        }
        store(&mut adj, j, &lx, &lv);
    }
    Ok(adj)
}

fn store<S: Scalar>(adj: &mut AdjointTrajectory<S>, j: usize, lx: &[S], lv: &[S]) {
    let n = adj.n;
    let row = &mut adj.zeta[2 * n * j..2 * n * (j + 1)];
    row[..n].copy_from_slice(lx);
    row[n..].copy_from_slice(lv);
}

#[allow(clippy::too_many_arguments)]
fn add_weighted_state_grad<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    states: &StateTrajectory<S>,
    j: usize,
    weight: S,
    lx: &mut [S],
    lv: &mut [S],
    gx: &mut [S],
    gv: &mut [S],
) -> Result<()> {
    gx.fill(S::zero());
    gv.fill(S::zero());
    let lead = platoon.leader.sample_step(j, S::zero());
    let t = states.grid().time(j);
    state_cost_with_grad(platoon, obj, t, lead, states.x(j), states.v(j), gx, gv)?;
    for i in 0..lx.len() {
        lx[i] += weight * gx[i];
        lv[i] += weight * gv[i];
    }
    Ok(())
}

/// Reverse sweep through one RK3 step: on entry `(lx, lv)` is the
/// derivative of the discrete objective with respect to `y_{j+1}`, on exit
/// with respect to `y_j`.
#[allow(clippy::too_many_arguments)]
fn discrete_step<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    states: &StateTrajectory<S>,
    j: usize,
    u: &[S],
    lx: &mut [S],
    lv: &mut [S],
    adj: &mut AdjointTrajectory<S>,
    ws: &mut Workspace<S>,
) -> Result<()> {
    let n = lx.len();
    let grid = states.grid();
    let h = grid.step();
    let t = grid.time(j);
    let (c2, c3) = (S::lit(rk3::C2), S::lit(rk3::C3));
    let (a21, a32) = (S::lit(rk3::A21), S::lit(rk3::A32));
    let (b1, b2, b3) = (S::lit(rk3::B1), S::lit(rk3::B2), S::lit(rk3::B3));
    let (x, v) = (states.x(j), states.v(j));
    let Workspace {
        blocks,
        tx,
        tv,
        a,
        x2,
        v2,
        x3,
        v3,
        lx1,
        lv1,
        kx,
        kv,
        yx,
        yv,
        gx,
        gv,
    } = ws;

    // recompute the stage states exactly as the forward sweep did, with
    // the Jacobian of every stage
    let lead = [
        platoon.leader.sample_step(j, S::zero()),
        platoon.leader.sample_step(j, c2),
        platoon.leader.sample_step(j, c3),
    ];
    let times = [t, t + c2 * h, t + c3 * h];
    blocks[0].fill_with_accelerations(platoon, times[0], lead[0], x, v, u, &mut a[0])?;
    for i in 0..n {
        x2[i] = x[i] + h * a21 * v[i];
        v2[i] = v[i] + h * a21 * a[0][i];
    }
    blocks[1].fill_with_accelerations(platoon, times[1], lead[1], x2, v2, u, &mut a[1])?;
    for i in 0..n {
        x3[i] = x[i] + h * a32 * v2[i];
        v3[i] = v[i] + h * a32 * a[1][i];
    }
    blocks[2].fill(platoon, times[2], lead[2], x3, v3)?;

    lx1.copy_from_slice(lx);
    lv1.copy_from_slice(lv);

    // stage 3
    for i in 0..n {
        kx[2][i] = h * b3 * lx1[i];
        kv[2][i] = h * b3 * lv1[i];
    }
    blocks[2].transpose_apply(&kx[2], &kv[2], &mut yx[1], &mut yv[1]);

    // stage 2
    for i in 0..n {
        kx[1][i] = h * (b2 * lx1[i] + a32 * yx[1][i]);
        kv[1][i] = h * (b2 * lv1[i] + a32 * yv[1][i]);
    }
    blocks[1].transpose_apply(&kx[1], &kv[1], &mut yx[0], &mut yv[0]);

    // stage 1
    for i in 0..n {
        kx[0][i] = h * (b1 * lx1[i] + a21 * yx[0][i]);
        kv[0][i] = h * (b1 * lv1[i] + a21 * yv[0][i]);
    }
    blocks[0].transpose_apply(&kx[0], &kv[0], tx, tv);

    for i in 0..n {
        lx[i] = lx1[i] + tx[i] + yx[0][i] + yx[1][i];
        lv[i] = lv1[i] + tv[i] + yv[0][i] + yv[1][i];
    }
    add_weighted_state_grad(platoon, obj, states, j, trapezoid_weight(grid, j), lx, lv, gx, gv)?;

    let n_av = adj.n_av;
    let sens = &mut adj.step_sens[j * n_av..(j + 1) * n_av];
    for (col, &slot) in platoon.layout.av_slots().iter().enumerate() {
        sens[col] = kv[0][slot] + kv[1][slot] + kv[2][slot];
    }
    Ok(())
}

/// One backward RK3 step of the costate ODE from `t_{j+1}` to `t_j`.
#[allow(clippy::too_many_arguments)]
fn continuous_step<S: Scalar>(
    platoon: &Platoon<S>,
    obj: &ObjectiveConfig<S>,
    states: &StateTrajectory<S>,
    j: usize,
    u: &[S],
    lx: &mut [S],
    lv: &mut [S],
    adj: &mut AdjointTrajectory<S>,
    ws: &mut Workspace<S>,
) -> Result<()> {
    let n = lx.len();
    let grid = states.grid();
    let h = grid.step();
    let t0 = grid.time(j);
    let (c2, c3) = (S::lit(rk3::C2), S::lit(rk3::C3));
    let (a21, a32) = (S::lit(rk3::A21), S::lit(rk3::A32));
    let (b1, b2, b3) = (S::lit(rk3::B1), S::lit(rk3::B2), S::lit(rk3::B3));

    // endpoint accelerations with the control of this step, for Hermite
    let mut acc0 = vec![S::zero(); n];
    let mut acc1 = vec![S::zero(); n];
    let lead0 = platoon.leader.sample_step(j, S::zero());
    let lead1 = platoon.leader.sample_step(j + 1, S::zero());
    platoon.accelerations_into(t0, lead0, states.x(j), states.v(j), u, &mut acc0)?;
    platoon.accelerations_into(t0 + h, lead1, states.x(j + 1), states.v(j + 1), u, &mut acc1)?;

    // g(theta, mu) = L_y + f_y^T mu at t_j + theta h
    let mut g = |theta: S, mx: &[S], mv: &[S], gx: &mut [S], gv: &mut [S]| -> Result<()> {
        let (xs, vs): (Vec<S>, Vec<S>) = (0..n)
            .map(|i| {
                let (x0, x1) = (states.x(j)[i], states.x(j + 1)[i]);
                let (v0, v1) = (states.v(j)[i], states.v(j + 1)[i]);
                (
                    hermite(x0, x1, v0, v1, h, theta),
                    hermite(v0, v1, acc0[i], acc1[i], h, theta),
                )
            })
            .unzip();
        let lead = platoon.leader.sample_step(j, theta);
        let t = t0 + theta * h;
        ws.blocks[0].fill(platoon, t, lead, &xs, &vs)?;
        ws.blocks[0].transpose_apply(mx, mv, gx, gv);
        state_cost_with_grad(platoon, obj, t, lead, &xs, &vs, gx, gv)?;
        Ok(())
    };

    let (lx1, lv1) = (lx.to_vec(), lv.to_vec());
    let mut g1 = (vec![S::zero(); n], vec![S::zero(); n]);
    let mut g2 = g1.clone();
    let mut g3 = g1.clone();
    g(S::one(), &lx1, &lv1, &mut g1.0, &mut g1.1)?;
    let m2x: Vec<S> = (0..n).map(|i| lx1[i] + h * a21 * g1.0[i]).collect();
    let m2v: Vec<S> = (0..n).map(|i| lv1[i] + h * a21 * g1.1[i]).collect();
    g(S::one() - c2, &m2x, &m2v, &mut g2.0, &mut g2.1)?;
    let m3x: Vec<S> = (0..n).map(|i| lx1[i] + h * a32 * g2.0[i]).collect();
    let m3v: Vec<S> = (0..n).map(|i| lv1[i] + h * a32 * g2.1[i]).collect();
    g(S::one() - c3, &m3x, &m3v, &mut g3.0, &mut g3.1)?;
    for i in 0..n {
        lx[i] = lx1[i] + h * (b1 * g1.0[i] + b2 * g2.0[i] + b3 * g3.0[i]);
        lv[i] = lv1[i] + h * (b1 * g1.1[i] + b2 * g2.1[i] + b3 * g3.1[i]);
    }

    let half_h = S::lit(0.5) * h;
    let n_av = adj.n_av;
    let sens = &mut adj.step_sens[j * n_av..(j + 1) * n_av];
    for (col, &slot) in platoon.layout.av_slots().iter().enumerate() {
        sens[col] = half_h * (lv[slot] + lv1[slot]);
    }
    Ok(())
}

/// Gradient of the objective with respect to the control values, laid out
/// like [`ControlSchedule::values`].
pub fn assemble_gradient<S: Scalar>(
    adjoint: &AdjointTrajectory<S>,
    controls: &ControlSchedule<S>,
) -> Result<Vec<S>> {
    let grid = adjoint.grid();
    if controls.n_av() != adjoint.n_av {
        return Err(PlatoonError::GridMismatch("control and costate AV counts differ".into()));
    }
    let intervals = grid.step_intervals(controls.tau())?;
    let m = controls.n_av();
    let mut grad = vec![S::zero(); controls.values().len()];
    for (j, &k) in intervals.iter().enumerate() {
        let sens = adjoint.step_sensitivity(j);
        for i in 0..m {
            grad[k * m + i] += sens[i];
        }
    }
    let two = S::lit(2.0);
    for k in 0..controls.n_intervals() {
        let width = grid.step() * S::from_usize_lossy(intervals.iter().filter(|&&q| q == k).count());
        for i in 0..m {
            grad[k * m + i] += two * controls.get(k, i) * width;
        }
    }
    Ok(grad)
}

/// Central finite differences of `f` around `omega`, one entry at a time.
pub fn finite_difference_gradient<S, F>(omega: &[S], step: S, mut f: F) -> Result<Vec<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> Result<S>,
{
    if !(step > S::zero()) {
        return Err(PlatoonError::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let mut w = omega.to_vec();
    let mut grad = Vec::with_capacity(omega.len());
    for k in 0..omega.len() {
        w[k] = omega[k] + step;
        let plus = f(&w)?;
        w[k] = omega[k] - step;
        let minus = f(&w)?;
        w[k] = omega[k];
        grad.push((plus - minus) / (S::lit(2.0) * step));
    }
    Ok(grad)
}

/// `max |a - b| / max |b|`; the absolute error when `b` vanishes.
pub fn max_relative_error<S: Scalar>(a: &[S], b: &[S]) -> S {
    let num = a
        .iter()
        .zip(b)
        .map(|(&p, &q)| (p - q).abs())
        .fold(S::zero(), S::max);
    let den = b.iter().map(|q| q.abs()).fold(S::zero(), S::max);
    if den > S::zero() {
        num / den
    } else {
        num
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{InitialState, LeaderTrajectory, PlatoonLayout};
    use crate::model::ModelParams;
    use crate::objective::{ObjectiveMode, TerminalCost};
    use crate::problem::Problem;

    fn wave_leader(horizon: f64, step: f64) -> LeaderTrajectory<f64> {
        let n = (horizon / step).round() as usize;
        let w = std::f64::consts::PI / 15.0;
        let t: Vec<f64> = (0..=n).map(|j| j as f64 * step).collect();
        LeaderTrajectory::new(
            step,
            t.iter().map(|&t| 15.0 * t + 4.0 * (w * t).sin() / w).collect(),
            t.iter().map(|&t| 15.0 + 4.0 * (w * t).cos()).collect(),
            t.iter().map(|&t| -4.0 * w * (w * t).sin()).collect(),
        )
        .unwrap()
    }

    fn mixed_problem(obj: ObjectiveConfig<f64>) -> Problem<f64> {
        let params = ModelParams::default();
        let leader = wave_leader(30.0, 0.1);
        let platoon = Platoon::new(params, PlatoonLayout::new(5, &[1, 3]).unwrap(), leader).unwrap();
        let init = InitialState::uniform(5, 0.0, 22.0, 19.0, params.vehicle_length);
        let grid = StateGrid::new(30.0, 0.1).unwrap();
        Problem::uniform(platoon, init, grid, 5.0, obj).unwrap()
    }

    fn wiggle(n: usize, amplitude: f64) -> Vec<f64> {
        (0..n).map(|k| amplitude * ((k as f64) * 1.7).sin()).collect()
    }

    fn av_problem(obj: ObjectiveConfig<f64>) -> Problem<f64> {
        let leader = LeaderTrajectory::constant_speed(0.1, 300, 0.0, 10.0).unwrap();
        let platoon = Platoon::new(ModelParams::default(), PlatoonLayout::all_autonomous(3).unwrap(), leader).unwrap();
        let init = InitialState::uniform(3, 0.0, 50.0, 10.0, 4.5);
        Problem::uniform(platoon, init, StateGrid::new(30.0, 0.1).unwrap(), 5.0, obj).unwrap()
    }

    #[test]
    fn all_av_jacobian_vanishes() {
        let p = av_problem(ObjectiveConfig::default());
        let y = [0.0, -20.0, -40.0, 5.0, 6.0, 7.0];
        let jb = jacobian_state(&p.platoon, 1.0, &y).unwrap();
        for block in [&jb.c_diag, &jb.c_sub, &jb.d_diag, &jb.d_sub] {
            assert!(block.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn single_human_jacobian() {
        let params = ModelParams::<f64>::default();
        let leader = LeaderTrajectory::constant_speed(1.0, 10, 0.0, 12.0).unwrap();
        let p = Platoon::new(params, PlatoonLayout::all_human(1).unwrap(), leader).unwrap();
        let (x, v) = (-30.0, 10.0);
        let h = params.headway(x, 0.0);
        let jb = jacobian_state(&p, 0.0, &[x, v]).unwrap();
        let want = -params.alpha * params.optimal_velocity_deriv(h).unwrap() + 2.0 * params.beta * (12.0 - v) / (h * h * h);
        assert!((jb.c_diag[0] - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn jacobian_matches_dense_finite_differences() {
        let p = mixed_problem(ObjectiveConfig::default());
        let n = 5;
        let y = [-25.0, -50.0, -78.0, -101.0, -130.0, 16.0, 19.0, 14.0, 20.0, 17.5];
        let t = 3.3;
        let dense = jacobian_state(&p.platoon, t, &y).unwrap().to_dense();
        let u = [0.2, -0.1];
        let mut worst = 0.0f64;
        let scale = dense.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        for col in 0..2 * n {
            let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
            yp[col] += 1e-6;
            ym[col] -= 1e-6;
            let fp = p.platoon.rhs(t, &yp, &u).unwrap();
            let fm = p.platoon.rhs(t, &ym, &u).unwrap();
            for row in 0..2 * n {
                let fd = (fp[row] - fm[row]) / 2e-6;
                worst = worst.max((fd - dense[row * 2 * n + col]).abs());
            }
        }
        assert!(worst / scale < 1e-5, "{}", worst / scale);
        // only diagonal and first subdiagonal of C and D
        for row in 0..n {
            for col in 0..n {
                if col != row && col + 1 != row {
                    assert_eq!(dense[(n + row) * 2 * n + col], 0.0);
                    assert_eq!(dense[(n + row) * 2 * n + n + col], 0.0);
                }
            }
        }
    }

    #[test]
    fn homogeneous_problem_has_zero_costate() {
        let obj = ObjectiveConfig::default().with_mode(ObjectiveMode::Greedy);
        let p = av_problem(obj);
        let omega = wiggle(p.n_controls(), 0.05);
        let c = p.controls(&omega).unwrap();
        let tr = p.simulate(&c).unwrap();
        for scheme in [CostateScheme::Discrete, CostateScheme::ContinuousRk3] {
            let adj = simulate_adjoint_backward(&p.platoon, &obj, &tr, &c, scheme).unwrap();
            for j in 0..tr.n_samples() {
                assert!(adj.zeta_x(j).iter().chain(adj.zeta_v(j)).all(|&z| z == 0.0));
            }
            let g = assemble_gradient(&adj, &c).unwrap();
            for (gk, wk) in g.iter().zip(&omega) {
                assert!((gk - 2.0 * wk * 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn terminal_speed_cost_gives_constant_velocity_costate() {
        let obj = ObjectiveConfig {
            mode: ObjectiveMode::Greedy,
            terminal_cost: TerminalCost::HalfSquaredSpeed,
            ..Default::default()
        };
        let p = av_problem(obj);
        let c = p.controls(&wiggle(p.n_controls(), 0.05)).unwrap();
        let tr = p.simulate(&c).unwrap();
        let v_end = tr.v(tr.n_samples() - 1).to_vec();
        for scheme in [CostateScheme::Discrete, CostateScheme::ContinuousRk3] {
            let adj = simulate_adjoint_backward(&p.platoon, &obj, &tr, &c, scheme).unwrap();
            for j in 0..tr.n_samples() {
                assert!(adj.zeta_x(j).iter().all(|&z| z == 0.0));
                for (z, v) in adj.zeta_v(j).iter().zip(&v_end) {
                    assert!((z - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_controls_give_zero_gradient() {
        let p = av_problem(ObjectiveConfig::default().with_mode(ObjectiveMode::Greedy));
        let g = p.value_and_gradient(&vec![0.0; p.n_controls()]).unwrap().gradient;
        assert!(g.iter().all(|&e| e == 0.0));
    }

    fn penalized() -> ObjectiveConfig<f64> {
        // thresholds tight enough that both headway penalties switch on
        ObjectiveConfig {
            d_safe: 21.0,
            d_max: 24.0,
            ..Default::default()
        }
    }

    #[test]
    fn discrete_gradient_matches_finite_differences() {
        let p = mixed_problem(penalized());
        let omega = wiggle(p.n_controls(), 0.3);
        let ev = p.value_and_gradient(&omega).unwrap();
        let v = crate::optimizer::audit_feasibility(&p.platoon, &p.objective, &ev.trajectory);
        assert!(v.min_headway.is_some() && v.max_headway.is_some());
        let fd = finite_difference_gradient(&omega, 1e-4, |w| p.evaluate(w)).unwrap();
        let err = max_relative_error(&ev.gradient, &fd);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn continuous_gradient_is_consistent() {
        let p = mixed_problem(penalized()).with_scheme(CostateScheme::ContinuousRk3);
        let omega = wiggle(p.n_controls(), 0.3);
        let g = p.value_and_gradient(&omega).unwrap().gradient;
        let fd = finite_difference_gradient(&omega, 1e-4, |w| p.evaluate(w)).unwrap();
        assert!(max_relative_error(&g, &fd) < 1e-4);
    }

    #[test]
    fn finite_differences_are_exact_for_quadratics() {
        let p = av_problem(ObjectiveConfig::default().with_mode(ObjectiveMode::Greedy));
        let omega = wiggle(p.n_controls(), 0.05);
        let fd = finite_difference_gradient(&omega, 1e-4, |w| p.evaluate(w)).unwrap();
        for (g, w) in fd.iter().zip(&omega) {
            assert!((g - 10.0 * w).abs() < 1e-8);
        }
        assert!(finite_difference_gradient(&omega, 0.0, |w| p.evaluate(w)).is_err());
    }

    #[test]
    fn step_halving_shrinks_the_residual() {
        let p = mixed_problem(ObjectiveConfig::default());
        let omega = wiggle(p.n_controls(), 0.3);
        let g = p.value_and_gradient(&omega).unwrap().gradient;
        let residual = |h: f64| {
            let fd = finite_difference_gradient(&omega, h, |w| p.evaluate(w)).unwrap();
            max_relative_error(&fd, &g)
        };
        let (r1, r2, r3) = (residual(0.1), residual(0.05), residual(0.025));
        assert!(r2 < r1 / 3.0 && r3 < r2 / 3.0, "{r1} {r2} {r3}");
    }

    #[test]
    fn greedy_gradient_is_causal() {
        // only vehicle 0 violates a headway bound; vehicle 2's gradient
        // is its own control cost alone
        let obj = ObjectiveConfig {
            mode: ObjectiveMode::Greedy,
            d_safe: 30.0,
            d_max: 120.0,
            ..Default::default()
        };
        let leader = LeaderTrajectory::constant_speed(0.1, 300, 0.0, 10.0).unwrap();
        let platoon = Platoon::new(ModelParams::default(), PlatoonLayout::new(3, &[0, 2]).unwrap(), leader).unwrap();
        let init = InitialState {
            x0: vec![-25.0, -80.0, -135.0],
            v0: vec![10.0, 10.0, 10.0],
        };
        let p = Problem::uniform(platoon, init, StateGrid::new(30.0, 0.1).unwrap(), 5.0, obj).unwrap();
        let omega = wiggle(p.n_controls(), 0.3);
        let g = p.value_and_gradient(&omega).unwrap().gradient;
        let mut own_penalty = false;
        for k in 0..6 {
            assert!((g[2 * k + 1] - 10.0 * omega[2 * k + 1]).abs() < 1e-10);
            own_penalty |= (g[2 * k] - 10.0 * omega[2 * k]).abs() > 1e-6;
        }
        assert!(own_penalty);
    }
}
