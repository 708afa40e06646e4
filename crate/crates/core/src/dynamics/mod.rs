//! Platoon state, right-hand side and forward integration.
//!
//! The state is `y = (x_1..x_n, v_1..v_n)`. Human drivers follow the
//! car-following law; autonomous vehicles take their acceleration from a
//! piecewise-constant control. Integration uses the three-stage
//! Bogacki–Shampine Runge–Kutta scheme with fixed step and the control
//! frozen over each step.

pub mod control;
pub mod grid;
pub mod layout;
pub mod leader;
pub mod trajectory;

pub use control::ControlSchedule;
pub use grid::StateGrid;
pub use layout::PlatoonLayout;
pub use leader::LeaderTrajectory;
pub use trajectory::StateTrajectory;

use crate::error::{PlatoonError, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

/// Stage nodes and weights of the Bogacki–Shampine scheme.
pub(crate) mod rk3 {
    pub const C2: f64 = 0.5;
    pub const C3: f64 = 0.75;
    pub const A21: f64 = 0.5;
    pub const A32: f64 = 0.75;
    pub const B1: f64 = 2.0 / 9.0;
    pub const B2: f64 = 1.0 / 3.0;
    pub const B3: f64 = 4.0 / 9.0;
}

/// Initial positions and velocities of the followers.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState<S> {
    pub x0: Vec<S>,
    pub v0: Vec<S>,
}

impl<S: Scalar> InitialState<S> {
    /// Followers spaced `gap` metres bumper to bumper behind a leader at
    /// `leader_x0`, all driving at `speed`.
    pub fn uniform(n: usize, leader_x0: S, gap: S, speed: S, vehicle_length: S) -> Self {
        let spacing = gap + vehicle_length;
        Self {
            x0: (1..=n).map(|i| leader_x0 - spacing * S::from_usize_lossy(i)).collect(),
            v0: vec![speed; n],
        }
    }

    /// Headway of every follower to its predecessor.
    pub fn gaps(&self, leader_x0: S, vehicle_length: S) -> Vec<S> {
        let mut ahead = leader_x0;
        self.x0
            .iter()
            .map(|&x| {
                let g = ahead - x - vehicle_length;
                ahead = x;
                g
            })
            .collect()
    }

    /// Checks lengths, finiteness, nonnegative speeds and that every
    /// headway is at least `min_gap`.
    pub fn validate(&self, n: usize, leader_x0: S, vehicle_length: S, min_gap: S) -> Result<()> {
        if self.x0.len() != n || self.v0.len() != n {
            return Err(PlatoonError::InfeasibleInitial(format!(
                "expected {n} positions and velocities, got {} and {}",
                self.x0.len(),
                self.v0.len()
            )));
        }
        for (i, &v) in self.v0.iter().enumerate() {
            if !v.is_finite() || v < S::zero() {
                return Err(PlatoonError::InfeasibleInitial(format!(
                    "vehicle {} has velocity {v}",
                    i + 1
                )));
            }
        }
        for (i, g) in self.gaps(leader_x0, vehicle_length).into_iter().enumerate() {
            if !g.is_finite() || g < min_gap || g <= S::zero() {
                return Err(PlatoonError::InfeasibleInitial(format!(
                    "vehicle {} starts with headway {g} m (minimum {min_gap} m)",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Car-following parameters, AV layout and leader of one platoon.
#[derive(Debug, Clone)]
pub struct Platoon<S> {
    pub params: ModelParams<S>,
    pub layout: PlatoonLayout,
    pub leader: LeaderTrajectory<S>,
}

impl<S: Scalar> Platoon<S> {
    pub fn new(params: ModelParams<S>, layout: PlatoonLayout, leader: LeaderTrajectory<S>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            layout,
            leader,
        })
    }

    pub fn n_vehicles(&self) -> usize {
        self.layout.n_vehicles()
    }

    /// Accelerations `out[i]` for positions `x` and velocities `v` given the
    /// leader state and the AV controls `u` (one per AV, in slot order).
    ///
    /// A non-positive human headway is a collision and aborts; controlled
    /// vehicles may overlap, which the objective penalizes.
    pub fn accelerations_into(
        &self,
        t: S,
        lead: (S, S),
        x: &[S],
        v: &[S],
        u: &[S],
        out: &mut [S],
    ) -> Result<()> {
        let kernel = self.params.kernel();
        let (mut xl, mut vl) = lead;
        for i in 0..x.len() {
            out[i] = match self.layout.av_column(i) {
                Some(col) => u[col],
                None => {
                    let h = self.params.headway(x[i], xl);
                    if !(h > S::zero()) {
                        return Err(PlatoonError::Collision {
                            vehicle: i + 1,
                            time: t.as_f64(),
                            gap: h.as_f64(),
                        });
                    }
                    kernel.acceleration(h, v[i], vl)
                }
            };
            xl = x[i];
            vl = v[i];
        }
        Ok(())
    }

    /// Full right-hand side `dy/dt` at time `t` for `y = (x, v)`.
    pub fn rhs(&self, t: S, y: &[S], u: &[S]) -> Result<Vec<S>> {
        let n = self.n_vehicles();
        let lead = self.leader.sample(t)?;
        let mut out = vec![S::zero(); 2 * n];
        out[..n].copy_from_slice(&y[n..]);
        let (x, v) = y.split_at(n);
        self.accelerations_into(t, lead, x, v, u, &mut out[n..])?;
        Ok(out)
    }

    pub(crate) fn check_inputs(
        &self,
        controls: &ControlSchedule<S>,
        init: &InitialState<S>,
        grid: &StateGrid<S>,
    ) -> Result<Vec<usize>> {
        let n = self.n_vehicles();
        if init.x0.len() != n || init.v0.len() != n {
            return Err(PlatoonError::InfeasibleInitial(format!(
                "initial state has {} vehicles, platoon has {n}",
                init.x0.len()
            )));
        }
        if controls.n_av() != self.layout.n_av() {
            return Err(PlatoonError::GridMismatch(format!(
                "controls for {} AVs, layout has {}",
                controls.n_av(),
                self.layout.n_av()
            )));
        }
        let ls = self.leader.step().as_f64();
        let gs = grid.step().as_f64();
        if (ls - gs).abs() > 1e-9 * gs {
            return Err(PlatoonError::GridMismatch(format!(
                "leader sampled every {ls} s, state step is {gs} s"
            )));
        }
        if self.leader.n_samples() < grid.n_samples() {
            return Err(PlatoonError::LeaderCoverage {
                time: grid.horizon().as_f64(),
                end: self.leader.end_time().as_f64(),
            });
        }
        grid.step_intervals(controls.tau())
    }

    /// Integrates the platoon over `grid` from `init`.
    pub fn simulate(
        &self,
        controls: &ControlSchedule<S>,
        init: &InitialState<S>,
        grid: &StateGrid<S>,
    ) -> Result<StateTrajectory<S>> {
        let intervals = self.check_inputs(controls, init, grid)?;
        let n = self.n_vehicles();
        let h = grid.step();
        let (c2, c3) = (S::lit(rk3::C2), S::lit(rk3::C3));
        let (a21, a32) = (S::lit(rk3::A21), S::lit(rk3::A32));
        let (b1, b2, b3) = (S::lit(rk3::B1), S::lit(rk3::B2), S::lit(rk3::B3));

        let mut traj = StateTrajectory::with_capacity(*grid, n);
        let mut x = init.x0.clone();
        let mut v = init.v0.clone();
        traj.push(&x, &v);

        let zero = vec![S::zero(); n];
        let (mut k1, mut k2, mut k3) = (zero.clone(), zero.clone(), zero.clone());
        let (mut xs, mut vs, mut v2) = (zero.clone(), zero.clone(), zero);

        for (j, &k) in intervals.iter().enumerate() {
            let u = controls.interval(k);
            let t = grid.time(j);

            self.accelerations_into(t, self.leader.sample_step(j, S::zero()), &x, &v, u, &mut k1)?;

            for i in 0..n {
                xs[i] = x[i] + h * a21 * v[i];
                vs[i] = v[i] + h * a21 * k1[i];
            }
            v2.copy_from_slice(&vs);
            self.accelerations_into(t + c2 * h, self.leader.sample_step(j, c2), &xs, &vs, u, &mut k2)?;

            for i in 0..n {
                xs[i] = x[i] + h * a32 * v2[i];
                vs[i] = v[i] + h * a32 * k2[i];
            }
            self.accelerations_into(t + c3 * h, self.leader.sample_step(j, c3), &xs, &vs, u, &mut k3)?;

            for i in 0..n {
                x[i] += h * (b1 * v[i] + b2 * v2[i] + b3 * vs[i]);
                v[i] += h * (b1 * k1[i] + b2 * k2[i] + b3 * k3[i]);
            }
            traj.push(&x, &v);
        }
        self.check_final(&traj, grid)?;
        Ok(traj)
    }

    fn check_final(&self, traj: &StateTrajectory<S>, grid: &StateGrid<S>) -> Result<()> {
        let r = grid.n_steps();
        let mut xl = self.leader.positions()[r];
        for (i, &x) in traj.x(r).iter().enumerate() {
            let h = self.params.headway(x, xl);
            if !self.layout.is_av(i) && !(h > S::zero()) {
                return Err(PlatoonError::Collision {
                    vehicle: i + 1,
                    time: grid.horizon().as_f64(),
                    gap: h.as_f64(),
                });
            }
            xl = x;
        }
        Ok(())
    }

    /// Headway of every follower at every sample, sample-major.
    pub fn headways(&self, traj: &StateTrajectory<S>) -> Vec<S> {
        let mut out = Vec::with_capacity(traj.positions().len());
        for j in 0..traj.n_samples() {
            let mut xl = self.leader.positions()[j];
            for &x in traj.x(j) {
                out.push(self.params.headway(x, xl));
                xl = x;
            }
        }
        out
    }

    /// Acceleration of every follower at every sample, sample-major.
    /// Controlled vehicles report the control in force at `t_j`.
    pub fn accelerations(&self, traj: &StateTrajectory<S>, controls: &ControlSchedule<S>) -> Result<Vec<S>> {
        let n = traj.n_vehicles();
        let grid = traj.grid();
        let intervals = grid.step_intervals(controls.tau())?;
        let mut out = vec![S::zero(); traj.n_samples() * n];
        for j in 0..traj.n_samples() {
            let t = grid.time(j);
            let k = intervals.get(j).copied().unwrap_or(controls.n_intervals() - 1);
            let u = controls.interval(k);
            self.accelerations_into(
                t,
                self.leader.sample_step(j, S::zero()),
                traj.x(j),
                traj.v(j),
                u,
                &mut out[j * n..(j + 1) * n],
            )?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_leader(n_steps: usize, step: f64, x0: f64, speed: f64) -> LeaderTrajectory<f64> {
        LeaderTrajectory::constant_speed(step, n_steps, x0, speed).unwrap()
    }

    #[test]
    fn all_av_platoon_is_a_double_integrator() {
        let p = Platoon::new(
            ModelParams::default(),
            PlatoonLayout::all_autonomous(3).unwrap(),
            constant_leader(10, 1.0, 100.0, 5.0),
        )
        .unwrap();
        let y = [50.0, 30.0, 10.0, 4.0, 5.0, 6.0];
        assert_eq!(p.rhs(0.0, &y, &[0.0; 3]).unwrap(), vec![4.0, 5.0, 6.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.rhs(0.5, &y, &[1.0, -2.0, 0.5]).unwrap()[3..], [1.0, -2.0, 0.5]);
    }

    #[test]
    fn human_at_equilibrium_does_not_accelerate() {
        let params = ModelParams::<f64>::default();
        let h = params.equilibrium_headway(20.0).unwrap();
        let p = Platoon::new(params, PlatoonLayout::all_human(1).unwrap(), constant_leader(10, 1.0, 0.0, 20.0)).unwrap();
        let dy = p.rhs(0.0, &[-h - params.vehicle_length, 20.0], &[]).unwrap();
        assert_eq!(dy[0], 20.0);
        assert!(dy[1].abs() < 1e-12);
    }

    #[test]
    fn mixed_rhs_matches_componentwise_law() {
        let params = ModelParams::<f64>::default();
        let layout = PlatoonLayout::new(4, &[1]).unwrap();
        let leader = constant_leader(10, 1.0, 200.0, 12.0);
        let p = Platoon::new(params, layout, leader).unwrap();
        let x = [170.0, 140.0, 118.0, 90.0];
        let v = [11.0, 13.0, 9.5, 10.0];
        let y: Vec<f64> = x.iter().chain(&v).copied().collect();
        let dy = p.rhs(0.0, &y, &[0.7]).unwrap();
        assert_eq!(dy[4], params.acceleration(x[0], 200.0, v[0], 12.0).unwrap());
        assert_eq!(dy[5], 0.7);
        assert_eq!(dy[6], params.acceleration(x[2], x[1], v[2], v[1]).unwrap());
        assert_eq!(dy[7], params.acceleration(x[3], x[2], v[3], v[2]).unwrap());
    }

    #[test]
    fn human_collision_is_reported_with_vehicle_and_time() {
        let p = Platoon::new(
            ModelParams::default(),
            PlatoonLayout::all_human(2).unwrap(),
            constant_leader(10, 1.0, 0.0, 0.0),
        )
        .unwrap();
        let err = p.rhs(2.0, &[-10.0, -12.0, 0.0, 0.0], &[]).unwrap_err();
        assert_eq!(
            err,
            PlatoonError::Collision {
                vehicle: 2,
                time: 2.0,
                gap: -2.5
            }
        );
    }

    fn av_only(n: usize, horizon: f64, step: f64) -> (Platoon<f64>, StateGrid<f64>) {
        let grid = StateGrid::new(horizon, step).unwrap();
        let p = Platoon::new(
            ModelParams::default(),
            PlatoonLayout::all_autonomous(n).unwrap(),
            constant_leader(grid.n_steps(), step, 1000.0, 10.0),
        )
        .unwrap();
        (p, grid)
    }

    #[test]
    fn free_flight_is_exact() {
        let (p, grid) = av_only(2, 10.0, 0.1);
        let c = ControlSchedule::uniform(10.0, 5.0, 2).unwrap();
        let init = InitialState {
            x0: vec![0.0, -20.0],
            v0: vec![10.0, 10.0],
        };
        let tr = p.simulate(&c, &init, &grid).unwrap();
        for j in 0..grid.n_samples() {
            let t = grid.time(j);
            assert!((tr.x(j)[0] - 10.0 * t).abs() < 1e-9);
            assert!((tr.x(j)[1] - (-20.0 + 10.0 * t)).abs() < 1e-9);
            assert_eq!(tr.v(j), &[10.0, 10.0]);
        }
    }

    #[test]
    fn constant_acceleration_is_exact() {
        let (p, grid) = av_only(1, 6.0, 0.25);
        let c = ControlSchedule::new(vec![0.0, 3.0, 6.0], 1, vec![1.5, 1.5]).unwrap();
        let init = InitialState {
            x0: vec![-5.0],
            v0: vec![2.0],
        };
        let tr = p.simulate(&c, &init, &grid).unwrap();
        for j in 0..grid.n_samples() {
            let t = grid.time(j);
            assert!((tr.v(j)[0] - (2.0 + 1.5 * t)).abs() < 1e-12);
            assert!((tr.x(j)[0] - (-5.0 + 2.0 * t + 0.75 * t * t)).abs() < 1e-11);
        }
    }

    fn mixed_run(perturb: Option<(usize, usize, f64)>) -> StateTrajectory<f64> {
        let params = ModelParams::<f64>::default();
        let grid = StateGrid::new(30.0, 0.1).unwrap();
        let n_steps = grid.n_steps();
        let t: Vec<f64> = (0..=n_steps).map(|j| grid.time(j)).collect();
        // leader slowing smoothly: v = 20 - 5 (1 - cos(pi t / 30))
        let w = std::f64::consts::PI / 30.0;
        let leader = LeaderTrajectory::new(
            0.1,
            t.iter().map(|&t| 15.0 * t + 5.0 * (w * t).sin() / w).collect(),
            t.iter().map(|&t| 15.0 + 5.0 * (w * t).cos()).collect(),
            t.iter().map(|&t| -5.0 * w * (w * t).sin()).collect(),
        )
        .unwrap();
        let layout = PlatoonLayout::new(5, &[1, 3]).unwrap();
        let p = Platoon::new(params, layout, leader).unwrap();
        let init = InitialState::uniform(5, 0.0, 22.0, 20.0, params.vehicle_length);
        let mut c = ControlSchedule::uniform(30.0, 5.0, 2).unwrap();
        if let Some((k, i, dv)) = perturb {
            c.set(k, i, dv);
        }
        p.simulate(&c, &init, &grid).unwrap()
    }

    #[test]
    fn coupling_is_one_sided() {
        let a = mixed_run(None);
        let b = mixed_run(Some((2, 1, 0.3)));
        for j in 0..a.n_samples() {
            // the perturbed AV sits in slot 3
            assert_eq!(a.x(j)[..3], b.x(j)[..3]);
            assert_eq!(a.v(j)[..3], b.v(j)[..3]);
        }
        assert_ne!(a.x(a.n_samples() - 1)[3], b.x(b.n_samples() - 1)[3]);
    }

    #[test]
    fn simulation_is_deterministic() {
        assert_eq!(mixed_run(Some((1, 0, -0.2))), mixed_run(Some((1, 0, -0.2))));
    }

    #[test]
    fn equilibrium_is_preserved() {
        let params = ModelParams::<f64>::default();
        let speed = 25.0;
        let h = params.equilibrium_headway(speed).unwrap();
        let grid = StateGrid::new(300.0, 0.1).unwrap();
        let leader = constant_leader(grid.n_steps(), 0.1, 0.0, speed);
        let layout = PlatoonLayout::new(6, &[0, 4]).unwrap();
        let p = Platoon::new(params, layout, leader).unwrap();
        let init = InitialState::uniform(6, 0.0, h, speed, params.vehicle_length);
        let c = ControlSchedule::uniform(300.0, 5.0, 2).unwrap();
        let tr = p.simulate(&c, &init, &grid).unwrap();
        let dev = tr.velocities().iter().map(|v| (v - speed).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn inputs_are_checked() {
        let (p, grid) = av_only(1, 10.0, 0.1);
        let init = InitialState {
            x0: vec![0.0],
            v0: vec![1.0],
        };
        let off_grid = ControlSchedule::new(vec![0.0, 3.33, 10.0], 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(p.simulate(&off_grid, &init, &grid), Err(PlatoonError::GridMismatch(_))));
        let long = StateGrid::new(20.0, 0.1).unwrap();
        let c = ControlSchedule::uniform(20.0, 5.0, 1).unwrap();
        assert!(matches!(p.simulate(&c, &init, &long), Err(PlatoonError::LeaderCoverage { .. })));
        let wrong_av = ControlSchedule::uniform(10.0, 5.0, 2).unwrap();
        assert!(p.simulate(&wrong_av, &init, &grid).is_err());
    }

    #[test]
    fn initial_state_validation() {
        let init = InitialState::uniform(3, 0.0, 10.0, 5.0, 4.5);
        assert_eq!(init.gaps(0.0, 4.5), vec![10.0, 10.0, 10.0]);
        assert!(init.validate(3, 0.0, 4.5, 5.0).is_ok());
        assert!(matches!(init.validate(3, 0.0, 4.5, 12.0), Err(PlatoonError::InfeasibleInitial(_))));
        let neg = InitialState {
            x0: vec![-10.0],
            v0: vec![-1.0],
        };
        assert!(neg.validate(1, 0.0, 4.5, 1.0).is_err());
    }

    #[test]
    fn f32_simulation_tracks_f64() {
        let grid = StateGrid::<f32>::new(10.0, 0.1).unwrap();
        let leader = LeaderTrajectory::<f32>::constant_speed(0.1, grid.n_steps(), 0.0, 20.0).unwrap();
        let p = Platoon::new(ModelParams::<f32>::default(), PlatoonLayout::all_human(2).unwrap(), leader).unwrap();
        let init = InitialState::uniform(2, 0.0, 15.0f32, 18.0, 4.5);
        let c = ControlSchedule::<f32>::uniform(10.0, 5.0, 0).unwrap();
        let tr = p.simulate(&c, &init, &grid).unwrap();
        assert!(tr.velocities().iter().all(|v| v.is_finite()));
    }
}
