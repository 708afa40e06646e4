//! Scenario builders and independent oracles shared by the integration
//! tests.
#![allow(dead_code)]

use platoon_core::scenario::StopAndGo;
use platoon_core::{
    InitialState, LeaderTrajectory, ModelParams, ObjectiveConfig, Platoon, PlatoonLayout, Problem,
    StateGrid,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A mixed platoon with random size, AV placement, horizon, leader wave,
/// initial spacing and control values.
pub struct RandomCase {
    pub problem: Problem<f64>,
    pub omega: Vec<f64>,
    pub description: String,
}

pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(3..=8);
        let m = rng.gen_range(1..=3usize.min(n));
        let mut slots = sample(&mut rng, n, m).into_vec();
        slots.sort_unstable();
        let horizon = 5.0 * rng.gen_range(6..=24) as f64;
        let grid = StateGrid::new(horizon, 0.1).unwrap();
        let wave = StopAndGo {
            v_base: rng.gen_range(12.0..20.0),
            amplitude: rng.gen_range(2.0..8.0),
            period: horizon / 2.0,
            n_waves: 1,
            x0: 0.0,
        };
        let leader = wave.sample(&grid).unwrap();
        let params = ModelParams::default();
        let platoon = Platoon::new(params, PlatoonLayout::new(n, &slots).unwrap(), leader).unwrap();
        let speed = rng.gen_range(10.0..20.0);
        let init = InitialState::uniform(n, 0.0, rng.gen_range(15.0..40.0), speed, params.vehicle_length);
        let problem = Problem::uniform(platoon, init, grid, 5.0, ObjectiveConfig::default()).unwrap();
        let omega: Vec<f64> = (0..problem.n_controls()).map(|_| rng.gen_range(-0.3..0.3)).collect();
        // redraw the rare instance whose random controls cause a collision
        if problem.evaluate(&omega).is_ok() {
            let description = format!("n={n} avs={slots:?} T={horizon}");
            return RandomCase {
                problem,
                omega,
                description,
            };
        }
    }
}

/// One AV, no human drivers, closing on a slower constant-speed leader.
pub fn chase_problem(n_intervals: usize) -> Problem<f64> {
    let horizon = 5.0 * n_intervals as f64;
    let grid = StateGrid::new(horizon, 0.1).unwrap();
    let leader = LeaderTrajectory::constant_speed(0.1, grid.n_steps(), 0.0, 10.0).unwrap();
    let platoon = Platoon::new(ModelParams::default(), PlatoonLayout::all_autonomous(1).unwrap(), leader).unwrap();
    let init = InitialState {
        x0: vec![-40.0 - 4.5],
        v0: vec![15.0],
    };
    Problem::uniform(platoon, init, grid, 5.0, ObjectiveConfig::default()).unwrap()
}

/// Minimizes `f` over a box by exhaustive grid search followed by a
/// compass search that halves its step down to `tol`. Uses objective
/// values only.
pub fn brute_force_minimum<F: Fn(&[f64]) -> f64>(
    f: F,
    dim: usize,
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let axis: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    let mut best = (vec![0.0; dim], f64::INFINITY);
    let mut idx = vec![0usize; dim];
    let mut w = vec![0.0; dim];
    'grid: loop {
        for (d, &k) in idx.iter().enumerate() {
            w[d] = axis[k];
        }
        let val = f(&w);
        if val < best.1 {
            best = (w.clone(), val);
        }
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < points {
                continue 'grid;
            }
            idx[d] = 0;
        }
        break;
    }
    let (mut x, mut fx) = best;
    let mut step = (hi - lo) / (points - 1) as f64;
    while step > tol {
        let mut improved = false;
        for d in 0..dim {
            for dir in [-1.0, 1.0] {
                let mut y = x.clone();
                y[d] += dir * step;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Observed order of accuracy from three solutions at steps `h`, `h/2`,
/// `h/4`, measured at shared sample times.
pub fn self_convergence_order(coarse: &[f64], medium: &[f64], fine: &[f64]) -> f64 {
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    (diff(coarse, medium) / diff(medium, fine)).log2()
}

/// Single human driver behind a smooth slowdown; returns the follower's
/// position and velocity at every whole second.
pub fn single_follower_run(step: f64) -> Vec<f64> {
    let horizon = 60.0;
    let grid = StateGrid::new(horizon, step).unwrap();
    let wave = StopAndGo {
        v_base: 20.0,
        amplitude: 8.0,
        period: 40.0,
        n_waves: 1,
        x0: 0.0,
    };
    let leader = wave.sample(&grid).unwrap();
    let params = ModelParams::default();
    let platoon = Platoon::new(params, PlatoonLayout::all_human(1).unwrap(), leader).unwrap();
    let init = InitialState::uniform(1, 0.0, 25.0, 20.0, params.vehicle_length);
    let problem = Problem::uniform(platoon, init, grid, 5.0, ObjectiveConfig::default()).unwrap();
    let tr = problem.simulate(&problem.zero_controls()).unwrap();
    let every = (1.0 / step).round() as usize;
    (0..tr.n_samples())
        .step_by(every)
        .flat_map(|j| [tr.x(j)[0], tr.v(j)[0]])
        .collect()
}
