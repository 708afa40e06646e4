mod common;

use common::random_case;
use platoon_core::adjoint::{finite_difference_gradient, max_relative_error};
use platoon_core::CostateScheme;

#[test]
fn discrete_adjoint_matches_finite_differences_on_random_platoons() {
    for seed in 100..105 {
        let case = random_case(seed);
        let p = &case.problem;
        let g = p.value_and_gradient(&case.omega).unwrap().gradient;
        let fd = finite_difference_gradient(&case.omega, 1e-4, |w| p.evaluate(w)).unwrap();
        let err = max_relative_error(&g, &fd);
        assert!(err < 1e-6, "seed {seed} ({}): {err:e}", case.description);
    }
}

#[test]
fn continuous_costate_converges_at_second_order() {
    // the discrete adjoint is the reference; halving the step should cut
    // the continuous scheme's error by about four
    let case = random_case(7);
    let errors: Vec<f64> = [0.2, 0.1]
        .iter()
        .map(|&step| {
            let p = &case.problem;
            let grid = platoon_core::StateGrid::new(p.grid.horizon(), step).unwrap();
            let leader = resample_leader(&p.platoon.leader, step);
            let platoon = platoon_core::Platoon::new(p.platoon.params, p.platoon.layout.clone(), leader).unwrap();
            let q = platoon_core::Problem::new(platoon, p.init.clone(), grid, p.tau().to_vec(), p.objective).unwrap();
            let exact = q.value_and_gradient(&case.omega).unwrap().gradient;
            let approx = q
                .clone()
                .with_scheme(CostateScheme::ContinuousRk3)
                .value_and_gradient(&case.omega)
                .unwrap()
                .gradient;
            max_relative_error(&approx, &exact)
        })
        .collect();
    let ratio = errors[0] / errors[1];
    assert!((3.0..6.0).contains(&ratio), "{errors:?}");
}

/// Every `k`-th sample of a leader recorded at a finer step.
fn resample_leader(leader: &platoon_core::LeaderTrajectory<f64>, step: f64) -> platoon_core::LeaderTrajectory<f64> {
    let k = (step / leader.step()).round() as usize;
    let pick = |s: &[f64]| s.iter().step_by(k).copied().collect::<Vec<_>>();
    platoon_core::LeaderTrajectory::new(
        step,
        pick(leader.positions()),
        pick(leader.velocities()),
        pick(leader.accelerations()),
    )
    .unwrap()
}
