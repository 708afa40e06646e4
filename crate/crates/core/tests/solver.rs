mod common;

use std::path::Path;

use common::{brute_force_minimum, chase_problem};
use platoon_core::scenario::sweep::{cold_start, new_av_schedule, run_leg, u_init_values};
use platoon_core::scenario::{next_leg, single_av_reference, NewAvSeed, ScenarioConfig};
use platoon_core::{solve, warm_start_penetration, EnergyParams, PlatoonLayout, SolverOptions};

#[test]
fn small_instance_matches_brute_force() {
    let p = chase_problem(4);
    let r = solve(&p, &SolverOptions::default(), &p.zero_controls(), &EnergyParams::default()).unwrap();
    let mu = r.passes.last().unwrap().mu;
    let q = p.with_objective(p.objective.with_mu(mu));
    let (_, best) = brute_force_minimum(|w| q.evaluate(w).unwrap_or(f64::INFINITY), 4, -1.5, 0.5, 9, 1e-7);
    let rel = (r.objective - best) / best;
    assert!(rel.abs() < 1e-2, "solver {} oracle {best}", r.objective);
    assert!(r.violations.is_feasible(1e-3));
}

fn small_scenario() -> platoon_core::scenario::Scenario {
    let cfg = ScenarioConfig::with_overrides(&[
        "horizon=240".into(),
        "platoon.n_vehicles=9".into(),
        "leader.synthetic.n_waves=1".into(),
        "solver.inner_max=60".into(),
    ])
    .unwrap();
    cfg.build(Path::new(".")).unwrap()
}

#[test]
fn warm_start_is_no_worse_than_cold_start() {
    let sc = small_scenario();
    let one = PlatoonLayout::spaced(9, 1).unwrap();
    let two = PlatoonLayout::spaced(9, 2).unwrap();
    let first = run_leg(&sc, &one, &sc.with_layout(one.clone()).unwrap().problem.zero_controls()).unwrap();
    let zeros = vec![0.0; first.result.controls.n_intervals()];
    let warm_init = warm_start_penetration(&first.result.controls, &one, &two, &zeros).unwrap();
    let warm = run_leg(&sc, &two, &warm_init).unwrap();
    let cold = run_leg(&sc, &two, &cold_start(&sc, &two, &zeros).unwrap()).unwrap();
    assert!(
        warm.result.objective <= cold.result.objective * (1.0 + 1e-9),
        "warm {} cold {}",
        warm.result.objective,
        cold.result.objective
    );
}

#[test]
fn solve_is_deterministic() {
    let sc = small_scenario();
    let layout = PlatoonLayout::spaced(9, 1).unwrap();
    let a = run_leg(&sc, &layout, &sc.problem.zero_controls()).unwrap();
    let b = run_leg(&sc, &layout, &sc.problem.zero_controls()).unwrap();
    assert_eq!(a.result.controls, b.result.controls);
    assert_eq!(a.result.objective_history, b.result.objective_history);
}

#[test]
fn escalation_reaches_feasibility() {
    let sc = small_scenario();
    let layout = PlatoonLayout::spaced(9, 2).unwrap();
    let leg = run_leg(&sc, &layout, &sc.with_layout(layout.clone()).unwrap().problem.zero_controls()).unwrap();
    let r = &leg.result;
    assert!(r.violations.is_feasible(1e-3), "{:?}", r.violation_history());
    let mus: Vec<f64> = r.passes.iter().map(|p| p.mu).collect();
    assert!(mus.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn first_new_av_follows_the_leader_reference() {
    let sc = small_scenario();
    let reference = u_init_values(&single_av_reference(&sc).unwrap());
    for seed in [NewAvSeed::Predecessor, NewAvSeed::Leader] {
        assert_eq!(new_av_schedule(&sc, None, 0, seed).unwrap(), reference);
    }
}

#[test]
fn predecessor_seed_starts_the_next_leg_lower() {
    let sc = small_scenario();
    let first = next_leg(&sc, None, NewAvSeed::Predecessor).unwrap();
    let one = first.layout.clone();
    let two = PlatoonLayout::spaced(9, 2).unwrap();
    let two_sc = sc.with_layout(two.clone()).unwrap();
    let start = |seed| {
        let u = new_av_schedule(&sc, Some(&first), 4, seed).unwrap();
        let init = warm_start_penetration(&first.result.controls, &one, &two, &u).unwrap();
        two_sc.problem.evaluate(init.values()).unwrap()
    };
    let (local, leader) = (start(NewAvSeed::Predecessor), start(NewAvSeed::Leader));
    assert!(local < leader, "predecessor {local} leader {leader}");
    let cfg = ScenarioConfig::with_overrides(&["sweep.new_av_seed=\"leader\"".into()]).unwrap();
    assert_eq!(cfg.sweep.new_av_seed, NewAvSeed::Leader);
    assert_eq!(ScenarioConfig::default().sweep.new_av_seed, NewAvSeed::Predecessor);
}
