//! Subcommand implementations.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use platoon_core::adjoint::{finite_difference_gradient, max_relative_error};
use platoon_core::scenario::report::{greedy_full_row, render_table, report as reduction_rows, write_report_csv};
use platoon_core::scenario::sweep::{run_leg, u_init_values, SweepLeg};
use platoon_core::scenario::{baseline_all_human, single_av_reference, sweep_warm, write_leader_csv, Scenario};
use platoon_core::{ControlSchedule, LeaderTrajectory, Metrics, PlatoonLayout};

use crate::io::{
    ensure_dir, load_scenario, read_controls, read_summary, write_controls, write_file, write_json,
    write_trajectories, OptimizationSummary, RunSummary,
};
use crate::{CliError, Common};

fn positions(s: &Scenario) -> Vec<usize> {
    s.problem.platoon.layout.av_slots().iter().map(|s| s + 1).collect()
}

fn label(s: &Scenario) -> String {
    let m = s.problem.n_av();
    if m == 0 {
        format!("{} HV", s.config.platoon.n_vehicles)
    } else {
        format!("{m} AV")
    }
}

pub fn simulate(common: &Common, controls: Option<&Path>) -> Result<(), CliError> {
    let sc = load_scenario(common)?;
    let p = &sc.problem;
    let controls = match controls {
        Some(path) => read_controls(path, &sc)?,
        None => p.zero_controls(),
    };
    let traj = p.simulate(&controls)?;
    let metrics = Metrics::compute(&p.platoon, &traj, &controls, &sc.config.energy)?;
    ensure_dir(&common.out)?;
    write_trajectories(&common.out.join("trajectories.csv"), &sc, &traj, &controls)?;
    write_json(
        &common.out.join("metrics.json"),
        &RunSummary {
            label: label(&sc),
            av_positions: positions(&sc),
            metrics: metrics.clone(),
            optimization: None,
        },
    )?;
    println!(
        "total squared acceleration {:.6}, total fuel {:.6}",
        metrics.total_sq_acceleration, metrics.total_fuel
    );
    Ok(())
}

fn reference_controls(sc: &Scenario) -> Result<ControlSchedule<f64>, CliError> {
    let p = &sc.problem;
    let mut c = p.zero_controls();
    if p.n_av() == 0 {
        return Ok(c);
    }
    let u = u_init_values(&single_av_reference(sc)?);
    for (k, &v) in u.iter().enumerate() {
        for i in 0..p.n_av() {
            c.set(k, i, v);
        }
    }
    Ok(c)
}

fn save_leg(dir: &Path, sc: &Scenario, leg: &SweepLeg, with_trajectories: bool) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let r = &leg.result;
    write_controls(&dir.join("controls.csv"), &r.controls, leg.layout.av_slots())?;
    if with_trajectories {
        write_trajectories(&dir.join("trajectories.csv"), sc, &r.trajectory, &r.controls)?;
    }
    write_json(
        &dir.join("metrics.json"),
        &RunSummary {
            label: format!("{} AV", leg.n_av),
            av_positions: leg.layout.av_slots().iter().map(|s| s + 1).collect(),
            metrics: r.metrics.clone(),
            optimization: Some(OptimizationSummary::from_result(r)),
        },
    )
}

pub fn optimize(common: &Common, init: &str) -> Result<(), CliError> {
    let sc = load_scenario(common)?;
    let start = match init {
        "zero" => sc.problem.zero_controls(),
        _ => reference_controls(&sc)?,
    };
    let layout = sc.problem.platoon.layout.clone();
    let leg = run_leg(&sc, &layout, &start)?;
    save_leg(&common.out, &sc, &leg, true)?;
    let r = &leg.result;
    println!(
        "objective {:.6}, total squared acceleration {:.6}, max violation {:.3e}, {:?} after {} evaluations",
        r.objective,
        r.metrics.total_sq_acceleration,
        r.violations.max_violation(),
        r.reason,
        r.evaluations
    );
    Ok(())
}

pub fn grad_check(common: &Common, step: f64, amplitude: f64) -> Result<(), CliError> {
    let sc = load_scenario(common)?;
    let p = &sc.problem;
    if !(step > 0.0) || !(amplitude >= 0.0) {
        return Err(CliError::Invalid("step must be positive and amplitude nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let omega: Vec<f64> = (0..p.n_controls())
        .map(|_| if amplitude > 0.0 { rng.gen_range(-amplitude..=amplitude) } else { 0.0 })
        .collect();
    let adjoint = p.value_and_gradient(&omega)?.gradient;
    let fd = finite_difference_gradient(&omega, step, |w| p.evaluate(w))?;
    let err = max_relative_error(&adjoint, &fd);
    ensure_dir(&common.out)?;
    let mut csv = String::from("index,interval,vehicle,adjoint,finite_difference\n");
    let slots = p.platoon.layout.av_slots();
    for (k, (a, f)) in adjoint.iter().zip(&fd).enumerate() {
        let m = slots.len();
        csv.push_str(&format!("{k},{},{},{a},{f}\n", k / m, slots[k % m] + 1));
    }
    write_file(&common.out.join("grad_check.csv"), csv.as_bytes())?;
    println!("max relative error {err:.3e} over {} parameters", adjoint.len());
    Ok(())
}

pub fn sweep(common: &Common, max_avs: Option<usize>) -> Result<(), CliError> {
    let sc = load_scenario(common)?;
    let n = sc.config.platoon.n_vehicles;
    let max_avs = max_avs.unwrap_or(sc.config.sweep.max_avs);
    if max_avs == 0 || 4 * (max_avs - 1) >= n {
        return Err(CliError::Invalid(format!(
            "{max_avs} AVs spaced by three human drivers do not fit into {n} vehicles"
        )));
    }
    ensure_dir(&common.out)?;
    let (_, baseline) = baseline_all_human(&sc)?;
    let legs = if sc.config.sweep.warm_start {
        sweep_warm(&sc, max_avs, sc.config.sweep.new_av_seed)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(common.parallel.max(1))
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        pool.install(|| {
            (1..=max_avs)
                .into_par_iter()
                .map(|m| {
                    let layout = PlatoonLayout::spaced(n, m)?;
                    let leg_sc = sc.with_layout(layout.clone())?;
                    run_leg(&sc, &layout, &leg_sc.problem.zero_controls())
                })
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    for leg in &legs {
        save_leg(&common.out.join(format!("av_{}", leg.n_av)), &sc, leg, false)?;
    }
    let mut runs: Vec<(String, &Metrics<f64>)> = vec![(format!("{n} HV"), &baseline)];
    runs.extend(legs.iter().map(|l| (format!("{} AV", l.n_av), &l.result.metrics)));
    let rows = reduction_rows(&runs, &baseline);
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &rows).expect("writing to memory");
    write_file(&common.out.join("sweep.csv"), &buf)?;
    print!("{}", render_table(&rows));
    Ok(())
}

pub fn gen_leader(common: &Common) -> Result<(), CliError> {
    let sc = load_scenario(common)?;
    ensure_dir(&common.out)?;
    let leader: &LeaderTrajectory<f64> = &sc.problem.platoon.leader;
    let path = common.out.join("leader.csv");
    write_leader_csv(&path, leader).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("wrote {} samples to {}", leader.n_samples(), path.display());
    Ok(())
}

pub fn report(common: &Common, baseline: &Path, runs: &[PathBuf], greedy_full: &[PathBuf]) -> Result<(), CliError> {
    let base = read_summary(baseline)?;
    let summaries = runs.iter().map(|d| read_summary(d)).collect::<Result<Vec<_>, _>>()?;
    let labelled: Vec<(String, &Metrics<f64>)> = std::iter::once((base.label.clone(), &base.metrics))
        .chain(summaries.iter().map(|s| (s.label.clone(), &s.metrics)))
        .collect();
    let rows = reduction_rows(&labelled, &base.metrics);
    ensure_dir(&common.out)?;
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &rows).expect("writing to memory");
    write_file(&common.out.join("report.csv"), &buf)?;
    print!("{}", render_table(&rows));

    if !greedy_full.is_empty() {
        let mut csv = String::from("n_av,greedy_sq_acceleration,full_sq_acceleration,sq_acceleration_diff_pct,greedy_fuel,full_fuel,fuel_diff_pct\n");
        for pair in greedy_full.chunks(2) {
            let (g, f) = (read_summary(&pair[0])?, read_summary(&pair[1])?);
            let row = greedy_full_row(f.av_positions.len(), &g.metrics, &f.metrics);
            let pct = platoon_core::scenario::report::format_percent;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.n_av,
                row.greedy_sq_acceleration,
                row.full_sq_acceleration,
                pct(row.sq_acceleration_difference),
                row.greedy_fuel,
                row.full_fuel,
                pct(row.fuel_difference)
            ));
            println!(
                "{} AV greedy vs full: acceleration {}%, fuel {}%",
                row.n_av,
                pct(row.sq_acceleration_difference),
                pct(row.fuel_difference)
            );
        }
        write_file(&common.out.join("greedy_vs_full.csv"), csv.as_bytes())?;
    }
    Ok(())
}
