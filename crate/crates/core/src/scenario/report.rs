//! Reduction tables relative to a baseline run.

use std::io::Write;

use serde::Serialize;

use crate::metrics::Metrics;

/// `100 (baseline - value) / baseline`; `None` for a zero baseline.
pub fn percent_reduction(value: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (baseline - value) / baseline)
}

/// `100 (greedy - full) / greedy`; `None` when the greedy value is zero.
pub fn greedy_full_difference(greedy: f64, full: f64) -> Option<f64> {
    (greedy != 0.0).then(|| 100.0 * (greedy - full) / greedy)
}

/// Two decimals, or `n/a` when undefined.
pub fn format_percent(p: Option<f64>) -> String {
    match p {
        Some(p) => format!("{p:.2}"),
        None => "n/a".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub total_sq_acceleration: f64,
    pub total_fuel: f64,
    pub sq_acceleration_reduction: Option<f64>,
    pub fuel_reduction: Option<f64>,
}

/// One row per run, reductions relative to `baseline`.
pub fn report(runs: &[(String, &Metrics<f64>)], baseline: &Metrics<f64>) -> Vec<ReportRow> {
    runs.iter()
        .map(|(label, m)| ReportRow {
            label: label.clone(),
            total_sq_acceleration: m.total_sq_acceleration,
            total_fuel: m.total_fuel,
            sq_acceleration_reduction: percent_reduction(m.total_sq_acceleration, baseline.total_sq_acceleration),
            fuel_reduction: percent_reduction(m.total_fuel, baseline.total_fuel),
        })
        .collect()
}

pub fn write_report_csv<W: Write>(mut w: W, rows: &[ReportRow]) -> std::io::Result<()> {
    writeln!(w, "label,total_sq_acceleration,total_fuel,sq_acceleration_reduction_pct,fuel_reduction_pct")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.label,
            r.total_sq_acceleration,
            r.total_fuel,
            format_percent(r.sq_acceleration_reduction),
            format_percent(r.fuel_reduction)
        )?;
    }
    Ok(())
}

/// Fixed-width table for terminals.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut s = format!(
        "{:<12} {:>16} {:>12} {:>10} {:>10}\n",
        "run", "sq. accel", "fuel", "accel %", "fuel %"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<12} {:>16.4} {:>12.4} {:>10} {:>10}\n",
            r.label,
            r.total_sq_acceleration,
            r.total_fuel,
            format_percent(r.sq_acceleration_reduction),
            format_percent(r.fuel_reduction)
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyFullRow {
    pub n_av: usize,
    pub greedy_sq_acceleration: f64,
    pub full_sq_acceleration: f64,
    pub sq_acceleration_difference: Option<f64>,
    pub greedy_fuel: f64,
    pub full_fuel: f64,
    pub fuel_difference: Option<f64>,
}

pub fn greedy_full_row(n_av: usize, greedy: &Metrics<f64>, full: &Metrics<f64>) -> GreedyFullRow {
    GreedyFullRow {
        n_av,
        greedy_sq_acceleration: greedy.total_sq_acceleration,
        full_sq_acceleration: full.total_sq_acceleration,
        sq_acceleration_difference: greedy_full_difference(greedy.total_sq_acceleration, full.total_sq_acceleration),
        greedy_fuel: greedy.total_fuel,
        full_fuel: full.total_fuel,
        fuel_difference: greedy_full_difference(greedy.total_fuel, full.total_fuel),
    }
}
