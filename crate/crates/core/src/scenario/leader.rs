//! Leader trajectories: synthetic stop-and-go waves and CSV files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LeaderTrajectory, StateGrid};
use crate::error::{PlatoonError, Result};
use crate::interp::MonotoneCubic;

/// Raised-cosine velocity dips, back to back and centred in the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopAndGo {
    /// Cruise speed outside the dips (m/s).
    pub v_base: f64,
    /// Depth of every dip (m/s).
    pub amplitude: f64,
    /// Duration of one dip (s).
    pub period: f64,
    pub n_waves: usize,
    /// Leader position at `t = 0` (m).
    pub x0: f64,
}

impl Default for StopAndGo {
    fn default() -> Self {
        Self {
            v_base: 28.0,
            amplitude: 22.0,
            period: 120.0,
            n_waves: 4,
            x0: 0.0,
        }
    }
}

impl StopAndGo {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let bad = |m: String| Err(PlatoonError::Config(m));
        if !(self.v_base.is_finite() && self.amplitude.is_finite() && self.x0.is_finite()) {
            return bad("leader parameters must be finite".into());
        }
        if self.amplitude < 0.0 || self.amplitude > self.v_base {
            return bad(format!(
                "amplitude {} must lie in [0, v_base = {}] to keep the leader speed nonnegative",
                self.amplitude, self.v_base
            ));
        }
        if self.n_waves > 0 && !(self.period > 0.0) {
            return bad(format!("period must be positive, got {}", self.period));
        }
        if self.n_waves as f64 * self.period > horizon + 1e-9 {
            return bad(format!(
                "{} waves of {} s do not fit into {} s",
                self.n_waves, self.period, horizon
            ));
        }
        Ok(())
    }

    fn window(&self, horizon: f64) -> (f64, f64) {
        let span = self.n_waves as f64 * self.period;
        let start = 0.5 * (horizon - span);
        (start, span)
    }

    /// Closed-form `(x, v, a)` at time `t`.
    pub fn state_at(&self, t: f64, horizon: f64) -> (f64, f64, f64) {
        let (start, span) = self.window(horizon);
        if self.n_waves == 0 || self.amplitude == 0.0 {
            return (self.x0 + self.v_base * t, self.v_base, 0.0);
        }
        let w = std::f64::consts::TAU / self.period;
        let s = (t - start).clamp(0.0, span);
        let inside = t > start && t < start + span;
        let x = self.x0 + self.v_base * t - 0.5 * self.amplitude * (s - (w * s).sin() / w);
        let (v, a) = if inside {
            (
                self.v_base - 0.5 * self.amplitude * (1.0 - (w * s).cos()),
                -0.5 * self.amplitude * w * (w * s).sin(),
            )
        } else {
            (self.v_base, 0.0)
        };
        (x, v, a)
    }

    /// Samples the profile on `grid`.
    pub fn sample(&self, grid: &StateGrid<f64>) -> Result<LeaderTrajectory<f64>> {
        let horizon = grid.horizon();
        self.validate(horizon)?;
        let n = grid.n_samples();
        let (mut x, mut v, mut a) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..n {
            let (xj, vj, aj) = self.state_at(grid.time(j), horizon);
            x.push(xj);
            v.push(vj.max(0.0));
            a.push(aj);
        }
        LeaderTrajectory::new(grid.step(), x, v, a)
    }
}

/// Convenience wrapper around [`StopAndGo::sample`].
pub fn synth_leader_stop_and_go(
    v_base: f64,
    amplitude: f64,
    period: f64,
    n_waves: usize,
    horizon: f64,
    step: f64,
) -> Result<LeaderTrajectory<f64>> {
    let grid = StateGrid::new(horizon, step)?;
    StopAndGo {
        v_base,
        amplitude,
        period,
        n_waves,
        x0: 0.0,
    }
    .sample(&grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Velocity,
    Position,
}

/// Central differences with one-sided second-order ends.
fn differentiate(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    if n == 2 {
        let d = (y[1] - y[0]) / h;
        return vec![d, d];
    }
    let mut d = vec![0.0; n];
    for j in 1..n - 1 {
        d[j] = (y[j + 1] - y[j - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    d
}

/// Reads a leader CSV with header `t,v` or `t,x` and resamples it onto
/// the state grid of step `step` over `[0, horizon]`.
///
/// Velocities are integrated with the trapezoid rule starting from
/// `x = 0`; positions are differentiated by central differences.
pub fn load_leader_csv(path: &Path, step: f64, horizon: f64) -> Result<LeaderTrajectory<f64>> {
    let file = File::open(path).map_err(|e| PlatoonError::io(path, e))?;
    read_leader_csv(file, step, horizon)
}

pub fn read_leader_csv<R: std::io::Read>(reader: R, step: f64, horizon: f64) -> Result<LeaderTrajectory<f64>> {
    let grid = StateGrid::new(horizon, step)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| PlatoonError::Parse(format!("leader CSV header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let column = match names.as_slice() {
        ["t", "v"] => Column::Velocity,
        ["t", "x"] => Column::Position,
        _ => {
            return Err(PlatoonError::Parse(format!(
                "leader CSV header must be `t,v` or `t,x`, found `{}`",
                names.join(",")
            )))
        }
    };

    let mut t = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        // data rows are numbered from 1, the header is row 0
        let row = k + 1;
        let rec = rec.map_err(|e| PlatoonError::Parse(format!("row {row}: {e}")))?;
        if rec.len() != 2 {
            return Err(PlatoonError::Parse(format!("row {row}: expected 2 fields, found {}", rec.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PlatoonError::Parse(format!("row {row}: `{s}` is not a finite number")))
        };
        t.push(parse(&rec[0])?);
        y.push(parse(&rec[1])?);
    }
    if t.len() < 2 {
        return Err(PlatoonError::Parse("leader CSV needs at least two rows".into()));
    }
    if let Some(k) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(PlatoonError::Parse(format!(
            "time is not strictly increasing at row {}",
            k + 2
        )));
    }
    let bad: Vec<usize> = match column {
        Column::Velocity => (0..y.len()).filter(|&k| y[k] < 0.0).map(|k| k + 1).collect(),
        Column::Position => (1..y.len()).filter(|&k| y[k] < y[k - 1]).map(|k| k + 1).collect(),
    };
    if !bad.is_empty() {
        return Err(PlatoonError::LeaderValidation(format!(
            "leader moves backwards at rows {bad:?}"
        )));
    }
    let tol = 1e-9 * horizon.max(1.0);
    if t[0] > tol || t[t.len() - 1] < horizon - tol {
        return Err(PlatoonError::LeaderValidation(format!(
            "data spans [{}, {}] s but the horizon is [0, {horizon}] s",
            t[0],
            t[t.len() - 1]
        )));
    }

    let interp = MonotoneCubic::new(&t, &y)
        .ok_or_else(|| PlatoonError::Parse("cannot interpolate leader data".into()))?;
    let samples: Vec<f64> = (0..grid.n_samples()).map(|j| interp.eval(grid.time(j))).collect();
    let (x, v) = match column {
        Column::Velocity => {
            let mut x = Vec::with_capacity(samples.len());
            let mut acc = 0.0;
            x.push(acc);
            for w in samples.windows(2) {
                acc += 0.5 * step * (w[0] + w[1]);
                x.push(acc);
            }
            (x, samples)
        }
        Column::Position => {
            let v = differentiate(&samples, step).into_iter().map(|v| v.max(0.0)).collect();
            (samples, v)
        }
    };
    let a = differentiate(&v, step);
    LeaderTrajectory::new(step, x, v, a)
}

/// Writes `t,v` rows on the leader's sampling grid.
pub fn write_leader_csv(path: &Path, leader: &LeaderTrajectory<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| PlatoonError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "t,v")?;
        for (j, v) in leader.velocities().iter().enumerate() {
            writeln!(w, "{},{}", leader.step() * j as f64, v)?;
        }
        w.flush()
    };
    emit().map_err(|e| PlatoonError::io(path, e))
}
