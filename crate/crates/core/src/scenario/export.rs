//! Long-format trajectory CSV: `t,vehicle,kind,is_av,value`.
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! load after an export reproduces every number bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dynamics::{ControlSchedule, Platoon, StateTrajectory};
use crate::error::{PlatoonError, Result};

pub const KINDS: [&str; 4] = ["x", "v", "a", "headway"];

/// Sample-major arrays (`n_samples x n_vehicles`) of one exported run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub n_vehicles: usize,
    pub t: Vec<f64>,
    pub is_av: Vec<bool>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub headway: Vec<f64>,
}

impl TrajectoryTable {
    pub fn from_run(
        platoon: &Platoon<f64>,
        traj: &StateTrajectory<f64>,
        controls: &ControlSchedule<f64>,
    ) -> Result<Self> {
        let n = traj.n_vehicles();
        Ok(Self {
            n_vehicles: n,
            t: (0..traj.n_samples()).map(|j| traj.grid().time(j)).collect(),
            is_av: (0..n).map(|i| platoon.layout.is_av(i)).collect(),
            x: traj.positions().to_vec(),
            v: traj.velocities().to_vec(),
            a: platoon.accelerations(traj, controls)?,
            headway: platoon.headways(traj),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.t.len()
    }

    fn column(&self, kind: usize) -> &[f64] {
        match kind {
            0 => &self.x,
            1 => &self.v,
            2 => &self.a,
            _ => &self.headway,
        }
    }

    fn column_mut(&mut self, kind: usize) -> &mut Vec<f64> {
        match kind {
            0 => &mut self.x,
            1 => &mut self.v,
            2 => &mut self.a,
            _ => &mut self.headway,
        }
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(out);
        writeln!(w, "t,vehicle,kind,is_av,value")?;
        let n = self.n_vehicles;
        for (j, t) in self.t.iter().enumerate() {
            for i in 0..n {
                let av = u8::from(self.is_av[i]);
                for (k, kind) in KINDS.iter().enumerate() {
                    writeln!(w, "{t},{},{kind},{av},{}", i + 1, self.column(k)[j * n + i])?;
                }
            }
        }
        w.flush()
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| PlatoonError::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != ["t", "vehicle", "kind", "is_av", "value"] {
            return Err(PlatoonError::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 1;
            let rec = rec.map_err(|e| PlatoonError::Parse(format!("row {row}: {e}")))?;
            let num = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| PlatoonError::Parse(format!("row {row}: bad number `{}`", &rec[i])))
            };
            let vehicle: usize = rec[1]
                .parse()
                .map_err(|_| PlatoonError::Parse(format!("row {row}: bad vehicle `{}`", &rec[1])))?;
            let kind = KINDS
                .iter()
                .position(|&k| k == &rec[2])
                .ok_or_else(|| PlatoonError::Parse(format!("row {row}: unknown kind `{}`", &rec[2])))?;
            rows.push((num(0)?, vehicle, kind, &rec[3] == "1", num(4)?));
        }
        let n = rows.iter().map(|r| r.1).max().unwrap_or(0);
        if n == 0 || rows.len() % (n * KINDS.len()) != 0 {
            return Err(PlatoonError::Parse("incomplete trajectory table".into()));
        }
        let samples = rows.len() / (n * KINDS.len());
        let mut table = Self {
            n_vehicles: n,
            t: Vec::with_capacity(samples),
            is_av: vec![false; n],
            x: Vec::new(),
            v: Vec::new(),
            a: Vec::new(),
            headway: Vec::new(),
        };
        for (idx, (t, vehicle, kind, av, value)) in rows.into_iter().enumerate() {
            let expect_vehicle = (idx / KINDS.len()) % n + 1;
            if vehicle != expect_vehicle || kind != idx % KINDS.len() {
                return Err(PlatoonError::Parse(format!("row {} is out of order", idx + 1)));
            }
            if idx % (n * KINDS.len()) == 0 {
                table.t.push(t);
            }
            table.is_av[vehicle - 1] = av;
            table.column_mut(kind).push(value);
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| PlatoonError::io(path, e))?;
        self.write(f).map_err(|e| PlatoonError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| PlatoonError::io(path, e))?;
        Self::read(f)
    }
}

/// Writes the control matrix as `t_start,t_end,vehicle,value` rows.
pub fn write_controls_csv<W: Write>(out: W, controls: &ControlSchedule<f64>, av_slots: &[usize]) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "t_start,t_end,vehicle,value")?;
    for k in 0..controls.n_intervals() {
        for (i, slot) in av_slots.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                controls.tau()[k],
                controls.tau()[k + 1],
                slot + 1,
                controls.get(k, i)
            )?;
        }
    }
    w.flush()
}
