use crate::error::{PlatoonError, Result};

/// Which platoon slots are autonomous (acceleration-controlled).
///
/// Slots are 0-based: slot 0 drives directly behind the leader. Configuration
/// files and CSV exports use 1-based vehicle numbers instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatoonLayout {
    is_av: Vec<bool>,
    av_slots: Vec<usize>,
    av_column: Vec<Option<usize>>,
}

impl PlatoonLayout {
    pub fn new(n_vehicles: usize, av_slots: &[usize]) -> Result<Self> {
        if n_vehicles == 0 {
            return Err(PlatoonError::Config("platoon needs at least one vehicle".into()));
        }
        let mut slots = av_slots.to_vec();
        slots.sort_unstable();
        if slots.windows(2).any(|w| w[0] == w[1]) {
            return Err(PlatoonError::Config(format!(
                "duplicate autonomous slot in {av_slots:?}"
            )));
        }
        if let Some(&bad) = slots.iter().find(|&&s| s >= n_vehicles) {
            return Err(PlatoonError::Config(format!(
                "autonomous slot {bad} outside platoon of {n_vehicles} vehicles"
            )));
        }
        let mut is_av = vec![false; n_vehicles];
        let mut av_column = vec![None; n_vehicles];
        for (col, &s) in slots.iter().enumerate() {
            is_av[s] = true;
            av_column[s] = Some(col);
        }
        Ok(Self {
            is_av,
            av_slots: slots,
            av_column,
        })
    }

    pub fn all_human(n_vehicles: usize) -> Result<Self> {
        Self::new(n_vehicles, &[])
    }

    pub fn all_autonomous(n_vehicles: usize) -> Result<Self> {
        Self::new(n_vehicles, &(0..n_vehicles).collect::<Vec<_>>())
    }

    /// Layout from 1-based vehicle numbers.
    pub fn from_positions(n_vehicles: usize, positions: &[usize]) -> Result<Self> {
        if positions.contains(&0) {
            return Err(PlatoonError::Config(
                "vehicle numbers are 1-based; 0 denotes the leader".into(),
            ));
        }
        let slots: Vec<usize> = positions.iter().map(|p| p - 1).collect();
        Self::new(n_vehicles, &slots)
    }

    /// `n_av` autonomous vehicles: the first directly behind the leader,
    /// each further one separated from the previous by three human drivers.
    pub fn spaced(n_vehicles: usize, n_av: usize) -> Result<Self> {
        let slots: Vec<usize> = (0..n_av).map(|k| 4 * k).collect();
        Self::new(n_vehicles, &slots)
    }

    pub fn n_vehicles(&self) -> usize {
        self.is_av.len()
    }

    pub fn n_av(&self) -> usize {
        self.av_slots.len()
    }

    pub fn av_slots(&self) -> &[usize] {
        &self.av_slots
    }

    pub fn hv_slots(&self) -> Vec<usize> {
        (0..self.n_vehicles()).filter(|&i| !self.is_av[i]).collect()
    }

    #[inline]
    pub fn is_av(&self, slot: usize) -> bool {
        self.is_av[slot]
    }

    /// Column of `slot` in the control matrix, `None` for human drivers.
    #[inline]
    pub fn av_column(&self, slot: usize) -> Option<usize> {
        self.av_column[slot]
    }
}
