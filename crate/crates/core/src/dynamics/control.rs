use crate::error::{PlatoonError, Result};
use crate::scalar::Scalar;

/// Piecewise-constant AV accelerations on the control grid `tau`.
///
/// `omega` is stored interval-major: entry `(k, i)` is the acceleration of
/// the `i`-th autonomous vehicle on `[tau_k, tau_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule<S> {
    tau: Vec<S>,
    n_av: usize,
    omega: Vec<S>,
}

impl<S: Scalar> ControlSchedule<S> {
    pub fn new(tau: Vec<S>, n_av: usize, omega: Vec<S>) -> Result<Self> {
        if tau.len() < 2 {
            return Err(PlatoonError::Config("control grid needs at least one interval".into()));
        }
        if tau[0] != S::zero() || tau.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PlatoonError::Config(
                "control grid must start at 0 and increase strictly".into(),
            ));
        }
        if omega.len() != (tau.len() - 1) * n_av {
            return Err(PlatoonError::Config(format!(
                "expected {} control values, got {}",
                (tau.len() - 1) * n_av,
                omega.len()
            )));
        }
        Ok(Self { tau, n_av, omega })
    }

    /// Zero controls on `n_intervals` equal intervals of `[0, horizon]`.
    pub fn zeros(horizon: S, n_intervals: usize, n_av: usize) -> Result<Self> {
        if n_intervals == 0 || !(horizon > S::zero()) {
            return Err(PlatoonError::Config("empty control grid".into()));
        }
        let width = horizon / S::from_usize_lossy(n_intervals);
        let mut tau: Vec<S> = (0..n_intervals).map(|k| width * S::from_usize_lossy(k)).collect();
        tau.push(horizon);
        Self::new(tau, n_av, vec![S::zero(); n_intervals * n_av])
    }

    /// Equal intervals of width `dtau`, which must divide the horizon.
    pub fn uniform(horizon: S, dtau: S, n_av: usize) -> Result<Self> {
        let p = crate::dynamics::grid::integer_ratio(horizon, dtau)
            .filter(|&p| p > 0)
            .ok_or_else(|| {
                PlatoonError::Config(format!(
                    "horizon {horizon} s is not an integer multiple of the control step {dtau} s"
                ))
            })?;
        Self::zeros(horizon, p, n_av)
    }

    pub fn tau(&self) -> &[S] {
        &self.tau
    }

    pub fn horizon(&self) -> S {
        self.tau[self.tau.len() - 1]
    }

    pub fn n_intervals(&self) -> usize {
        self.tau.len() - 1
    }

    pub fn n_av(&self) -> usize {
        self.n_av
    }

    pub fn interval_width(&self, k: usize) -> S {
        self.tau[k + 1] - self.tau[k]
    }

    #[inline]
    pub fn get(&self, k: usize, av: usize) -> S {
        self.omega[k * self.n_av + av]
    }

    #[inline]
    pub fn set(&mut self, k: usize, av: usize, value: S) {
        self.omega[k * self.n_av + av] = value;
    }

    /// Controls of every AV on interval `k`.
    pub fn interval(&self, k: usize) -> &[S] {
        &self.omega[k * self.n_av..(k + 1) * self.n_av]
    }

    pub fn values(&self) -> &[S] {
        &self.omega
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.omega
    }

    /// Same grid with different values.
    pub fn with_values(&self, omega: Vec<S>) -> Result<Self> {
        Self::new(self.tau.clone(), self.n_av, omega)
    }

    /// Index of the interval containing `t`; intervals are closed on the
    /// left and the horizon belongs to the last one.
    pub fn interval_at(&self, t: S) -> Result<usize> {
        let horizon = self.horizon();
        if !(t >= S::zero() && t <= horizon) {
            return Err(PlatoonError::OutOfRange {
                time: t.as_f64(),
                horizon: horizon.as_f64(),
            });
        }
        let k = self.tau.partition_point(|&b| b <= t);
        Ok(k.saturating_sub(1).min(self.n_intervals() - 1))
    }

    /// Controls of every AV at time `t`.
    pub fn value_at(&self, t: S) -> Result<&[S]> {
        Ok(self.interval(self.interval_at(t)?))
    }

    /// Projects every value onto `[lo, hi]`.
    pub fn clamp(&mut self, lo: S, hi: S) {
        for w in &mut self.omega {
            *w = w.max(lo).min(hi);
        }
    }
}
