use crate::error::{PlatoonError, Result};
use crate::scalar::Scalar;

/// Uniform state grid `t_j = j * step`, `j = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateGrid<S> {
    step: S,
    n_steps: usize,
}

/// Tolerance for deciding that a ratio of time spans is an integer.
const RATIO_TOL: f64 = 1e-9;

/// `num / den` as an integer, when it is one up to rounding in `S`.
pub(crate) fn integer_ratio<S: Scalar>(num: S, den: S) -> Option<usize> {
    let (num, den) = (num.as_f64(), den.as_f64());
    if !(den > 0.0) || !(num >= 0.0) {
        return None;
    }
    let tol = RATIO_TOL.max(16.0 * S::epsilon().as_f64());
    let r = num / den;
    let k = r.round();
    ((r - k).abs() <= tol * k.max(1.0)).then_some(k as usize)
}

impl<S: Scalar> StateGrid<S> {
    pub fn new(horizon: S, step: S) -> Result<Self> {
        if !(step > S::zero()) || !(horizon > S::zero()) {
            return Err(PlatoonError::Config(format!(
                "horizon ({horizon}) and state step ({step}) must be positive"
            )));
        }
        let n_steps = integer_ratio(horizon, step)
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                PlatoonError::Config(format!(
                    "horizon {horizon} s is not an integer multiple of the state step {step} s"
                ))
            })?;
        Ok(Self { step, n_steps })
    }

    pub fn from_steps(step: S, n_steps: usize) -> Self {
        Self { step, n_steps }
    }

    #[inline]
    pub fn step(&self) -> S {
        self.step
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn time(&self, j: usize) -> S {
        self.step * S::from_usize_lossy(j)
    }

    pub fn horizon(&self) -> S {
        self.time(self.n_steps)
    }

    /// Grid index of each boundary in `tau`; fails unless every boundary
    /// is a grid point and the last one is the horizon.
    pub fn boundary_indices(&self, tau: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(tau.len());
        for &t in tau {
            let j = integer_ratio(t, self.step).ok_or_else(|| {
                PlatoonError::GridMismatch(format!(
                    "control boundary {t} s is not on the state grid (step {} s)",
                    self.step
                ))
            })?;
            out.push(j);
        }
        if out.first() != Some(&0) || out.last() != Some(&self.n_steps) {
            return Err(PlatoonError::GridMismatch(format!(
                "control grid must span [0, {}] s",
                self.horizon()
            )));
        }
        Ok(out)
    }

    /// Control interval index of every integration step.
    pub fn step_intervals(&self, tau: &[S]) -> Result<Vec<usize>> {
        let idx = self.boundary_indices(tau)?;
        let mut out = Vec::with_capacity(self.n_steps);
        for (k, w) in idx.windows(2).enumerate() {
            out.extend(std::iter::repeat(k).take(w[1] - w[0]));
        }
        Ok(out)
    }
}
