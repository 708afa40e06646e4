use crate::error::{PlatoonError, Result};
use crate::interp::hermite;
use crate::scalar::Scalar;

/// Default tolerance (m) on the trapezoid consistency of leader positions.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-3;

/// Leader position, velocity and acceleration on a uniform grid.
///
/// Between grid points the leader is reconstructed by cubic Hermite
/// interpolation: positions from `(x, v)`, velocities from `(v, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderTrajectory<S> {
    step: S,
    x: Vec<S>,
    v: Vec<S>,
    a: Vec<S>,
}

impl<S: Scalar> LeaderTrajectory<S> {
    pub fn new(step: S, x: Vec<S>, v: Vec<S>, a: Vec<S>) -> Result<Self> {
        Self::with_tolerance(step, x, v, a, S::lit(DEFAULT_CONSISTENCY_TOL))
    }

    /// Like [`new`](Self::new) with an explicit position consistency
    /// tolerance: `|x_{j+1} - x_j - step (v_j + v_{j+1}) / 2| <= tol`.
    pub fn with_tolerance(step: S, x: Vec<S>, v: Vec<S>, a: Vec<S>, tol: S) -> Result<Self> {
        if !(step > S::zero()) {
            return Err(PlatoonError::LeaderValidation(format!(
                "sampling step must be positive, got {step}"
            )));
        }
        if x.len() < 2 || v.len() != x.len() || a.len() != x.len() {
            return Err(PlatoonError::LeaderValidation(format!(
                "need at least two samples of equal length (x {}, v {}, a {})",
                x.len(),
                v.len(),
                a.len()
            )));
        }
        for (j, ((&xj, &vj), &aj)) in x.iter().zip(&v).zip(&a).enumerate() {
            if !(xj.is_finite() && vj.is_finite() && aj.is_finite()) {
                return Err(PlatoonError::LeaderValidation(format!(
                    "non-finite value at sample {j}"
                )));
            }
            if vj < S::zero() {
                return Err(PlatoonError::LeaderValidation(format!(
                    "negative velocity {vj} at sample {j}"
                )));
            }
        }
        let half = S::lit(0.5);
        for j in 0..x.len() - 1 {
            let defect = x[j + 1] - x[j] - step * half * (v[j] + v[j + 1]);
            if defect.abs() > tol {
                return Err(PlatoonError::LeaderValidation(format!(
                    "position and velocity disagree by {defect} m between samples {j} and {}",
                    j + 1
                )));
            }
        }
        Ok(Self { step, x, v, a })
    }

    /// Leader driving at constant speed from `x0`.
    pub fn constant_speed(step: S, n_steps: usize, x0: S, speed: S) -> Result<Self> {
        let x = (0..=n_steps)
            .map(|j| x0 + speed * step * S::from_usize_lossy(j))
            .collect();
        Self::new(step, x, vec![speed; n_steps + 1], vec![S::zero(); n_steps + 1])
    }

    #[inline]
    pub fn step(&self) -> S {
        self.step
    }

    pub fn n_samples(&self) -> usize {
        self.x.len()
    }

    pub fn end_time(&self) -> S {
        self.step * S::from_usize_lossy(self.x.len() - 1)
    }

    pub fn positions(&self) -> &[S] {
        &self.x
    }

    pub fn velocities(&self) -> &[S] {
        &self.v
    }

    pub fn accelerations(&self) -> &[S] {
        &self.a
    }

    /// Position and velocity at `t_j + theta * step`, `theta` in `[0, 1]`.
    #[inline]
    pub fn sample_step(&self, j: usize, theta: S) -> (S, S) {
        if theta == S::zero() || j + 1 >= self.x.len() {
            return (self.x[j], self.v[j]);
        }
        let h = self.step;
        let xs = hermite(self.x[j], self.x[j + 1], self.v[j], self.v[j + 1], h, theta);
        let vs = hermite(self.v[j], self.v[j + 1], self.a[j], self.a[j + 1], h, theta);
        (xs, vs)
    }

    /// Position and velocity at an arbitrary time inside the sampled span.
    pub fn sample(&self, t: S) -> Result<(S, S)> {
        let end = self.end_time();
        if !(t >= S::zero() && t <= end) {
            return Err(PlatoonError::LeaderCoverage {
                time: t.as_f64(),
                end: end.as_f64(),
            });
        }
        let r = t / self.step;
        let j = r.floor().to_usize().unwrap_or(0).min(self.x.len() - 1);
        Ok(self.sample_step(j, r - S::from_usize_lossy(j)))
    }
}
