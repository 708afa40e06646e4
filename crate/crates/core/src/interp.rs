//! Cubic Hermite and monotone piecewise-cubic interpolation.

use crate::scalar::Scalar;

/// Cubic Hermite interpolant on `[0, h]` evaluated at `theta * h`.
///
/// `y0, y1` are endpoint values and `d0, d1` endpoint derivatives with
/// respect to time.
#[inline]
pub fn hermite<S: Scalar>(y0: S, y1: S, d0: S, d1: S, h: S, theta: S) -> S {
    let one = S::one();
    let two = S::lit(2.0);
    let three = S::lit(3.0);
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + theta;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Shape-preserving piecewise cubic interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    t: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    /// `t` must be strictly increasing with at least two samples.
    pub fn new(t: &[f64], y: &[f64]) -> Option<Self> {
        let n = t.len();
        if n < 2 || y.len() != n || t.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        let secant: Vec<f64> = (0..n - 1)
            .map(|k| (y[k + 1] - y[k]) / (t[k + 1] - t[k]))
            .collect();
        let mut slope = vec![0.0; n];
        slope[0] = secant[0];
        slope[n - 1] = secant[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secant[k - 1], secant[k]);
            slope[k] = if a * b <= 0.0 {
                0.0
            } else {
                // weighted harmonic mean keeps the interpolant monotone
                let h0 = t[k] - t[k - 1];
                let h1 = t[k + 1] - t[k];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                (w0 + w1) / (w0 / a + w1 / b)
            };
        }
        Some(Self {
            t: t.to_vec(),
            y: y.to_vec(),
            slope,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    /// Evaluates the interpolant; arguments outside the domain are clamped.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = match self.t.binary_search_by(|probe| probe.total_cmp(&x)) {
            Ok(k) => return self.y[k],
            Err(k) => k.clamp(1, n - 1) - 1,
        };
        let h = self.t[k + 1] - self.t[k];
        let theta = (x - self.t[k]) / h;
        hermite(
            self.y[k],
            self.y[k + 1],
            self.slope[k],
            self.slope[k + 1],
            h,
            theta,
        )
    }
}
