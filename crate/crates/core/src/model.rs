//! Bando follow-the-leader car-following law.
//!
//! The acceleration of a human-driven follower is
//!
//! ```text
//! Acc(x, x_lead, v, v_lead) = alpha * (V(h) - v) + beta * (v_lead - v) / h^2,   h = x_lead - x - l
//! ```
//!
//! with the tanh optimal-velocity function
//!
//! ```text
//! V(h) = v_max * (tanh(h - d_s) + tanh(l + d_s)) / (1 + tanh(l + d_s)).
//! ```
//!
//! Every function rejects non-positive headways instead of clamping them:
//! a collision state is a bug (human drivers) or a constraint violation
//! (controlled vehicles) and must surface as such.

use serde::{Deserialize, Serialize};

use crate::error::{PlatoonError, Result};
use crate::scalar::{sech2, Scalar};

/// Constants of the car-following law and of its optimal-velocity function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams<S> {
    /// Relaxation rate towards the optimal velocity (1/s).
    pub alpha: S,
    /// Follow-the-leader sensitivity (m²/s).
    pub beta: S,
    /// Vehicle length `l` (m).
    pub vehicle_length: S,
    /// Supremum of the optimal-velocity function (m/s).
    pub v_max: S,
    /// Inflection headway of the optimal-velocity function (m).
    pub d_s: S,
}

impl<S: Scalar> Default for ModelParams<S> {
    /// `alpha = 0.1`, `beta = 525` with `l = 4.5 m`, `v_max = 30 m/s`,
    /// `d_s = 20 m`.
    ///
    /// The inflection headway puts equilibrium gaps near 20 m, where the
    /// follow-the-leader stiffness `beta / h²` stays inside the stability
    /// region of the fixed-step integrator at `0.1 s`.
    fn default() -> Self {
        Self {
            alpha: S::lit(0.1),
            beta: S::lit(525.0),
            vehicle_length: S::lit(4.5),
            v_max: S::lit(30.0),
            d_s: S::lit(20.0),
        }
    }
}

/// Partial derivatives of [`ModelParams::acceleration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccPartials<S> {
    pub d_x: S,
    pub d_x_lead: S,
    pub d_v: S,
    pub d_v_lead: S,
}

impl<S: Scalar> ModelParams<S> {
    pub fn new(alpha: S, beta: S, vehicle_length: S, v_max: S, d_s: S) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            vehicle_length,
            v_max,
            d_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("vehicle_length", self.vehicle_length),
            ("v_max", self.v_max),
            ("d_s", self.d_s),
        ];
        for (name, value) in fields {
            if !(value > S::zero()) || !value.is_finite() {
                return Err(PlatoonError::Config(format!(
                    "model parameter {name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// `v_max / (1 + tanh(l + d_s))`.
    #[inline]
    fn ov_scale(&self) -> S {
        self.v_max / (S::one() + (self.vehicle_length + self.d_s).tanh())
    }

    /// Sup-norm of the optimal-velocity function; equals `v_max`.
    pub fn ov_sup_norm(&self) -> S {
        self.v_max
    }

    #[inline]
    fn check_headway(h: S) -> Result<()> {
        if h > S::zero() {
            Ok(())
        } else {
            Err(PlatoonError::Domain {
                quantity: "headway",
                value: h.as_f64(),
            })
        }
    }

    /// Optimal velocity `V(h)` for a bumper-to-bumper headway `h > 0`.
    pub fn optimal_velocity(&self, h: S) -> Result<S> {
        Self::check_headway(h)?;
        Ok(self.ov_unchecked(h))
    }

    #[inline]
    fn ov_unchecked(&self, h: S) -> S {
        self.ov_scale() * ((h - self.d_s).tanh() + (self.vehicle_length + self.d_s).tanh())
    }

    /// Derivative `V'(h) = v_max sech²(h - d_s) / (1 + tanh(l + d_s))`.
    pub fn optimal_velocity_deriv(&self, h: S) -> Result<S> {
        Self::check_headway(h)?;
        Ok(self.ov_scale() * sech2(h - self.d_s))
    }

    /// Headway `h > 0` with `V(h) = speed`.
    pub fn equilibrium_headway(&self, speed: S) -> Result<S> {
        let arg = speed / self.ov_scale() - (self.vehicle_length + self.d_s).tanh();
        let h = self.d_s + arg.atanh();
        if speed >= S::zero() && speed < self.v_max && h > S::zero() && h.is_finite() {
            Ok(h)
        } else {
            Err(PlatoonError::Domain {
                quantity: "equilibrium speed",
                value: speed.as_f64(),
            })
        }
    }

    #[inline]
    pub fn headway(&self, x: S, x_lead: S) -> S {
        x_lead - x - self.vehicle_length
    }

    /// Bando-FtL acceleration of a follower at `(x, v)` behind `(x_lead, v_lead)`.
    pub fn acceleration(&self, x: S, x_lead: S, v: S, v_lead: S) -> Result<S> {
        let h = self.headway(x, x_lead);
        Self::check_headway(h)?;
        Ok(self.acceleration_at_headway(h, v, v_lead))
    }

    /// Acceleration given an already validated headway `h > 0`.
    #[inline]
    pub(crate) fn acceleration_at_headway(&self, h: S, v: S, v_lead: S) -> S {
        self.kernel().acceleration(h, v, v_lead)
    }

    /// Parameters with the headway-independent constants evaluated once,
    /// for loops over many vehicles.
    #[inline]
    pub(crate) fn kernel(&self) -> Kernel<S> {
        let offset = (self.vehicle_length + self.d_s).tanh();
        Kernel {
            alpha: self.alpha,
            beta: self.beta,
            d_s: self.d_s,
            scale: self.v_max / (S::one() + offset),
            offset,
        }
    }

    /// Analytic partial derivatives of the acceleration.
    pub fn acceleration_partials(&self, x: S, x_lead: S, v: S, v_lead: S) -> Result<AccPartials<S>> {
        let h = self.headway(x, x_lead);
        Self::check_headway(h)?;
        Ok(self.partials_at_headway(h, v, v_lead))
    }

    #[inline]
    pub(crate) fn partials_at_headway(&self, h: S, v: S, v_lead: S) -> AccPartials<S> {
        self.kernel().partials(h, v, v_lead)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel<S> {
    alpha: S,
    beta: S,
    d_s: S,
    scale: S,
    offset: S,
}

impl<S: Scalar> Kernel<S> {
    /// Acceleration at a positive headway `h`.
    #[inline]
    pub(crate) fn acceleration(&self, h: S, v: S, v_lead: S) -> S {
        let ov = self.scale * ((h - self.d_s).tanh() + self.offset);
        self.alpha * (ov - v) + self.beta * (v_lead - v) / (h * h)
    }

    #[inline]
    pub(crate) fn partials(&self, h: S, v: S, v_lead: S) -> AccPartials<S> {
        self.with_partials(h, v, v_lead).1
    }

    /// Acceleration and its partials from a single `tanh`.
    #[inline]
    pub(crate) fn with_partials(&self, h: S, v: S, v_lead: S) -> (S, AccPartials<S>) {
        let two = S::lit(2.0);
        let th = (h - self.d_s).tanh();
        let h2 = h * h;
        let ftl = self.beta * (v_lead - v) / h2;
        let acc = self.alpha * (self.scale * (th + self.offset) - v) + ftl;
        let ov_deriv = self.scale * (S::one() - th * th);
        let d_x = -self.alpha * ov_deriv + two * ftl / h;
        let partials = AccPartials {
            d_x,
            d_x_lead: -d_x,
            d_v: -self.alpha - self.beta / h2,
            d_v_lead: self.beta / h2,
        };
        (acc, partials)
    }
}

/// Closed-form bounds for a single human-driven follower behind a leader
/// with nonnegative velocity, valid on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPosednessBounds<S> {
    /// Aggregate constant entering the headway bound.
    pub a: S,
    /// Lower bound on the headway (m).
    pub d_min: S,
    /// Exponential decay rate of the velocity lower bound (1/s).
    pub b: S,
    pub alpha: S,
    pub beta: S,
    pub ov_sup: S,
    pub v0: S,
}

/// Velocity and acceleration envelopes at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope<S> {
    pub velocity_lower: S,
    pub velocity_upper: S,
    pub acc_lower: S,
    pub acc_upper: S,
}

impl<S: Scalar> WellPosednessBounds<S> {
    /// Envelopes at time `t` given the leader velocity `v_lead(t)`.
    pub fn envelope_at(&self, t: S, v_lead: S) -> Envelope<S> {
        let decay = (-self.b * t).exp();
        let velocity_upper = self
            .v0
            .max(self.ov_sup + self.beta / self.alpha * v_lead / (self.d_min * self.d_min));
        Envelope {
            velocity_lower: self.v0 * decay,
            velocity_upper,
            acc_lower: -self.b * velocity_upper,
            acc_upper: self.alpha * self.ov_sup - self.alpha * self.v0 * decay
                + self.beta * v_lead / (self.d_min * self.d_min),
        }
    }
}

/// Headway, velocity and acceleration bounds for one follower.
///
/// `initial_gap` is the bumper-to-bumper distance to the leader at `t = 0`
/// and `v0_follower` the follower's initial speed.
pub fn theorem_bounds<S: Scalar>(
    p: &ModelParams<S>,
    horizon: S,
    initial_gap: S,
    v0_follower: S,
) -> Result<WellPosednessBounds<S>> {
    if !(initial_gap > S::zero()) {
        return Err(PlatoonError::Domain {
            quantity: "initial_gap",
            value: initial_gap.as_f64(),
        });
    }
    if !(horizon > S::zero()) {
        return Err(PlatoonError::Domain {
            quantity: "horizon",
            value: horizon.as_f64(),
        });
    }
    let (alpha, beta) = (p.alpha, p.beta);
    let ov_sup = p.ov_sup_norm();
    let a = -v0_follower - alpha * horizon * ov_sup + alpha * initial_gap - beta / initial_gap;
    // Positive root of alpha d² - a d - beta; the second form avoids
    // cancellation when a is large and negative.
    let disc = (a * a + S::lit(4.0) * alpha * beta).sqrt();
    let d_min = if a >= S::zero() {
        (a + disc) / (S::lit(2.0) * alpha)
    } else {
        S::lit(2.0) * beta / (disc - a)
    };
    let b = (alpha * d_min * d_min + beta) / (d_min * d_min);
    Ok(WellPosednessBounds {
        a,
        d_min,
        b,
        alpha,
        beta,
        ov_sup,
        v0: v0_follower,
    })
}

/// Uniform braking level that lets every controlled vehicle stop before
/// closing to `d_safe` behind a leader frozen at its initial position.
///
/// `initial_gaps[k]` is the bumper-to-bumper gap of the k-th controlled
/// vehicle, `initial_speeds[k]` its speed. Returns `-max v² / (2 (gap - d_safe))`.
pub fn safe_min_deceleration<S: Scalar>(
    initial_gaps: &[S],
    initial_speeds: &[S],
    d_safe: S,
) -> Result<S> {
    if initial_gaps.len() != initial_speeds.len() {
        return Err(PlatoonError::Config(format!(
            "{} gaps but {} speeds",
            initial_gaps.len(),
            initial_speeds.len()
        )));
    }
    let mut worst = S::zero();
    for (k, (&gap, &v)) in initial_gaps.iter().zip(initial_speeds).enumerate() {
        let room = gap - d_safe;
        if !(room > S::zero()) {
            return Err(PlatoonError::InfeasibleInitial(format!(
                "controlled vehicle #{k} starts with gap {gap} m, not above d_safe = {d_safe} m"
            )));
        }
        if v < S::zero() {
            return Err(PlatoonError::InfeasibleInitial(format!(
                "controlled vehicle #{k} has negative initial speed {v}"
            )));
        }
        worst = worst.max(v * v / (S::lit(2.0) * room));
    }
    Ok(-worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_ds() -> ModelParams<f64> {
        ModelParams {
            d_s: 2.5,
            ..ModelParams::default()
        }
    }

    #[test]
    fn optimal_velocity_saturates() {
        let p = ModelParams::<f64>::default();
        let v = p.optimal_velocity(1e6).unwrap();
        assert!((v - p.v_max).abs() <= 1e-9 * p.v_max);
    }

    #[test]
    fn optimal_velocity_at_inflection() {
        let p = small_ds();
        let t = (p.vehicle_length + p.d_s).tanh();
        let expected = p.v_max * t / (1.0 + t);
        assert!((p.optimal_velocity(p.d_s).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn optimal_velocity_reference_value() {
        // 40-digit evaluation of the closed form.
        let p = small_ds();
        let v = p.optimal_velocity(10.0).unwrap();
        assert!((v - 29.999_990_822_925_561_236_65).abs() < 1e-12);
        let v32 = small_ds_f32().optimal_velocity(10.0).unwrap();
        assert!((v32 as f64 - 29.999_990_822_925_56).abs() < 1e-4);
    }

    fn small_ds_f32() -> ModelParams<f32> {
        ModelParams {
            d_s: 2.5,
            ..ModelParams::default()
        }
    }

    #[test]
    fn non_positive_headway_is_domain_error() {
        let p = ModelParams::<f64>::default();
        assert!(matches!(
            p.optimal_velocity(0.0),
            Err(PlatoonError::Domain { .. })
        ));
        assert!(p.optimal_velocity_deriv(-1.0).is_err());
        // gap = 100 - 96 - 4.5 < 0
        assert!(p.acceleration(96.0, 100.0, 10.0, 10.0).is_err());
        assert!(p.acceleration_partials(95.5, 100.0, 10.0, 10.0).is_err());
    }

    #[test]
    fn derivative_peaks_at_inflection() {
        let p = small_ds();
        let peak = p.optimal_velocity_deriv(p.d_s).unwrap();
        assert!(peak >= p.optimal_velocity_deriv(p.d_s + 1.0).unwrap());
        assert!(peak >= p.optimal_velocity_deriv(p.d_s - 1.0).unwrap());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = small_ds();
        let step = 1e-6;
        for &h in &[1.0, 5.0, 20.0, 100.0] {
            let analytic = p.optimal_velocity_deriv(h).unwrap();
            let fd = (p.optimal_velocity(h + step).unwrap() - p.optimal_velocity(h - step).unwrap())
                / (2.0 * step);
            // Far from d_s both values underflow towards zero together.
            let scale = analytic.abs().max(1e-9);
            assert!(
                (analytic - fd).abs() / scale < 1e-6 || (analytic - fd).abs() < 1e-9,
                "h = {h}: {analytic} vs {fd}"
            );
        }
    }

    #[test]
    fn acceleration_reference_value() {
        let p = small_ds();
        let acc = p.acceleration(0.0, 14.5, 5.0, 5.0).unwrap();
        assert!((acc - 2.499_999_082_292_556_123_67).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_has_zero_acceleration() {
        let p = ModelParams::<f64>::default();
        for &h in &[0.5, 10.0, 19.0, 21.7, 80.0] {
            let v = p.optimal_velocity(h).unwrap();
            let acc = p.acceleration(0.0, h + p.vehicle_length, v, v).unwrap();
            assert!(acc.abs() < 1e-14, "h = {h}: {acc}");
        }
    }

    #[test]
    fn faster_leader_pulls_follower() {
        let p = ModelParams::<f64>::default();
        let h = 22.0;
        let v = p.optimal_velocity(h).unwrap();
        assert!(p.acceleration(0.0, h + p.vehicle_length, v, v + 1.0).unwrap() > 0.0);
    }

    #[test]
    fn same_speed_position_partial_is_negative() {
        let p = ModelParams::<f64>::default();
        let d = p.acceleration_partials(0.0, 25.0, 12.0, 12.0).unwrap();
        let expected = -p.alpha * p.optimal_velocity_deriv(25.0 - p.vehicle_length).unwrap();
        assert_eq!(d.d_x, expected);
        assert!(d.d_x < 0.0);
        assert_eq!(d.d_x_lead, -d.d_x);
    }

    #[test]
    fn bounds_reference_values() {
        // alpha 0.1, beta 525, v_max 30, horizon 100 s, gap 20 m, v0 10 m/s.
        let p = ModelParams::<f64>::default();
        let b = theorem_bounds(&p, 100.0, 20.0, 10.0).unwrap();
        assert!((b.a + 334.25).abs() < 1e-12);
        assert!((b.d_min - 1.569_943_239_558_583_19).abs() < 1e-12);
        assert!((b.b - 213.105_786_386_251_896).abs() < 1e-9);
        assert!(b.b > p.alpha);
    }

    #[test]
    fn bounds_reject_bad_inputs() {
        let p = ModelParams::<f64>::default();
        assert!(theorem_bounds(&p, 100.0, 0.0, 10.0).is_err());
        assert!(theorem_bounds(&p, 0.0, 10.0, 10.0).is_err());
    }

    #[test]
    fn safe_deceleration_examples() {
        assert_eq!(safe_min_deceleration(&[55.0], &[10.0], 5.0).unwrap(), -1.0);
        assert_eq!(safe_min_deceleration(&[30.0], &[0.0], 5.0).unwrap(), 0.0);
        // second vehicle binds: 20² / (2 * 40) = 5 > 10² / (2 * 95)
        let two = safe_min_deceleration(&[100.0, 45.0], &[10.0, 20.0], 5.0).unwrap();
        assert_eq!(two, -5.0);
        assert!(matches!(
            safe_min_deceleration(&[5.0], &[10.0], 5.0),
            Err(PlatoonError::InfeasibleInitial(_))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.1, 525.0, 4.5, 30.0, 20.0).is_ok());
        assert!(ModelParams::new(0.0, 525.0, 4.5, 30.0, 20.0).is_err());
        assert!(ModelParams::new(0.1, 525.0, 4.5, f64::NAN, 20.0).is_err());
    }

    mod properties {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partials_match_finite_differences(
                h in 0.5f64..200.0,
                v in 0.0f64..35.0,
                vl in 0.0f64..35.0,
            ) {
                let p = ModelParams::<f64>::default();
                let (x, xl) = (-h - p.vehicle_length, 0.0);
                let d = p.acceleration_partials(x, xl, v, vl).unwrap();
                let f = |x: f64, xl: f64, v: f64, vl: f64| p.acceleration(x, xl, v, vl).unwrap();
                let e = 1e-6 * h.min(1.0);
                let fd = [
                    (f(x + e, xl, v, vl) - f(x - e, xl, v, vl)) / (2.0 * e),
                    (f(x, xl + e, v, vl) - f(x, xl - e, v, vl)) / (2.0 * e),
                    (f(x, xl, v + e, vl) - f(x, xl, v - e, vl)) / (2.0 * e),
                    (f(x, xl, v, vl + e) - f(x, xl, v, vl - e)) / (2.0 * e),
                ];
                let an = [d.d_x, d.d_x_lead, d.d_v, d.d_v_lead];
                let scale = an.iter().fold(1.0f64, |m, a| m.max(a.abs()));
                for (a, b) in an.iter().zip(&fd) {
                    prop_assert!((a - b).abs() / scale < 1e-5);
                }
            }

            #[test]
            fn optimal_velocity_is_monotone(h in 0.01f64..300.0, dh in 0.01f64..10.0) {
                let p = ModelParams::<f64>::default();
                let (a, b) = (p.optimal_velocity(h).unwrap(), p.optimal_velocity(h + dh).unwrap());
                prop_assert!(b >= a);
                prop_assert!((0.0..=p.v_max).contains(&a));
            }

            #[test]
            fn equilibrium_headway_inverts_optimal_velocity(speed in 0.5f64..29.5) {
                let p = ModelParams::<f64>::default();
                let h = p.equilibrium_headway(speed).unwrap();
                prop_assert!((p.optimal_velocity(h).unwrap() - speed).abs() < 1e-9);
            }
        }
    }
}
