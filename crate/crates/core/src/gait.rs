//! Phase variable and degree-5 Bezier virtual constraints.
//!
//! Every desired joint trajectory in a walking step is a quintic Bezier
//! polynomial in the normalized step time `tau`. The coefficients bound the
//! curve (convex hull property), which is what lets the action decoder map
//! policy outputs straight into joint-space limits.

use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};

/// Polynomial degree of every virtual constraint.
pub const BEZIER_DEGREE: usize = 5;
/// Number of control points per curve.
pub const BEZIER_COEFFS: usize = BEZIER_DEGREE + 1;
/// Default walking step duration in seconds.
pub const DEFAULT_STEP_DURATION: f64 = 0.35;

const BINOMIAL_5: [f64; BEZIER_COEFFS] = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
const BINOMIAL_4: [f64; BEZIER_DEGREE] = [1.0, 4.0, 6.0, 4.0, 1.0];

/// Start time and duration of the current walking step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseClock {
    pub t_start: f64,
    pub t_step: f64,
}

impl PhaseClock {
    pub fn new(t_start: f64, t_step: f64) -> Result<Self> {
        if !(t_step > 0.0) || !t_step.is_finite() {
            return Err(GaitError::InvalidClock(t_step));
        }
        Ok(Self { t_start, t_step })
    }

    /// Normalized step time, clamped at 1 when a step overruns.
    pub fn phase(&self, t: f64) -> Result<f64> {
        if !(self.t_step > 0.0) {
            return Err(GaitError::InvalidClock(self.t_step));
        }
        if t < self.t_start {
            return Err(GaitError::InvalidTime {
                t,
                t_start: self.t_start,
            });
        }
        Ok(((t - self.t_start) / self.t_step).clamp(0.0, 1.0))
    }
}

impl Default for PhaseClock {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_step: DEFAULT_STEP_DURATION,
        }
    }
}

fn check_phase(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(GaitError::Domain(tau))
    }
}

/// The six quintic Bernstein basis polynomials at `tau`.
pub fn bernstein_basis(tau: f64) -> [f64; BEZIER_COEFFS] {
    let s = 1.0 - tau;
    let mut tp = [1.0; BEZIER_COEFFS];
    let mut sp = [1.0; BEZIER_COEFFS];
    for k in 1..BEZIER_COEFFS {
        tp[k] = tp[k - 1] * tau;
        sp[k] = sp[k - 1] * s;
    }
    std::array::from_fn(|k| BINOMIAL_5[k] * tp[k] * sp[BEZIER_DEGREE - k])
}

/// A quintic Bezier curve in joint space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BezierCurve {
    pub coeffs: [f64; BEZIER_COEFFS],
}

impl BezierCurve {
    pub fn new(coeffs: [f64; BEZIER_COEFFS]) -> Self {
        Self { coeffs }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            coeffs: [value; BEZIER_COEFFS],
        }
    }

    pub fn from_slice(coeffs: &[f64]) -> Result<Self> {
        let coeffs: [f64; BEZIER_COEFFS] = coeffs
            .try_into()
            .map_err(|_| GaitError::dim("bezier coefficients", BEZIER_COEFFS, coeffs.len()))?;
        Ok(Self { coeffs })
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        check_phase(tau)?;
        Ok(self.eval_unchecked(tau))
    }

    /// Time derivative of the curve for a step lasting `t_step` seconds.
    pub fn deriv(&self, tau: f64, t_step: f64) -> Result<f64> {
        check_phase(tau)?;
        if !(t_step > 0.0) {
            return Err(GaitError::InvalidClock(t_step));
        }
        Ok(self.deriv_unchecked(tau) / t_step)
    }

    pub(crate) fn eval_unchecked(&self, tau: f64) -> f64 {
        bernstein_basis(tau)
            .iter()
            .zip(&self.coeffs)
            .map(|(b, a)| b * a)
            .sum()
    }

    /// dB/dtau via the degree-4 hodograph.
    pub(crate) fn deriv_unchecked(&self, tau: f64) -> f64 {
        let s = 1.0 - tau;
        let mut acc = 0.0;
        for k in 0..BEZIER_DEGREE {
            let d = BEZIER_DEGREE as f64 * (self.coeffs[k + 1] - self.coeffs[k]);
            acc += d
                * BINOMIAL_4[k]
                * tau.powi(k as i32)
                * s.powi((BEZIER_DEGREE - 1 - k) as i32);
        }
        acc
    }

    pub fn min_coeff(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-joint virtual-constraint error `y2 = actual - desired`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputResidual {
    pub y2: Vec<f64>,
}

pub fn residual(actual: &[f64], desired: &[f64]) -> Result<OutputResidual> {
    if actual.len() != desired.len() {
        return Err(GaitError::dim("residual", actual.len(), desired.len()));
    }
    Ok(OutputResidual {
        y2: actual.iter().zip(desired).map(|(a, d)| a - d).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_examples() {
        let clock = PhaseClock::new(0.0, 0.35).unwrap();
        assert_eq!(clock.phase(0.0).unwrap(), 0.0);
        assert!((clock.phase(0.175).unwrap() - 0.5).abs() < 1e-15);
        // raw value 0.40 / 0.35 = 8/7 overruns and clamps
        assert_eq!(clock.phase(0.40).unwrap(), 1.0);
    }

    #[test]
    fn phase_errors() {
        let clock = PhaseClock::new(1.0, 0.35).unwrap();
        assert!(matches!(
            clock.phase(0.5),
            Err(GaitError::InvalidTime { .. })
        ));
        assert!(matches!(
            PhaseClock::new(0.0, 0.0),
            Err(GaitError::InvalidClock(_))
        ));
        let bad = PhaseClock {
            t_start: 0.0,
            t_step: -1.0,
        };
        assert!(matches!(bad.phase(0.1), Err(GaitError::InvalidClock(_))));
    }

    #[test]
    fn eval_examples() {
        let c = BezierCurve::constant(0.7);
        for tau in [0.0, 0.13, 0.5, 0.99, 1.0] {
            assert!((c.eval(tau).unwrap() - 0.7).abs() < 1e-15);
        }
        let last = BezierCurve::new([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(last.eval(1.0).unwrap(), 1.0);
        // C(5,5) * 0.5^5
        assert_eq!(last.eval(0.5).unwrap(), 0.03125);
        assert!(matches!(last.eval(1.5), Err(GaitError::Domain(_))));
        assert!(matches!(last.eval(-0.1), Err(GaitError::Domain(_))));
    }

    #[test]
    fn deriv_examples() {
        let c = BezierCurve::constant(-0.3);
        assert_eq!(c.deriv(0.4, 0.35).unwrap(), 0.0);
        let ramp = BezierCurve::new([0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        for tau in [0.0, 0.25, 0.5, 0.9, 1.0] {
            assert!((ramp.deriv(tau, 0.35).unwrap() - 1.0 / 0.35).abs() < 1e-12);
        }
        let last = BezierCurve::new([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(last.deriv(0.0, 1.0).unwrap(), 0.0);
        assert!(last.deriv(0.5, 0.0).is_err());
        assert!(last.deriv(2.0, 1.0).is_err());
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual(&[0.1, 0.2], &[0.1, 0.2]).unwrap().y2, vec![0.0, 0.0]);
        let r = residual(&[0.3], &[0.1]).unwrap();
        assert!((r.y2[0] - 0.2).abs() < 1e-15);
        let r = residual(&[0.0, -0.5], &[0.1, -0.5]).unwrap();
        assert!((r.y2[0] + 0.1).abs() < 1e-15);
        assert_eq!(r.y2[1], 0.0);
        assert!(residual(&[0.0], &[0.0, 1.0]).is_err());
    }
}
