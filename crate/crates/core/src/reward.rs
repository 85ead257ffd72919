//! Per-tick reward components, their weighted total, and early termination.
//!
//! Every component is clamped to `[-1, 1]` before weighting. Where a formula
//! has a pole, the pole itself returns the clamp bound of the branch it
//! belongs to.

use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};

pub const NUM_COMPONENTS: usize = 8;
/// Weights in component order `[vx, vy, h, u, com, ang, angvel, fd]`.
pub const REWARD_WEIGHTS: [f64; NUM_COMPONENTS] = [0.8, 0.2, 0.1, 0.01, 0.1, 0.5, 0.5, 5.0];
pub const COMPONENT_NAMES: [&str; NUM_COMPONENTS] =
    ["r_vx", "r_vy", "r_h", "r_u", "r_com", "r_ang", "r_angvel", "r_fd"];

const VELOCITY_BAND: f64 = 0.1;
const VELOCITY_SCALE: f64 = 1e-3;
const VELOCITY_EPS: f64 = 1e-5;
const HEIGHT_BAND: f64 = 0.05;
const COM_INSIDE_SCALE: f64 = 0.01;
const COM_OUTSIDE_SCALE: f64 = 100.0;
const COM_OUTSIDE_SHIFT: f64 = 0.1;
const FEET_MIN: f64 = 0.2;
const FEET_MAX: f64 = 0.4;

fn clamp_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

pub fn reward_velocity(v_avg: f64, v_desired: f64) -> f64 {
    let e = v_avg - v_desired;
    if e.abs() <= VELOCITY_BAND {
        let denom = (e + VELOCITY_EPS).powi(2);
        if denom == 0.0 {
            return 1.0;
        }
        clamp_unit(VELOCITY_SCALE / denom)
    } else {
        clamp_unit(-VELOCITY_SCALE / (e * e))
    }
}

pub fn reward_height(p_z: f64, p_z_desired: f64) -> Result<f64> {
    if !(p_z > 0.0) || !(p_z_desired > 0.0) {
        return Err(GaitError::Domain(p_z.min(p_z_desired)));
    }
    let err = p_z - p_z_desired;
    let r = if err.abs() <= HEIGHT_BAND {
        if p_z <= p_z_desired {
            (p_z / p_z_desired).powi(2)
        } else {
            (p_z_desired / p_z).powi(2)
        }
    } else {
        -(err * err)
    };
    Ok(clamp_unit(r))
}

/// Negative squared norm of the limit-normalized joint torques.
pub fn reward_energy(u_norm: &[f64]) -> f64 {
    clamp_unit(-u_norm.iter().map(|u| u * u).sum::<f64>())
}

/// Convex containment with the boundary counted as inside. Vertices may be
/// in either winding order.
pub fn point_in_convex_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let n = polygon.len();
    if n == 0 {
        return false;
    }
    let mut sign = 0.0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross == 0.0 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    if sign == 0.0 {
        // degenerate polygon: inside only if within its bounding box
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in polygon {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        return (0..2).all(|k| p[k] >= lo[k] && p[k] <= hi[k]);
    }
    true
}

pub fn polygon_centroid(polygon: &[[f64; 2]]) -> [f64; 2] {
    let n = polygon.len().max(1) as f64;
    let sx: f64 = polygon.iter().map(|v| v[0]).sum();
    let sy: f64 = polygon.iter().map(|v| v[1]).sum();
    [sx / n, sy / n]
}

/// Axis-aligned foot rectangle centered at `center`.
pub fn foot_rectangle(center: [f64; 2], length: f64, width: f64) -> Vec<[f64; 2]> {
    let (hl, hw) = (0.5 * length, 0.5 * width);
    vec![
        [center[0] - hl, center[1] - hw],
        [center[0] + hl, center[1] - hw],
        [center[0] + hl, center[1] + hw],
        [center[0] - hl, center[1] + hw],
    ]
}

pub fn reward_com(com_xy: [f64; 2], polygon: &[[f64; 2]], d: f64) -> f64 {
    reward_com_with(point_in_convex_polygon(com_xy, polygon), d)
}

pub fn reward_com_with(inside: bool, d: f64) -> f64 {
    if inside {
        if d == 0.0 {
            return 1.0;
        }
        clamp_unit(COM_INSIDE_SCALE / d)
    } else {
        let shifted = d - COM_OUTSIDE_SHIFT;
        if shifted == 0.0 {
            return -1.0;
        }
        clamp_unit(-COM_OUTSIDE_SCALE / shifted)
    }
}

/// `(r_ang, r_angvel)` from `[roll, pitch, yaw]` and their rates.
pub fn reward_posture(angles: [f64; 3], rates: [f64; 3]) -> (f64, f64) {
    let sq = |v: [f64; 3]| v.iter().map(|x| x * x).sum::<f64>();
    (clamp_unit(-sq(angles)), clamp_unit(-sq(rates)))
}

pub fn reward_foot_distance(d_feet: f64) -> f64 {
    let r = if d_feet > FEET_MAX {
        -(d_feet - FEET_MAX).powi(2)
    } else if d_feet < FEET_MIN {
        -(d_feet - FEET_MIN).powi(2)
    } else {
        0.0
    };
    clamp_unit(r)
}

/// Everything the reward stack reads from the robot at one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardInputs {
    pub vx_avg: f64,
    pub vy_avg: f64,
    pub vx_desired: f64,
    pub vy_desired: f64,
    pub p_z: f64,
    pub p_z_desired: f64,
    pub u_norm: Vec<f64>,
    pub com_xy: [f64; 2],
    pub support_polygon: Vec<[f64; 2]>,
    /// CoM to support polygon center, ground plane.
    pub d: f64,
    /// `[roll, pitch, yaw]`.
    pub angles: [f64; 3],
    pub rates: [f64; 3],
    pub d_feet: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub components: [f64; NUM_COMPONENTS],
    pub total: f64,
}

impl RewardVector {
    pub fn from_components(components: [f64; NUM_COMPONENTS]) -> Self {
        Self {
            components,
            total: total(&components),
        }
    }

    pub fn zero() -> Self {
        Self::from_components([0.0; NUM_COMPONENTS])
    }
}

pub fn total(components: &[f64; NUM_COMPONENTS]) -> f64 {
    components.iter().zip(&REWARD_WEIGHTS).map(|(r, w)| r * w).sum()
}

pub fn evaluate(inputs: &RewardInputs) -> Result<RewardVector> {
    let (r_ang, r_angvel) = reward_posture(inputs.angles, inputs.rates);
    let components = [
        reward_velocity(inputs.vx_avg, inputs.vx_desired),
        reward_velocity(inputs.vy_avg, inputs.vy_desired),
        reward_height(inputs.p_z, inputs.p_z_desired)?,
        reward_energy(&inputs.u_norm),
        reward_com(inputs.com_xy, &inputs.support_polygon, inputs.d),
        r_ang,
        r_angvel,
        reward_foot_distance(inputs.d_feet),
    ];
    Ok(RewardVector::from_components(components))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminationState {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub p_z: f64,
    /// Distance between the feet.
    pub feet_separation: f64,
}

pub const ANGLE_LIMIT: f64 = 0.5;
pub const HEIGHT_MIN: f64 = 0.75;
pub const HEIGHT_MAX: f64 = 1.1;
pub const FEET_SEPARATION_MIN: f64 = 0.05;

/// True when any safety condition fails. Feet closer than the minimum
/// separation end the episode; non-finite state always does.
pub fn terminated(s: &TerminationState) -> bool {
    let fields = [s.yaw, s.pitch, s.roll, s.p_z, s.feet_separation];
    if fields.iter().any(|v| !v.is_finite()) {
        return true;
    }
    s.yaw.abs() >= ANGLE_LIMIT
        || s.pitch.abs() >= ANGLE_LIMIT
        || s.roll.abs() >= ANGLE_LIMIT
        || s.p_z <= HEIGHT_MIN
        || s.p_z >= HEIGHT_MAX
        || s.feet_separation <= FEET_SEPARATION_MIN
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_examples() {
        assert_eq!(reward_velocity(0.3, 0.3), 1.0);
        assert!((reward_velocity(0.7, 0.5) + 0.025).abs() < 1e-12);
        let r = reward_velocity(0.6, 0.5);
        // 0.6 - 0.5 rounds just below 0.1, so the positive branch applies
        assert!((r - 1e-3 / (0.10001f64).powi(2)).abs() < 1e-6);
        assert_eq!(reward_velocity(0.5 - 1e-5, 0.5), 1.0);
        assert!(reward_velocity(0.0, 0.15) < 0.0);
    }

    #[test]
    fn height_examples() {
        assert_eq!(reward_height(1.0, 1.0).unwrap(), 1.0);
        assert!((reward_height(0.97, 1.0).unwrap() - 0.9409).abs() < 1e-12);
        assert!((reward_height(0.8, 1.0).unwrap() + 0.04).abs() < 1e-12);
        assert!((reward_height(1.02, 1.0).unwrap() - (1.0 / 1.02f64).powi(2)).abs() < 1e-12);
        assert!(reward_height(0.0, 1.0).is_err());
        assert!(reward_height(0.9, -1.0).is_err());
    }

    #[test]
    fn energy_examples() {
        assert_eq!(reward_energy(&[0.0; 10]), 0.0);
        let mut u = [0.0; 10];
        u[2] = 0.5;
        u[7] = 0.5;
        assert_eq!(reward_energy(&u), -0.5);
        assert_eq!(reward_energy(&[1.0; 10]), -1.0);
    }

    #[test]
    fn com_examples() {
        assert!((reward_com_with(true, 0.05) - 0.2).abs() < 1e-12);
        assert_eq!(reward_com_with(true, 0.005), 1.0);
        assert_eq!(reward_com_with(false, 0.3), -1.0);
        assert_eq!(reward_com_with(true, 0.0), 1.0);
        assert_eq!(reward_com_with(false, 0.1), -1.0);
        // below the shift the outside branch turns positive, clamp keeps it bounded
        assert_eq!(reward_com_with(false, 0.05), 1.0);
    }

    #[test]
    fn polygon_containment() {
        let rect = foot_rectangle([0.0, 0.0], 0.16, 0.04);
        assert!(point_in_convex_polygon([0.0, 0.0], &rect));
        assert!(point_in_convex_polygon([0.08, 0.02], &rect));
        assert!(point_in_convex_polygon([0.08, 0.0], &rect));
        assert!(!point_in_convex_polygon([0.081, 0.0], &rect));
        let mut cw = rect.clone();
        cw.reverse();
        assert!(point_in_convex_polygon([0.01, -0.01], &cw));
        assert_eq!(polygon_centroid(&rect), [0.0, 0.0]);
        let flat = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]];
        assert!(point_in_convex_polygon([0.3, 0.0], &flat));
        assert!(!point_in_convex_polygon([0.3, 0.1], &flat));
    }

    #[test]
    fn posture_examples() {
        assert_eq!(reward_posture([0.0; 3], [0.0; 3]), (0.0, 0.0));
        let (a, _) = reward_posture([0.1, 0.2, 0.3], [0.0; 3]);
        assert!((a + 0.14).abs() < 1e-12);
        assert_eq!(reward_posture([0.0; 3], [1.0; 3]).1, -1.0);
    }

    #[test]
    fn foot_distance_examples() {
        assert_eq!(reward_foot_distance(0.3), 0.0);
        assert!((reward_foot_distance(0.45) + 0.0025).abs() < 1e-12);
        assert!((reward_foot_distance(0.15) + 0.0025).abs() < 1e-12);
        assert_eq!(reward_foot_distance(0.2), 0.0);
        assert_eq!(reward_foot_distance(0.4), 0.0);
    }

    #[test]
    fn total_examples() {
        let mut c = [0.0; NUM_COMPONENTS];
        assert_eq!(total(&c), 0.0);
        c[0] = 1.0;
        assert_eq!(total(&c), 0.8);
        let mut c = [0.0; NUM_COMPONENTS];
        c[7] = 1.0;
        assert_eq!(total(&c), 5.0);
    }

    #[test]
    fn termination_examples() {
        let nominal = TerminationState {
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            p_z: 0.95,
            feet_separation: 0.3,
        };
        assert!(!terminated(&nominal));
        assert!(terminated(&TerminationState { yaw: 0.6, ..nominal }));
        assert!(terminated(&TerminationState { p_z: 0.7, ..nominal }));
        assert!(terminated(&TerminationState { p_z: f64::NAN, ..nominal }));
    }
}
