//! Foot placement, torso and ankle regulation.

use serde::{Deserialize, Serialize};

/// Foot geometry term of the flat-foot ankle reference, in degrees.
pub const DEFAULT_FOOT_OFFSET_DEG: f64 = 13.0;
/// Fixed ankle linkage term of the flat-foot ankle reference, in degrees.
pub const ANKLE_LINKAGE_DEG: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    /// Average speed of the current step sample.
    pub v_now: f64,
    /// Same quantity one step earlier.
    pub v_prev: f64,
    pub v_desired: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorsoState {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub roll_rate: f64,
    pub pitch_rate: f64,
    pub yaw_rate: f64,
    pub desired_roll: f64,
    pub desired_pitch: f64,
}

/// Swing hip offset from a speed error and its step-to-step change.
pub fn foot_placement(sample: &SpeedSample, kp: f64, kd: f64) -> f64 {
    kp * (sample.v_now - sample.v_desired) + kd * (sample.v_now - sample.v_prev)
}

pub fn torso_torque(angle: f64, rate: f64, desired_angle: f64, desired_rate: f64, kp: f64, kd: f64) -> f64 {
    kp * (angle - desired_angle) + kd * (rate - desired_rate)
}

/// `(u_roll, u_pitch)` for the stance hip from `kt = [Kp_roll, Kd_roll, Kp_pitch, Kd_pitch]`.
pub fn torso_torques(torso: &TorsoState, kt: &[f64; 4]) -> (f64, f64) {
    (
        torso_torque(torso.roll, torso.roll_rate, torso.desired_roll, 0.0, kt[0], kt[1]),
        torso_torque(torso.pitch, torso.pitch_rate, torso.desired_pitch, 0.0, kt[2], kt[3]),
    )
}

/// Swing ankle angle that keeps the swing foot flat.
pub fn swing_ankle_reference(torso_pitch: f64) -> f64 {
    swing_ankle_reference_with(torso_pitch, DEFAULT_FOOT_OFFSET_DEG)
}

pub fn swing_ankle_reference_with(torso_pitch: f64, foot_offset_deg: f64) -> f64 {
    torso_pitch - (foot_offset_deg + ANKLE_LINKAGE_DEG).to_radians()
}

/// Per-episode speed history for the once-per-step foot placement update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegulationState {
    /// Speed sample taken at the previous mid-step.
    pub prev_sample: Option<[f64; 2]>,
    /// Offsets `[hip pitch, hip roll]` applied to the swing leg.
    pub offset: [f64; 2],
    pub active: bool,
}

impl RegulationState {
    /// Recompute the swing offsets from this step's speed sample. Before
    /// the first sample the robot is at rest.
    pub fn refresh(&mut self, sample: [f64; 2], desired: [f64; 2], kfp: &[f64; 4]) {
        let prev = self.prev_sample.unwrap_or_default();
        let x = SpeedSample {
            v_now: sample[0],
            v_prev: prev[0],
            v_desired: desired[0],
        };
        let y = SpeedSample {
            v_now: sample[1],
            v_prev: prev[1],
            v_desired: desired[1],
        };
        self.offset = [foot_placement(&x, kfp[0], kfp[1]), foot_placement(&y, kfp[2], kfp[3])];
        self.prev_sample = Some(sample);
        self.active = true;
    }

    pub fn clear_offset(&mut self) {
        self.offset = [0.0; 2];
        self.active = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn foot_placement_examples() {
        let s = SpeedSample {
            v_now: 0.4,
            v_prev: 0.4,
            v_desired: 0.4,
        };
        assert_eq!(foot_placement(&s, 0.3, 0.7), 0.0);
        let s = SpeedSample {
            v_now: 0.6,
            v_prev: 0.5,
            v_desired: 0.5,
        };
        assert!((foot_placement(&s, 0.2, 0.1) - 0.03).abs() < 1e-12);
        assert_eq!(foot_placement(&s, 0.0, 0.0), 0.0);
    }

    #[test]
    fn torso_examples() {
        assert_eq!(torso_torque(0.1, 0.2, 0.1, 0.2, 8.0, 0.5), 0.0);
        let u = torso_torque(0.05, -0.1, 0.0, 0.0, 8.0, 0.5);
        assert!((u - 0.35).abs() < 1e-12);
        let u2 = torso_torque(0.05, -0.1, 0.0, 0.0, 16.0, 1.0);
        assert!((u2 - 2.0 * u).abs() < 1e-12);
        assert!(torso_torque(0.1, 0.0, 0.0, 0.0, 1.0, 0.0) > 0.0);
    }

    #[test]
    fn ankle_examples() {
        assert!((swing_ankle_reference(0.0) + 1.09956).abs() < 1e-5);
        assert!((swing_ankle_reference(0.1) + 0.99956).abs() < 1e-5);
        let d = swing_ankle_reference(0.3) - swing_ankle_reference(-0.2);
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn regulation_state_uses_previous_sample() {
        let mut st = RegulationState::default();
        st.refresh([0.2, -0.1], [0.5, 0.0], &[1.0, 1.0, 1.0, 1.0]);
        // first step: v_prev is rest
        assert!((st.offset[0] - (-0.3 + 0.2)).abs() < 1e-12);
        assert!((st.offset[1] - (-0.1 - 0.1)).abs() < 1e-12);
        st.clear_offset();
        assert_eq!(st.offset, [0.0; 2]);
        st.refresh([0.5, 0.1], [0.5, 0.0], &[0.0, 2.0, 1.0, 0.0]);
        assert!((st.offset[0] - 0.6).abs() < 1e-12);
        assert!((st.offset[1] - 0.1).abs() < 1e-12);
    }
}
