//! Joint naming and index conventions.
//!
//! Physical order is `[right hip-roll, hip-yaw, hip-pitch, knee, ankle,
//! left hip-roll, ..., left ankle]`. All legs share one world-aligned sign
//! convention: positive hip roll moves the foot toward +y (left), positive
//! hip yaw turns the foot toward +y, positive hip pitch swings the foot
//! forward, positive knee is flexion.

use serde::{Deserialize, Serialize};

pub const NUM_JOINTS: usize = 10;
pub const JOINTS_PER_LEG: usize = 5;
/// Hip roll, yaw, pitch and knee of both legs; ankles are regulated separately.
pub const NUM_LEARNED_JOINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    HipRoll = 0,
    HipYaw = 1,
    HipPitch = 2,
    Knee = 3,
    Ankle = 4,
}

impl JointKind {
    pub const ALL: [JointKind; JOINTS_PER_LEG] = [
        JointKind::HipRoll,
        JointKind::HipYaw,
        JointKind::HipPitch,
        JointKind::Knee,
        JointKind::Ankle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leg {
    Right,
    Left,
}

impl Leg {
    pub fn other(self) -> Leg {
        match self {
            Leg::Right => Leg::Left,
            Leg::Left => Leg::Right,
        }
    }

    /// Lateral sign of the hip: right hip sits at -y.
    pub fn lateral_sign(self) -> f64 {
        match self {
            Leg::Right => -1.0,
            Leg::Left => 1.0,
        }
    }

    pub fn offset(self) -> usize {
        match self {
            Leg::Right => 0,
            Leg::Left => JOINTS_PER_LEG,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Leg::Right => "right",
            Leg::Left => "left",
        }
    }
}

pub fn joint_index(leg: Leg, kind: JointKind) -> usize {
    leg.offset() + kind.index()
}

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "right_hip_roll",
    "right_hip_yaw",
    "right_hip_pitch",
    "right_knee",
    "right_ankle",
    "left_hip_roll",
    "left_hip_yaw",
    "left_hip_pitch",
    "left_knee",
    "left_ankle",
];

pub fn joint_by_name(name: &str) -> Option<usize> {
    JOINT_NAMES.iter().position(|n| *n == name)
}

/// Decoder order: stance hip-roll, hip-yaw, hip-pitch, knee, then the same
/// four for the swing leg. Returns the physical column in the right-stance
/// reference matrix.
pub fn reference_column(decoder_index: usize) -> usize {
    debug_assert!(decoder_index < NUM_LEARNED_JOINTS);
    if decoder_index < 4 {
        decoder_index
    } else {
        JOINTS_PER_LEG + decoder_index - 4
    }
}
