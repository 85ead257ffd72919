//! Run configuration: one JSON document holding every tunable constant.
//!
//! All sections have defaults, so `{}` is a valid configuration. Unknown
//! keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::{ActionBounds, ActionDecoder, SymmetryMatrix};
use crate::error::{GaitError, Result};
use crate::joints::{JointKind, Leg, JOINTS_PER_LEG, NUM_JOINTS, NUM_LEARNED_JOINTS};
use crate::policy::NormalizationSpec;
use crate::regulators::DEFAULT_FOOT_OFFSET_DEG;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub decoder: DecoderConfig,
    pub normalization: NormalizationSpec,
    pub reward: RewardConfig,
    pub es: EsConfig,
    pub command: CommandBox,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            decoder: DecoderConfig::default(),
            normalization: NormalizationSpec::default(),
            reward: RewardConfig::default(),
            es: EsConfig::default(),
            command: CommandBox::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            GaitError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GaitError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.decoder.validate(&self.env)?;
        self.normalization.validate()?;
        self.reward.validate()?;
        self.es.validate()?;
        self.command.validate()?;
        Ok(())
    }

    pub fn action_decoder(&self) -> Result<ActionDecoder> {
        Ok(ActionDecoder::new(self.decoder.bounds()?, self.decoder.symmetry()?))
    }
}

fn config_err(msg: impl Into<String>) -> GaitError {
    GaitError::Config(msg.into())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be non-negative, got {v}")))
    }
}

/// Per joint kind values, ordered `[hip roll, hip yaw, hip pitch, knee, ankle]`.
pub type PerKind = [f64; JOINTS_PER_LEG];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Policy / reward rate, seconds per control tick.
    pub control_dt: f64,
    /// PD substeps per control tick.
    pub substeps: usize,
    pub step_duration: f64,
    pub max_ticks: usize,
    /// Averaging window of the mid-step foot placement speed sample, ticks.
    pub placement_window_ticks: usize,
    pub gravity: f64,
    /// Total mass driven by the pendulum and by pushes, kg.
    pub mass: f64,
    /// Pendulum height for the horizontal CoM dynamics, m.
    pub lip_height: f64,
    pub thigh_length: f64,
    pub shin_length: f64,
    pub hip_half_width: f64,
    pub joint_inertia: PerKind,
    pub joint_damping: PerKind,
    /// Fixed proportional PD gains; derivative gains come from the policy.
    pub joint_kp: PerKind,
    pub torque_limit: PerKind,
    /// Right-leg mechanical ranges; the left leg mirrors roll and yaw.
    pub joint_limits: [[f64; 2]; JOINTS_PER_LEG],
    /// Right-leg standing pose.
    pub nominal_pose: PerKind,
    pub reset_jitter: f64,
    pub torso_inertia: f64,
    pub torso_damping: f64,
    /// Gravity toppling stiffness of the torso about the hip, N m / rad.
    pub torso_topple_stiffness: f64,
    /// Torso reaction to horizontal CoM offset from the stance foot, N m / m.
    pub torso_lean_coupling: f64,
    pub desired_roll: f64,
    pub desired_pitch: f64,
    pub foot_offset_deg: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            control_dt: 0.001,
            substeps: 2,
            step_duration: 0.35,
            max_ticks: 10_000,
            placement_window_ticks: 1,
            gravity: 9.81,
            mass: 31.0,
            lip_height: 0.95,
            thigh_length: 0.5,
            shin_length: 0.5,
            hip_half_width: 0.135,
            joint_inertia: [0.05, 0.05, 0.05, 0.05, 0.01],
            joint_damping: [0.5, 0.5, 0.5, 0.5, 0.1],
            joint_kp: [100.0, 100.0, 100.0, 100.0, 20.0],
            torque_limit: [100.0, 60.0, 120.0, 150.0, 40.0],
            joint_limits: [[-0.35, 0.35], [-0.35, 0.35], [-0.8, 0.8], [0.1, 1.6], [-2.2, -0.2]],
            nominal_pose: [0.0, 0.0, 0.0, 0.5668, -1.099_557_428_756_427_7],
            reset_jitter: 0.01,
            torso_inertia: 1.5,
            torso_damping: 2.0,
            torso_topple_stiffness: 30.0,
            torso_lean_coupling: 20.0,
            desired_roll: 0.0,
            desired_pitch: 0.0,
            foot_offset_deg: DEFAULT_FOOT_OFFSET_DEG,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("env.control_dt", self.control_dt)?;
        if self.substeps == 0 {
            return Err(config_err("env.substeps must be at least 1"));
        }
        check_positive("env.step_duration", self.step_duration)?;
        let ticks = self.step_duration / self.control_dt;
        if (ticks - ticks.round()).abs() > 1e-6 || ticks.round() < 2.0 {
            return Err(config_err("env.step_duration must be a whole number (at least 2) of control ticks"));
        }
        if self.placement_window_ticks == 0 || self.placement_window_ticks > self.ticks_per_step() {
            return Err(config_err("env.placement_window_ticks must be between 1 and one step"));
        }
        for (name, v) in [
            ("env.gravity", self.gravity),
            ("env.mass", self.mass),
            ("env.lip_height", self.lip_height),
            ("env.thigh_length", self.thigh_length),
            ("env.shin_length", self.shin_length),
            ("env.torso_inertia", self.torso_inertia),
        ] {
            check_positive(name, v)?;
        }
        for (name, v) in [
            ("env.hip_half_width", self.hip_half_width),
            ("env.reset_jitter", self.reset_jitter),
            ("env.torso_damping", self.torso_damping),
        ] {
            check_nonneg(name, v)?;
        }
        for k in 0..JOINTS_PER_LEG {
            check_positive("env.joint_inertia", self.joint_inertia[k])?;
            check_nonneg("env.joint_damping", self.joint_damping[k])?;
            check_nonneg("env.joint_kp", self.joint_kp[k])?;
            check_positive("env.torque_limit", self.torque_limit[k])?;
            let [lo, hi] = self.joint_limits[k];
            if !(lo < hi) {
                return Err(config_err(format!("env.joint_limits[{k}]: min must be below max")));
            }
            if !(lo..=hi).contains(&self.nominal_pose[k]) {
                return Err(config_err(format!("env.nominal_pose[{k}] outside joint limits")));
            }
        }
        Ok(())
    }

    pub fn ticks_per_step(&self) -> usize {
        (self.step_duration / self.control_dt).round() as usize
    }

    pub fn substep_dt(&self) -> f64 {
        self.control_dt / self.substeps as f64
    }

    /// Mechanical limits for all ten physical joints.
    pub fn limits(&self) -> [[f64; 2]; NUM_JOINTS] {
        let mut out = [[0.0; 2]; NUM_JOINTS];
        for kind in JointKind::ALL {
            let [lo, hi] = self.joint_limits[kind.index()];
            out[Leg::Right.offset() + kind.index()] = [lo, hi];
            out[Leg::Left.offset() + kind.index()] = if mirrored(kind) { [-hi, -lo] } else { [lo, hi] };
        }
        out
    }

    pub fn nominal_joints(&self) -> [f64; NUM_JOINTS] {
        let mut out = [0.0; NUM_JOINTS];
        for kind in JointKind::ALL {
            let v = self.nominal_pose[kind.index()];
            out[Leg::Right.offset() + kind.index()] = v;
            out[Leg::Left.offset() + kind.index()] = if mirrored(kind) { -v } else { v };
        }
        out
    }

    pub fn per_joint(values: &PerKind) -> [f64; NUM_JOINTS] {
        std::array::from_fn(|i| values[i % JOINTS_PER_LEG])
    }
}

fn mirrored(kind: JointKind) -> bool {
    matches!(kind, JointKind::HipRoll | JointKind::HipYaw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryEntry {
    pub row: usize,
    pub column: usize,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Coefficient ranges per learned joint in decoder order: stance hip
    /// roll, yaw, pitch, knee, then swing hip roll, yaw, pitch, knee.
    pub joint_bounds: [[f64; 2]; NUM_LEARNED_JOINTS],
    pub kd_bounds: [[f64; 2]; 5],
    /// `[Kp_x, Kd_x, Kp_y, Kd_y]`.
    pub kfp_bounds: [[f64; 2]; 4],
    /// `[Kp_roll, Kd_roll, Kp_pitch, Kd_pitch]`.
    pub kt_bounds: [[f64; 2]; 4],
    /// Nonzero entries of the 10x10 left/right symmetry matrix.
    pub symmetry: Vec<SymmetryEntry>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        let t = SymmetryMatrix::lateral_mirror();
        Self {
            joint_bounds: [
                [-0.15, 0.15],
                [-0.1, 0.1],
                [-0.4, 0.4],
                [0.3, 0.85],
                [-0.15, 0.15],
                [-0.1, 0.1],
                [-0.4, 0.4],
                [0.3, 0.85],
            ],
            kd_bounds: [[0.5, 8.0], [0.5, 8.0], [0.5, 8.0], [0.5, 8.0], [0.2, 4.0]],
            kfp_bounds: [[0.0, 1.0], [0.0, 1.2], [0.0, 0.6], [0.0, 1.2]],
            kt_bounds: [[0.0, 300.0], [0.0, 40.0], [0.0, 300.0], [0.0, 40.0]],
            symmetry: (0..NUM_JOINTS)
                .map(|i| SymmetryEntry {
                    row: i,
                    column: t.perm()[i],
                    sign: t.sign()[i],
                })
                .collect(),
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self, env: &EnvConfig) -> Result<()> {
        let bounds = self.bounds()?;
        let _ = self.symmetry()?;
        // Reference frame is right stance: stance joints are the right leg.
        let limits = env.limits();
        for j in 0..NUM_LEARNED_JOINTS {
            let col = crate::joints::reference_column(j);
            let (lo, hi) = bounds.channels()[j * crate::decoder::INTERIOR_COEFFS];
            let [mlo, mhi] = limits[col];
            if lo < mlo || hi > mhi {
                return Err(config_err(format!(
                    "decoder.joint_bounds[{j}] = [{lo}, {hi}] exceeds mechanical range [{mlo}, {mhi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<ActionBounds> {
        let pair = |p: &[f64; 2]| (p[0], p[1]);
        ActionBounds::from_groups(
            &self.joint_bounds.map(|p| pair(&p)),
            &self.kd_bounds.map(|p| pair(&p)),
            &self.kfp_bounds.map(|p| pair(&p)),
            &self.kt_bounds.map(|p| pair(&p)),
        )
        .map_err(|e| config_err(format!("decoder: {e}")))
    }

    pub fn symmetry(&self) -> Result<SymmetryMatrix> {
        if self.symmetry.len() != NUM_JOINTS {
            return Err(config_err(format!(
                "decoder.symmetry needs exactly {NUM_JOINTS} entries, got {}",
                self.symmetry.len()
            )));
        }
        let mut perm = [usize::MAX; NUM_JOINTS];
        let mut sign = [0.0; NUM_JOINTS];
        for e in &self.symmetry {
            if e.row >= NUM_JOINTS || perm[e.row] != usize::MAX {
                return Err(config_err(format!("decoder.symmetry: bad or repeated row {}", e.row)));
            }
            perm[e.row] = e.column;
            sign[e.row] = e.sign;
        }
        SymmetryMatrix::new(perm, sign).map_err(|e| config_err(format!("decoder.symmetry: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub p_z_desired: f64,
    /// Stance foot footprint used as the support polygon.
    pub foot_length: f64,
    pub foot_width: f64,
    /// CoM position relative to the pelvis.
    pub com_offset: [f64; 3],
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            p_z_desired: 0.95,
            foot_length: 0.16,
            foot_width: 0.04,
            com_offset: [0.0; 3],
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("reward.p_z_desired", self.p_z_desired)?;
        check_positive("reward.foot_length", self.foot_length)?;
        check_nonneg("reward.foot_width", self.foot_width)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsConfig {
    /// Mirrored pairs per iteration.
    pub pairs: usize,
    pub sigma: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub episodes_per_candidate: usize,
    pub seed: u64,
    pub checkpoint_interval: usize,
    /// Seed of the initial policy parameters.
    pub init_seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            pairs: 32,
            sigma: 0.05,
            learning_rate: 0.02,
            iterations: 200,
            episodes_per_candidate: 4,
            seed: 0,
            checkpoint_interval: 10,
            init_seed: 0,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(config_err("es.pairs must be at least 1"));
        }
        check_positive("es.sigma", self.sigma)?;
        check_positive("es.learning_rate", self.learning_rate)?;
        if self.episodes_per_candidate == 0 {
            return Err(config_err("es.episodes_per_candidate must be at least 1"));
        }
        if self.checkpoint_interval == 0 {
            return Err(config_err("es.checkpoint_interval must be at least 1"));
        }
        Ok(())
    }
}

/// Longitudinal and lateral command limits.
pub const COMMAND_LIMITS: [[f64; 2]; 2] = [[-0.5, 1.0], [-0.3, 0.3]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandBox {
    pub vx: [f64; 2],
    pub vy: [f64; 2],
}

impl Default for CommandBox {
    fn default() -> Self {
        Self {
            vx: COMMAND_LIMITS[0],
            vy: COMMAND_LIMITS[1],
        }
    }
}

impl CommandBox {
    pub fn validate(&self) -> Result<()> {
        for (name, range, limit) in [("vx", self.vx, COMMAND_LIMITS[0]), ("vy", self.vy, COMMAND_LIMITS[1])] {
            if !(range[0] <= range[1]) || range[0] < limit[0] || range[1] > limit[1] {
                return Err(config_err(format!(
                    "command.{name} = {range:?} must be an ordered range within {limit:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(vx: f64, vy: f64) -> bool {
        (COMMAND_LIMITS[0][0]..=COMMAND_LIMITS[0][1]).contains(&vx)
            && (COMMAND_LIMITS[1][0]..=COMMAND_LIMITS[1][1]).contains(&vy)
    }
}
