//! Physical plants behind the environment: the built-in reduced-order
//! surrogate and the trait the remote bridge also implements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::error::{GaitError, Result};
use crate::joints::{joint_index, JointKind, Leg, NUM_JOINTS};

/// External force on the pelvis over `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushEvent {
    pub start: f64,
    pub duration: f64,
    pub force: [f64; 2],
}

impl PushEvent {
    pub fn new(start: f64, duration: f64, force: [f64; 2]) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() || !start.is_finite() || force.iter().any(|f| !f.is_finite()) {
            return Err(GaitError::Config(format!(
                "push needs finite start/force and positive duration, got start {start}, duration {duration}"
            )));
        }
        Ok(Self { start, duration, force })
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

/// Sum of all push forces active at `t`.
pub fn push_force_at(events: &[PushEvent], t: f64) -> [f64; 2] {
    events.iter().filter(|e| e.active(t)).fold([0.0; 2], |acc, e| {
        [acc[0] + e.force[0], acc[1] + e.force[1]]
    })
}

/// Measured robot state shared by every plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub t: f64,
    pub pelvis: [f64; 3],
    pub pelvis_vel: [f64; 3],
    /// `[roll, pitch, yaw]`.
    pub angles: [f64; 3],
    pub rates: [f64; 3],
    pub q: [f64; NUM_JOINTS],
    pub qd: [f64; NUM_JOINTS],
    pub stance: Leg,
    pub stance_foot: [f64; 2],
    pub swing_foot: [f64; 3],
    /// Joint torques applied during the last substep, after saturation.
    pub torques: [f64; NUM_JOINTS],
    pub push_force: [f64; 2],
}

impl BodyState {
    pub fn feet_distance(&self) -> f64 {
        let dx = self.swing_foot[0] - self.stance_foot[0];
        let dy = self.swing_foot[1] - self.stance_foot[1];
        dx.hypot(dy)
    }

    pub fn is_finite(&self) -> bool {
        self.pelvis
            .iter()
            .chain(&self.pelvis_vel)
            .chain(&self.angles)
            .chain(&self.rates)
            .chain(&self.q)
            .chain(&self.qd)
            .chain(&self.stance_foot)
            .chain(&self.swing_foot)
            .all(|v| v.is_finite())
    }
}

/// Commands for one inner substep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Actuation {
    pub torques: [f64; NUM_JOINTS],
    /// Torso regulation part of the stance hip `[roll, pitch]` torques.
    pub torso: [f64; 2],
}

/// Inner-loop control law: called once per substep with the measured state
/// and the substep index within the tick.
pub type ControlLaw<'a> = dyn FnMut(&BodyState, usize) -> Actuation + 'a;

pub trait Plant {
    fn reset(&mut self, seed: u64) -> Result<&BodyState>;
    fn state(&self) -> &BodyState;
    /// Advance one control tick.
    fn advance(&mut self, law: &mut ControlLaw<'_>) -> Result<&BodyState>;
    fn switch_stance(&mut self) -> Result<&BodyState>;
    fn schedule_push(&mut self, event: PushEvent) -> Result<()>;
    fn close(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Reduced-order 3D biped.
///
/// Joints are damped double integrators. The horizontal CoM is a linear
/// inverted pendulum about the stance foot, pelvis height follows the stance
/// leg length, and the torso is a damped inverted rotor pushed by the hip
/// torso torques and by the CoM offset from the pivot.
#[derive(Debug, Clone)]
pub struct SurrogatePlant {
    cfg: EnvConfig,
    limits: [[f64; 2]; NUM_JOINTS],
    inertia: [f64; NUM_JOINTS],
    damping: [f64; NUM_JOINTS],
    torque_limit: [f64; NUM_JOINTS],
    pushes: Vec<PushEvent>,
    state: BodyState,
    substep: u64,
    yaw_ref: f64,
}

impl SurrogatePlant {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let limits = cfg.limits();
        let inertia = EnvConfig::per_joint(&cfg.joint_inertia);
        let damping = EnvConfig::per_joint(&cfg.joint_damping);
        let torque_limit = EnvConfig::per_joint(&cfg.torque_limit);
        let state = standing_state(&cfg, cfg.nominal_joints());
        Ok(Self {
            cfg,
            limits,
            inertia,
            damping,
            torque_limit,
            pushes: Vec::new(),
            state,
            substep: 0,
            yaw_ref: 0.0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn torque_limits(&self) -> &[f64; NUM_JOINTS] {
        &self.torque_limit
    }

    /// Overwrite joint velocities, for tests of the free joint dynamics.
    pub fn set_joint_velocities(&mut self, qd: [f64; NUM_JOINTS]) {
        self.state.qd = qd;
    }

    fn integrate(&mut self, act: &Actuation) {
        let dt = self.cfg.substep_dt();
        let st = &mut self.state;
        let t = self.substep as f64 * dt;
        let force = push_force_at(&self.pushes, t);

        for i in 0..NUM_JOINTS {
            let lim = self.torque_limit[i];
            let u = act.torques[i].clamp(-lim, lim);
            st.torques[i] = if u.is_nan() { 0.0 } else { u };
            let qdd = (st.torques[i] - self.damping[i] * st.qd[i]) / self.inertia[i];
            st.qd[i] += qdd * dt;
            st.q[i] += st.qd[i] * dt;
            let [lo, hi] = self.limits[i];
            if st.q[i] < lo {
                st.q[i] = lo;
                st.qd[i] = st.qd[i].max(0.0);
            } else if st.q[i] > hi {
                st.q[i] = hi;
                st.qd[i] = st.qd[i].min(0.0);
            }
        }

        // horizontal pendulum about the stance foot
        let w2 = self.cfg.gravity / self.cfg.lip_height;
        for a in 0..2 {
            let acc = w2 * (st.pelvis[a] - st.stance_foot[a]) + force[a] / self.cfg.mass;
            st.pelvis_vel[a] += acc * dt;
            st.pelvis[a] += st.pelvis_vel[a] * dt;
        }

        // torso roll and pitch
        let cfg = &self.cfg;
        let lean = [
            cfg.torso_lean_coupling * (st.pelvis[1] - st.stance_foot[1]),
            -cfg.torso_lean_coupling * (st.pelvis[0] - st.stance_foot[0]),
        ];
        for a in 0..2 {
            let ang = st.angles[a];
            let acc = (cfg.torso_topple_stiffness * ang.sin() + lean[a] - act.torso[a] - cfg.torso_damping * st.rates[a])
                / cfg.torso_inertia;
            st.rates[a] += acc * dt;
            st.angles[a] += st.rates[a] * dt;
        }

        // yaw follows the stance hip yaw joint
        let yaw_col = joint_index(st.stance, JointKind::HipYaw);
        st.rates[2] = -st.qd[yaw_col];
        st.angles[2] = self.yaw_ref - st.q[yaw_col];

        st.push_force = force;
        self.substep += 1;
        st.t = self.substep as f64 * dt;
        update_kinematics(cfg, st);
    }
}

fn leg_length(cfg: &EnvConfig, knee: f64) -> f64 {
    let (a, b) = (cfg.thigh_length, cfg.shin_length);
    (a * a + b * b + 2.0 * a * b * knee.cos()).max(0.0).sqrt()
}

fn hip_position(cfg: &EnvConfig, st: &BodyState, leg: Leg) -> [f64; 2] {
    [st.pelvis[0], st.pelvis[1] + leg.lateral_sign() * cfg.hip_half_width]
}

/// Pelvis height from the stance leg and swing foot position from the
/// swing leg angles relative to the torso.
fn update_kinematics(cfg: &EnvConfig, st: &mut BodyState) {
    let stance = st.stance;
    let hip = hip_position(cfg, st, stance);
    let r2 = (hip[0] - st.stance_foot[0]).powi(2) + (hip[1] - st.stance_foot[1]).powi(2);
    let l_st = leg_length(cfg, st.q[joint_index(stance, JointKind::Knee)]);
    let z2 = l_st * l_st - r2;
    let z_prev = st.pelvis[2];
    st.pelvis[2] = if z2 > 0.0 { z2.sqrt() } else { 0.0 };
    let dt = cfg.substep_dt();
    st.pelvis_vel[2] = (st.pelvis[2] - z_prev) / dt;

    let swing = stance.other();
    let hip = hip_position(cfg, st, swing);
    let l_sw = leg_length(cfg, st.q[joint_index(swing, JointKind::Knee)]);
    let pitch = st.q[joint_index(swing, JointKind::HipPitch)] - st.angles[1];
    let roll = st.q[joint_index(swing, JointKind::HipRoll)] - st.angles[0];
    st.swing_foot = [
        hip[0] + l_sw * pitch.sin(),
        hip[1] + l_sw * roll.sin(),
        (st.pelvis[2] - l_sw * pitch.cos() * roll.cos()).max(0.0),
    ];
}

fn standing_state(cfg: &EnvConfig, q: [f64; NUM_JOINTS]) -> BodyState {
    let stance = Leg::Right;
    let mut st = BodyState {
        t: 0.0,
        pelvis: [0.0; 3],
        pelvis_vel: [0.0; 3],
        angles: [0.0; 3],
        rates: [0.0; 3],
        q,
        qd: [0.0; NUM_JOINTS],
        stance,
        stance_foot: [0.0, stance.lateral_sign() * cfg.hip_half_width],
        swing_foot: [0.0; 3],
        torques: [0.0; NUM_JOINTS],
        push_force: [0.0; 2],
    };
    update_kinematics(cfg, &mut st);
    st.pelvis_vel[2] = 0.0;
    st
}

impl Plant for SurrogatePlant {
    fn reset(&mut self, seed: u64) -> Result<&BodyState> {
        let mut q = self.cfg.nominal_joints();
        if self.cfg.reset_jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = self.cfg.reset_jitter;
            for (i, v) in q.iter_mut().enumerate() {
                let [lo, hi] = self.limits[i];
                *v = (*v + rng.random_range(-j..=j)).clamp(lo, hi);
            }
        }
        self.state = standing_state(&self.cfg, q);
        self.yaw_ref = self.state.q[joint_index(Leg::Right, JointKind::HipYaw)];
        self.state.angles[2] = 0.0;
        self.pushes.clear();
        self.substep = 0;
        Ok(&self.state)
    }

    fn state(&self) -> &BodyState {
        &self.state
    }

    fn advance(&mut self, law: &mut ControlLaw<'_>) -> Result<&BodyState> {
        for k in 0..self.cfg.substeps {
            let act = law(&self.state, k);
            self.integrate(&act);
        }
        Ok(&self.state)
    }

    fn switch_stance(&mut self) -> Result<&BodyState> {
        let st = &mut self.state;
        let new_stance = st.stance.other();
        st.stance_foot = [st.swing_foot[0], st.swing_foot[1]];
        // keep yaw continuous across the pivot change
        let yaw_col = joint_index(new_stance, JointKind::HipYaw);
        self.yaw_ref = st.angles[2] + st.q[yaw_col];
        st.stance = new_stance;
        st.rates[2] = -st.qd[yaw_col];
        update_kinematics(&self.cfg, st);
        // the new leg sets the height; no velocity spike from the swap
        st.pelvis_vel[2] = 0.0;
        Ok(&self.state)
    }

    fn schedule_push(&mut self, event: PushEvent) -> Result<()> {
        self.pushes.push(event);
        Ok(())
    }
}
