//! Episode environment: reset/step semantics over any [`Plant`].
//!
//! One call to [`BipedEnv::step`] is one control tick. The action is decoded
//! every tick; Bezier anchors and foot placement offsets follow the walking
//! step schedule.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::{CommandBox, EnvConfig, RewardConfig, RunConfig};
use crate::decoder::{ActionDecoder, ColumnRole, GaitParameters, RawAction};
use crate::error::{GaitError, Result};
use crate::gait::PhaseClock;
use crate::joints::{joint_index, JointKind, Leg, NUM_JOINTS, NUM_LEARNED_JOINTS};
use crate::plant::{Actuation, BodyState, Plant, PushEvent, SurrogatePlant};
use crate::policy::Observation;
use crate::regulators::{swing_ankle_reference_with, torso_torques, RegulationState, TorsoState};
use crate::reward::{self, RewardInputs, RewardVector, TerminationState};

/// Environment snapshot: plant state plus walking step bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub body: BodyState,
    pub clock: PhaseClock,
    pub step_index: u64,
    pub tick: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardVector,
    pub terminated: bool,
    /// Tick cap reached without termination.
    pub truncated: bool,
    pub aux: RewardInputs,
    pub tick: usize,
    /// Phase at the end of the tick, before any stance switch.
    pub tau: f64,
    pub stance: Leg,
    pub step_index: u64,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub struct BipedEnv<P: Plant = SurrogatePlant> {
    plant: P,
    env: EnvConfig,
    reward: RewardConfig,
    decoder: ActionDecoder,
    kp: [f64; NUM_JOINTS],
    torque_limit: [f64; NUM_JOINTS],
    ticks_per_step: usize,
    window_len: usize,

    command: [f64; 2],
    tick: usize,
    step_index: u64,
    ticks_in_step: usize,
    clock: PhaseClock,
    anchor: [f64; NUM_LEARNED_JOINTS],
    regulation: RegulationState,
    window: VecDeque<[f64; 2]>,
    pushes: Vec<PushEvent>,
    last_params: Option<GaitParameters>,
    started: bool,
    finished: bool,
}

impl BipedEnv<SurrogatePlant> {
    pub fn surrogate(cfg: &RunConfig) -> Result<Self> {
        let plant = SurrogatePlant::new(cfg.env.clone())?;
        Self::new(plant, cfg)
    }
}

impl<P: Plant> BipedEnv<P> {
    pub fn new(plant: P, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let env = cfg.env.clone();
        let ticks_per_step = env.ticks_per_step();
        Ok(Self {
            plant,
            kp: EnvConfig::per_joint(&env.joint_kp),
            torque_limit: EnvConfig::per_joint(&env.torque_limit),
            ticks_per_step,
            window_len: ticks_per_step,
            reward: cfg.reward.clone(),
            decoder: cfg.action_decoder()?,
            clock: PhaseClock::new(0.0, env.step_duration)?,
            env,
            command: [0.0; 2],
            tick: 0,
            step_index: 0,
            ticks_in_step: 0,
            anchor: [0.0; NUM_LEARNED_JOINTS],
            regulation: RegulationState::default(),
            window: VecDeque::new(),
            pushes: Vec::new(),
            last_params: None,
            started: false,
            finished: false,
        })
    }

    pub fn plant(&self) -> &P {
        &self.plant
    }

    pub fn into_plant(self) -> P {
        self.plant
    }

    pub fn config(&self) -> &EnvConfig {
        &self.env
    }

    pub fn command(&self) -> [f64; 2] {
        self.command
    }

    pub fn regulation(&self) -> &RegulationState {
        &self.regulation
    }

    /// Gait parameters decoded at the last tick.
    pub fn gait_parameters(&self) -> Option<&GaitParameters> {
        self.last_params.as_ref()
    }

    pub fn state(&self) -> SimState {
        SimState {
            body: self.plant.state().clone(),
            clock: self.clock,
            step_index: self.step_index,
            tick: self.tick,
        }
    }

    pub fn reset(&mut self, seed: u64, command: [f64; 2]) -> Result<Observation> {
        if !CommandBox::contains(command[0], command[1]) {
            return Err(GaitError::Command {
                vx: command[0],
                vy: command[1],
            });
        }
        self.plant.reset(seed)?;
        self.command = command;
        self.tick = 0;
        self.step_index = 0;
        self.ticks_in_step = 0;
        self.clock = PhaseClock::new(0.0, self.env.step_duration)?;
        self.regulation = RegulationState::default();
        let body = self.plant.state();
        let xy = [body.pelvis[0], body.pelvis[1]];
        self.window.clear();
        self.window.push_back(xy);
        self.pushes.clear();
        self.last_params = None;
        self.started = true;
        self.finished = false;
        Ok(self.observation())
    }

    /// Register a pelvis push. Times are episode times in seconds.
    pub fn apply_push(&mut self, event: PushEvent) -> Result<()> {
        if !self.started || self.finished {
            return Err(GaitError::State("push outside a running episode".into()));
        }
        self.plant.schedule_push(event)?;
        self.pushes.push(event);
        Ok(())
    }

    pub fn step(&mut self, raw: &RawAction) -> Result<StepResult> {
        if !self.started {
            return Err(GaitError::State("step before reset".into()));
        }
        if self.finished {
            return Err(GaitError::State("episode_done".into()));
        }
        if self.ticks_in_step == 0 {
            self.anchor = self.decoder.reference_measurement(&self.plant.state().q, self.plant.state().stance);
        }
        let gp = self.decoder.decode(raw, &self.anchor)?;

        if self.ticks_in_step == self.ticks_per_step / 2 {
            let sample = self.window_velocity(self.env.placement_window_ticks);
            self.regulation.refresh(sample, self.command, &gp.kfp);
        }

        {
            let elapsed = self.ticks_in_step as f64 * self.env.control_dt;
            let law_ctx = LawContext {
                gp: &gp,
                clock: self.clock,
                elapsed,
                regulation: &self.regulation,
                kp: &self.kp,
                torque_limit: &self.torque_limit,
                env: &self.env,
            };
            let mut law = |s: &BodyState, k: usize| law_ctx.actuation(s, k);
            self.plant.advance(&mut law)?;
        }

        self.tick += 1;
        self.ticks_in_step += 1;
        let tau = self.ticks_in_step as f64 / self.ticks_per_step as f64;
        let xy = {
            let b = self.plant.state();
            [b.pelvis[0], b.pelvis[1]]
        };
        self.window.push_back(xy);
        if self.window.len() > self.window_len + 1 {
            self.window.pop_front();
        }

        if self.ticks_in_step == self.ticks_per_step {
            let dur = self.env.step_duration;
            self.regulation.clear_offset();
            self.plant.switch_stance()?;
                self.ticks_in_step = 0;
            self.step_index += 1;
            self.clock = PhaseClock::new(self.tick as f64 * self.env.control_dt, dur)?;
        }
        self.last_params = Some(gp);

        let observation = self.observation();
        let aux = self.reward_inputs();
        let body = self.plant.state();
        let terminated = !body.is_finite()
            || reward::terminated(&TerminationState {
                yaw: body.angles[2],
                pitch: body.angles[1],
                roll: body.angles[0],
                p_z: body.pelvis[2],
                feet_separation: aux.d_feet,
            });
        let reward = if aux_is_finite(&aux) {
            reward::evaluate(&aux).unwrap_or_else(|_| RewardVector::zero())
        } else {
            RewardVector::zero()
        };
        let truncated = !terminated && self.tick >= self.env.max_ticks;
        self.finished = terminated || truncated;
        Ok(StepResult {
            observation,
            reward,
            terminated,
            truncated,
            aux,
            tick: self.tick,
            tau,
            stance: body.stance,
            step_index: self.step_index,
        })
    }

    pub fn close(&mut self) -> Result<()> {
        self.plant.close()
    }

    /// Sliding-window average pelvis velocity over the last walking step.
    pub fn average_velocity(&self) -> [f64; 2] {
        self.window_velocity(self.window_len)
    }

    /// Average pelvis velocity over the last `ticks` control ticks, or over
    /// the whole episode if it is shorter.
    pub fn window_velocity(&self, ticks: usize) -> [f64; 2] {
        let n = ticks.min(self.window.len() - 1);
        if n == 0 {
            return [0.0; 2];
        }
        let first = &self.window[self.window.len() - 1 - n];
        let last = self.window.back().unwrap();
        let span = n as f64 * self.env.control_dt;
        [(last[0] - first[0]) / span, (last[1] - first[1]) / span]
    }

    pub fn observation(&self) -> Observation {
        let v = self.average_velocity();
        let b = self.plant.state();
        Observation {
            vx_desired: self.command[0],
            vy_desired: self.command[1],
            vx_avg: v[0],
            vy_avg: v[1],
            vx_err: v[0] - self.command[0],
            vy_err: v[1] - self.command[1],
            roll: b.angles[0],
            pitch: b.angles[1],
            yaw: b.angles[2],
            roll_rate: b.rates[0],
            pitch_rate: b.rates[1],
            yaw_rate: b.rates[2],
        }
    }

    fn reward_inputs(&self) -> RewardInputs {
        let b = self.plant.state();
        let v = self.average_velocity();
        let off = self.reward.com_offset;
        let com = [b.pelvis[0] + off[0], b.pelvis[1] + off[1]];
        let polygon = reward::foot_rectangle(b.stance_foot, self.reward.foot_length, self.reward.foot_width);
        let center = reward::polygon_centroid(&polygon);
        RewardInputs {
            vx_avg: v[0],
            vy_avg: v[1],
            vx_desired: self.command[0],
            vy_desired: self.command[1],
            p_z: b.pelvis[2] + off[2],
            p_z_desired: self.reward.p_z_desired,
            u_norm: b.torques.iter().zip(&self.torque_limit).map(|(u, l)| u / l).collect(),
            com_xy: com,
            d: (com[0] - center[0]).hypot(com[1] - center[1]),
            support_polygon: polygon,
            angles: b.angles,
            rates: b.rates,
            d_feet: b.feet_distance(),
        }
    }
}

fn aux_is_finite(a: &RewardInputs) -> bool {
    [a.vx_avg, a.vy_avg, a.p_z, a.d, a.d_feet].iter().all(|v| v.is_finite())
        && a.u_norm.iter().all(|v| v.is_finite())
        && a.angles.iter().chain(&a.rates).chain(&a.com_xy).all(|v| v.is_finite())
}

struct LawContext<'a> {
    gp: &'a GaitParameters,
    clock: PhaseClock,
    /// Time since step start at the beginning of the tick.
    elapsed: f64,
    regulation: &'a RegulationState,
    kp: &'a [f64; NUM_JOINTS],
    torque_limit: &'a [f64; NUM_JOINTS],
    env: &'a EnvConfig,
}

impl LawContext<'_> {
    /// Joint PD tracking of the decoded references plus torso feed-forward.
    fn actuation(&self, s: &BodyState, substep: usize) -> Actuation {
        let stance = s.stance;
        let swing = stance.other();
        let t = self.clock.t_start + self.elapsed + substep as f64 * self.env.substep_dt();
        let tau = self.clock.phase(t).unwrap_or(0.0);
        let (alpha, roles) = self.gp.for_stance(stance);
        let mut torques = [0.0; NUM_JOINTS];
        for col in 0..NUM_JOINTS {
            let kind = JointKind::ALL[col % JointKind::ALL.len()];
            let (q_des, qd_des) = match roles[col] {
                ColumnRole::PassiveAnkle => continue,
                ColumnRole::KinematicAnkle => (
                    swing_ankle_reference_with(s.angles[1], self.env.foot_offset_deg),
                    s.rates[1],
                ),
                ColumnRole::Learned => {
                    let curve = crate::gait::BezierCurve::new(std::array::from_fn(|r| alpha[r][col]));
                    let mut q = curve.eval(tau).unwrap_or(alpha[5][col]);
                    let qd = curve.deriv(tau, self.clock.t_step).unwrap_or(0.0);
                    if self.regulation.active {
                        if col == joint_index(swing, JointKind::HipPitch) {
                            q += self.regulation.offset[0];
                        } else if col == joint_index(swing, JointKind::HipRoll) {
                            q += self.regulation.offset[1];
                        }
                    }
                    (q, qd)
                }
            };
            torques[col] = self.kp[col] * (q_des - s.q[col]) + self.gp.kd[kind.index()] * (qd_des - s.qd[col]);
        }
        let torso = TorsoState {
            roll: s.angles[0],
            pitch: s.angles[1],
            yaw: s.angles[2],
            roll_rate: s.rates[0],
            pitch_rate: s.rates[1],
            yaw_rate: s.rates[2],
            desired_roll: self.env.desired_roll,
            desired_pitch: self.env.desired_pitch,
        };
        let (u_roll, u_pitch) = torso_torques(&torso, &self.gp.kt);
        let roll_col = joint_index(stance, JointKind::HipRoll);
        let pitch_col = joint_index(stance, JointKind::HipPitch);
        let u_roll = u_roll.clamp(-self.torque_limit[roll_col], self.torque_limit[roll_col]);
        let u_pitch = u_pitch.clamp(-self.torque_limit[pitch_col], self.torque_limit[pitch_col]);
        torques[roll_col] += u_roll;
        torques[pitch_col] += u_pitch;
        Actuation {
            torques,
            torso: [u_roll, u_pitch],
        }
    }
}

/// Anything that maps observations to raw actions.
pub trait Controller {
    fn act(&mut self, obs: &Observation) -> Result<RawAction>;
}

/// Outcome of one rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode_return: f64,
    pub ticks: usize,
    pub terminated: bool,
}

/// Run one episode up to `max_ticks`, calling `observe` after every tick.
pub fn rollout<P: Plant, C: Controller + ?Sized>(
    env: &mut BipedEnv<P>,
    controller: &mut C,
    seed: u64,
    command: [f64; 2],
    pushes: &[PushEvent],
    max_ticks: usize,
    mut observe: impl FnMut(&BipedEnv<P>, &RawAction, &StepResult) -> Result<()>,
) -> Result<EpisodeSummary> {
    let mut obs = env.reset(seed, command)?;
    for p in pushes {
        env.apply_push(*p)?;
    }
    let mut summary = EpisodeSummary {
        episode_return: 0.0,
        ticks: 0,
        terminated: false,
    };
    while summary.ticks < max_ticks {
        let action = controller.act(&obs)?;
        let res = env.step(&action)?;
        summary.episode_return += res.reward.total;
        summary.ticks = res.tick;
        observe(env, &action, &res)?;
        obs = res.observation;
        if res.done() {
            summary.terminated = res.terminated;
            break;
        }
    }
    Ok(summary)
}
