//! Fixed-architecture MLP policy over a flat parameter vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{RawAction, ACTION_DIM};
use crate::error::{GaitError, Result};

pub const OBS_DIM: usize = 12;
pub const HIDDEN_WIDTH: usize = 32;
pub const HIDDEN_LAYERS: usize = 4;

/// Reduced-order state fed to the policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub vx_desired: f64,
    pub vy_desired: f64,
    pub vx_avg: f64,
    pub vy_avg: f64,
    pub vx_err: f64,
    pub vy_err: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub roll_rate: f64,
    pub pitch_rate: f64,
    pub yaw_rate: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [
            self.vx_desired,
            self.vy_desired,
            self.vx_avg,
            self.vy_avg,
            self.vx_err,
            self.vy_err,
            self.roll,
            self.pitch,
            self.yaw,
            self.roll_rate,
            self.pitch_rate,
            self.yaw_rate,
        ]
    }

    pub fn from_array(a: &[f64]) -> Result<Self> {
        if a.len() != OBS_DIM {
            return Err(GaitError::dim("observation", OBS_DIM, a.len()));
        }
        Ok(Self {
            vx_desired: a[0],
            vy_desired: a[1],
            vx_avg: a[2],
            vy_avg: a[3],
            vx_err: a[4],
            vy_err: a[5],
            roll: a[6],
            pitch: a[7],
            yaw: a[8],
            roll_rate: a[9],
            pitch_rate: a[10],
            yaw_rate: a[11],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationSpec {
    pub center: [f64; OBS_DIM],
    pub half_range: [f64; OBS_DIM],
}

impl NormalizationSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, (c, h)) in self.center.iter().zip(&self.half_range).enumerate() {
            if !c.is_finite() || !(*h > 0.0) || !h.is_finite() {
                return Err(GaitError::Config(format!(
                    "normalization channel {i}: half_range must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        // velocities, velocity errors, angles, angular rates
        let half = [1.5, 1.5, 1.5, 1.5, 1.0, 1.0, 0.5, 0.5, 0.5, 2.0, 2.0, 2.0];
        Self {
            center: [0.0; OBS_DIM],
            half_range: half,
        }
    }
}

/// Map each channel into [-0.5, 0.5], clamping out-of-range values.
pub fn normalize(obs: &Observation, spec: &NormalizationSpec) -> Result<[f64; OBS_DIM]> {
    let raw = obs.to_array();
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(GaitError::Observation(format!("channel {i} is not finite")));
    }
    Ok(std::array::from_fn(|i| {
        ((raw[i] - spec.center[i]) / (2.0 * spec.half_range[i])).clamp(-0.5, 0.5)
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl Architecture {
    pub fn gait_policy() -> Self {
        Self {
            input: OBS_DIM,
            hidden: vec![HIDDEN_WIDTH; HIDDEN_LAYERS],
            output: ACTION_DIM,
        }
    }

    /// `(fan_in, fan_out)` of every dense layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.output);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self::gait_policy()
    }
}

/// Flat parameters, layer-major `[W1 | b1 | ... | W5 | b5]`, weights row-major
/// with one row per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    arch: Architecture,
    flat: Vec<f64>,
}

impl PolicyParams {
    pub fn new(arch: Architecture, flat: Vec<f64>) -> Result<Self> {
        let expected = arch.param_count();
        if flat.len() != expected {
            return Err(GaitError::Parameter(format!(
                "expected {expected} parameters, got {}",
                flat.len()
            )));
        }
        if arch.output != ACTION_DIM || arch.input != OBS_DIM {
            return Err(GaitError::Parameter(format!(
                "architecture must map {OBS_DIM} inputs to {ACTION_DIM} outputs"
            )));
        }
        Ok(Self { arch, flat })
    }

    pub fn zeros() -> Self {
        let arch = Architecture::gait_policy();
        let n = arch.param_count();
        Self { arch, flat: vec![0.0; n] }
    }

    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn init(seed: u64) -> Self {
        let arch = Architecture::gait_policy();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = Vec::with_capacity(arch.param_count());
        for (fan_in, fan_out) in arch.layers() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            flat.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            flat.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self { arch, flat }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    /// Pre-sigmoid output layer activations.
    pub fn logits(&self, input: &[f64; OBS_DIM]) -> Vec<f64> {
        forward_logits(&self.arch, &self.flat, input)
    }

    pub fn forward(&self, input: &[f64; OBS_DIM]) -> RawAction {
        let logits = self.logits(input);
        let out: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        RawAction::new(&out).expect("sigmoid output lies in (0, 1)")
    }
}

/// Logistic sigmoid kept strictly inside (0, 1) in floating point.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Dense ReLU stack evaluated on a raw flat slice.
pub fn forward_logits(arch: &Architecture, flat: &[f64], input: &[f64]) -> Vec<f64> {
    let layers = arch.layers();
    let last = layers.len() - 1;
    let mut act: Vec<f64> = input.to_vec();
    let mut offset = 0;
    for (l, (fan_in, fan_out)) in layers.into_iter().enumerate() {
        let w = &flat[offset..offset + fan_in * fan_out];
        let b = &flat[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let mut next = Vec::with_capacity(fan_out);
        for (row, bias) in w.chunks_exact(fan_in).zip(b) {
            let z = row.iter().zip(&act).fold(*bias, |acc, (wi, xi)| acc + wi * xi);
            next.push(if l == last { z } else { z.max(0.0) });
        }
        act = next;
    }
    act
}

pub fn param_count(arch: &Architecture) -> usize {
    arch.param_count()
}
