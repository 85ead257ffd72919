//! Hand-written constant controller used as a stabilizing reference.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::decoder::{ActionBounds, RawAction, ACTION_DIM, INTERIOR_COEFFS, KD_OFFSET, KFP_OFFSET, KT_OFFSET};
use crate::env::Controller;
use crate::error::{GaitError, Result};
use crate::joints::{reference_column, NUM_LEARNED_JOINTS};
use crate::policy::Observation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineGains {
    pub kd: [f64; 5],
    pub kfp: [f64; 4],
    pub kt: [f64; 4],
    /// Extra swing knee flexion at mid-swing, radians.
    pub swing_knee_lift: f64,
}

impl Default for BaselineGains {
    fn default() -> Self {
        Self {
            kd: [2.0, 2.0, 2.0, 2.0, 1.0],
            kfp: [0.6, 0.7, 0.1, 0.8],
            kt: [150.0, 20.0, 150.0, 20.0],
            swing_knee_lift: 0.2,
        }
    }
}

/// Emits the same raw action every tick: the nominal pose as interior
/// coefficients plus fixed gains.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineController {
    action: RawAction,
}

impl BaselineController {
    pub fn new(cfg: &RunConfig, gains: &BaselineGains) -> Result<Self> {
        let bounds = cfg.decoder.bounds()?;
        let nominal = cfg.env.nominal_joints();
        let mut values = [0.0; ACTION_DIM];
        for j in 0..NUM_LEARNED_JOINTS {
            let col = reference_column(j);
            for k in 0..INTERIOR_COEFFS {
                let mut target = nominal[col];
                // knee is the fourth joint of each leg group
                if j == 7 && (k == 1 || k == 2) {
                    target += gains.swing_knee_lift;
                }
                values[j * INTERIOR_COEFFS + k] = target;
            }
        }
        values[KD_OFFSET..KD_OFFSET + 5].copy_from_slice(&gains.kd);
        values[KFP_OFFSET..KFP_OFFSET + 4].copy_from_slice(&gains.kfp);
        values[KT_OFFSET..KT_OFFSET + 4].copy_from_slice(&gains.kt);
        Ok(Self {
            action: to_raw(&bounds, &values)?,
        })
    }

    pub fn action(&self) -> &RawAction {
        &self.action
    }
}

fn to_raw(bounds: &ActionBounds, values: &[f64; ACTION_DIM]) -> Result<RawAction> {
    let raw: Vec<f64> = (0..ACTION_DIM).map(|i| bounds.unscale(i, values[i])).collect();
    RawAction::new(&raw).map_err(|_| {
        let bad = raw.iter().position(|v| !(*v > 0.0 && *v < 1.0)).unwrap_or(0);
        GaitError::Config(format!(
            "baseline value {} for channel {bad} lies outside the configured open range",
            values[bad]
        ))
    })
}

impl Controller for BaselineController {
    fn act(&mut self, _obs: &Observation) -> Result<RawAction> {
        Ok(self.action.clone())
    }
}
