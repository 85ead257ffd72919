//! Action decoding: raw policy outputs to full gait parameters.
//!
//! Layout of the 45 raw channels:
//!
//! | channels | meaning |
//! |----------|---------|
//! | 0..32    | interior Bezier coefficients `alpha[1..=4]`, 4 per learned joint in decoder order |
//! | 32..37   | joint PD derivative gains (hip roll, hip yaw, hip pitch, knee, ankle) |
//! | 37..41   | foot placement gains `[Kp_x, Kd_x, Kp_y, Kd_y]` |
//! | 41..45   | torso gains `[Kp_roll, Kd_roll, Kp_pitch, Kd_pitch]` |
//!
//! The end coefficients `alpha[0]` and `alpha[5]` are not learned: both are
//! pinned to the joint position measured at the start of the step, which
//! makes the output continuous through impact and the step periodic.

use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};
use crate::gait::{BezierCurve, BEZIER_COEFFS, BEZIER_DEGREE};
use crate::joints::{reference_column, JointKind, Leg, JOINTS_PER_LEG, NUM_JOINTS, NUM_LEARNED_JOINTS};

pub const INTERIOR_COEFFS: usize = BEZIER_COEFFS - 2;
pub const COEFF_CHANNELS: usize = NUM_LEARNED_JOINTS * INTERIOR_COEFFS;
pub const KD_CHANNELS: usize = JOINTS_PER_LEG;
pub const KFP_CHANNELS: usize = 4;
pub const KT_CHANNELS: usize = 4;
pub const ACTION_DIM: usize = COEFF_CHANNELS + KD_CHANNELS + KFP_CHANNELS + KT_CHANNELS;

pub const KD_OFFSET: usize = COEFF_CHANNELS;
pub const KFP_OFFSET: usize = KD_OFFSET + KD_CHANNELS;
pub const KT_OFFSET: usize = KFP_OFFSET + KFP_CHANNELS;

const _: () = assert!(COEFF_CHANNELS == 32);
const _: () = assert!(ACTION_DIM == 45);

/// Coefficient matrix: rows are coefficient index, columns are joints.
pub type CoeffMatrix = [[f64; NUM_JOINTS]; BEZIER_COEFFS];

/// Policy output, every entry strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RawAction([f64; ACTION_DIM]);

impl RawAction {
    pub fn new(values: &[f64]) -> Result<Self> {
        let arr: [f64; ACTION_DIM] = values
            .try_into()
            .map_err(|_| GaitError::dim("raw action", ACTION_DIM, values.len()))?;
        if let Some((i, v)) = arr.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return Err(GaitError::Parameter(format!(
                "raw action channel {i} = {v} is outside (0, 1)"
            )));
        }
        Ok(Self(arr))
    }

    /// The neutral action, every channel at the midpoint of its range.
    pub fn midpoint() -> Self {
        Self([0.5; ACTION_DIM])
    }

    pub fn values(&self) -> &[f64; ACTION_DIM] {
        &self.0
    }
}

/// Per-channel `(min, max)` pairs for the 45 outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    channels: Vec<(f64, f64)>,
}

impl ActionBounds {
    pub fn new(channels: Vec<(f64, f64)>) -> Result<Self> {
        if channels.len() != ACTION_DIM {
            return Err(GaitError::dim("action bounds", ACTION_DIM, channels.len()));
        }
        for (i, (lo, hi)) in channels.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(GaitError::Config(format!(
                    "action bound {i}: min {lo} must be below max {hi}"
                )));
            }
        }
        Ok(Self { channels })
    }

    /// Expand per-joint and per-gain ranges into the 45-channel table.
    pub fn from_groups(
        joints: &[(f64, f64); NUM_LEARNED_JOINTS],
        kd: &[(f64, f64); KD_CHANNELS],
        kfp: &[(f64, f64); KFP_CHANNELS],
        kt: &[(f64, f64); KT_CHANNELS],
    ) -> Result<Self> {
        let mut channels = Vec::with_capacity(ACTION_DIM);
        for range in joints {
            channels.extend(std::iter::repeat_n(*range, INTERIOR_COEFFS));
        }
        channels.extend_from_slice(kd);
        channels.extend_from_slice(kfp);
        channels.extend_from_slice(kt);
        Self::new(channels)
    }

    pub fn channels(&self) -> &[(f64, f64)] {
        &self.channels
    }

    /// Inverse of [`scale`] for one channel; used by hand-written controllers.
    pub fn unscale(&self, channel: usize, value: f64) -> f64 {
        let (lo, hi) = self.channels[channel];
        (value - lo) / (hi - lo)
    }
}

/// Sparse signed permutation mapping right-stance columns to left-stance
/// columns: `T[i][perm[i]] = sign[i]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryMatrix {
    perm: [usize; NUM_JOINTS],
    sign: [f64; NUM_JOINTS],
}

impl SymmetryMatrix {
    pub fn new(perm: [usize; NUM_JOINTS], sign: [f64; NUM_JOINTS]) -> Result<Self> {
        let mut seen = [false; NUM_JOINTS];
        for (i, &p) in perm.iter().enumerate() {
            if p >= NUM_JOINTS || seen[p] {
                return Err(GaitError::Config(format!(
                    "symmetry table is not a permutation (row {i} -> {p})"
                )));
            }
            seen[p] = true;
            if sign[i] != 1.0 && sign[i] != -1.0 {
                return Err(GaitError::Config(format!(
                    "symmetry sign for row {i} must be +1 or -1, got {}",
                    sign[i]
                )));
            }
        }
        for i in 0..NUM_JOINTS {
            // T*T = I requires an involutive permutation with matched signs
            let j = perm[i];
            if perm[j] != i || sign[i] * sign[j] != 1.0 {
                return Err(GaitError::Config(format!(
                    "symmetry table is not an involution at row {i}"
                )));
            }
        }
        Ok(Self { perm, sign })
    }

    /// Left/right leg swap with hip roll and hip yaw negated.
    pub fn lateral_mirror() -> Self {
        let mut perm = [0; NUM_JOINTS];
        let mut sign = [1.0; NUM_JOINTS];
        for leg in [Leg::Right, Leg::Left] {
            for kind in JointKind::ALL {
                let i = leg.offset() + kind.index();
                perm[i] = leg.other().offset() + kind.index();
                if matches!(kind, JointKind::HipRoll | JointKind::HipYaw) {
                    sign[i] = -1.0;
                }
            }
        }
        Self { perm, sign }
    }

    pub fn perm(&self) -> &[usize; NUM_JOINTS] {
        &self.perm
    }

    pub fn sign(&self) -> &[f64; NUM_JOINTS] {
        &self.sign
    }

    pub fn dense(&self) -> [[f64; NUM_JOINTS]; NUM_JOINTS] {
        let mut t = [[0.0; NUM_JOINTS]; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            t[i][self.perm[i]] = self.sign[i];
        }
        t
    }

    /// Row vector times T.
    pub fn apply_row(&self, row: &[f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
        let mut out = [0.0; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            out[self.perm[i]] = self.sign[i] * row[i];
        }
        out
    }

    fn apply_index(&self, col: usize) -> usize {
        self.perm[col]
    }
}

/// `alpha_L = alpha_R * T`.
pub fn mirror(alpha_r: &CoeffMatrix, t: &SymmetryMatrix) -> CoeffMatrix {
    let mut out = [[0.0; NUM_JOINTS]; BEZIER_COEFFS];
    for (dst, src) in out.iter_mut().zip(alpha_r) {
        *dst = t.apply_row(src);
    }
    out
}

/// How a coefficient column is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Learned,
    /// Stance ankle: no actuation torque.
    PassiveAnkle,
    /// Swing ankle: reference from torso pitch, see `regulators`.
    KinematicAnkle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitParameters {
    pub alpha_r: CoeffMatrix,
    pub alpha_l: CoeffMatrix,
    pub roles_r: [ColumnRole; NUM_JOINTS],
    pub roles_l: [ColumnRole; NUM_JOINTS],
    /// Derivative gains per joint kind, shared by both legs.
    pub kd: [f64; KD_CHANNELS],
    /// `[Kp_x, Kd_x, Kp_y, Kd_y]`.
    pub kfp: [f64; KFP_CHANNELS],
    /// `[Kp_roll, Kd_roll, Kp_pitch, Kd_pitch]`.
    pub kt: [f64; KT_CHANNELS],
}

impl GaitParameters {
    pub fn for_stance(&self, stance: Leg) -> (&CoeffMatrix, &[ColumnRole; NUM_JOINTS]) {
        match stance {
            Leg::Right => (&self.alpha_r, &self.roles_r),
            Leg::Left => (&self.alpha_l, &self.roles_l),
        }
    }

    pub fn curve(&self, stance: Leg, column: usize) -> BezierCurve {
        let (alpha, _) = self.for_stance(stance);
        BezierCurve::new(std::array::from_fn(|row| alpha[row][column]))
    }
}

/// Linear map of each raw channel onto its configured range.
pub fn scale(raw: &RawAction, bounds: &ActionBounds) -> [f64; ACTION_DIM] {
    std::array::from_fn(|i| {
        let (lo, hi) = bounds.channels[i];
        lo + raw.0[i] * (hi - lo)
    })
}

/// Decoder state, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDecoder {
    pub bounds: ActionBounds,
    pub symmetry: SymmetryMatrix,
}

impl ActionDecoder {
    pub fn new(bounds: ActionBounds, symmetry: SymmetryMatrix) -> Self {
        Self { bounds, symmetry }
    }

    pub fn scale(&self, raw: &RawAction) -> [f64; ACTION_DIM] {
        scale(raw, &self.bounds)
    }

    /// Build both stance matrices from scaled outputs and the learned-joint
    /// positions measured at the start of the step, given in decoder order
    /// and in the right-stance reference frame.
    pub fn assemble(&self, scaled: &[f64; ACTION_DIM], q_measured: &[f64]) -> Result<GaitParameters> {
        if q_measured.len() != NUM_LEARNED_JOINTS {
            return Err(GaitError::dim(
                "measured joint positions",
                NUM_LEARNED_JOINTS,
                q_measured.len(),
            ));
        }
        let mut alpha_r = [[0.0; NUM_JOINTS]; BEZIER_COEFFS];
        for (j, &q) in q_measured.iter().enumerate() {
            let col = reference_column(j);
            alpha_r[0][col] = q;
            alpha_r[BEZIER_DEGREE][col] = q;
            for k in 0..INTERIOR_COEFFS {
                alpha_r[k + 1][col] = scaled[j * INTERIOR_COEFFS + k];
            }
        }
        let mut roles_r = [ColumnRole::Learned; NUM_JOINTS];
        roles_r[Leg::Right.offset() + JointKind::Ankle.index()] = ColumnRole::PassiveAnkle;
        roles_r[Leg::Left.offset() + JointKind::Ankle.index()] = ColumnRole::KinematicAnkle;
        let mut roles_l = [ColumnRole::Learned; NUM_JOINTS];
        for (col, role) in roles_r.iter().enumerate() {
            roles_l[self.symmetry.apply_index(col)] = *role;
        }
        let alpha_l = mirror(&alpha_r, &self.symmetry);
        Ok(GaitParameters {
            alpha_r,
            alpha_l,
            roles_r,
            roles_l,
            kd: std::array::from_fn(|i| scaled[KD_OFFSET + i]),
            kfp: std::array::from_fn(|i| scaled[KFP_OFFSET + i]),
            kt: std::array::from_fn(|i| scaled[KT_OFFSET + i]),
        })
    }

    pub fn decode(&self, raw: &RawAction, q_measured: &[f64]) -> Result<GaitParameters> {
        self.assemble(&self.scale(raw), q_measured)
    }

    /// Learned-joint positions in decoder order and reference frame, given
    /// physical joint positions and the current stance leg.
    pub fn reference_measurement(&self, q: &[f64; NUM_JOINTS], stance: Leg) -> [f64; NUM_LEARNED_JOINTS] {
        let frame = match stance {
            Leg::Right => *q,
            // T is an involution, so q * T maps left-stance columns back.
            Leg::Left => self.symmetry.apply_row(q),
        };
        std::array::from_fn(|j| frame[reference_column(j)])
    }
}
