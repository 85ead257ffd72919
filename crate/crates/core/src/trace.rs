//! Per-tick JSONL traces and the plot-ready CSV views derived from them.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::env::StepResult;
use crate::error::{GaitError, Result};
use crate::joints::{Leg, NUM_JOINTS};
use crate::plant::BodyState;
use crate::reward::{COMPONENT_NAMES, NUM_COMPONENTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub tick: usize,
    pub t: f64,
    pub stance: Leg,
    pub command: [f64; 2],
    pub v_avg: [f64; 2],
    pub pelvis: [f64; 3],
    pub pelvis_vel: [f64; 3],
    pub angles: [f64; 3],
    pub rates: [f64; 3],
    pub q: [f64; NUM_JOINTS],
    pub qd: [f64; NUM_JOINTS],
    pub torques: [f64; NUM_JOINTS],
    pub push_force: [f64; 2],
    pub components: [f64; NUM_COMPONENTS],
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl TraceRecord {
    pub fn new(body: &BodyState, step: &StepResult) -> Self {
        Self {
            tick: step.tick,
            t: body.t,
            stance: step.stance,
            command: [step.aux.vx_desired, step.aux.vy_desired],
            v_avg: [step.aux.vx_avg, step.aux.vy_avg],
            pelvis: body.pelvis,
            pelvis_vel: body.pelvis_vel,
            angles: body.angles,
            rates: body.rates,
            q: body.q,
            qd: body.qd,
            torques: body.torques,
            push_force: body.push_force,
            components: step.reward.components,
            reward: step.reward.total,
            terminated: step.terminated,
            truncated: step.truncated,
        }
    }
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, rec: &TraceRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec).map_err(|e| GaitError::Trace(e.to_string()))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parse a JSONL trace. Blank lines are skipped; anything else that is not a
/// record is an error naming the line.
pub fn read_trace(input: impl BufRead) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| GaitError::Trace(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExportKind {
    /// `(q, q̇)` for each selected joint index.
    LimitCycle(Vec<usize>),
    SpeedTrack,
    RewardComponents,
}



pub fn export_csv(records: &[TraceRecord], kind: &ExportKind, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    match kind {
        ExportKind::LimitCycle(joints) => {
            if let Some(j) = joints.iter().find(|&&j| j >= NUM_JOINTS) {
                return Err(GaitError::Trace(format!("joint index {j} out of range")));
            }
            for j in joints {
                header.push(format!("q{j}"));
                header.push(format!("qd{j}"));
            }
        }
        ExportKind::SpeedTrack => header.extend(["v_avg_x", "v_avg_y", "vd_x", "vd_y"].map(String::from)),
        ExportKind::RewardComponents => {
            header.extend(COMPONENT_NAMES.map(String::from));
            header.push("total".into());
        }
    }
    w.write_record(&header).map_err(csv_error)?;
    for r in records {
        let mut row = vec![r.t];
        match kind {
            ExportKind::LimitCycle(joints) => {
                for &j in joints {
                    row.push(r.q[j]);
                    row.push(r.qd[j]);
                }
            }
            ExportKind::SpeedTrack => row.extend([r.v_avg[0], r.v_avg[1], r.command[0], r.command[1]]),
            ExportKind::RewardComponents => {
                row.extend(r.components);
                row.push(r.reward);
            }
        }
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> GaitError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => GaitError::Io(io),
        other => GaitError::Trace(format!("{other:?}")),
    }
}
