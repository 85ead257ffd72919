//! Client side of the external-physics bridge.
//!
//! Frames are a u32 little-endian byte count followed by a UTF-8 JSON
//! object with an `"op"` field. The client runs the whole control stack
//! locally and ships joint torques, one frame per substep, batched per
//! control tick.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{GaitError, Result};
use crate::joints::{Leg, NUM_JOINTS};
use crate::plant::{Actuation, BodyState, ControlLaw, Plant, PushEvent};
use crate::policy::OBS_DIM;

pub const PROTOCOL_VERSION: u64 = 1;
pub const DEFAULT_PORT: u16 = 7787;
/// Largest frame either side will accept.
pub const MAX_FRAME: usize = 64 << 20;

pub fn encode_frame(payload: &Value) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(payload).map_err(|e| GaitError::Protocol(e.to_string()))?;
    if body.len() > MAX_FRAME {
        return Err(GaitError::Protocol(format!("frame of {} bytes exceeds limit", body.len())));
    }
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn write_frame(w: &mut impl Write, payload: &Value) -> Result<()> {
    w.write_all(&encode_frame(payload)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame(r: &mut impl Read) -> Result<Value> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(GaitError::Protocol(format!("frame length {len} exceeds limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    let text = std::str::from_utf8(&body).map_err(|e| GaitError::Protocol(format!("frame is not UTF-8: {e}")))?;
    let v: Value = serde_json::from_str(text).map_err(|e| GaitError::Protocol(format!("frame is not JSON: {e}")))?;
    if !v.is_object() {
        return Err(GaitError::Protocol("frame payload must be a JSON object".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TorqueFrame {
    pub torques: [f64; NUM_JOINTS],
    pub torso: [f64; 2],
}

impl From<&Actuation> for TorqueFrame {
    fn from(a: &Actuation) -> Self {
        Self {
            torques: a.torques,
            torso: a.torso,
        }
    }
}

/// Physics served by a remote process.
///
/// The remote side owns contact, so the stance leg in every reply is taken
/// as given. A local stance switch is mirrored in the cached state and sent
/// along with the next step request.
pub struct BridgePlant {
    stream: TcpStream,
    substeps: usize,
    state: BodyState,
    pending_switch: bool,
    closed: bool,
}

impl BridgePlant {
    pub fn connect(addr: &str, substeps: usize, timeout: Duration) -> Result<Self> {
        let target = addr
            .to_socket_addrs()
            .map_err(|e| GaitError::Protocol(format!("cannot resolve {addr}: {e}")))?
            .next()
            .ok_or_else(|| GaitError::Protocol(format!("no address for {addr}")))?;
        let stream = TcpStream::connect_timeout(&target, timeout)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        let mut plant = Self {
            stream,
            substeps,
            state: placeholder_state(),
            pending_switch: false,
            closed: false,
        };
        plant.hello()?;
        Ok(plant)
    }

    fn hello(&mut self) -> Result<()> {
        let reply = self.request(json!({"op": "hello", "protocol": PROTOCOL_VERSION, "mode": "torque"}))?;
        let version = reply.get("protocol").and_then(Value::as_u64);
        if version != Some(PROTOCOL_VERSION) {
            return Err(GaitError::Protocol(format!(
                "server speaks protocol {version:?}, expected {PROTOCOL_VERSION}"
            )));
        }
        let obs = reply.get("obs_dim").and_then(Value::as_u64);
        let act = reply.get("action_dim").and_then(Value::as_u64);
        if obs != Some(OBS_DIM as u64) || act != Some(NUM_JOINTS as u64) {
            return Err(GaitError::Protocol(format!(
                "server dimensions obs {obs:?}, action {act:?} do not match torque mode"
            )));
        }
        Ok(())
    }

    /// Send one request and return the reply, turning error replies into
    /// protocol errors.
    pub fn request(&mut self, msg: Value) -> Result<Value> {
        if self.closed {
            return Err(GaitError::State("bridge session closed".into()));
        }
        write_frame(&mut self.stream, &msg)?;
        let reply = read_frame(&mut self.stream)?;
        match reply.get("ok").and_then(Value::as_bool) {
            Some(true) => Ok(reply),
            _ => {
                let msg = reply.get("error").and_then(Value::as_str).unwrap_or("malformed reply");
                Err(GaitError::Protocol(msg.to_string()))
            }
        }
    }

    fn take_state(&mut self, reply: &Value) -> Result<&BodyState> {
        let state = reply
            .get("state")
            .cloned()
            .ok_or_else(|| GaitError::Protocol("reply lacks state".into()))?;
        let state: BodyState =
            serde_json::from_value(state).map_err(|e| GaitError::Protocol(format!("bad state: {e}")))?;
        if !state.is_finite() {
            return Err(GaitError::Protocol("state contains non-finite values".into()));
        }
        self.state = state;
        Ok(&self.state)
    }
}

impl Plant for BridgePlant {
    fn reset(&mut self, seed: u64) -> Result<&BodyState> {
        self.pending_switch = false;
        let reply = self.request(json!({"op": "reset", "seed": seed}))?;
        self.take_state(&reply)
    }

    fn state(&self) -> &BodyState {
        &self.state
    }

    fn advance(&mut self, law: &mut ControlLaw<'_>) -> Result<&BodyState> {
        let frames: Vec<TorqueFrame> = (0..self.substeps).map(|k| TorqueFrame::from(&law(&self.state, k))).collect();
        let msg = json!({"op": "step", "frames": frames, "switch_stance": self.pending_switch});
        self.pending_switch = false;
        let reply = self.request(msg)?;
        self.take_state(&reply)
    }

    fn switch_stance(&mut self) -> Result<&BodyState> {
        self.pending_switch = true;
        let s = &mut self.state;
        s.stance = s.stance.other();
        let old = s.stance_foot;
        s.stance_foot = [s.swing_foot[0], s.swing_foot[1]];
        s.swing_foot = [old[0], old[1], 0.0];
        Ok(&self.state)
    }

    fn schedule_push(&mut self, event: PushEvent) -> Result<()> {
        self.request(json!({
            "op": "push",
            "start": event.start,
            "duration": event.duration,
            "force": event.force,
        }))?;
        Ok(())
    }

    fn close(&mut self) -> Result<()> {
        if self.closed {
            return Ok(());
        }
        let out = self.request(json!({"op": "close"})).map(|_| ());
        self.closed = true;
        out
    }
}

fn placeholder_state() -> BodyState {
    BodyState {
        t: 0.0,
        pelvis: [0.0; 3],
        pelvis_vel: [0.0; 3],
        angles: [0.0; 3],
        rates: [0.0; 3],
        q: [0.0; NUM_JOINTS],
        qd: [0.0; NUM_JOINTS],
        stance: Leg::Right,
        stance_foot: [0.0; 2],
        swing_foot: [0.0; 3],
        torques: [0.0; NUM_JOINTS],
        push_force: [0.0; 2],
    }
}
