//! Newline-delimited JSON robot protocol.
//!
//! One frame is one UTF-8 JSON object followed by exactly one `\n`, at most
//! [`MAX_FRAME_BYTES`] bytes including the newline. Every request gets exactly
//! one reply; there is no pipelining.
//!
//! ```text
//! {"seq":1,"cmd":"MOVE","x":100.0,"y":-50.0,"z":-300.0}
//! {"seq":2,"cmd":"YAW","deg":30.0}
//! {"seq":3,"cmd":"GRIP","width_mm":40.0}
//! {"seq":4,"cmd":"OPEN","width_mm":60.0}
//! {"seq":5,"cmd":"STATUS"}
//! {"seq":5,"ok":true,"pose":{"x":0.0,"y":0.0,"z":-193.6,"yaw":0.0},"grip_width_mm":80.0,"force_n":0.0,"grasped":false}
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::kinematics::Pose;

pub const MAX_FRAME_BYTES: usize = 4096;
/// Gripper aperture bound; objects must fit in an 8 cm circle.
pub const MAX_GRIP_WIDTH_MM: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("frame exceeds {MAX_FRAME_BYTES} bytes")]
    FrameTooLong,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unknown command {0:?}")]
    UnknownCommand(String),
}

impl ProtocolError {
    pub fn code(&self) -> ErrorCode {
        match self {
            ProtocolError::FrameTooLong => ErrorCode::FrameTooLong,
            ProtocolError::MalformedFrame(_) => ErrorCode::MalformedFrame,
            ProtocolError::UnknownCommand(_) => ErrorCode::UnknownCommand,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Move { x: f64, y: f64, z: f64 },
    Yaw { deg: f64 },
    Grip { width_mm: f64 },
    Open { width_mm: f64 },
    Status,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Move { .. } => "MOVE",
            Command::Yaw { .. } => "YAW",
            Command::Grip { .. } => "GRIP",
            Command::Open { .. } => "OPEN",
            Command::Status => "STATUS",
        }
    }

    fn values(&self) -> impl Iterator<Item = f64> {
        let (buf, n) = match *self {
            Command::Move { x, y, z } => ([x, y, z], 3),
            Command::Yaw { deg } => ([deg, 0.0, 0.0], 1),
            Command::Grip { width_mm } | Command::Open { width_mm } => ([width_mm, 0.0, 0.0], 1),
            Command::Status => ([0.0; 3], 0),
        };
        buf.into_iter().take(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotCommand {
    pub seq: u64,
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    Unreachable,
    JointLimit,
    YawLimit,
    WidthExceedsGripper,
    InvalidArgument,
    SequenceOutOfOrder,
    MalformedFrame,
    UnknownCommand,
    FrameTooLong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotReply {
    pub seq: u64,
    pub ok: bool,
    pub pose: Pose,
    pub grip_width_mm: f64,
    pub force_n: f64,
    pub grasped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorCode>,
}

#[derive(Serialize)]
struct WireCommand {
    seq: u64,
    cmd: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    width_mm: Option<f64>,
}

fn finish_frame(mut body: Vec<u8>) -> Result<Vec<u8>, ProtocolError> {
    body.push(b'\n');
    if body.len() > MAX_FRAME_BYTES {
        return Err(ProtocolError::FrameTooLong);
    }
    Ok(body)
}

pub fn encode_command(command: &RobotCommand) -> Result<Vec<u8>, ProtocolError> {
    if command.command.values().any(|v| !v.is_finite()) {
        return Err(ProtocolError::MalformedFrame("non-finite argument".into()));
    }
    let mut wire = WireCommand {
        seq: command.seq,
        cmd: command.command.name(),
        x: None,
        y: None,
        z: None,
        deg: None,
        width_mm: None,
    };
    match command.command {
        Command::Move { x, y, z } => {
            wire.x = Some(x);
            wire.y = Some(y);
            wire.z = Some(z);
        }
        Command::Yaw { deg } => wire.deg = Some(deg),
        Command::Grip { width_mm } | Command::Open { width_mm } => wire.width_mm = Some(width_mm),
        Command::Status => {}
    }
    let body = serde_json::to_vec(&wire).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    finish_frame(body)
}

/// Splits off the terminating newline and parses the JSON object.
fn frame_object(frame: &[u8]) -> Result<Map<String, Value>, ProtocolError> {
    if frame.len() > MAX_FRAME_BYTES {
        return Err(ProtocolError::FrameTooLong);
    }
    let body = match frame.split_last() {
        Some((b'\n', body)) => body,
        _ => return Err(ProtocolError::MalformedFrame("missing newline terminator".into())),
    };
    if body.contains(&b'\n') {
        return Err(ProtocolError::MalformedFrame("embedded newline".into()));
    }
    let text = core::str::from_utf8(body).map_err(|_| ProtocolError::MalformedFrame("invalid UTF-8".into()))?;
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ProtocolError::MalformedFrame("frame is not a JSON object".into())),
        Err(e) => Err(ProtocolError::MalformedFrame(e.to_string())),
    }
}

pub fn decode_command(frame: &[u8]) -> Result<RobotCommand, ProtocolError> {
    let map = frame_object(frame)?;
    let cmd = match map.get("cmd") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(ProtocolError::MalformedFrame("\"cmd\" is not a string".into())),
        None => return Err(ProtocolError::MalformedFrame("missing \"cmd\"".into())),
    };
    let fields: &[&str] = match cmd {
        "MOVE" => &["x", "y", "z"],
        "YAW" => &["deg"],
        "GRIP" | "OPEN" => &["width_mm"],
        "STATUS" => &[],
        other => return Err(ProtocolError::UnknownCommand(other.into())),
    };
    let seq = map
        .get("seq")
        .and_then(Value::as_u64)
        .ok_or_else(|| ProtocolError::MalformedFrame("missing or invalid \"seq\"".into()))?;
    if map.len() != fields.len() + 2 {
        return Err(ProtocolError::MalformedFrame("unexpected fields".into()));
    }
    let number = |key: &str| -> Result<f64, ProtocolError> {
        map.get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| ProtocolError::MalformedFrame(alloc::format!("missing or invalid {key:?}")))
    };
    let command = match cmd {
        "MOVE" => Command::Move {
            x: number("x")?,
            y: number("y")?,
            z: number("z")?,
        },
        "YAW" => Command::Yaw { deg: number("deg")? },
        "GRIP" => Command::Grip {
            width_mm: number("width_mm")?,
        },
        "OPEN" => Command::Open {
            width_mm: number("width_mm")?,
        },
        _ => Command::Status,
    };
    Ok(RobotCommand { seq, command })
}

/// Best-effort sequence id of a frame that failed to decode, for the reply.
pub fn salvage_seq(frame: &[u8]) -> u64 {
    frame_object(frame)
        .ok()
        .and_then(|m| m.get("seq").and_then(Value::as_u64))
        .unwrap_or(0)
}

pub fn encode_reply(reply: &RobotReply) -> Result<Vec<u8>, ProtocolError> {
    let finite = [
        reply.pose.x,
        reply.pose.y,
        reply.pose.z,
        reply.pose.yaw,
        reply.grip_width_mm,
        reply.force_n,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(ProtocolError::MalformedFrame("non-finite reply field".into()));
    }
    let body = serde_json::to_vec(reply).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    finish_frame(body)
}

pub fn decode_reply(frame: &[u8]) -> Result<RobotReply, ProtocolError> {
    let map = frame_object(frame)?;
    serde_json::from_value(Value::Object(map)).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))
}
