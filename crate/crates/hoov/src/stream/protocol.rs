//! Binary wire protocol for IMU/pose streaming. See docs/protocol.md.
//!
//! Frame layout: sync `AA 55`, message type byte, u16 LE payload length,
//! payload (little-endian fields), u16 LE CRC-16/CCITT-FALSE over
//! type + length + payload. The decoder resynchronizes on the sync pair
//! after corruption and counts what it had to skip.

use crate::geom::{Pose, Quat, Rot6D, Vec3};
use std::fmt;

pub const SYNC: [u8; 2] = [0xAA, 0x55];

pub const TYPE_IMU: u8 = 0x01;
pub const TYPE_HEAD_POSE: u8 = 0x02;
pub const TYPE_TRACKED_WRIST: u8 = 0x03;
pub const TYPE_POSE_ESTIMATE: u8 = 0x81;
pub const TYPE_PINCH_EVENT: u8 = 0x82;

#[derive(Debug, Clone, PartialEq)]
pub enum WireMsg {
    /// 0x01: t (f64) + accel xyz + gyro xyz (f32), 32-byte payload.
    Imu { t: f64, accel: [f32; 3], gyro: [f32; 3] },
    /// 0x02: t (f64) + position xyz + quaternion wxyz (f32), 36 bytes.
    HeadPose { t: f64, pos: [f32; 3], quat: [f32; 4] },
    /// 0x03: same payload as HeadPose, 36 bytes.
    TrackedWrist { t: f64, pos: [f32; 3], quat: [f32; 4] },
    /// 0x81: t (f64) + position xyz + 6D rotation (f32), 44 bytes.
    PoseEstimate { t: f64, pos: [f32; 3], rot6d: [f32; 6] },
    /// 0x82: t (f64) + score (f32), 12 bytes.
    PinchEvent { t: f64, score: f32 },
}

impl WireMsg {
    pub fn msg_type(&self) -> u8 {
        match self {
            WireMsg::Imu { .. } => TYPE_IMU,
            WireMsg::HeadPose { .. } => TYPE_HEAD_POSE,
            WireMsg::TrackedWrist { .. } => TYPE_TRACKED_WRIST,
            WireMsg::PoseEstimate { .. } => TYPE_POSE_ESTIMATE,
            WireMsg::PinchEvent { .. } => TYPE_PINCH_EVENT,
        }
    }

    pub fn timestamp(&self) -> f64 {
        match self {
            WireMsg::Imu { t, .. }
            | WireMsg::HeadPose { t, .. }
            | WireMsg::TrackedWrist { t, .. }
            | WireMsg::PoseEstimate { t, .. }
            | WireMsg::PinchEvent { t, .. } => *t,
        }
    }

    pub fn head_pose(t: f64, p: &Pose) -> WireMsg {
        WireMsg::HeadPose { t, pos: vec3_f32(p.position), quat: quat_f32(p.orientation) }
    }

    pub fn tracked_wrist(t: f64, p: &Pose) -> WireMsg {
        WireMsg::TrackedWrist { t, pos: vec3_f32(p.position), quat: quat_f32(p.orientation) }
    }
}

fn vec3_f32(v: Vec3) -> [f32; 3] {
    [v.x as f32, v.y as f32, v.z as f32]
}

fn quat_f32(q: Quat) -> [f32; 4] {
    [q.w as f32, q.x as f32, q.y as f32, q.z as f32]
}

pub fn pose_from_wire(pos: [f32; 3], quat: [f32; 4]) -> Pose {
    Pose::new(
        Vec3::new(pos[0] as f64, pos[1] as f64, pos[2] as f64),
        Quat::new(quat[0] as f64, quat[1] as f64, quat[2] as f64, quat[3] as f64),
    )
}

pub fn rot6d_from_wire(v: [f32; 6]) -> Rot6D {
    Rot6D { v: [v[0] as f64, v[1] as f64, v[2] as f64, v[3] as f64, v[4] as f64, v[5] as f64] }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolError {
    CrcMismatch { expected: u16, got: u16 },
    UnknownType(u8),
    BadLength { msg_type: u8, expected: usize, got: usize },
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::CrcMismatch { expected, got } => {
                write!(f, "crc mismatch: expected {expected:#06x}, got {got:#06x}")
            }
            ProtocolError::UnknownType(t) => write!(f, "unknown message type {t:#04x}"),
            ProtocolError::BadLength { msg_type, expected, got } => write!(
                f,
                "bad payload length for type {msg_type:#04x}: expected {expected}, got {got}"
            ),
        }
    }
}

impl std::error::Error for ProtocolError {}

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection or xorout.
pub fn crc16_ccitt(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in data {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
        }
    }
    crc
}

fn expected_len(msg_type: u8) -> Option<usize> {
    match msg_type {
        TYPE_IMU => Some(32),
        TYPE_HEAD_POSE | TYPE_TRACKED_WRIST => Some(36),
        TYPE_POSE_ESTIMATE => Some(44),
        TYPE_PINCH_EVENT => Some(12),
        _ => None,
    }
}

pub fn encode_frame(msg: &WireMsg) -> Vec<u8> {
    let mut payload = Vec::new();
    match msg {
        WireMsg::Imu { t, accel, gyro } => {
            payload.extend_from_slice(&t.to_le_bytes());
            for v in accel.iter().chain(gyro.iter()) {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        WireMsg::HeadPose { t, pos, quat } | WireMsg::TrackedWrist { t, pos, quat } => {
            payload.extend_from_slice(&t.to_le_bytes());
            for v in pos.iter().chain(quat.iter()) {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        WireMsg::PoseEstimate { t, pos, rot6d } => {
            payload.extend_from_slice(&t.to_le_bytes());
            for v in pos.iter().chain(rot6d.iter()) {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        WireMsg::PinchEvent { t, score } => {
            payload.extend_from_slice(&t.to_le_bytes());
            payload.extend_from_slice(&score.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(payload.len() + 7);
    out.extend_from_slice(&SYNC);
    out.push(msg.msg_type());
    out.extend_from_slice(&(payload.len() as u16).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc16_ccitt(&out[2..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_f32(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn parse_payload(msg_type: u8, p: &[u8]) -> Result<WireMsg, ProtocolError> {
    let expected = expected_len(msg_type).ok_or(ProtocolError::UnknownType(msg_type))?;
    if p.len() != expected {
        return Err(ProtocolError::BadLength { msg_type, expected, got: p.len() });
    }
    let t = f64::from_le_bytes(p[0..8].try_into().unwrap());
    Ok(match msg_type {
        TYPE_IMU => WireMsg::Imu {
            t,
            accel: [read_f32(p, 8), read_f32(p, 12), read_f32(p, 16)],
            gyro: [read_f32(p, 20), read_f32(p, 24), read_f32(p, 28)],
        },
        TYPE_HEAD_POSE | TYPE_TRACKED_WRIST => {
            let pos = [read_f32(p, 8), read_f32(p, 12), read_f32(p, 16)];
            let quat = [read_f32(p, 20), read_f32(p, 24), read_f32(p, 28), read_f32(p, 32)];
            if msg_type == TYPE_HEAD_POSE {
                WireMsg::HeadPose { t, pos, quat }
            } else {
                WireMsg::TrackedWrist { t, pos, quat }
            }
        }
        TYPE_POSE_ESTIMATE => WireMsg::PoseEstimate {
            t,
            pos: [read_f32(p, 8), read_f32(p, 12), read_f32(p, 16)],
            rot6d: [
                read_f32(p, 20),
                read_f32(p, 24),
                read_f32(p, 28),
                read_f32(p, 32),
                read_f32(p, 36),
                read_f32(p, 40),
            ],
        },
        TYPE_PINCH_EVENT => WireMsg::PinchEvent { t, score: read_f32(p, 8) },
        _ => unreachable!(),
    })
}

/// Outcome of one decode attempt at the front of a buffer.
#[derive(Debug, PartialEq)]
pub enum DecodeStep {
    /// Not enough bytes yet; keep the buffer.
    NeedMore,
    /// A valid frame, consuming `consumed` bytes.
    Frame { msg: WireMsg, consumed: usize },
    /// Corrupt or foreign bytes; skip `consumed` bytes and try again.
    Skip { consumed: usize, error: Option<ProtocolError> },
}

/// Attempts to decode one frame from the start of `buf`.
///
/// Never panics on arbitrary input; on corruption it reports how many
/// bytes to discard so the caller can resynchronize.
pub fn decode_frame(buf: &[u8]) -> DecodeStep {
    if buf.len() < 2 {
        return DecodeStep::NeedMore;
    }
    if buf[0] != SYNC[0] || buf[1] != SYNC[1] {
        // scan forward for the next plausible sync pair
        let skip = buf
            .windows(2)
            .position(|w| w == SYNC)
            .unwrap_or(buf.len().saturating_sub(1));
        return DecodeStep::Skip { consumed: skip.max(1), error: None };
    }
    if buf.len() < 5 {
        return DecodeStep::NeedMore;
    }
    let msg_type = buf[2];
    let len = u16::from_le_bytes([buf[3], buf[4]]) as usize;
    match expected_len(msg_type) {
        Some(expected) if expected == len => {}
        Some(expected) => {
            return DecodeStep::Skip {
                consumed: 2,
                error: Some(ProtocolError::BadLength { msg_type, expected, got: len }),
            };
        }
        None => {
            return DecodeStep::Skip { consumed: 2, error: Some(ProtocolError::UnknownType(msg_type)) };
        }
    }
    let total = 2 + 3 + len + 2;
    if buf.len() < total {
        return DecodeStep::NeedMore;
    }
    let crc_got = u16::from_le_bytes([buf[total - 2], buf[total - 1]]);
    let crc_expect = crc16_ccitt(&buf[2..total - 2]);
    if crc_got != crc_expect {
        return DecodeStep::Skip {
            consumed: 2,
            error: Some(ProtocolError::CrcMismatch { expected: crc_expect, got: crc_got }),
        };
    }
    match parse_payload(msg_type, &buf[5..5 + len]) {
        Ok(msg) => DecodeStep::Frame { msg, consumed: total },
        Err(e) => DecodeStep::Skip { consumed: 2, error: Some(e) },
    }
}

/// Streaming decoder with resynchronization and drop accounting.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    /// Bytes discarded while hunting for sync.
    pub skipped_bytes: u64,
    /// Frames dropped for CRC or structural errors.
    pub dropped_frames: u64,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next valid frame, if the buffer holds one.
    pub fn next_frame(&mut self) -> Option<WireMsg> {
        loop {
            match decode_frame(&self.buf) {
                DecodeStep::NeedMore => return None,
                DecodeStep::Frame { msg, consumed } => {
                    self.buf.drain(..consumed);
                    return Some(msg);
                }
                DecodeStep::Skip { consumed, error } => {
                    self.buf.drain(..consumed.min(self.buf.len()));
                    self.skipped_bytes += consumed as u64;
                    if error.is_some() {
                        self.dropped_frames += 1;
                    }
                }
            }
        }
    }
}
