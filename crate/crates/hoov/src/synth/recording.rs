//! Time-aligned session container and its on-disk format.
//!
//! A `Recording` holds everything one session produced: IMU samples at the
//! IMU rate, head poses at the headset rate, ground-truth wrist poses
//! aligned with the IMU stream, and pinch event times. Timestamps live on
//! implicit rate grids (`k / rate`), so the file stores only signal values.
//!
//! File layout (see docs/format.md):
//! magic `HOOVREC1`, u32 LE header length, JSON header, then little-endian
//! float32 column blocks in the order listed in the header.

use crate::ekf::ImuSample;
use crate::geom::{Pose, Quat, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"HOOVREC1";
pub const SCHEMA_VERSION: u32 = 1;

/// Nominal IMU sample rate, Hz.
pub const IMU_RATE: f64 = 427.0;
/// Nominal headset hand/head pose rate, Hz.
pub const HEAD_RATE: f64 = 70.0;

#[derive(Debug)]
pub enum RecordingError {
    Io(std::io::Error),
    BadMagic,
    BadHeader(String),
    Truncated,
}

impl fmt::Display for RecordingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordingError::Io(e) => write!(f, "io error: {e}"),
            RecordingError::BadMagic => write!(f, "not a recording file (bad magic)"),
            RecordingError::BadHeader(m) => write!(f, "bad recording header: {m}"),
            RecordingError::Truncated => write!(f, "recording file truncated"),
        }
    }
}

impl std::error::Error for RecordingError {}

impl From<std::io::Error> for RecordingError {
    fn from(e: std::io::Error) -> Self {
        RecordingError::Io(e)
    }
}

/// Generator parameters recorded with every session.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArmModel {
    /// Shoulder position relative to the head, meters.
    pub shoulder_offset: Vec3,
    /// Upper arm length, meters.
    pub upper_len: f64,
    /// Forearm length, meters.
    pub fore_len: f64,
    /// Shoulder azimuth range, radians (0 = forward, negative = to the right).
    pub shoulder_azimuth: (f64, f64),
    /// Shoulder elevation range, radians.
    pub shoulder_elevation: (f64, f64),
    /// Upper-arm twist range, radians.
    pub shoulder_twist: (f64, f64),
    /// Elbow flexion range, radians (0 = straight).
    pub elbow_flexion: (f64, f64),
    /// Forearm pronation range, radians.
    pub pronation: (f64, f64),
}

impl Default for ArmModel {
    fn default() -> Self {
        Self {
            // right shoulder of a standing user, head at the origin of its frame
            shoulder_offset: Vec3::new(0.0, -0.19, -0.25),
            upper_len: 0.31,
            fore_len: 0.41,
            shoulder_azimuth: (-2.0, 0.6),
            shoulder_elevation: (-1.1, 0.9),
            shoulder_twist: (-0.8, 0.8),
            elbow_flexion: (0.0, 2.4),
            pronation: (-1.2, 1.2),
        }
    }
}

impl ArmModel {
    pub fn reach(&self) -> f64 {
        self.upper_len + self.fore_len
    }
}

/// Session metadata stored in the file header.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecordingMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub imu_rate: f64,
    pub head_rate: f64,
    pub duration_s: f64,
    /// Task label used for per-task report columns.
    pub task: String,
    pub arm: ArmModel,
}

/// One time-aligned session.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub meta: RecordingMeta,
    /// IMU samples on the `k / imu_rate` grid.
    pub imu: Vec<ImuSample>,
    /// Head poses on the `k / head_rate` grid.
    pub head_poses: Vec<Pose>,
    /// Ground-truth wrist poses aligned with `imu` (same grid, same length).
    pub wrist_gt: Vec<Pose>,
    /// Pinch event times, seconds.
    pub pinch_times: Vec<f64>,
}

impl Recording {
    pub fn imu_time(&self, k: usize) -> f64 {
        k as f64 / self.meta.imu_rate
    }

    pub fn head_time(&self, k: usize) -> f64 {
        k as f64 / self.meta.head_rate
    }

    pub fn head_times(&self) -> Vec<f64> {
        (0..self.head_poses.len()).map(|k| self.head_time(k)).collect()
    }

    pub fn imu_times(&self) -> Vec<f64> {
        (0..self.imu.len()).map(|k| self.imu_time(k)).collect()
    }

    pub fn validate(&self) -> Result<(), RecordingError> {
        if self.imu.len() != self.wrist_gt.len() {
            return Err(RecordingError::BadHeader(format!(
                "imu length {} != wrist length {}",
                self.imu.len(),
                self.wrist_gt.len()
            )));
        }
        if self.head_poses.len() < 4 {
            return Err(RecordingError::BadHeader("fewer than 4 head poses".into()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    meta: RecordingMeta,
    imu_len: usize,
    head_len: usize,
    pinch_times: Vec<f64>,
    blocks: Vec<String>,
}

fn write_f32_block(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct BlockReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> BlockReader<'a> {
    fn take(&mut self, n: usize) -> Result<Vec<f64>, RecordingError> {
        let bytes = n * 4;
        if self.pos + bytes > self.buf.len() {
            return Err(RecordingError::Truncated);
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let off = self.pos + 4 * i;
            let raw: [u8; 4] = self.buf[off..off + 4].try_into().unwrap();
            out.push(f32::from_le_bytes(raw) as f64);
        }
        self.pos += bytes;
        Ok(out)
    }
}

pub fn encode_recording(rec: &Recording) -> Vec<u8> {
    let header = Header {
        schema_version: SCHEMA_VERSION,
        meta: rec.meta.clone(),
        imu_len: rec.imu.len(),
        head_len: rec.head_poses.len(),
        pinch_times: rec.pinch_times.clone(),
        blocks: ["accel", "gyro", "head_pos", "head_quat", "wrist_pos", "wrist_quat"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serialization");

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    write_f32_block(&mut out, rec.imu.iter().flat_map(|s| s.accel.to_array()));
    write_f32_block(&mut out, rec.imu.iter().flat_map(|s| s.gyro.to_array()));
    write_f32_block(&mut out, rec.head_poses.iter().flat_map(|p| p.position.to_array()));
    write_f32_block(
        &mut out,
        rec.head_poses
            .iter()
            .flat_map(|p| [p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z]),
    );
    write_f32_block(&mut out, rec.wrist_gt.iter().flat_map(|p| p.position.to_array()));
    write_f32_block(
        &mut out,
        rec.wrist_gt
            .iter()
            .flat_map(|p| [p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z]),
    );
    out
}

pub fn decode_recording(bytes: &[u8]) -> Result<Recording, RecordingError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..8] != MAGIC {
        return Err(RecordingError::BadMagic);
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(RecordingError::Truncated);
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| RecordingError::BadHeader(e.to_string()))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(RecordingError::BadHeader(format!(
            "unsupported schema version {}",
            header.schema_version
        )));
    }

    let mut reader = BlockReader { buf: bytes, pos: 12 + header_len };
    let accel = reader.take(header.imu_len * 3)?;
    let gyro = reader.take(header.imu_len * 3)?;
    let head_pos = reader.take(header.head_len * 3)?;
    let head_quat = reader.take(header.head_len * 4)?;
    let wrist_pos = reader.take(header.imu_len * 3)?;
    let wrist_quat = reader.take(header.imu_len * 4)?;

    let imu_rate = header.meta.imu_rate;
    let imu = (0..header.imu_len)
        .map(|k| ImuSample {
            t: k as f64 / imu_rate,
            accel: Vec3::new(accel[3 * k], accel[3 * k + 1], accel[3 * k + 2]),
            gyro: Vec3::new(gyro[3 * k], gyro[3 * k + 1], gyro[3 * k + 2]),
        })
        .collect();
    let head_poses = (0..header.head_len)
        .map(|k| {
            Pose::new(
                Vec3::new(head_pos[3 * k], head_pos[3 * k + 1], head_pos[3 * k + 2]),
                Quat::new(
                    head_quat[4 * k],
                    head_quat[4 * k + 1],
                    head_quat[4 * k + 2],
                    head_quat[4 * k + 3],
                ),
            )
        })
        .collect();
    let wrist_gt = (0..header.imu_len)
        .map(|k| {
            Pose::new(
                Vec3::new(wrist_pos[3 * k], wrist_pos[3 * k + 1], wrist_pos[3 * k + 2]),
                Quat::new(
                    wrist_quat[4 * k],
                    wrist_quat[4 * k + 1],
                    wrist_quat[4 * k + 2],
                    wrist_quat[4 * k + 3],
                ),
            )
        })
        .collect();

    let rec = Recording {
        meta: header.meta,
        imu,
        head_poses,
        wrist_gt,
        pinch_times: header.pinch_times,
    };
    rec.validate()?;
    Ok(rec)
}

pub fn save_recording(rec: &Recording, path: &Path) -> Result<(), RecordingError> {
    let bytes = encode_recording(rec);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_recording(path: &Path) -> Result<Recording, RecordingError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_recording(&bytes)
}
