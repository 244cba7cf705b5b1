//! Per-step network input rows.
//!
//! The estimator consumes two streams: `InputFrame` rows assembled at the
//! IMU rate while the hand is out of view, and `PriorFrame` rows holding
//! the last headset-tracked poses from just before the hand left the
//! field of view.

use crate::ekf::ImuSample;
use crate::geom::{rot_to_6d, Pose, RotMat};

/// Width of one input row: accel(3) gyro(3) head_pos(3) head_rot6d(6) ekf_rot6d(6).
pub const INPUT_WIDTH: usize = 21;
/// Width of one prior row: wrist_pos(3) wrist_rot6d(6) head_pos(3) head_rot6d(6).
pub const PRIOR_WIDTH: usize = 18;
/// Number of prior rows fed to the estimator.
pub const PRIOR_LEN: usize = 5;

pub type InputFrame = [f64; INPUT_WIDTH];
pub type PriorFrame = [f64; PRIOR_WIDTH];

/// Assembles one input row from raw signals at a single IMU timestamp.
pub fn input_row(imu: &ImuSample, head: &Pose, ekf_rot: &RotMat) -> InputFrame {
    let mut row = [0.0; INPUT_WIDTH];
    row[0] = imu.accel.x;
    row[1] = imu.accel.y;
    row[2] = imu.accel.z;
    row[3] = imu.gyro.x;
    row[4] = imu.gyro.y;
    row[5] = imu.gyro.z;
    row[6] = head.position.x;
    row[7] = head.position.y;
    row[8] = head.position.z;
    let h6 = rot_to_6d(&head.orientation.to_rotation_matrix());
    row[9..15].copy_from_slice(&h6.v);
    let k6 = rot_to_6d(ekf_rot);
    row[15..21].copy_from_slice(&k6.v);
    row
}

/// Assembles one prior row from a tracked wrist pose and the head pose
/// observed together with it.
pub fn prior_row(wrist: &Pose, head: &Pose) -> PriorFrame {
    let mut row = [0.0; PRIOR_WIDTH];
    row[0] = wrist.position.x;
    row[1] = wrist.position.y;
    row[2] = wrist.position.z;
    let w6 = rot_to_6d(&wrist.orientation.to_rotation_matrix());
    row[3..9].copy_from_slice(&w6.v);
    row[9] = head.position.x;
    row[10] = head.position.y;
    row[11] = head.position.z;
    let h6 = rot_to_6d(&head.orientation.to_rotation_matrix());
    row[12..18].copy_from_slice(&h6.v);
    row
}
