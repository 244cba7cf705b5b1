//! Synthetic data generation: arm kinematics, IMU synthesis, session
//! recordings, and dataset assembly.

pub mod arm;
pub mod dataset;
pub mod generate;
pub mod imu;
pub mod recording;

pub use arm::{forward_kinematics, JointAngles};
pub use dataset::{build_dataset, compute_features, default_fov_grid, sequences_for_fov, Dataset, DatasetError, RecordingFeatures, SequenceSample};
pub use generate::{generate_session, GenConfig};
pub use imu::{dead_reckon_exact, imu_from_trajectory, ImuNoise, ImuSynthError, GRAVITY};
pub use recording::{
    decode_recording, encode_recording, load_recording, save_recording, ArmModel, Recording,
    RecordingError, RecordingMeta, HEAD_RATE, IMU_RATE,
};
