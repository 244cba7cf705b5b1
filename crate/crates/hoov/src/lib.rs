//! Out-of-view wrist tracking from a wrist-worn IMU.
//!
//! A VR headset tracks the user's hand only while it is inside the camera
//! field of view. This crate estimates the wrist pose while the hand is
//! *outside* it, from the 6-axis IMU on the wrist plus the headset's own
//! head poses: an orientation EKF and the last five tracked poses feed a
//! causal Transformer that predicts world-frame wrist position and
//! orientation, with pinch detection from accelerometer transients and a
//! state machine that hands tracking off between the headset and the
//! model. Everything runs on synthetic data generated by an articulated
//! arm model, end to end: data generation, training, evaluation, and a
//! real-time streaming service.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example generate_data      # synthesize sessions
//! cargo run --release --example orientation_filter # EKF drift behavior
//! cargo run --release --example detect_pinches     # pinch events
//! cargo run --release --example fov_handoff        # tracking state machine
//! cargo run --release --example pose_network       # model sizes + forward pass
//! cargo run --release --example train_overfit      # training sanity check
//! cargo run --release --example evaluate_model     # train briefly + full report
//! cargo run --release --example stream_roundtrip   # TCP service equivalence
//! ```
//!
//! The `hoov` binary wraps the same library calls as subcommands
//! (`synth`, `dataset`, `train`, `eval`, `serve`, `replay`, `pinch`); see
//! the README.
//!
//! ## Module map
//!
//! - [`geom`]: quaternions, rotation matrices, the 6D rotation encoding,
//!   cubic resampling
//! - [`ekf`]: error-state orientation filter over raw IMU signals
//! - [`pinch`]: rate-of-change pinch detector
//! - [`fov`]: field-of-view gating, out-of-view segmentation, tracking
//!   handoff state machine
//! - [`synth`]: arm-model session generator, recording files, dataset
//!   assembly
//! - [`autodiff`]: dense-tensor reverse-mode differentiation
//! - [`model`]: the estimation network and its checkpoints
//! - [`train`]: Kaiming init, Adam, batching, the training loop
//! - [`eval`]: tracking metrics, report tables, target-selection
//!   simulation, dead-reckoning comparator
//! - [`stream`]: wire protocol, session pipeline, TCP service and replay
//!
//! Conventions shared across the crate: world frame right-handed z-up,
//! quaternions scalar-first, angles in radians internally (degrees at
//! API boundaries that say so), accelerometer values are specific force.

pub mod autodiff;
pub mod ekf;
pub mod eval;
pub mod fov;
pub mod frames;
pub mod geom;
pub mod model;
pub mod pinch;
pub mod rng;
pub mod stream;
pub mod synth;
pub mod train;
