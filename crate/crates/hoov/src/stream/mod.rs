//! Wire protocol and real-time streaming inference.

pub mod pipeline;
pub mod protocol;
pub mod service;

pub use pipeline::{infer_recording, recording_to_frames, PipelineConfig, SessionPipeline};
pub use protocol::{
    crc16_ccitt, decode_frame, encode_frame, DecodeStep, FrameDecoder, ProtocolError, WireMsg,
};
pub use service::{replay_recording, serve, spawn_local_service};
