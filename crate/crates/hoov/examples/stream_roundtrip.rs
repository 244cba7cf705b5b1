//! Spawns the streaming service on a local socket, replays a session into
//! it, and verifies the responses match offline batch inference frame for
//! frame.
//!
//! Run with: cargo run --release --example stream_roundtrip

use hoov::fov::FovConfig;
use hoov::model::{HoovNet, ModelConfig};
use hoov::stream::{infer_recording, replay_recording, spawn_local_service, PipelineConfig, WireMsg};
use hoov::synth::{generate_session, ArmModel, GenConfig};
use hoov::train::init_params;
use std::sync::Arc;

fn main() {
    let mut net = HoovNet::new(ModelConfig::compact());
    init_params(&mut net, 11);
    let net = Arc::new(net);
    let rec = generate_session(99, &ArmModel::default(), 8.0, &GenConfig::default());
    let fov = FovConfig::with_horizontal(110.0);
    let cfg = PipelineConfig::default();

    let offline = infer_recording(&net, &rec, &fov, &cfg);

    let (addr, handle) = spawn_local_service(Arc::clone(&net), cfg, 1).expect("bind");
    println!("service on {addr}");
    let start = std::time::Instant::now();
    let online = replay_recording(addr, &rec, &fov).expect("replay");
    handle.join().unwrap().expect("service");

    let count = |msgs: &[WireMsg], what: fn(&WireMsg) -> bool| msgs.iter().filter(|m| what(m)).count();
    println!(
        "replayed {:.1} s of session in {:.2} s: {} tracked echoes, {} pose estimates, {} pinch events",
        rec.meta.duration_s,
        start.elapsed().as_secs_f64(),
        count(&online, |m| matches!(m, WireMsg::TrackedWrist { .. })),
        count(&online, |m| matches!(m, WireMsg::PoseEstimate { .. })),
        count(&online, |m| matches!(m, WireMsg::PinchEvent { .. })),
    );

    assert_eq!(offline.len(), online.len());
    for (a, b) in offline.iter().zip(online.iter()) {
        assert_eq!(a, b);
    }
    println!("online and offline outputs are bit-identical ({} frames)", online.len());
}
