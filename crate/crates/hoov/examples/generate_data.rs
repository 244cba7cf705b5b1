//! Generates a few synthetic sessions and prints what is in them.
//!
//! Run with: cargo run --release --example generate_data -- [out_dir]

use hoov::fov::{segment_out_of_view, FovConfig};
use hoov::synth::{encode_recording, generate_session, save_recording, ArmModel, GenConfig};
use std::path::PathBuf;

fn main() {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let arm = ArmModel::default();
    let cfg = GenConfig::default();

    for seed in 0..3u64 {
        let rec = generate_session(seed, &arm, 10.0, &cfg);
        println!(
            "session {seed}: {} IMU samples at {} Hz, {} head poses at {} Hz, {} pinches, task {:?}",
            rec.imu.len(),
            rec.meta.imu_rate,
            rec.head_poses.len(),
            rec.meta.head_rate,
            rec.pinch_times.len(),
            rec.meta.task,
        );
        for fov in [140.0, 120.0, 90.0] {
            let seg = segment_out_of_view(&rec, &FovConfig::with_horizontal(fov)).unwrap();
            let total: usize = seg.segments.iter().map(|(a, b)| b - a).sum();
            println!(
                "  at {fov:>3} deg FOV: {} out-of-view excursions, {:.2} s total",
                seg.segments.len(),
                total as f64 / rec.meta.imu_rate
            );
        }
        println!("  file size: {} bytes", encode_recording(&rec).len());
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).expect("create output dir");
            let path = dir.join(format!("rec_{seed:08}.hoovrec"));
            save_recording(&rec, &path).expect("save recording");
            println!("  wrote {}", path.display());
        }
    }
}
