//! Walks the tracking handoff state machine over a session and prints every
//! transition between headset tracking and model tracking.
//!
//! Run with: cargo run --release --example fov_handoff

use hoov::ekf::{ekf_run, EkfConfig};
use hoov::fov::{head_at_imu_times, oov_mask, FovConfig, PoseSource, Tracker};
use hoov::synth::{generate_session, ArmModel, GenConfig};

fn main() {
    let rec = generate_session(3, &ArmModel::default(), 12.0, &GenConfig::default());
    let fov = FovConfig::with_horizontal(110.0);

    let heads = head_at_imu_times(&rec).unwrap();
    let quats = ekf_run(&rec.imu, EkfConfig::default()).unwrap();
    let mask = oov_mask(&rec, &fov).unwrap();

    let mut tracker = Tracker::new();
    let mut last = PoseSource::Headset;
    println!("horizontal FOV {} deg (hysteresis {} deg):", fov.horizontal_fov_deg, fov.reentry_hysteresis_deg);
    for k in 0..rec.imu.len() {
        let tracked = (!mask[k]).then_some(&rec.wrist_gt[k]);
        let src = tracker
            .step(tracked, &heads[k], &rec.imu[k], &quats[k].to_rotation_matrix())
            .expect("prior available");
        if src != last {
            match src {
                PoseSource::Model => println!(
                    "  {:6.3} s  headset -> model   (prior of {} poses frozen)",
                    rec.imu[k].t,
                    tracker.prior().map(|p| p.len()).unwrap_or(0)
                ),
                PoseSource::Headset => println!(
                    "  {:6.3} s  model -> headset  (buffer cleared)",
                    rec.imu[k].t
                ),
            }
            last = src;
        }
    }
    let out_samples = mask.iter().filter(|m| **m).count();
    println!(
        "{:.1}% of the session out of view ({} of {} samples)",
        100.0 * out_samples as f64 / mask.len() as f64,
        out_samples,
        mask.len()
    );
}
