//! Pinch detection on a synthetic session: scripted pinch transients in,
//! detected events out.
//!
//! Run with: cargo run --release --example detect_pinches

use hoov::pinch::{detect_pinches, PinchDetector};
use hoov::synth::{generate_session, ArmModel, GenConfig};

fn main() {
    let cfg = GenConfig { pinch_count: (3, 3), ..GenConfig::default() };
    let rec = generate_session(7, &ArmModel::default(), 15.0, &cfg);

    println!("scripted pinches at: {:?}", rec.pinch_times);
    let events = detect_pinches(&rec.imu, PinchDetector::default());
    println!("detected {} events:", events.len());
    for e in &events {
        let nearest = rec
            .pinch_times
            .iter()
            .map(|t| (e.t - t).abs())
            .fold(f64::INFINITY, f64::min);
        println!("  t = {:7.3} s, score {:6.2} m/s^2, {:.1} ms from script", e.t, e.score, nearest * 1e3);
    }
}
