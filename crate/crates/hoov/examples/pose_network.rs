//! Builds the estimator at its three configurations, prints parameter
//! counts, and runs one forward pass to show the output contract.
//!
//! Run with: cargo run --release --example pose_network

use hoov::frames::{InputFrame, PriorFrame, INPUT_WIDTH, PRIOR_LEN, PRIOR_WIDTH};
use hoov::model::{refine_pinch_position, HoovNet, ModelConfig};
use hoov::rng::Rng;
use hoov::train::init_params;

fn main() {
    for (name, cfg) in [
        ("tiny", ModelConfig::tiny()),
        ("compact", ModelConfig::compact()),
        ("default", ModelConfig::default()),
    ] {
        let net = HoovNet::new(cfg);
        println!("{name:>8}: {:>9} parameters (embed {})", net.param_count(), net.cfg.embed_dim);
    }
    println!("published reference network: 4,408,199 parameters");
    println!();

    let mut net = HoovNet::new(ModelConfig::compact());
    init_params(&mut net, 0);
    let mut rng = Rng::new(1);
    let tau = 427; // one second of IMU input
    let x: Vec<InputFrame> = (0..tau)
        .map(|_| std::array::from_fn::<f64, INPUT_WIDTH, _>(|_| rng.normal()))
        .collect();
    let s: Vec<PriorFrame> = (0..PRIOR_LEN)
        .map(|_| std::array::from_fn::<f64, PRIOR_WIDTH, _>(|_| rng.normal()))
        .collect();
    let times: Vec<f64> = (0..tau / 8).map(|k| (8 * (k + 1) - 1) as f64 / 427.0).collect();

    let start = std::time::Instant::now();
    let est = net.forward(&x, &s, &times).expect("forward");
    let elapsed = start.elapsed();
    println!(
        "forward over {tau} input rows -> {} output steps in {:.1} ms",
        est.len(),
        elapsed.as_secs_f64() * 1e3
    );
    let last = est.last().unwrap();
    println!(
        "newest estimate at t={:.3}: position ({:+.3}, {:+.3}, {:+.3})",
        last.t, last.position.x, last.position.y, last.position.z
    );
    let rot = last.rotation().expect("valid 6D output");
    let pinch = refine_pinch_position(last.position, &rot);
    println!(
        "pinch-refined position:     ({:+.3}, {:+.3}, {:+.3})  (15 cm along the wrist frame)",
        pinch.x, pinch.y, pinch.z
    );
}
