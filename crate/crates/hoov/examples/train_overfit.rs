//! Overfits the estimator on a handful of synthetic sequences.
//!
//! A quick sanity check that the whole training path works: if the network
//! cannot memorize eight sequences, something is broken. Prints the train
//! position MAE every 250 steps.
//!
//! Run with: cargo run --release --example train_overfit

use hoov::model::{HoovNet, ModelConfig};
use hoov::synth::dataset::{build_dataset, SequenceSample};
use hoov::synth::{generate_session, ArmModel, GenConfig};
use hoov::train::{default_workers, evaluate_split, init_params, train_step, Adam};

fn main() {
    let arm = ArmModel::default();
    let gen = GenConfig::default();
    let recordings: Vec<_> = (0..4).map(|s| generate_session(s, &arm, 6.0, &gen)).collect();
    let dataset = build_dataset(&recordings, &[80.0, 110.0], (1.0, 0.0, 0.0), 3, 6400)
        .expect("dataset");

    // eight short sequences to memorize
    let mut seqs: Vec<SequenceSample> = dataset.train.clone();
    for s in seqs.iter_mut() {
        s.len = s.len.min(64);
    }
    seqs.truncate(8);
    assert!(seqs.len() == 8, "fixture needs 8 sequences, got {}", seqs.len());

    let mut net = HoovNet::new(ModelConfig::tiny());
    init_params(&mut net, 1);
    let mut adam = Adam::new(1.5e-3, 0.9, 0.999, 1e-8, &net);
    let refs: Vec<&SequenceSample> = seqs.iter().collect();

    let start = std::time::Instant::now();
    for iter in 1..=5000u64 {
        let loss = train_step(&mut net, &refs, &mut adam, default_workers()).expect("step");
        if iter % 250 == 0 {
            let (mae_cm, mad_deg) = evaluate_split(&net, &seqs, seqs.len());
            println!(
                "iter {iter:5}  loss {loss:10.4}  train MAE {mae_cm:7.3} cm  MAD {mad_deg:6.2} deg  ({:.1} s)",
                start.elapsed().as_secs_f64()
            );
            if mae_cm < 1.0 {
                println!("reached sub-centimeter memorization at iteration {iter}");
                return;
            }
        }
    }
    let (mae_cm, _) = evaluate_split(&net, &seqs, seqs.len());
    println!("final train MAE {mae_cm:.3} cm");
}
