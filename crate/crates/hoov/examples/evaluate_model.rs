//! Trains briefly on a small synthetic dataset, then produces the full
//! evaluation report: tracking table, error-over-time curve, selection
//! success, and the dead-reckoning comparison. A downsized version of the
//! `train` + `eval` CLI workflow in one process.
//!
//! Run with: cargo run --release --example evaluate_model

use hoov::eval;
use hoov::model::{HoovNet, ModelConfig};
use hoov::synth::dataset::build_dataset;
use hoov::synth::{generate_session, ArmModel, GenConfig};
use hoov::train::{init_params, train, TrainConfig};

fn main() {
    let arm = ArmModel::default();
    let gen = GenConfig::default();
    eprintln!("generating 40 sessions...");
    let recordings: Vec<_> = (0..40).map(|s| generate_session(s, &arm, 10.0, &gen)).collect();
    let dataset =
        build_dataset(&recordings, &[60.0, 90.0, 120.0], (0.7, 0.1, 0.2), 5, 6400).unwrap();
    eprintln!(
        "dataset: {} train / {} val / {} test sequences",
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len()
    );

    let dir = std::env::temp_dir().join("hoov-example-eval");
    let mut net = HoovNet::new(ModelConfig::compact());
    init_params(&mut net, 0);
    let cfg = TrainConfig {
        lr: 3e-4,
        max_iters: 400,
        val_every: 100,
        checkpoint_dir: dir.clone(),
        val_max_sequences: 32,
        ..TrainConfig::default()
    };
    eprintln!("training {} iterations (a few minutes)...", cfg.max_iters);
    let outcome = train(&mut net, &dataset, &cfg).expect("training");
    eprintln!("best validation MAE {:.1} cm", outcome.best_val_mae_cm);

    let segments = eval::evaluate_sequences(&net, &dataset.test);
    let report = eval::summarize(&segments, 0.5).expect("report");
    println!(
        "test split: mean pos {:.1} cm | median {:.1} | std {:.1} | mean rot {:.1} deg",
        report.mean_pos_cm, report.median_pos_cm, report.std_pos_cm, report.mean_rot_deg
    );
    println!("error over time outside the FOV:");
    for b in report.curve.iter().take(8) {
        println!(
            "  {:4.1}-{:4.1} s: mean {:6.1} cm   5th-95th pct {:6.1}-{:6.1} cm   ({} samples)",
            b.t_lo, b.t_hi, b.mean_cm, b.p5_cm, b.p95_cm, b.count
        );
    }

    let dr = eval::dead_reckoning_mae(&dataset.test) * 100.0;
    let model = eval::model_mae(&net, &dataset.test) * 100.0;
    println!("model MAE {model:.1} cm vs dead reckoning {dr:.1} cm over full segments");

    eval::write_report_csv(
        &[("test".into(), report.clone())],
        &dir.join("report.csv"),
    )
    .unwrap();
    eval::write_curve_csv(&report, &dir.join("error_vs_time.csv")).unwrap();
    println!("report files in {}", dir.display());
}
