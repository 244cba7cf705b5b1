use super::*;
use crate::model::layers::ParamStore;
use crate::model::ModelConfig;
use crate::synth::dataset::build_dataset;
use crate::synth::generate::{generate_session, GenConfig};
use crate::synth::recording::ArmModel;

#[test]
fn init_is_deterministic_per_seed() {
    let mut a = HoovNet::new(ModelConfig::tiny());
    let mut b = HoovNet::new(ModelConfig::tiny());
    init_params(&mut a, 5);
    init_params(&mut b, 5);
    for (x, y) in a.store().defs().iter().zip(b.store().defs()) {
        assert_eq!(x.values, y.values);
    }
    let mut c = HoovNet::new(ModelConfig::tiny());
    init_params(&mut c, 6);
    assert_ne!(
        a.store().defs()[0].values,
        c.store().defs()[0].values
    );
}

#[test]
fn init_variance_matches_kaiming() {
    let mut net = HoovNet::new(ModelConfig::default());
    init_params(&mut net, 1);
    // a 256x256 weight: sample variance should be near 2 / fan_in
    let def = net
        .store()
        .defs()
        .iter()
        .find(|d| d.name == "enc0.attn.wq.w")
        .unwrap();
    assert_eq!(def.shape, vec![256, 256]);
    let n = def.values.len() as f64;
    let mean: f64 = def.values.iter().sum::<f64>() / n;
    let var: f64 = def.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let expect = 2.0 / 256.0;
    assert!(
        (var - expect).abs() / expect < 0.2,
        "variance {var} vs expected {expect}"
    );
}

#[test]
fn init_zeroes_biases_and_units_gains() {
    let mut net = HoovNet::new(ModelConfig::tiny());
    init_params(&mut net, 2);
    for def in net.store().defs() {
        if def.name.ends_with(".gamma") {
            assert!(def.values.iter().all(|v| *v == 1.0), "{}", def.name);
        } else if def.shape.len() == 1 {
            assert!(def.values.iter().all(|v| *v == 0.0), "{}", def.name);
        }
    }
}

fn tiny_dataset(sessions: u64, duration: f64) -> crate::synth::dataset::Dataset {
    let arm = ArmModel::default();
    let cfg = GenConfig::default();
    let recs: Vec<_> = (0..sessions).map(|s| generate_session(s, &arm, duration, &cfg)).collect();
    build_dataset(&recs, &[70.0, 90.0], (0.6, 0.2, 0.2), 11, 6400).unwrap()
}

#[test]
fn batches_never_mix_lengths_and_cover_everything() {
    let ds = tiny_dataset(6, 6.0);
    let batches = make_batches(&ds.train, 4, 3);
    let mut seen = vec![0usize; ds.train.len()];
    for batch in &batches {
        let len0 = ds.train[batch[0]].len;
        for &i in batch {
            assert_eq!(ds.train[i].len, len0, "mixed lengths in a batch");
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1), "each sequence exactly once");
    // same seed, same order
    let again = make_batches(&ds.train, 4, 3);
    assert_eq!(batches, again);
    let different = make_batches(&ds.train, 4, 4);
    assert_ne!(batches, different);
}

#[test]
fn adam_matches_reference_recurrence() {
    let mut store = ParamStore::new();
    let id = store.register("x", vec![1]);
    store.set_values(id, vec![0.7]);
    let mut adam = Adam::from_lens(0.05, 0.9, 0.999, 1e-8, &[1]);

    let grads = [0.3, -0.2, 0.9, 0.4, -0.6, 0.05, 1.3, -0.8];
    let expect = adam_reference_scalar(&grads, 0.05, 0.9, 0.999, 1e-8, 0.7);
    for (k, &g) in grads.iter().enumerate() {
        adam.step(&mut store, &[vec![g]]);
        let x = store.values(id)[0];
        assert!(
            (x - expect[k]).abs() < 1e-12,
            "step {k}: {x} vs {}",
            expect[k]
        );
    }
}

#[test]
fn adam_converges_on_quadratic_toy() {
    // minimize (x - a)^2; gradient 2(x - a); closed-form minimizer is a
    let a = 0.3;
    let mut store = ParamStore::new();
    let id = store.register("x", vec![1]);
    let mut adam = Adam::from_lens(0.01, 0.9, 0.999, 1e-8, &[1]);
    for _ in 0..500 {
        let x = store.values(id)[0];
        let g = 2.0 * (x - a);
        adam.step(&mut store, &[vec![g]]);
    }
    let x = store.values(id)[0];
    assert!((x - a).abs() < 1e-3, "x = {x}");
}

#[test]
fn zero_gradients_leave_parameters_unchanged() {
    let mut store = ParamStore::new();
    let id = store.register("w", vec![4]);
    store.set_values(id, vec![0.1, -0.2, 0.3, -0.4]);
    let before = store.values(id).to_vec();
    let mut adam = Adam::from_lens(0.01, 0.9, 0.999, 1e-8, &[4]);
    adam.step(&mut store, &[vec![0.0; 4]]);
    assert_eq!(store.values(id), &before[..]);
}

#[test]
fn batch_gradients_are_worker_count_invariant() {
    let ds = tiny_dataset(4, 5.0);
    let mut net = HoovNet::new(ModelConfig::tiny());
    init_params(&mut net, 7);
    let batch: Vec<&crate::synth::dataset::SequenceSample> =
        ds.train.iter().take(4).collect();
    let (l1, g1) = batch_gradients(&net, &batch, 1).unwrap();
    let (l4, g4) = batch_gradients(&net, &batch, 4).unwrap();
    assert_eq!(l1, l4);
    assert_eq!(g1, g4);
}

#[test]
fn overfit_smoke_loss_trend_is_downward() {
    // 8 short sequences, 1000 steps; consecutive 200-step window means of
    // the training loss must decrease
    let ds = tiny_dataset(4, 6.0);
    let mut seqs: Vec<_> = ds.train.iter().chain(ds.val.iter()).chain(ds.test.iter()).cloned().collect();
    for s in seqs.iter_mut() {
        s.len = s.len.min(256);
    }
    seqs.truncate(8);
    assert_eq!(seqs.len(), 8);

    let mut net = HoovNet::new(ModelConfig::tiny());
    init_params(&mut net, 9);
    let mut adam = Adam::new(1e-3, 0.9, 0.999, 1e-8, &net);
    let refs: Vec<&crate::synth::dataset::SequenceSample> = seqs.iter().collect();
    let mut losses = Vec::new();
    for _ in 0..1000 {
        let loss = train_step(&mut net, &refs, &mut adam, default_workers()).unwrap();
        losses.push(loss);
    }
    let window = |k: usize| -> f64 { losses[k * 200..(k + 1) * 200].iter().sum::<f64>() / 200.0 };
    for k in 0..4 {
        assert!(
            window(k + 1) < window(k),
            "window {k}: {} -> {}",
            window(k),
            window(k + 1)
        );
    }
}

#[test]
fn train_loop_emits_log_and_checkpoint_and_resumes() {
    let dir = std::env::temp_dir().join(format!("hoov-train-test-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let ds = tiny_dataset(4, 5.0);
    let mut net = HoovNet::new(ModelConfig::tiny());
    init_params(&mut net, 3);
    let cfg = TrainConfig {
        max_iters: 20,
        val_every: 10,
        checkpoint_dir: dir.clone(),
        batch_size: 4,
        lr: 1e-3,
        val_max_sequences: 8,
        ..TrainConfig::default()
    };
    let outcome = train(&mut net, &ds, &cfg).unwrap();
    assert_eq!(outcome.iterations, 20);
    assert!(outcome.best_checkpoint.exists());
    let log = std::fs::read_to_string(&outcome.log_path).unwrap();
    assert_eq!(log.lines().count(), 21, "header plus one row per iteration");

    // resume continues the numbering
    let (mut resumed, meta) =
        crate::model::checkpoint::load_checkpoint(&cfg.checkpoint_dir.join("latest.ckpt")).unwrap();
    assert_eq!(meta.iterations, 20);
    let cfg2 = TrainConfig { start_iteration: meta.iterations, max_iters: 10, ..cfg.clone() };
    let outcome2 = train(&mut resumed, &ds, &cfg2).unwrap();
    assert_eq!(outcome2.iterations, 30);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn full_training_run_is_bit_reproducible() {
    let ds = tiny_dataset(4, 5.0);
    let run = |dir: &std::path::Path| -> Vec<Vec<f64>> {
        let mut net = HoovNet::new(ModelConfig::tiny());
        init_params(&mut net, 13);
        let cfg = TrainConfig {
            max_iters: 30,
            val_every: 10,
            checkpoint_dir: dir.to_path_buf(),
            batch_size: 4,
            lr: 1e-3,
            val_max_sequences: 4,
            ..TrainConfig::default()
        };
        train(&mut net, &ds, &cfg).unwrap();
        net.store().defs().iter().map(|d| d.values.to_vec()).collect()
    };
    let base = std::env::temp_dir().join(format!("hoov-repro-{}", std::process::id()));
    let a = run(&base.join("a"));
    let b = run(&base.join("b"));
    assert_eq!(a, b, "two identical training runs diverged");
    let _ = std::fs::remove_dir_all(&base);
}
