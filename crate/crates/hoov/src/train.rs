//! Optimization: Kaiming init, Adam, equal-length batching, and the
//! training loop with periodic validation and checkpointing.

use crate::geom::{quat_angle_diff, sixd_to_rot, Quat, Rot6D};
use crate::model::checkpoint::{save_checkpoint, CheckpointError, TrainMeta};
use crate::model::layers::ParamId;
use crate::model::{loss_graph, HoovNet, ModelError};
use crate::rng::Rng;
use crate::synth::dataset::{Dataset, SequenceSample};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_iters: u64,
    pub val_every: u64,
    pub seed: u64,
    pub checkpoint_dir: PathBuf,
    /// Stop when validation MAE has not improved for this many validations.
    pub patience: usize,
    /// Worker threads for the batch forward/backward; results are
    /// bit-identical for any value.
    pub workers: usize,
    /// Iteration numbering starts here (resume support).
    pub start_iteration: u64,
    /// Cap on validation sequences per pass, for throughput.
    pub val_max_sequences: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 16,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_iters: 20_000,
            val_every: 250,
            seed: 0,
            checkpoint_dir: PathBuf::from("checkpoints"),
            patience: 20,
            workers: default_workers(),
            start_iteration: 0,
            val_max_sequences: 256,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get().min(8)).unwrap_or(1)
}

#[derive(Debug)]
pub enum TrainError {
    NonFiniteLoss { iteration: u64, batch: usize },
    Model(ModelError),
    Checkpoint(CheckpointError),
    Io(std::io::Error),
    EmptyDataset,
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::NonFiniteLoss { iteration, batch } => {
                write!(f, "non-finite loss at iteration {iteration}, batch {batch}")
            }
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Checkpoint(e) => write!(f, "{e}"),
            TrainError::Io(e) => write!(f, "io error: {e}"),
            TrainError::EmptyDataset => write!(f, "training split is empty"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

impl From<CheckpointError> for TrainError {
    fn from(e: CheckpointError) -> Self {
        TrainError::Checkpoint(e)
    }
}

impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        TrainError::Io(e)
    }
}

/// Kaiming-uniform weights (bound sqrt(6 / fan_in), variance 2 / fan_in),
/// zero biases, unit layer-norm gains. Deterministic per seed; each tensor
/// draws from its own name-forked stream so unrelated edits do not shift
/// other tensors' values.
pub fn init_params(net: &mut HoovNet, seed: u64) {
    let root = Rng::new(seed);
    let defs: Vec<(String, Vec<usize>)> = net
        .store()
        .defs()
        .iter()
        .map(|d| (d.name.clone(), d.shape.clone()))
        .collect();
    for (i, (name, shape)) in defs.iter().enumerate() {
        let values = net.store_mut().values_mut(ParamId(i));
        if name.ends_with(".gamma") {
            values.iter_mut().for_each(|v| *v = 1.0);
            continue;
        }
        if shape.len() == 1 {
            // biases and layer-norm betas
            values.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let fan_in: usize = match shape.as_slice() {
            [rows, _cols] => *rows,
            [_c_out, kernel, c_in] => kernel * c_in,
            other => other.iter().product::<usize>() / other.last().unwrap(),
        };
        let bound = (6.0 / fan_in as f64).sqrt();
        let mut rng = root.fork(name);
        for v in values.iter_mut() {
            *v = rng.range(-bound, bound);
        }
    }
}

/// Adam with bias correction, matching the standard recurrence.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, net: &HoovNet) -> Self {
        let lens: Vec<usize> = net.store().defs().iter().map(|d| d.len()).collect();
        Self::from_lens(lr, beta1, beta2, eps, &lens)
    }

    /// Constructor for arbitrary parameter layouts (used by tests).
    pub fn from_lens(lr: f64, beta1: f64, beta2: f64, eps: f64, lens: &[usize]) -> Self {
        let m = lens.iter().map(|&n| vec![0.0; n]).collect();
        let v = lens.iter().map(|&n| vec![0.0; n]).collect();
        Self { lr, beta1, beta2, eps, t: 0, m, v }
    }

    pub fn step(&mut self, store: &mut crate::model::layers::ParamStore, grads: &[Vec<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, grad) in grads.iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let values = store.values_mut(ParamId(i));
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                values[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }

    pub fn iterations(&self) -> u64 {
        self.t
    }
}

/// Groups sequence indices into equal-length batches, shuffled by seed.
///
/// Every index appears exactly once; no batch mixes two sequence lengths;
/// groups that do not fill `batch_size` produce a short final batch.
pub fn make_batches(seqs: &[SequenceSample], batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in seqs.iter().enumerate() {
        by_len.entry(s.len).or_default().push(i);
    }
    let mut rng = Rng::new(seed).fork("batches");
    let mut batches = Vec::new();
    for (_, mut group) in by_len {
        rng.shuffle(&mut group);
        for chunk in group.chunks(batch_size.max(1)) {
            batches.push(chunk.to_vec());
        }
    }
    rng.shuffle(&mut batches);
    batches
}

/// Forward/backward over one batch, parallel over sequences.
///
/// Per-sequence gradients are merged in batch order, so the result is
/// bit-identical for any worker count.
pub fn batch_gradients(
    net: &HoovNet,
    batch: &[&SequenceSample],
    workers: usize,
) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
    type SeqResult = Result<(f64, Vec<Vec<f64>>), ModelError>;

    let run_one = |seq: &SequenceSample| -> SeqResult {
        let bound = net.store().bind();
        let (pos, rot) = net.forward_graph(&bound, seq.x(), &seq.prior)?;
        let (tp, tr, _) = seq.targets();
        let steps = tp.len();
        let target_pos =
            crate::autodiff::Tensor::constant(vec![steps, 3], tp.into_iter().flatten().collect());
        let target_rot =
            crate::autodiff::Tensor::constant(vec![steps, 6], tr.into_iter().flatten().collect());
        let loss = loss_graph(&pos, &rot, &target_pos, &target_rot)?;
        let loss_value = loss.item();
        crate::model::run_backward(&loss)?;
        Ok((loss_value, bound.collect_grads(net.store())))
    };

    let n = batch.len();
    let mut slots: Vec<Option<SeqResult>> = (0..n).map(|_| None).collect();
    if workers <= 1 || n <= 1 {
        for (slot, seq) in slots.iter_mut().zip(batch.iter()) {
            *slot = Some(run_one(seq));
        }
    } else {
        let workers = workers.min(n);
        std::thread::scope(|scope| {
            let mut rest = slots.as_mut_slice();
            let mut handles = Vec::new();
            let per = n.div_ceil(workers);
            let mut start = 0;
            while !rest.is_empty() {
                let take = per.min(rest.len());
                let (chunk, tail) = rest.split_at_mut(take);
                rest = tail;
                let lo = start;
                start += take;
                handles.push(scope.spawn(move || {
                    for (off, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run_one(batch[lo + off]));
                    }
                }));
            }
            for h in handles {
                h.join().expect("worker panicked");
            }
        });
    }

    let mut total_loss = 0.0;
    let mut grads: Vec<Vec<f64>> =
        net.store().defs().iter().map(|d| vec![0.0; d.len()]).collect();
    for slot in slots {
        let (loss, seq_grads) = slot.expect("slot filled")?;
        total_loss += loss;
        for (acc, g) in grads.iter_mut().zip(seq_grads.iter()) {
            for (a, b) in acc.iter_mut().zip(g.iter()) {
                *a += b;
            }
        }
    }
    let scale = 1.0 / n as f64;
    for g in grads.iter_mut() {
        for v in g.iter_mut() {
            *v *= scale;
        }
    }
    Ok((total_loss * scale, grads))
}

/// One optimization step: forward, loss, backward, Adam update.
pub fn train_step(
    net: &mut HoovNet,
    batch: &[&SequenceSample],
    adam: &mut Adam,
    workers: usize,
) -> Result<f64, ModelError> {
    let (loss, grads) = batch_gradients(net, batch, workers)?;
    adam.step(net.store_mut(), &grads);
    Ok(loss)
}

/// Mean position error (cm) and mean rotation angle error (degrees) of the
/// model over a sequence set.
pub fn evaluate_split(net: &HoovNet, seqs: &[SequenceSample], limit: usize) -> (f64, f64) {
    let mut pos_sum = 0.0;
    let mut rot_sum = 0.0;
    let mut steps = 0usize;
    for seq in seqs.iter().take(limit.max(1)) {
        let (tp, tr, times) = seq.targets();
        let Ok(est) = net.forward(seq.x(), &seq.prior, &times) else { continue };
        for (e, (p, r)) in est.iter().zip(tp.iter().zip(tr.iter())) {
            let dx = e.position.x - p[0];
            let dy = e.position.y - p[1];
            let dz = e.position.z - p[2];
            pos_sum += (dx * dx + dy * dy + dz * dz).sqrt();
            let pred_q = sixd_to_rot(&e.rot6d).map(|m| Quat::from_rotation_matrix(&m));
            let gt_q = sixd_to_rot(&Rot6D { v: *r }).map(|m| Quat::from_rotation_matrix(&m));
            if let (Ok(pq), Ok(gq)) = (pred_q, gt_q) {
                rot_sum += quat_angle_diff(pq, gq);
            }
            steps += 1;
        }
    }
    if steps == 0 {
        return (f64::NAN, f64::NAN);
    }
    (pos_sum / steps as f64 * 100.0, rot_sum / steps as f64)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub best_checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub iterations: u64,
    pub best_val_mae_cm: f64,
}

/// Full training run: loops batches, validates periodically, retains the
/// best-validation checkpoint, writes a per-iteration CSV log.
pub fn train(net: &mut HoovNet, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if dataset.train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    std::fs::create_dir_all(&cfg.checkpoint_dir)?;
    let log_path = cfg.checkpoint_dir.join("train_log.csv");
    let mut log = std::fs::File::create(&log_path)?;
    writeln!(log, "iter,train_loss,val_mae_cm,val_mad_deg")?;

    let mut adam = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, net);
    let best_path = cfg.checkpoint_dir.join("best.ckpt");
    let latest_path = cfg.checkpoint_dir.join("latest.ckpt");
    let mut best_val = f64::INFINITY;
    let mut vals_since_best = 0usize;
    let mut saved_any = false;

    let mut epoch = 0u64;
    let mut batches = make_batches(&dataset.train, cfg.batch_size, cfg.seed ^ epoch);
    let mut batch_cursor = 0usize;

    let mut iter = cfg.start_iteration;
    let end = cfg.start_iteration + cfg.max_iters;
    while iter < end {
        if batch_cursor >= batches.len() {
            epoch += 1;
            batches = make_batches(&dataset.train, cfg.batch_size, cfg.seed ^ epoch);
            batch_cursor = 0;
        }
        let batch_idx: Vec<&SequenceSample> =
            batches[batch_cursor].iter().map(|&i| &dataset.train[i]).collect();
        let loss = train_step(net, &batch_idx, &mut adam, cfg.workers)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { iteration: iter, batch: batch_cursor });
        }
        batch_cursor += 1;
        iter += 1;

        let validate_now = cfg.val_every > 0
            && (iter.is_multiple_of(cfg.val_every) || iter == end)
            && !dataset.val.is_empty();
        if validate_now {
            let (mae_cm, mad_deg) = evaluate_split(net, &dataset.val, cfg.val_max_sequences);
            writeln!(log, "{iter},{loss:.6},{mae_cm:.4},{mad_deg:.4}")?;
            let meta = TrainMeta {
                iterations: iter,
                seed: cfg.seed,
                val_mae_cm: Some(mae_cm),
                note: String::new(),
            };
            save_checkpoint(net, &meta, &latest_path)?;
            if mae_cm < best_val {
                best_val = mae_cm;
                vals_since_best = 0;
                save_checkpoint(net, &meta, &best_path)?;
                saved_any = true;
            } else {
                vals_since_best += 1;
                if vals_since_best >= cfg.patience {
                    break;
                }
            }
        } else {
            writeln!(log, "{iter},{loss:.6},,")?;
        }
    }

    if !saved_any {
        // no validation happened (e.g. empty val split): keep the final state
        let meta = TrainMeta {
            iterations: iter,
            seed: cfg.seed,
            val_mae_cm: None,
            note: String::new(),
        };
        save_checkpoint(net, &meta, &best_path)?;
    }
    Ok(TrainOutcome {
        best_checkpoint: best_path,
        log_path,
        iterations: iter,
        best_val_mae_cm: best_val,
    })
}

/// Reference Adam recurrence on a scalar problem (test oracle).
pub fn adam_reference_scalar(
    grads: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    x0: f64,
) -> Vec<f64> {
    let mut x = x0;
    let mut m = 0.0;
    let mut v = 0.0;
    let mut out = Vec::with_capacity(grads.len());
    for (t, &g) in grads.iter().enumerate() {
        let tt = (t + 1) as i32;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        let m_hat = m / (1.0 - beta1.powi(tt));
        let v_hat = v / (1.0 - beta2.powi(tt));
        x -= lr * m_hat / (v_hat.sqrt() + eps);
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests;
