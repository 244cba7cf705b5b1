//! The wrist-pose estimation network.
//!
//! Pipeline: a prior token summarizing the last five headset-tracked poses
//! (2-layer Elman RNN + linear projection), a convolutional downsampler
//! that reduces the inertial input sequence 8x along time (three blocks of
//! two causal convolutions and a max pool), a linear embedding, sinusoidal
//! positional encoding over [token | embeddings], a causal Transformer
//! encoder, and two small MLP heads that emit per-step wrist position and
//! 6D orientation.
//!
//! Everything runs on the in-crate autodiff tensors; parameter declaration
//! order defines the checkpoint layout.

pub mod checkpoint;
pub mod layers;

use crate::autodiff::{backward, AdError, Tensor};
use crate::frames::{InputFrame, PriorFrame, INPUT_WIDTH, PRIOR_LEN, PRIOR_WIDTH};
use crate::geom::{Rot6D, RotMat, Vec3};
use layers::{
    causal_mask, positional_encoding, BoundParams, ConvBlock, ElmanLayer, EncoderLayer, Linear,
    ParamStore,
};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    ShapeMismatch { what: &'static str, expected: Vec<usize>, got: Vec<usize> },
    TooShort { needed: usize, got: usize },
    LengthMismatch { lhs: usize, rhs: usize },
    Ad(AdError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::ShapeMismatch { what, expected, got } => {
                write!(f, "{what}: expected shape {expected:?}, got {got:?}")
            }
            ModelError::TooShort { needed, got } => {
                write!(f, "input sequence too short: {got} < {needed}")
            }
            ModelError::LengthMismatch { lhs, rhs } => {
                write!(f, "sequence length mismatch: {lhs} vs {rhs}")
            }
            ModelError::Ad(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<AdError> for ModelError {
    fn from(e: AdError) -> Self {
        ModelError::Ad(e)
    }
}

/// Network hyperparameters.
///
/// `default()` follows the published architecture description (embedding
/// 256, feedforward 2048, 8 heads, two encoder layers, 2-layer RNN with
/// hidden size 256). The conv channel widths and head depths are not
/// published; see `PARAM_COUNT_DEFAULT` for the resulting size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub encoder_layers: usize,
    pub rnn_layers: usize,
    pub rnn_hidden: usize,
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    /// Sequences are capped at this many seconds of IMU input.
    pub max_seq_s: f64,
    pub head_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 256,
            heads: 8,
            ff_dim: 2048,
            encoder_layers: 2,
            rnn_layers: 2,
            rnn_hidden: 256,
            conv_channels: vec![64, 128, 256],
            kernel: 3,
            max_seq_s: 15.0,
            head_hidden: vec![128],
        }
    }
}

impl ModelConfig {
    /// Desk-scale configuration used by the training acceptance runs.
    pub fn compact() -> Self {
        Self {
            embed_dim: 64,
            heads: 4,
            ff_dim: 256,
            encoder_layers: 2,
            rnn_layers: 2,
            rnn_hidden: 64,
            conv_channels: vec![16, 32, 64],
            head_hidden: vec![32],
            ..Self::default()
        }
    }

    /// Minimal configuration for gradient checks.
    pub fn tiny() -> Self {
        Self {
            embed_dim: 16,
            heads: 2,
            ff_dim: 32,
            encoder_layers: 1,
            rnn_layers: 2,
            rnn_hidden: 16,
            conv_channels: vec![4, 8, 16],
            head_hidden: vec![8],
            ..Self::default()
        }
    }

    /// Temporal reduction of the downsampler; one pool per conv block.
    pub fn downsample_factor(&self) -> usize {
        1 << self.conv_channels.len()
    }

    pub fn validate(&self) {
        assert_eq!(self.embed_dim % self.heads, 0, "embed_dim must divide into heads");
        assert_eq!(
            self.conv_channels.len(),
            3,
            "three conv blocks fix the downsample factor at 8"
        );
        assert!(self.kernel >= 1 && self.rnn_layers >= 1);
    }
}

/// One per-step output of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub position: Vec3,
    pub rot6d: Rot6D,
    pub t: f64,
}

impl PoseEstimate {
    /// Orientation as a rotation matrix (Gram-Schmidt on the 6D output).
    pub fn rotation(&self) -> Result<RotMat, crate::geom::GeomError> {
        crate::geom::sixd_to_rot(&self.rot6d)
    }
}

struct Heads {
    hidden: Vec<Linear>,
    out: Linear,
}

impl Heads {
    fn register(store: &mut ParamStore, name: &str, d_in: usize, widths: &[usize], d_out: usize) -> Self {
        let mut hidden = Vec::new();
        let mut d = d_in;
        for (i, w) in widths.iter().enumerate() {
            hidden.push(Linear::register(store, &format!("{name}.h{i}"), d, *w));
            d = *w;
        }
        let out = Linear::register(store, &format!("{name}.out"), d, d_out);
        Self { hidden, out }
    }

    fn forward(&self, p: &BoundParams, x: &Tensor) -> Result<Tensor, AdError> {
        let mut h = x.clone();
        for lin in &self.hidden {
            h = lin.forward(p, &h)?.relu()?;
        }
        self.out.forward(p, &h)
    }
}

/// The full estimator: owns its parameters and builds a fresh graph per
/// forward pass.
pub struct HoovNet {
    pub cfg: ModelConfig,
    store: ParamStore,
    conv_blocks: Vec<ConvBlock>,
    embed: Linear,
    rnn: Vec<ElmanLayer>,
    token_proj: Linear,
    encoder: Vec<EncoderLayer>,
    pos_head: Heads,
    rot_head: Heads,
}

/// Trainable scalars of the default configuration, frozen as a regression
/// constant. The published network reports 4,408,199; the gap comes from
/// hyperparameters the architecture description does not pin down (conv
/// channel widths, output-head depths), documented in the README.
pub const PARAM_COUNT_DEFAULT: usize = 3_416_777;

impl HoovNet {
    pub fn new(cfg: ModelConfig) -> Self {
        cfg.validate();
        let mut store = ParamStore::new();

        let mut conv_blocks = Vec::new();
        let mut c_in = INPUT_WIDTH;
        for (i, &c_out) in cfg.conv_channels.iter().enumerate() {
            conv_blocks.push(ConvBlock::register(
                &mut store,
                &format!("down.block{i}"),
                c_in,
                c_out,
                cfg.kernel,
            ));
            c_in = c_out;
        }
        let embed = Linear::register(&mut store, "down.embed", c_in, cfg.embed_dim);

        let mut rnn = Vec::new();
        let mut d = PRIOR_WIDTH;
        for i in 0..cfg.rnn_layers {
            rnn.push(ElmanLayer::register(&mut store, &format!("prior.rnn{i}"), d, cfg.rnn_hidden));
            d = cfg.rnn_hidden;
        }
        let token_proj = Linear::register(&mut store, "prior.proj", cfg.rnn_hidden, cfg.embed_dim);

        let encoder = (0..cfg.encoder_layers)
            .map(|i| {
                EncoderLayer::register(
                    &mut store,
                    &format!("enc{i}"),
                    cfg.embed_dim,
                    cfg.heads,
                    cfg.ff_dim,
                )
            })
            .collect();

        let pos_head = Heads::register(&mut store, "head.pos", cfg.embed_dim, &cfg.head_hidden, 3);
        let rot_head = Heads::register(&mut store, "head.rot", cfg.embed_dim, &cfg.head_hidden, 6);

        Self { cfg, store, conv_blocks, embed, rnn, token_proj, encoder, pos_head, rot_head }
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.store.total_scalars()
    }

    /// Maximum input rows a sequence may carry, a multiple of the
    /// downsample factor.
    pub fn max_seq_samples(&self, imu_rate: f64) -> usize {
        let raw = (self.cfg.max_seq_s * imu_rate) as usize;
        let f = self.cfg.downsample_factor();
        (raw / f) * f
    }

    fn x_tensor(x: &[InputFrame]) -> Tensor {
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        Tensor::constant(vec![x.len(), INPUT_WIDTH], flat)
    }

    fn s_tensor(s: &[PriorFrame]) -> Tensor {
        let flat: Vec<f64> = s.iter().flatten().copied().collect();
        Tensor::constant(vec![s.len(), PRIOR_WIDTH], flat)
    }

    /// Prior token from the 5 last tracked poses: final hidden state of the
    /// top RNN layer, linearly projected to the embedding size.
    fn token_graph(&self, p: &BoundParams, s: &Tensor) -> Result<Tensor, AdError> {
        let steps = s.shape()[0];
        let mut hs: Vec<Tensor> = self
            .rnn
            .iter()
            .map(|l| Tensor::constant(vec![1, l.hidden], vec![0.0; l.hidden]))
            .collect();
        for t in 0..steps {
            let mut x = s.slice_rows(t, t + 1)?;
            for (li, layer) in self.rnn.iter().enumerate() {
                let h = layer.step(p, &x, &hs[li])?;
                x = h.clone();
                hs[li] = h;
            }
        }
        self.token_proj.forward(p, hs.last().expect("at least one rnn layer"))
    }

    /// Conv downsampler plus linear embedding: `(tau, 21)` -> `(tau/8, D)`.
    fn downsample_graph(&self, p: &BoundParams, x: &Tensor) -> Result<Tensor, AdError> {
        let mut h = x.clone();
        for block in &self.conv_blocks {
            h = block.forward(p, &h)?;
        }
        self.embed.forward(p, &h)
    }

    /// Full forward pass on an already-bound parameter set. Returns the
    /// per-step position `(tau, 3)` and 6D rotation `(tau, 6)` tensors.
    pub fn forward_graph(
        &self,
        p: &BoundParams,
        x: &[InputFrame],
        s: &[PriorFrame],
    ) -> Result<(Tensor, Tensor), ModelError> {
        let f = self.cfg.downsample_factor();
        if x.len() < f {
            return Err(ModelError::TooShort { needed: f, got: x.len() });
        }
        if s.len() != PRIOR_LEN {
            return Err(ModelError::ShapeMismatch {
                what: "prior",
                expected: vec![PRIOR_LEN, PRIOR_WIDTH],
                got: vec![s.len(), PRIOR_WIDTH],
            });
        }
        // truncate to a whole number of downsample blocks
        let usable = (x.len() / f) * f;
        let x_t = Self::x_tensor(&x[..usable]);
        let s_t = Self::s_tensor(s);

        let token = self.token_graph(p, &s_t)?;
        let embedded = self.downsample_graph(p, &x_t)?;
        let seq = token.concat_rows(&embedded)?;
        let seq_len = seq.shape()[0];
        let pe = Tensor::constant(
            vec![seq_len, self.cfg.embed_dim],
            positional_encoding(seq_len, self.cfg.embed_dim),
        );
        let mut h = seq.add(&pe)?;
        let mask = Tensor::constant(vec![seq_len, seq_len], causal_mask(seq_len));
        for layer in &self.encoder {
            h = layer.forward(p, &h, &mask)?;
        }
        let outputs = h.slice_rows(1, seq_len)?; // drop the prior token
        let pos = self.pos_head.forward(p, &outputs)?;
        let rot = self.rot_head.forward(p, &outputs)?;
        Ok((pos, rot))
    }

    /// Inference: no gradients, no graph retention.
    ///
    /// `times` carries the timestamp of each downsampled output step (the
    /// time of the last IMU sample each step covers); it must have
    /// `floor(len/8)` entries.
    pub fn forward(
        &self,
        x: &[InputFrame],
        s: &[PriorFrame],
        times: &[f64],
    ) -> Result<Vec<PoseEstimate>, ModelError> {
        let p = self.store.bind_frozen();
        let (pos, rot) = self.forward_graph(&p, x, s)?;
        let n = pos.shape()[0];
        if times.len() != n {
            return Err(ModelError::LengthMismatch { lhs: times.len(), rhs: n });
        }
        let pv = pos.values();
        let rv = rot.values();
        Ok((0..n)
            .map(|i| PoseEstimate {
                position: Vec3::new(pv[3 * i], pv[3 * i + 1], pv[3 * i + 2]),
                rot6d: Rot6D {
                    v: [
                        rv[6 * i],
                        rv[6 * i + 1],
                        rv[6 * i + 2],
                        rv[6 * i + 3],
                        rv[6 * i + 4],
                        rv[6 * i + 5],
                    ],
                },
                t: times[i],
            })
            .collect())
    }

    /// Prior token values for a 5x18 prior (test/inspection surface).
    pub fn encode_prior(&self, s: &[PriorFrame]) -> Result<Vec<f64>, ModelError> {
        if s.len() != PRIOR_LEN {
            return Err(ModelError::ShapeMismatch {
                what: "prior",
                expected: vec![PRIOR_LEN, PRIOR_WIDTH],
                got: vec![s.len(), PRIOR_WIDTH],
            });
        }
        let p = self.store.bind_frozen();
        let token = self.token_graph(&p, &Self::s_tensor(s))?;
        Ok(token.values().to_vec())
    }

    /// Downsampled embedding values for an input sequence (test surface).
    pub fn downsample(&self, x: &[InputFrame]) -> Result<Vec<Vec<f64>>, ModelError> {
        let f = self.cfg.downsample_factor();
        if x.len() < f {
            return Err(ModelError::TooShort { needed: f, got: x.len() });
        }
        let usable = (x.len() / f) * f;
        let p = self.store.bind_frozen();
        let out = self.downsample_graph(&p, &Self::x_tensor(&x[..usable]))?;
        let d = out.shape()[1];
        Ok(out.values().chunks(d).map(|c| c.to_vec()).collect())
    }
}

/// Training loss: sum over steps of the L1 position error plus the L1 error
/// on the raw 6D rotation encoding, unweighted.
pub fn loss_graph(
    pred_pos: &Tensor,
    pred_rot: &Tensor,
    target_pos: &Tensor,
    target_rot: &Tensor,
) -> Result<Tensor, ModelError> {
    if pred_pos.shape() != target_pos.shape() {
        return Err(ModelError::LengthMismatch {
            lhs: pred_pos.shape()[0],
            rhs: target_pos.shape()[0],
        });
    }
    if pred_rot.shape() != target_rot.shape() {
        return Err(ModelError::LengthMismatch {
            lhs: pred_rot.shape()[0],
            rhs: target_rot.shape()[0],
        });
    }
    let lp = pred_pos.sub(target_pos)?.abs()?.sum()?;
    let lr = pred_rot.sub(target_rot)?.abs()?.sum()?;
    Ok(lp.add(&lr)?)
}

/// Scalar convenience wrapper over [`loss_graph`] for plain slices.
pub fn loss_value(
    pred: &[PoseEstimate],
    target_pos: &[[f64; 3]],
    target_rot: &[[f64; 6]],
) -> Result<f64, ModelError> {
    if pred.len() != target_pos.len() || pred.len() != target_rot.len() {
        return Err(ModelError::LengthMismatch { lhs: pred.len(), rhs: target_pos.len() });
    }
    let mut total = 0.0;
    for (p, (tp, tr)) in pred.iter().zip(target_pos.iter().zip(target_rot.iter())) {
        total += (p.position.x - tp[0]).abs()
            + (p.position.y - tp[1]).abs()
            + (p.position.z - tp[2]).abs();
        for (a, b) in p.rot6d.v.iter().zip(tr.iter()) {
            total += (a - b).abs();
        }
    }
    Ok(total)
}

/// Pinch position refinement: a fixed 15 cm offset along the wrist frame's
/// negative y axis (toward the hand), `p_pinch = R (0, -0.15, 0)^T + p`.
pub fn refine_pinch_position(wrist_pos: Vec3, wrist_rot: &RotMat) -> Vec3 {
    wrist_rot.mul_vec(Vec3::new(0.0, -0.15, 0.0)) + wrist_pos
}

/// Clears accumulated gradients by dropping per-graph leaves (gradients are
/// per-binding, so a fresh `bind()` starts clean); this helper exists for
/// API symmetry in training code.
pub fn run_backward(loss: &Tensor) -> Result<(), ModelError> {
    backward(loss)?;
    Ok(())
}
