//! Parameter registry and the building-block layers of the estimator.

use crate::autodiff::{AdError, Tensor};
use std::collections::HashMap;
use std::sync::Arc;

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// One named parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamDef {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Arc<Vec<f64>>,
}

impl ParamDef {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ordered collection of all trainable parameters of a model.
///
/// Declaration order is the canonical order for checkpoints and gradient
/// vectors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    defs: Vec<ParamDef>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let len = shape.iter().product();
        let id = self.defs.len();
        self.by_name.insert(name.clone(), id);
        self.defs.push(ParamDef { name, shape, values: Arc::new(vec![0.0; len]) });
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn total_scalars(&self) -> usize {
        self.defs.iter().map(|d| d.len()).sum()
    }

    pub fn defs(&self) -> &[ParamDef] {
        &self.defs
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.defs[id.0].values
    }

    /// Mutable access for optimizers and initializers; clones only if some
    /// graph still shares the buffer.
    pub fn values_mut(&mut self, id: ParamId) -> &mut Vec<f64> {
        Arc::make_mut(&mut self.defs[id.0].values)
    }

    pub fn set_values(&mut self, id: ParamId, values: Vec<f64>) {
        assert_eq!(values.len(), self.defs[id.0].len());
        self.defs[id.0].values = Arc::new(values);
    }

    /// Binds every parameter into a fresh graph as grad-wanting leaves.
    pub fn bind(&self) -> BoundParams {
        BoundParams {
            tensors: self
                .defs
                .iter()
                .map(|d| Tensor::param(d.shape.clone(), Arc::clone(&d.values)))
                .collect(),
        }
    }

    /// Binds every parameter as constants (inference: no graph recording).
    pub fn bind_frozen(&self) -> BoundParams {
        BoundParams {
            tensors: self
                .defs
                .iter()
                .map(|d| Tensor::constant(d.shape.clone(), d.values.to_vec()))
                .collect(),
        }
    }
}

/// Per-graph leaf tensors, aligned with the store's declaration order.
pub struct BoundParams {
    tensors: Vec<Tensor>,
}

impl BoundParams {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    /// Gradients in declaration order (zeros where the loss never reached).
    pub fn collect_grads(&self, store: &ParamStore) -> Vec<Vec<f64>> {
        self.tensors
            .iter()
            .zip(store.defs())
            .map(|(t, d)| t.grad().unwrap_or_else(|| vec![0.0; d.len()]))
            .collect()
    }
}

/// Fully-connected layer.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn register(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Self {
        Self {
            w: store.register(format!("{name}.w"), vec![d_in, d_out]),
            b: store.register(format!("{name}.b"), vec![d_out]),
        }
    }

    pub fn forward(&self, p: &BoundParams, x: &Tensor) -> Result<Tensor, AdError> {
        x.matmul(p.get(self.w))?.add_bias(p.get(self.b))
    }
}

/// Two causal convolutions plus a halving max pool.
#[derive(Debug, Clone, Copy)]
pub struct ConvBlock {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl ConvBlock {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
    ) -> Self {
        Self {
            w1: store.register(format!("{name}.conv1.w"), vec![c_out, kernel, c_in]),
            b1: store.register(format!("{name}.conv1.b"), vec![c_out]),
            w2: store.register(format!("{name}.conv2.w"), vec![c_out, kernel, c_out]),
            b2: store.register(format!("{name}.conv2.b"), vec![c_out]),
        }
    }

    pub fn forward(&self, p: &BoundParams, x: &Tensor) -> Result<Tensor, AdError> {
        x.conv1d(p.get(self.w1), p.get(self.b1))?
            .relu()?
            .conv1d(p.get(self.w2), p.get(self.b2))?
            .relu()?
            .maxpool1d()
    }
}

/// One Elman recurrence layer: h' = tanh(x W_ih + b_ih + h W_hh + b_hh).
#[derive(Debug, Clone, Copy)]
pub struct ElmanLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub hidden: usize,
}

impl ElmanLayer {
    pub fn register(store: &mut ParamStore, name: &str, d_in: usize, hidden: usize) -> Self {
        Self {
            w_ih: store.register(format!("{name}.w_ih"), vec![d_in, hidden]),
            w_hh: store.register(format!("{name}.w_hh"), vec![hidden, hidden]),
            b_ih: store.register(format!("{name}.b_ih"), vec![hidden]),
            b_hh: store.register(format!("{name}.b_hh"), vec![hidden]),
            hidden,
        }
    }

    pub fn step(&self, p: &BoundParams, x: &Tensor, h: &Tensor) -> Result<Tensor, AdError> {
        let ih = x.matmul(p.get(self.w_ih))?.add_bias(p.get(self.b_ih))?;
        let hh = h.matmul(p.get(self.w_hh))?.add_bias(p.get(self.b_hh))?;
        ih.add(&hh)?.tanh()
    }
}

/// Multi-head self-attention with a causal mask.
#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn register(store: &mut ParamStore, name: &str, dim: usize, heads: usize) -> Self {
        assert_eq!(dim % heads, 0, "embed dim {dim} not divisible by {heads} heads");
        Self {
            wq: Linear::register(store, &format!("{name}.wq"), dim, dim),
            wk: Linear::register(store, &format!("{name}.wk"), dim, dim),
            wv: Linear::register(store, &format!("{name}.wv"), dim, dim),
            wo: Linear::register(store, &format!("{name}.wo"), dim, dim),
            heads,
            dim,
        }
    }

    pub fn forward(&self, p: &BoundParams, x: &Tensor, mask: &Tensor) -> Result<Tensor, AdError> {
        let q = self.wq.forward(p, x)?;
        let k = self.wk.forward(p, x)?;
        let v = self.wv.forward(p, x)?;
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut context: Option<Tensor> = None;
        for h in 0..self.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = q.slice_cols(lo, hi)?;
            let kh = k.slice_cols(lo, hi)?;
            let vh = v.slice_cols(lo, hi)?;
            let scores = qh.matmul(&kh.transpose()?)?.mul_scalar(scale)?.add(mask)?;
            let attn = scores.softmax()?;
            let ctx = attn.matmul(&vh)?;
            context = Some(match context {
                Some(acc) => acc.concat_cols(&ctx)?,
                None => ctx,
            });
        }
        self.wo.forward(p, &context.expect("at least one head"))
    }
}

/// Transformer encoder layer (post-norm: add then layer-norm).
#[derive(Debug, Clone, Copy)]
pub struct EncoderLayer {
    pub attn: MultiHeadAttention,
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
}

impl EncoderLayer {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        ff_dim: usize,
    ) -> Self {
        let attn = MultiHeadAttention::register(store, &format!("{name}.attn"), dim, heads);
        let ln1_g = store.register(format!("{name}.ln1.gamma"), vec![dim]);
        let ln1_b = store.register(format!("{name}.ln1.beta"), vec![dim]);
        let ff1 = Linear::register(store, &format!("{name}.ff1"), dim, ff_dim);
        let ff2 = Linear::register(store, &format!("{name}.ff2"), ff_dim, dim);
        let ln2_g = store.register(format!("{name}.ln2.gamma"), vec![dim]);
        let ln2_b = store.register(format!("{name}.ln2.beta"), vec![dim]);
        Self { attn, ln1_g, ln1_b, ff1, ff2, ln2_g, ln2_b }
    }

    pub fn forward(&self, p: &BoundParams, x: &Tensor, mask: &Tensor) -> Result<Tensor, AdError> {
        let attn_out = self.attn.forward(p, x, mask)?;
        let x = x.add(&attn_out)?.layer_norm(p.get(self.ln1_g), p.get(self.ln1_b), 1e-5)?;
        let ff = self.ff2.forward(p, &self.ff1.forward(p, &x)?.relu()?)?;
        x.add(&ff)?.layer_norm(p.get(self.ln2_g), p.get(self.ln2_b), 1e-5)
    }
}

/// Sinusoidal positional encoding values for a sequence.
pub fn positional_encoding(len: usize, dim: usize) -> Vec<f64> {
    let mut pe = vec![0.0; len * dim];
    for pos in 0..len {
        for i in 0..dim {
            let exponent = 2.0 * (i / 2) as f64 / dim as f64;
            let angle = pos as f64 / 10_000f64.powf(exponent);
            pe[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

/// Strictly lower-triangular-plus-diagonal attention mask: position i may
/// attend to j <= i; masked entries get a value that underflows to zero
/// weight after softmax.
pub fn causal_mask(len: usize) -> Vec<f64> {
    let mut m = vec![0.0; len * len];
    for i in 0..len {
        for j in (i + 1)..len {
            m[i * len + j] = -1e30;
        }
    }
    m
}
