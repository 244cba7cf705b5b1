//! Forward kernels and backward closures for the core op set.
//!
//! Shapes are validated up front and reported in errors; the backward
//! formulas are all checked against central finite differences (see
//! `check` and the gradient tests below).
//!
//! Conventions: matrices are row-major `(rows, cols)`; sequences are
//! `(length, channels)`; conv weights are `(out_channels, kernel,
//! in_channels)` so the innermost loops run over contiguous memory.
//! `conv1d` pads on the left only, which keeps every output causal: output
//! row `i` depends on input rows `<= i`.

use super::{AdError, OpRecord, Tensor};

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), AdError> {
    if a.shape() != b.shape() {
        return Err(AdError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

impl Tensor {
    fn connected(&self) -> bool {
        self.inner.wants_grad || self.inner.op.borrow().is_some()
    }

    fn emit(
        shape: Vec<usize>,
        values: Vec<f64>,
        parents: Vec<Tensor>,
        backward: impl FnOnce(&[f64]) + 'static,
    ) -> Tensor {
        let record = if parents.iter().any(Tensor::connected) {
            Some(OpRecord { parents, backward: Box::new(backward) })
        } else {
            None
        };
        Tensor::from_op(shape, values, record)
    }

    // -- elementwise ---------------------------------------------------

    pub fn add(&self, other: &Tensor) -> Result<Tensor, AdError> {
        same_shape("add", self, other)?;
        let values = self.values().iter().zip(other.values()).map(|(a, b)| a + b).collect();
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::emit(
            self.shape().to_vec(),
            values,
            vec![self.clone(), other.clone()],
            move |g| {
                a.accumulate(g);
                b.accumulate(g);
            },
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, AdError> {
        same_shape("sub", self, other)?;
        let values = self.values().iter().zip(other.values()).map(|(a, b)| a - b).collect();
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::emit(
            self.shape().to_vec(),
            values,
            vec![self.clone(), other.clone()],
            move |g| {
                a.accumulate(g);
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                b.accumulate(&neg);
            },
        ))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, AdError> {
        same_shape("mul", self, other)?;
        let values = self.values().iter().zip(other.values()).map(|(a, b)| a * b).collect();
        let (a, b) = (self.clone(), other.clone());
        let (av, bv) = (self.value_arc(), other.value_arc());
        Ok(Tensor::emit(
            self.shape().to_vec(),
            values,
            vec![self.clone(), other.clone()],
            move |g| {
                let da: Vec<f64> = g.iter().zip(bv.iter()).map(|(g, b)| g * b).collect();
                a.accumulate(&da);
                let db: Vec<f64> = g.iter().zip(av.iter()).map(|(g, a)| g * a).collect();
                b.accumulate(&db);
            },
        ))
    }

    pub fn mul_scalar(&self, s: f64) -> Result<Tensor, AdError> {
        let values = self.values().iter().map(|v| v * s).collect();
        let a = self.clone();
        Ok(Tensor::emit(self.shape().to_vec(), values, vec![self.clone()], move |g| {
            let da: Vec<f64> = g.iter().map(|g| g * s).collect();
            a.accumulate(&da);
        }))
    }

    pub fn add_scalar(&self, s: f64) -> Result<Tensor, AdError> {
        let values = self.values().iter().map(|v| v + s).collect();
        let a = self.clone();
        Ok(Tensor::emit(self.shape().to_vec(), values, vec![self.clone()], move |g| {
            a.accumulate(g);
        }))
    }

    /// Adds a length-`c` bias vector to every row of an `(r, c)` matrix.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor, AdError> {
        let (_r, c) = self.rows_cols();
        if bias.shape() != [c] {
            return Err(AdError::ShapeMismatch {
                op: "add_bias",
                lhs: self.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        let bv = bias.value_arc();
        let mut values = self.values().to_vec();
        for row in values.chunks_mut(c) {
            for (v, b) in row.iter_mut().zip(bv.iter()) {
                *v += b;
            }
        }
        let (a, b) = (self.clone(), bias.clone());
        Ok(Tensor::emit(
            self.shape().to_vec(),
            values,
            vec![self.clone(), bias.clone()],
            move |g| {
                a.accumulate(g);
                let mut db = vec![0.0; c];
                for row in g.chunks(c) {
                    for (d, gv) in db.iter_mut().zip(row.iter()) {
                        *d += gv;
                    }
                }
                b.accumulate(&db);
            },
        ))
    }

    // -- nonlinearities --------------------------------------------------

    pub fn relu(&self) -> Result<Tensor, AdError> {
        let values: Vec<f64> = self.values().iter().map(|v| v.max(0.0)).collect();
        let a = self.clone();
        let xv = self.value_arc();
        Ok(Tensor::emit(self.shape().to_vec(), values, vec![self.clone()], move |g| {
            let da: Vec<f64> =
                g.iter().zip(xv.iter()).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect();
            a.accumulate(&da);
        }))
    }

    pub fn tanh(&self) -> Result<Tensor, AdError> {
        let values: Vec<f64> = self.values().iter().map(|v| v.tanh()).collect();
        let a = self.clone();
        let yv = values.clone();
        Ok(Tensor::emit(self.shape().to_vec(), values, vec![self.clone()], move |g| {
            let da: Vec<f64> = g.iter().zip(yv.iter()).map(|(g, y)| g * (1.0 - y * y)).collect();
            a.accumulate(&da);
        }))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self) -> Result<Tensor, AdError> {
        const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
        const A: f64 = 0.044_715;
        let values: Vec<f64> = self
            .values()
            .iter()
            .map(|&x| 0.5 * x * (1.0 + (C * (x + A * x * x * x)).tanh()))
            .collect();
        let a = self.clone();
        let xv = self.value_arc();
        Ok(Tensor::emit(self.shape().to_vec(), values, vec![self.clone()], move |g| {
            let da: Vec<f64> = g
                .iter()
                .zip(xv.iter())
                .map(|(g, &x)| {
                    let u = C * (x + A * x * x * x);
                    let t = u.tanh();
                    let du = C * (1.0 + 3.0 * A * x * x);
                    g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
                })
                .collect();
            a.accumulate(&da);
        }))
    }

    pub fn abs(&self) -> Result<Tensor, AdError> {
        let values: Vec<f64> = self.values().iter().map(|v| v.abs()).collect();
        let a = self.clone();
        let xv = self.value_arc();
        Ok(Tensor::emit(self.shape().to_vec(), values, vec![self.clone()], move |g| {
            let da: Vec<f64> = g
                .iter()
                .zip(xv.iter())
                .map(|(g, x)| match x.partial_cmp(&0.0) {
                    Some(std::cmp::Ordering::Greater) => *g,
                    Some(std::cmp::Ordering::Less) => -*g,
                    _ => 0.0,
                })
                .collect();
            a.accumulate(&da);
        }))
    }

    // -- reductions -----------------------------------------------------

    pub fn sum(&self) -> Result<Tensor, AdError> {
        let total: f64 = self.values().iter().sum();
        let a = self.clone();
        let n = self.len();
        Ok(Tensor::emit(vec![1], vec![total], vec![self.clone()], move |g| {
            a.accumulate(&vec![g[0]; n]);
        }))
    }

    pub fn mean(&self) -> Result<Tensor, AdError> {
        let n = self.len();
        let total: f64 = self.values().iter().sum();
        let a = self.clone();
        Ok(Tensor::emit(vec![1], vec![total / n as f64], vec![self.clone()], move |g| {
            a.accumulate(&vec![g[0] / n as f64; n]);
        }))
    }

    // -- linear algebra ---------------------------------------------------

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, AdError> {
        let (m, k) = self.rows_cols();
        let (k2, n) = other.rows_cols();
        if k != k2 {
            return Err(AdError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let mut values = vec![0.0; m * n];
        matmul_nn(self.values(), other.values(), m, k, n, &mut values);
        let (a, b) = (self.clone(), other.clone());
        let (av, bv) = (self.value_arc(), other.value_arc());
        Ok(Tensor::emit(
            vec![m, n],
            values,
            vec![self.clone(), other.clone()],
            move |g| {
                if a.connected() {
                    // dA = g . B^T
                    let mut da = vec![0.0; m * k];
                    matmul_nt(g, &bv, m, n, k, &mut da);
                    a.accumulate(&da);
                }
                if b.connected() {
                    // dB = A^T . g
                    let mut db = vec![0.0; k * n];
                    matmul_tn(&av, g, m, k, n, &mut db);
                    b.accumulate(&db);
                }
            },
        ))
    }

    pub fn transpose(&self) -> Result<Tensor, AdError> {
        let (r, c) = self.rows_cols();
        let src = self.values();
        let mut values = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                values[j * r + i] = src[i * c + j];
            }
        }
        let a = self.clone();
        Ok(Tensor::emit(vec![c, r], values, vec![self.clone()], move |g| {
            let mut da = vec![0.0; r * c];
            for j in 0..c {
                for i in 0..r {
                    da[i * c + j] = g[j * r + i];
                }
            }
            a.accumulate(&da);
        }))
    }

    // -- row-wise normalizations -----------------------------------------

    /// Softmax over the last axis (per row of a matrix).
    pub fn softmax(&self) -> Result<Tensor, AdError> {
        let (r, c) = self.rows_cols();
        let mut values = vec![0.0; r * c];
        for (row_out, row_in) in values.chunks_mut(c).zip(self.values().chunks(c)) {
            let mx = row_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (o, v) in row_out.iter_mut().zip(row_in.iter()) {
                *o = (v - mx).exp();
                z += *o;
            }
            for o in row_out.iter_mut() {
                *o /= z;
            }
        }
        let a = self.clone();
        let yv = values.clone();
        Ok(Tensor::emit(self.shape().to_vec(), values, vec![self.clone()], move |g| {
            let mut da = vec![0.0; r * c];
            for ((da_row, g_row), y_row) in
                da.chunks_mut(c).zip(g.chunks(c)).zip(yv.chunks(c))
            {
                let dot: f64 = g_row.iter().zip(y_row.iter()).map(|(g, y)| g * y).sum();
                for ((d, g), y) in da_row.iter_mut().zip(g_row.iter()).zip(y_row.iter()) {
                    *d = y * (g - dot);
                }
            }
            a.accumulate(&da);
        }))
    }

    /// Layer normalization over the last axis with learnable affine.
    pub fn layer_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor, AdError> {
        let (r, c) = self.rows_cols();
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(AdError::ShapeMismatch {
                op: "layer_norm",
                lhs: self.shape().to_vec(),
                rhs: gamma.shape().to_vec(),
            });
        }
        let gv = gamma.value_arc();
        let bv = beta.value_arc();
        let mut values = vec![0.0; r * c];
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        for i in 0..r {
            let row = &self.values()[i * c..(i + 1) * c];
            let mu = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + eps).sqrt();
            inv_std[i] = s;
            for j in 0..c {
                let xh = (row[j] - mu) * s;
                xhat[i * c + j] = xh;
                values[i * c + j] = xh * gv[j] + bv[j];
            }
        }
        let (a, gt, bt) = (self.clone(), gamma.clone(), beta.clone());
        Ok(Tensor::emit(
            self.shape().to_vec(),
            values,
            vec![self.clone(), gamma.clone(), beta.clone()],
            move |g| {
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                let mut da = vec![0.0; r * c];
                for i in 0..r {
                    let g_row = &g[i * c..(i + 1) * c];
                    let xh_row = &xhat[i * c..(i + 1) * c];
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for j in 0..c {
                        dgamma[j] += g_row[j] * xh_row[j];
                        dbeta[j] += g_row[j];
                        let dxh = g_row[j] * gv[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xh_row[j];
                    }
                    mean_dxhat /= c as f64;
                    mean_dxhat_xhat /= c as f64;
                    for j in 0..c {
                        let dxh = g_row[j] * gv[j];
                        da[i * c + j] =
                            inv_std[i] * (dxh - mean_dxhat - xh_row[j] * mean_dxhat_xhat);
                    }
                }
                a.accumulate(&da);
                gt.accumulate(&dgamma);
                bt.accumulate(&dbeta);
            },
        ))
    }

    // -- sequence ops ------------------------------------------------------

    /// Causal 1-D convolution over a `(length, in_channels)` sequence.
    ///
    /// Weights are `(out_channels, kernel, in_channels)`; the input is
    /// zero-padded on the left by `kernel - 1`, so the output has the same
    /// length and output row `i` never sees input rows beyond `i`.
    pub fn conv1d(&self, weight: &Tensor, bias: &Tensor) -> Result<Tensor, AdError> {
        let (len, c_in) = self.rows_cols();
        let [c_out, kernel, w_cin] = *weight.shape() else {
            return Err(AdError::ShapeMismatch {
                op: "conv1d",
                lhs: self.shape().to_vec(),
                rhs: weight.shape().to_vec(),
            });
        };
        if w_cin != c_in || bias.shape() != [c_out] {
            return Err(AdError::ShapeMismatch {
                op: "conv1d",
                lhs: self.shape().to_vec(),
                rhs: weight.shape().to_vec(),
            });
        }
        let x = self.values();
        let w = weight.values();
        let b = bias.values();
        let mut values = vec![0.0; len * c_out];
        for i in 0..len {
            for co in 0..c_out {
                let mut acc = b[co];
                for k in 0..kernel {
                    let j = (i + k) as isize - (kernel as isize - 1);
                    if j < 0 {
                        continue;
                    }
                    let x_row = &x[j as usize * c_in..(j as usize + 1) * c_in];
                    let w_row = &w[(co * kernel + k) * c_in..(co * kernel + k + 1) * c_in];
                    for (xv, wv) in x_row.iter().zip(w_row.iter()) {
                        acc += xv * wv;
                    }
                }
                values[i * c_out + co] = acc;
            }
        }
        let (at, wt, bt) = (self.clone(), weight.clone(), bias.clone());
        let (xv, wv) = (self.value_arc(), weight.value_arc());
        Ok(Tensor::emit(
            vec![len, c_out],
            values,
            vec![self.clone(), weight.clone(), bias.clone()],
            move |g| {
                let mut dx = vec![0.0; len * c_in];
                let mut dw = vec![0.0; c_out * kernel * c_in];
                let mut db = vec![0.0; c_out];
                for i in 0..len {
                    let g_row = &g[i * c_out..(i + 1) * c_out];
                    for co in 0..c_out {
                        db[co] += g_row[co];
                    }
                    for k in 0..kernel {
                        let j = (i + k) as isize - (kernel as isize - 1);
                        if j < 0 {
                            continue;
                        }
                        let j = j as usize;
                        for co in 0..c_out {
                            let gv = g_row[co];
                            if gv == 0.0 {
                                continue;
                            }
                            let w_row =
                                &wv[(co * kernel + k) * c_in..(co * kernel + k + 1) * c_in];
                            let x_row = &xv[j * c_in..(j + 1) * c_in];
                            let dx_row = &mut dx[j * c_in..(j + 1) * c_in];
                            let dw_row =
                                &mut dw[(co * kernel + k) * c_in..(co * kernel + k + 1) * c_in];
                            for ci in 0..c_in {
                                dx_row[ci] += gv * w_row[ci];
                                dw_row[ci] += gv * x_row[ci];
                            }
                        }
                    }
                }
                at.accumulate(&dx);
                wt.accumulate(&dw);
                bt.accumulate(&db);
            },
        ))
    }

    /// Max pooling with width 2 and stride 2 along the sequence axis of a
    /// `(length, channels)` input. A trailing odd row is dropped.
    pub fn maxpool1d(&self) -> Result<Tensor, AdError> {
        let (len, c) = self.rows_cols();
        if len < 2 {
            return Err(AdError::TooShort { op: "maxpool1d", needed: 2, got: len });
        }
        let out_len = len / 2;
        let x = self.values();
        let mut values = vec![0.0; out_len * c];
        let mut argmax = vec![0usize; out_len * c];
        for o in 0..out_len {
            for j in 0..c {
                let top = x[2 * o * c + j];
                let bot = x[(2 * o + 1) * c + j];
                if bot > top {
                    values[o * c + j] = bot;
                    argmax[o * c + j] = (2 * o + 1) * c + j;
                } else {
                    values[o * c + j] = top;
                    argmax[o * c + j] = 2 * o * c + j;
                }
            }
        }
        let a = self.clone();
        let total = len * c;
        Ok(Tensor::emit(vec![out_len, c], values, vec![self.clone()], move |g| {
            let mut da = vec![0.0; total];
            for (gv, &src) in g.iter().zip(argmax.iter()) {
                da[src] += gv;
            }
            a.accumulate(&da);
        }))
    }

    // -- shape surgery ------------------------------------------------

    pub fn concat_rows(&self, other: &Tensor) -> Result<Tensor, AdError> {
        let (r1, c1) = self.rows_cols();
        let (r2, c2) = other.rows_cols();
        if c1 != c2 {
            return Err(AdError::ShapeMismatch {
                op: "concat_rows",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let mut values = Vec::with_capacity((r1 + r2) * c1);
        values.extend_from_slice(self.values());
        values.extend_from_slice(other.values());
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::emit(
            vec![r1 + r2, c1],
            values,
            vec![self.clone(), other.clone()],
            move |g| {
                a.accumulate(&g[..r1 * c1]);
                b.accumulate(&g[r1 * c1..]);
            },
        ))
    }

    pub fn concat_cols(&self, other: &Tensor) -> Result<Tensor, AdError> {
        let (r1, c1) = self.rows_cols();
        let (r2, c2) = other.rows_cols();
        if r1 != r2 {
            return Err(AdError::ShapeMismatch {
                op: "concat_cols",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let c = c1 + c2;
        let mut values = vec![0.0; r1 * c];
        for i in 0..r1 {
            values[i * c..i * c + c1].copy_from_slice(&self.values()[i * c1..(i + 1) * c1]);
            values[i * c + c1..(i + 1) * c]
                .copy_from_slice(&other.values()[i * c2..(i + 1) * c2]);
        }
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::emit(
            vec![r1, c],
            values,
            vec![self.clone(), other.clone()],
            move |g| {
                let mut da = vec![0.0; r1 * c1];
                let mut db = vec![0.0; r1 * c2];
                for i in 0..r1 {
                    da[i * c1..(i + 1) * c1].copy_from_slice(&g[i * c..i * c + c1]);
                    db[i * c2..(i + 1) * c2].copy_from_slice(&g[i * c + c1..(i + 1) * c]);
                }
                a.accumulate(&da);
                b.accumulate(&db);
            },
        ))
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Tensor, AdError> {
        let (r, c) = self.rows_cols();
        if start > end || end > r {
            return Err(AdError::ShapeMismatch {
                op: "slice_rows",
                lhs: self.shape().to_vec(),
                rhs: vec![start, end],
            });
        }
        let values = self.values()[start * c..end * c].to_vec();
        let a = self.clone();
        Ok(Tensor::emit(vec![end - start, c], values, vec![self.clone()], move |g| {
            let mut da = vec![0.0; r * c];
            da[start * c..end * c].copy_from_slice(g);
            a.accumulate(&da);
        }))
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Tensor, AdError> {
        let (r, c) = self.rows_cols();
        if start > end || end > c {
            return Err(AdError::ShapeMismatch {
                op: "slice_cols",
                lhs: self.shape().to_vec(),
                rhs: vec![start, end],
            });
        }
        let w = end - start;
        let mut values = vec![0.0; r * w];
        for i in 0..r {
            values[i * w..(i + 1) * w]
                .copy_from_slice(&self.values()[i * c + start..i * c + end]);
        }
        let a = self.clone();
        Ok(Tensor::emit(vec![r, w], values, vec![self.clone()], move |g| {
            let mut da = vec![0.0; r * c];
            for i in 0..r {
                da[i * c + start..i * c + end].copy_from_slice(&g[i * w..(i + 1) * w]);
            }
            a.accumulate(&da);
        }))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor, AdError> {
        let n: usize = shape.iter().product();
        if n != self.len() {
            return Err(AdError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape,
            });
        }
        let a = self.clone();
        Ok(Tensor::emit(shape, self.values().to_vec(), vec![self.clone()], move |g| {
            a.accumulate(g);
        }))
    }

    /// Gathers rows of a `(vocab, dim)` table by index.
    pub fn embedding_lookup(&self, indices: &[usize]) -> Result<Tensor, AdError> {
        let (v, d) = self.rows_cols();
        for &i in indices {
            if i >= v {
                return Err(AdError::ShapeMismatch {
                    op: "embedding_lookup",
                    lhs: self.shape().to_vec(),
                    rhs: vec![i],
                });
            }
        }
        let n = indices.len();
        let mut values = vec![0.0; n * d];
        for (row, &i) in indices.iter().enumerate() {
            values[row * d..(row + 1) * d].copy_from_slice(&self.values()[i * d..(i + 1) * d]);
        }
        let a = self.clone();
        let idx = indices.to_vec();
        Ok(Tensor::emit(vec![n, d], values, vec![self.clone()], move |g| {
            let mut da = vec![0.0; v * d];
            for (row, &i) in idx.iter().enumerate() {
                for j in 0..d {
                    da[i * d + j] += g[row * d + j];
                }
            }
            a.accumulate(&da);
        }))
    }
}

// --- matmul kernels (row-major) ---

/// out[m,n] += a[m,k] . b[k,n]
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o += aik * bv;
            }
        }
    }
}

/// out[m,k] += a[m,n] . b[k,n]^T
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (kk, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            let mut acc = 0.0;
            for (av, bv) in a_row.iter().zip(b_row.iter()) {
                acc += av * bv;
            }
            *o += acc;
        }
    }
}

/// out[k,n] += a[m,k]^T . b[m,n]
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (kk, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let out_row = &mut out[kk * n..(kk + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o += aik * bv;
            }
        }
    }
}

/// Naive nested-loop oracle for `conv1d`, kept independent of the op.
pub fn conv1d_reference(
    x: &[f64],
    len: usize,
    c_in: usize,
    w: &[f64],
    c_out: usize,
    kernel: usize,
    b: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; len * c_out];
    for i in 0..len {
        for co in 0..c_out {
            let mut acc = b[co];
            for k in 0..kernel {
                let j = i as isize + k as isize - (kernel as isize - 1);
                if j < 0 || j >= len as isize {
                    continue;
                }
                for ci in 0..c_in {
                    acc += x[j as usize * c_in + ci] * w[(co * kernel + k) * c_in + ci];
                }
            }
            out[i * c_out + co] = acc;
        }
    }
    out
}
