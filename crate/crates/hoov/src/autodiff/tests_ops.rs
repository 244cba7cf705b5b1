//! Forward-value and finite-difference tests for every core op.

use super::check::{all_probes, gradient_check, FD_TOL};
use super::*;
use crate::rng::Rng;
use std::sync::Arc;

fn rand_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

/// Random values kept away from zero so |.| and relu kinks stay out of the
/// finite-difference path.
fn rand_vec_off_kink(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v = rng.normal();
            v.signum() * (v.abs() + 0.2)
        })
        .collect()
}

/// Fixed pseudo-random readout so the scalarized loss weights every output
/// element differently.
fn readout(seed: u64, shape: &[usize]) -> Tensor {
    let mut rng = Rng::new(seed ^ 0xA5A5_5A5A);
    let n: usize = shape.iter().product();
    Tensor::constant(shape.to_vec(), (0..n).map(|_| rng.normal()).collect())
}

fn weighted_sum(t: &Tensor, seed: u64) -> Tensor {
    let w = readout(seed, t.shape());
    t.mul(&w).unwrap().sum().unwrap()
}

#[test]
fn matmul_forward_basics() {
    let a = Tensor::constant(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let b = Tensor::constant(vec![3, 4], (0..12).map(|i| i as f64).collect());
    let c = a.matmul(&b).unwrap();
    assert_eq!(c.shape(), &[2, 4]);
    // identity * A = A
    let eye = Tensor::constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
    let a2 = Tensor::constant(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let same = eye.matmul(&a2).unwrap();
    assert_eq!(same.values(), a2.values());
    // mismatched inner dim reports both shapes
    let err = a2.matmul(&eye).unwrap_err();
    match err {
        AdError::ShapeMismatch { lhs, rhs, .. } => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 2]);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn maxpool_forward_basics() {
    let x = Tensor::constant(vec![4, 1], vec![1.0, 3.0, 2.0, 5.0]);
    let y = x.maxpool1d().unwrap();
    assert_eq!(y.values(), &[3.0, 5.0]);
    // odd trailing row is dropped
    let x = Tensor::constant(vec![5, 1], vec![1.0, 3.0, 2.0, 5.0, 9.0]);
    let y = x.maxpool1d().unwrap();
    assert_eq!(y.values(), &[3.0, 5.0]);
}

#[test]
fn conv1d_matches_reference_oracle() {
    let mut rng = Rng::new(7);
    let (len, c_in, c_out, kernel) = (16, 4, 3, 3);
    let x = rand_vec(&mut rng, len * c_in);
    let w = rand_vec(&mut rng, c_out * kernel * c_in);
    let b = rand_vec(&mut rng, c_out);
    let expect = conv1d_reference(&x, len, c_in, &w, c_out, kernel, &b);
    let xt = Tensor::constant(vec![len, c_in], x);
    let wt = Tensor::constant(vec![c_out, kernel, c_in], w);
    let bt = Tensor::constant(vec![c_out], b);
    let y = xt.conv1d(&wt, &bt).unwrap();
    assert_eq!(y.shape(), &[len, c_out]);
    for (a, e) in y.values().iter().zip(expect.iter()) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn conv1d_is_causal() {
    // perturbing a later input row never changes an earlier output row
    let mut rng = Rng::new(9);
    let (len, c_in, c_out, kernel) = (12, 2, 2, 3);
    let x = rand_vec(&mut rng, len * c_in);
    let w = rand_vec(&mut rng, c_out * kernel * c_in);
    let b = rand_vec(&mut rng, c_out);
    let base = conv1d_reference(&x, len, c_in, &w, c_out, kernel, &b);
    for hit in 0..len {
        let mut x2 = x.clone();
        x2[hit * c_in] += 1.0;
        let out = conv1d_reference(&x2, len, c_in, &w, c_out, kernel, &b);
        for i in 0..hit {
            for co in 0..c_out {
                assert_eq!(out[i * c_out + co], base[i * c_out + co]);
            }
        }
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = Rng::new(3);
    let x = Tensor::constant(vec![4, 6], rand_vec(&mut rng, 24));
    let y = x.softmax().unwrap();
    for row in y.values().chunks(6) {
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|v| *v > 0.0));
    }
}

#[test]
fn embedding_lookup_gathers_rows() {
    let table = Tensor::constant(vec![4, 2], vec![0.0, 1.0, 10.0, 11.0, 20.0, 21.0, 30.0, 31.0]);
    let out = table.embedding_lookup(&[2, 0, 2]).unwrap();
    assert_eq!(out.values(), &[20.0, 21.0, 0.0, 1.0, 20.0, 21.0]);
    assert!(table.embedding_lookup(&[4]).is_err());
}

// --- gradient checks, one per op ---

macro_rules! grad_test {
    ($name:ident, $inputs:expr, $builder:expr) => {
        #[test]
        fn $name() {
            let mut rng = Rng::new(0x5EED ^ line!() as u64);
            let inputs: Vec<Vec<f64>> = $inputs(&mut rng);
            let probes = all_probes(&inputs);
            let report = gradient_check(&inputs, &probes, &$builder);
            assert!(
                report.max_rel_err < FD_TOL,
                "max rel err {} over {} probes",
                report.max_rel_err,
                report.checked
            );
        }
    };
}

grad_test!(
    grad_add_sub_mul,
    |rng: &mut Rng| vec![rand_vec(rng, 12), rand_vec(rng, 12), rand_vec(rng, 12)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 4], arcs[0].clone());
        let b = Tensor::param(vec![3, 4], arcs[1].clone());
        let c = Tensor::param(vec![3, 4], arcs[2].clone());
        let y = a.add(&b).unwrap().mul(&c).unwrap().sub(&b).unwrap();
        (weighted_sum(&y, 1), vec![a, b, c])
    }
);

grad_test!(
    grad_scalar_ops,
    |rng: &mut Rng| vec![rand_vec(rng, 10)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![10], arcs[0].clone());
        let y = a.mul_scalar(-2.5).unwrap().add_scalar(0.7).unwrap();
        (weighted_sum(&y, 2), vec![a])
    }
);

grad_test!(
    grad_add_bias,
    |rng: &mut Rng| vec![rand_vec(rng, 15), rand_vec(rng, 5)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 5], arcs[0].clone());
        let b = Tensor::param(vec![5], arcs[1].clone());
        let y = a.add_bias(&b).unwrap();
        (weighted_sum(&y, 3), vec![a, b])
    }
);

grad_test!(
    grad_matmul,
    |rng: &mut Rng| vec![rand_vec(rng, 12), rand_vec(rng, 20)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 4], arcs[0].clone());
        let b = Tensor::param(vec![4, 5], arcs[1].clone());
        let y = a.matmul(&b).unwrap();
        (weighted_sum(&y, 4), vec![a, b])
    }
);

grad_test!(
    grad_transpose,
    |rng: &mut Rng| vec![rand_vec(rng, 12)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 4], arcs[0].clone());
        let y = a.transpose().unwrap();
        (weighted_sum(&y, 5), vec![a])
    }
);

grad_test!(
    grad_relu,
    |rng: &mut Rng| vec![rand_vec_off_kink(rng, 16)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![4, 4], arcs[0].clone());
        let y = a.relu().unwrap();
        (weighted_sum(&y, 6), vec![a])
    }
);

grad_test!(
    grad_gelu,
    |rng: &mut Rng| vec![rand_vec(rng, 16)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![16], arcs[0].clone());
        let y = a.gelu().unwrap();
        (weighted_sum(&y, 7), vec![a])
    }
);

grad_test!(
    grad_tanh,
    |rng: &mut Rng| vec![rand_vec(rng, 16)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![16], arcs[0].clone());
        let y = a.tanh().unwrap();
        (weighted_sum(&y, 8), vec![a])
    }
);

grad_test!(
    grad_abs,
    |rng: &mut Rng| vec![rand_vec_off_kink(rng, 16)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![16], arcs[0].clone());
        let y = a.abs().unwrap();
        (weighted_sum(&y, 9), vec![a])
    }
);

grad_test!(
    grad_softmax,
    |rng: &mut Rng| vec![rand_vec(rng, 18)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 6], arcs[0].clone());
        let y = a.softmax().unwrap();
        (weighted_sum(&y, 10), vec![a])
    }
);

grad_test!(
    grad_layer_norm,
    |rng: &mut Rng| vec![rand_vec(rng, 24), rand_vec(rng, 6), rand_vec(rng, 6)],
    |arcs: &[Arc<Vec<f64>>]| {
        let x = Tensor::param(vec![4, 6], arcs[0].clone());
        let g = Tensor::param(vec![6], arcs[1].clone());
        let b = Tensor::param(vec![6], arcs[2].clone());
        let y = x.layer_norm(&g, &b, 1e-5).unwrap();
        (weighted_sum(&y, 11), vec![x, g, b])
    }
);

grad_test!(
    grad_conv1d,
    |rng: &mut Rng| {
        vec![rand_vec(rng, 10 * 3), rand_vec(rng, 4 * 3 * 3), rand_vec(rng, 4)]
    },
    |arcs: &[Arc<Vec<f64>>]| {
        let x = Tensor::param(vec![10, 3], arcs[0].clone());
        let w = Tensor::param(vec![4, 3, 3], arcs[1].clone());
        let b = Tensor::param(vec![4], arcs[2].clone());
        let y = x.conv1d(&w, &b).unwrap();
        (weighted_sum(&y, 12), vec![x, w, b])
    }
);

grad_test!(
    grad_maxpool,
    |rng: &mut Rng| {
        // well-separated values so the argmax never flips under the FD step
        let mut v = rand_vec(rng, 12 * 2);
        for (i, x) in v.iter_mut().enumerate() {
            *x = *x * 0.01 + i as f64 * ((i % 3) as f64 - 1.0);
        }
        vec![v]
    },
    |arcs: &[Arc<Vec<f64>>]| {
        let x = Tensor::param(vec![12, 2], arcs[0].clone());
        let y = x.maxpool1d().unwrap();
        (weighted_sum(&y, 13), vec![x])
    }
);

grad_test!(
    grad_concat_and_slice,
    |rng: &mut Rng| vec![rand_vec(rng, 12), rand_vec(rng, 8)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 4], arcs[0].clone());
        let b = Tensor::param(vec![2, 4], arcs[1].clone());
        let cat = a.concat_rows(&b).unwrap();
        let left = cat.slice_cols(0, 2).unwrap();
        let right = cat.slice_cols(2, 4).unwrap();
        let wide = left.concat_cols(&right).unwrap();
        let y = wide.slice_rows(1, 4).unwrap();
        (weighted_sum(&y, 14), vec![a, b])
    }
);

grad_test!(
    grad_reductions,
    |rng: &mut Rng| vec![rand_vec(rng, 9)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 3], arcs[0].clone());
        let y = a.sum().unwrap().add(&a.mean().unwrap()).unwrap();
        (y, vec![a])
    }
);

grad_test!(
    grad_embedding_lookup,
    |rng: &mut Rng| vec![rand_vec(rng, 5 * 3)],
    |arcs: &[Arc<Vec<f64>>]| {
        let table = Tensor::param(vec![5, 3], arcs[0].clone());
        let y = table.embedding_lookup(&[4, 0, 0, 2]).unwrap();
        (weighted_sum(&y, 15), vec![table])
    }
);

grad_test!(
    grad_reshape,
    |rng: &mut Rng| vec![rand_vec(rng, 12)],
    |arcs: &[Arc<Vec<f64>>]| {
        let a = Tensor::param(vec![3, 4], arcs[0].clone());
        let y = a.reshape(vec![4, 3]).unwrap().tanh().unwrap();
        (weighted_sum(&y, 16), vec![a])
    }
);

#[test]
fn grad_three_layer_mlp_matches_fd() {
    // composed-network check: random 3-layer MLP, every parameter probed
    let mut rng = Rng::new(0xF00D);
    let dims = [6usize, 8, 8, 4];
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    inputs.push(rand_vec(&mut rng, 2 * dims[0])); // batch of 2
    for w in dims.windows(2) {
        inputs.push(rand_vec(&mut rng, w[0] * w[1]).iter().map(|v| v * 0.5).collect());
        inputs.push(rand_vec(&mut rng, w[1]).iter().map(|v| v * 0.1).collect());
    }
    let builder = |arcs: &[Arc<Vec<f64>>]| {
        let x = Tensor::param(vec![2, dims[0]], arcs[0].clone());
        let mut h = x.clone();
        let mut leaves = vec![x];
        for (li, w) in dims.windows(2).enumerate() {
            let wt = Tensor::param(vec![w[0], w[1]], arcs[1 + 2 * li].clone());
            let bt = Tensor::param(vec![w[1]], arcs[2 + 2 * li].clone());
            h = h.matmul(&wt).unwrap().add_bias(&bt).unwrap();
            if li + 2 < dims.len() {
                h = h.tanh().unwrap();
            }
            leaves.push(wt);
            leaves.push(bt);
        }
        (weighted_sum(&h, 99), leaves)
    };
    let probes = all_probes(&inputs);
    let report = gradient_check(&inputs, &probes, &builder);
    assert!(report.max_rel_err < FD_TOL, "max rel err {}", report.max_rel_err);
}

#[test]
fn constant_only_graphs_record_nothing() {
    let a = Tensor::constant(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let b = Tensor::constant(vec![2, 2], vec![0.5; 4]);
    let y = a.matmul(&b).unwrap();
    assert!(y.inner.op.borrow().is_none());
}

#[test]
fn ops_do_not_mutate_inputs() {
    let vals = vec![1.0, -2.0, 3.0, -4.0];
    let a = Tensor::param(vec![4], Arc::new(vals.clone()));
    let _ = a.relu().unwrap();
    let _ = a.abs().unwrap();
    let _ = a.mul_scalar(3.0).unwrap();
    assert_eq!(a.values(), &vals[..]);
}
