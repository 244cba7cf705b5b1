//! Central finite-difference gradient checking.
//!
//! The harness is the master numerical oracle for this module: every op's
//! backward closure must agree with a two-sided difference quotient of its
//! forward pass. It lives in the public API so the acceptance suite can
//! drive it.

use super::Tensor;
use std::sync::Arc;

/// Builds a fresh scalar-loss graph from input buffers, returning the loss
/// and the grad-wanting leaves aligned with the inputs.
pub type GraphBuilder<'a> = &'a dyn Fn(&[Arc<Vec<f64>>]) -> (Tensor, Vec<Tensor>);

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance: |analytic - fd| / (|analytic| + 1e-8).
pub const FD_TOL: f64 = 1e-4;

/// Outcome of one gradient comparison.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compares analytic gradients of `f` against central finite differences.
///
/// `f` maps input buffers to a scalar loss by building a fresh graph; it is
/// called once per probe plus once for the analytic pass. `probes` selects
/// which (input, element) pairs to difference; pass every index for an
/// exhaustive check.
pub fn gradient_check(
    inputs: &[Vec<f64>],
    probes: &[(usize, usize)],
    f: GraphBuilder,
) -> GradReport {
    let arcs: Vec<Arc<Vec<f64>>> = inputs.iter().map(|v| Arc::new(v.clone())).collect();
    let (loss, leaves) = f(&arcs);
    super::backward(&loss).expect("scalar loss");
    let analytic: Vec<Option<Vec<f64>>> = leaves.iter().map(|l| l.grad()).collect();

    let mut max_rel_err: f64 = 0.0;
    for &(input_idx, elem_idx) in probes {
        let eval = |delta: f64| -> f64 {
            let mut perturbed: Vec<Arc<Vec<f64>>> = arcs.clone();
            let mut v = inputs[input_idx].clone();
            v[elem_idx] += delta;
            perturbed[input_idx] = Arc::new(v);
            let (loss, _) = f(&perturbed);
            loss.item()
        };
        let fd = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
        let a = analytic[input_idx]
            .as_ref()
            .map(|g| g[elem_idx])
            .unwrap_or(0.0);
        let rel = (a - fd).abs() / (a.abs() + 1e-8);
        if rel > max_rel_err {
            max_rel_err = rel;
        }
    }
    GradReport { max_rel_err, checked: probes.len() }
}

/// Every element of every input as a probe list.
pub fn all_probes(inputs: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, v) in inputs.iter().enumerate() {
        for j in 0..v.len() {
            out.push((i, j));
        }
    }
    out
}
