//! Dense-tensor reverse-mode differentiation, sized for desk-scale training.
//!
//! Define-by-run: every op allocates a fresh node holding its forward value
//! and a backward closure; `backward` on a scalar loss walks the recorded
//! graph once in reverse topological order, accumulating gradients into the
//! leaves that asked for them, and frees the graph edges as it goes. All
//! arithmetic is f64.
//!
//! Graphs are single-owner (`Rc`-linked, not `Send`); independent graphs
//! may run on separate threads, which is how training parallelizes over a
//! batch. Values are shared through `Arc` so binding a parameter into a
//! graph never copies it.

mod ops;

pub mod check;

#[cfg(test)]
mod tests_ops;

pub use ops::conv1d_reference;

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum AdError {
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    NotScalar { shape: Vec<usize> },
    TooShort { op: &'static str, needed: usize, got: usize },
}

impl fmt::Display for AdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdError::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch {lhs:?} vs {rhs:?}")
            }
            AdError::NotScalar { shape } => {
                write!(f, "backward needs a scalar loss, got shape {shape:?}")
            }
            AdError::TooShort { op, needed, got } => {
                write!(f, "{op}: input length {got} shorter than {needed}")
            }
        }
    }
}

impl std::error::Error for AdError {}

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

type BackwardFn = Box<dyn FnOnce(&[f64])>;

struct OpRecord {
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Inner {
    id: usize,
    shape: Vec<usize>,
    values: Arc<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    wants_grad: bool,
    op: RefCell<Option<OpRecord>>,
}

/// A value in the computation graph. Cloning is cheap (shared node).
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("wants_grad", &self.inner.wants_grad)
            .finish()
    }
}

impl Tensor {
    fn from_op(shape: Vec<usize>, values: Vec<f64>, record: Option<OpRecord>) -> Tensor {
        debug_assert_eq!(values.len(), shape.iter().product::<usize>());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                values: Arc::new(values),
                grad: RefCell::new(None),
                wants_grad: false,
                op: RefCell::new(record),
            }),
        }
    }

    /// Leaf that accumulates a gradient (a parameter binding).
    pub fn param(shape: Vec<usize>, values: Arc<Vec<f64>>) -> Tensor {
        assert_eq!(values.len(), shape.iter().product::<usize>());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                values,
                grad: RefCell::new(None),
                wants_grad: true,
                op: RefCell::new(None),
            }),
        }
    }

    /// Leaf that does not participate in gradients (inputs, masks).
    pub fn constant(shape: Vec<usize>, values: Vec<f64>) -> Tensor {
        assert_eq!(values.len(), shape.iter().product::<usize>());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                values: Arc::new(values),
                grad: RefCell::new(None),
                wants_grad: false,
                op: RefCell::new(None),
            }),
        }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::constant(vec![1], vec![v])
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn len(&self) -> usize {
        self.inner.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.inner.values
    }

    pub fn value_arc(&self) -> Arc<Vec<f64>> {
        Arc::clone(&self.inner.values)
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.len(), 1, "item() on non-scalar tensor");
        self.inner.values[0]
    }

    /// Gradient accumulated by the last `backward`, if this is a
    /// grad-wanting leaf that the loss reached.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    fn accumulate(&self, delta: &[f64]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta.iter()) {
                    *gi += di;
                }
            }
            None => {
                *slot = Some(delta.to_vec());
            }
        }
    }

    fn rows_cols(&self) -> (usize, usize) {
        match self.inner.shape.as_slice() {
            [r, c] => (*r, *c),
            [n] => (1, *n),
            s => panic!("expected a matrix or vector, got shape {s:?}"),
        }
    }
}

/// Propagates d(loss)/d(leaf) into every grad-wanting leaf reachable from
/// `loss`, consuming the recorded graph.
pub fn backward(loss: &Tensor) -> Result<(), AdError> {
    if loss.len() != 1 {
        return Err(AdError::NotScalar { shape: loss.shape().to_vec() });
    }

    // reverse topological order by iterative DFS
    let mut order: Vec<Tensor> = Vec::new();
    let mut visited = std::collections::HashSet::new();
    let mut stack: Vec<(Tensor, bool)> = vec![(loss.clone(), false)];
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            order.push(node);
            continue;
        }
        if !visited.insert(node.inner.id) {
            continue;
        }
        stack.push((node.clone(), true));
        if let Some(record) = node.inner.op.borrow().as_ref() {
            for p in &record.parents {
                if !visited.contains(&p.inner.id) {
                    stack.push((p.clone(), false));
                }
            }
        }
    }

    loss.accumulate(&[1.0]);
    for node in order.iter().rev() {
        let record = node.inner.op.borrow_mut().take();
        let Some(record) = record else { continue };
        let grad = if node.inner.wants_grad {
            node.inner.grad.borrow().clone()
        } else {
            node.inner.grad.borrow_mut().take()
        };
        if let Some(grad) = grad {
            (record.backward)(&grad);
        }
        // parents dropped here with the record, freeing graph edges
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let x = Tensor::param(vec![3], Arc::new(vec![1.0, 2.0, 3.0]));
        let y = x.mul(&x).unwrap().sum().unwrap();
        assert_eq!(y.item(), 14.0);
        backward(&y).unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::param(vec![2], Arc::new(vec![1.0, 2.0]));
        let y = x.mul_scalar(2.0).unwrap();
        assert!(matches!(backward(&y), Err(AdError::NotScalar { .. })));
    }

    #[test]
    fn shared_subexpression_accumulates_both_paths() {
        // y = x*x + x  =>  dy/dx = 2x + 1
        let x = Tensor::param(vec![1], Arc::new(vec![3.0]));
        let y = x.mul(&x).unwrap().add(&x).unwrap().sum().unwrap();
        backward(&y).unwrap();
        assert_eq!(x.grad().unwrap(), vec![7.0]);
    }

    #[test]
    fn independent_graphs_are_bit_identical() {
        let run = || {
            let x = Tensor::param(vec![4], Arc::new(vec![0.3, -0.7, 1.9, 0.01]));
            let y = x.mul(&x).unwrap().abs().unwrap().sum().unwrap();
            backward(&y).unwrap();
            x.grad().unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn graph_edges_are_freed_after_backward() {
        let x = Tensor::param(vec![2], Arc::new(vec![1.0, 2.0]));
        let y = x.mul(&x).unwrap();
        let loss = y.sum().unwrap();
        backward(&loss).unwrap();
        assert!(loss.inner.op.borrow().is_none());
        assert!(y.inner.op.borrow().is_none());
    }
}
