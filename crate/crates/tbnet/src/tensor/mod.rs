//! Dense f32 tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is an immutable n-dimensional array in row-major order
//! (NCHW for images). Operations on tensors whose inputs require gradients
//! record their provenance; [`Tensor::backward`] replays the recorded tape
//! in reverse topological order to populate `grad` buffers.

mod kernels;
mod op;
pub mod ops;

pub(crate) use op::Op;

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: std::cell::Cell<bool> = const { std::cell::Cell::new(true) };
}

/// Disables gradient recording on the current thread while alive.
///
/// Inference on a frozen model wraps its forward pass in this guard so no
/// graph is built and the pass stays allocation-light and thread-safe.
pub struct NoGradGuard {
    prev: bool,
}

impl NoGradGuard {
    pub fn new() -> Self {
        let prev = GRAD_ENABLED.with(|g| g.replace(false));
        NoGradGuard { prev }
    }
}

impl Default for NoGradGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        let prev = self.prev;
        GRAD_ENABLED.with(|g| g.set(prev));
    }
}

pub(crate) fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

struct TensorInner {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f32>,
    grad: Mutex<Option<Vec<f32>>>,
    requires_grad: bool,
    /// The operation that produced this tensor; `None` for leaves.
    op: Option<Op>,
}

/// Dense n-dimensional f32 array, cheap to clone (shared storage).
#[derive(Clone)]
pub struct Tensor {
    inner: Arc<TensorInner>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={})",
            self.inner.shape, self.inner.requires_grad
        )
    }
}

impl Tensor {
    pub(crate) fn new_node(shape: Vec<usize>, data: Vec<f32>, op: Option<Op>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let requires_grad = op.is_some();
        Tensor {
            inner: Arc::new(TensorInner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                grad: Mutex::new(None),
                requires_grad,
                op,
            }),
        }
    }

    fn leaf(shape: Vec<usize>, data: Vec<f32>, requires_grad: bool) -> Tensor {
        Tensor {
            inner: Arc::new(TensorInner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                grad: Mutex::new(None),
                requires_grad,
                op: None,
            }),
        }
    }

    /// Builds a tensor from a flat row-major buffer.
    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Tensor> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::Shape {
                op: "from_vec",
                msg: format!(
                    "shape {:?} implies {} elements, buffer holds {}",
                    shape,
                    expect,
                    data.len()
                ),
            });
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape {
                op: "from_vec",
                msg: format!("shape {shape:?} has a zero dimension"),
            });
        }
        Ok(Tensor::leaf(shape.to_vec(), data, false))
    }

    /// Builds a trainable leaf (gradients accumulate here).
    pub fn param(shape: &[usize], data: Vec<f32>) -> Result<Tensor> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::Shape {
                op: "param",
                msg: format!(
                    "shape {:?} implies {} elements, buffer holds {}",
                    shape,
                    expect,
                    data.len()
                ),
            });
        }
        Ok(Tensor::leaf(shape.to_vec(), data, true))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::leaf(shape.to_vec(), vec![0.0; shape.iter().product()], false)
    }

    pub fn full(shape: &[usize], value: f32) -> Tensor {
        Tensor::leaf(shape.to_vec(), vec![value; shape.iter().product()], false)
    }

    pub fn scalar(value: f32) -> Tensor {
        Tensor::leaf(vec![1], vec![value], false)
    }

    /// Leaf copy of this tensor that requires gradients.
    pub fn requiring_grad(&self) -> Tensor {
        Tensor::leaf(self.inner.shape.clone(), self.inner.data.clone(), true)
    }

    /// Leaf copy of this tensor detached from any recorded graph.
    pub fn detach(&self) -> Tensor {
        Tensor::leaf(self.inner.shape.clone(), self.inner.data.clone(), false)
    }

    pub(crate) fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.inner.data
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Scalar value; panics if the tensor is not a single element.
    pub fn item(&self) -> f32 {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data[0]
    }

    /// Snapshot of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<f32>> {
        self.inner.grad.lock().unwrap().clone()
    }

    /// Removes and returns the accumulated gradient.
    pub fn take_grad(&self) -> Option<Vec<f32>> {
        self.inner.grad.lock().unwrap().take()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock().unwrap() = None;
    }

    pub(crate) fn accumulate_grad(&self, delta: &[f32]) {
        let mut slot = self.inner.grad.lock().unwrap();
        match slot.as_mut() {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    pub(crate) fn op(&self) -> Option<&Op> {
        self.inner.op.as_ref()
    }

    /// Replaces the underlying data buffer and clears the gradient. Only
    /// valid on leaves; the optimizer uses this to apply parameter steps
    /// without invalidating handles held by layers.
    pub(crate) fn replace_data(&mut self, data: Vec<f32>) {
        assert!(self.inner.op.is_none(), "replace_data on non-leaf tensor");
        assert_eq!(data.len(), self.inner.data.len());
        match Arc::get_mut(&mut self.inner) {
            Some(inner) => {
                inner.data = data;
                *inner.grad.get_mut().unwrap() = None;
            }
            None => {
                // A recorded graph still shares this storage; point the
                // caller's handle at a fresh leaf instead.
                self.inner = Arc::new(TensorInner {
                    id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                    shape: self.inner.shape.clone(),
                    data,
                    grad: Mutex::new(None),
                    requires_grad: self.inner.requires_grad,
                    op: None,
                });
            }
        }
    }

    /// Runs reverse-mode differentiation from this scalar loss.
    ///
    /// Gradients accumulate into every reachable tensor that requires them.
    /// Running twice on the same loss without clearing gradients is an error.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.inner.shape.clone()));
        }
        if self.grad().is_some() {
            return Err(Error::BackwardTwice);
        }
        let tape = self.record_tape();
        self.accumulate_grad(&[1.0]);
        for node in tape.iter().rev() {
            let op = match node.op() {
                Some(op) => op,
                None => continue,
            };
            let grad_out = node
                .grad()
                .expect("tape node missing gradient during backward");
            op.backward(node, &grad_out);
        }
        Ok(())
    }

    /// Orders every reachable grad-requiring node so that parents precede
    /// consumers (reverse replay then satisfies the chain rule).
    fn record_tape(&self) -> Vec<Tensor> {
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.id()) {
                continue;
            }
            stack.push((node.clone(), true));
            if let Some(op) = node.op() {
                for parent in op.parents() {
                    if parent.requires_grad() && !visited.contains(&parent.id()) {
                        stack.push((parent.clone(), false));
                    }
                }
            }
        }
        order
    }
}
