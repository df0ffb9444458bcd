//! Reverse-mode differentiation over the kernels in [`crate::ops`].
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Calling
//! [`Tape::backward`] does not consume or modify the recording, so it may be
//! called repeatedly on the same loss and always returns the same gradients.
//! Gradients are accumulated in reverse recording order, which makes the
//! result independent of thread scheduling.

use std::cell::{Ref, RefCell};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::ops::{self, Activation, Padding};
use crate::tensor::{Real, Shape, Tensor, UpsampleWeights};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    id: usize,
}

enum Op {
    Leaf,
    Conv { x: usize, w: usize, b: usize, padding: Padding },
    Act { x: usize, kind: Activation },
    Decimate { x: usize },
    Resize { x: usize, target: usize },
    Learned { x: usize, w: usize },
    Crop { x: usize, frames: usize },
    Concat { a: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mse { a: usize, b: usize },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<T> {
    id: u64,
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a leaf. It receives a gradient iff `tensor.requires_grad`.
    pub fn leaf(&self, mut tensor: Tensor<T>) -> Var {
        let needs_grad = tensor.requires_grad;
        tensor.grad = None;
        self.push(tensor, Op::Leaf, needs_grad)
    }

    pub fn constant(&self, mut tensor: Tensor<T>) -> Var {
        tensor.requires_grad = false;
        self.leaf(tensor)
    }

    pub fn param(&self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_grad())
    }

    pub fn value(&self, v: Var) -> Result<Ref<'_, Tensor<T>>> {
        self.check(v)?;
        Ok(Ref::map(self.nodes.borrow(), |n| &n[v.id].value))
    }

    pub fn shape(&self, v: Var) -> Result<Shape> {
        Ok(self.value(v)?.shape())
    }

    /// Value of a one-element tensor such as a loss.
    pub fn scalar(&self, v: Var) -> Result<T> {
        let t = self.value(v)?;
        if t.data().len() != 1 {
            return Err(Error::Usage(format!("{} is not a scalar", t.shape())));
        }
        Ok(t.data()[0])
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.tape != self.id || v.id >= self.nodes.borrow().len() {
            return Err(Error::Usage("variable was not recorded on this tape".into()));
        }
        Ok(())
    }

    fn push(&self, value: Tensor<T>, op: Op, needs_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, needs_grad });
        Var {
            tape: self.id,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].needs_grad)
    }

    fn unary(&self, x: Var, f: impl FnOnce(&Tensor<T>) -> Result<Tensor<T>>, op: Op) -> Result<Var> {
        self.check(x)?;
        let out = f(&self.nodes.borrow()[x.id].value)?;
        let needs = self.needs(&[x.id]);
        Ok(self.push(out, op, needs))
    }

    fn binary(
        &self,
        a: Var,
        b: Var,
        f: impl FnOnce(&Tensor<T>, &Tensor<T>) -> Result<Tensor<T>>,
        op: Op,
    ) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let out = {
            let nodes = self.nodes.borrow();
            f(&nodes[a.id].value, &nodes[b.id].value)?
        };
        let needs = self.needs(&[a.id, b.id]);
        Ok(self.push(out, op, needs))
    }

    /// `filters` is a (filter_size, in, out) tensor, `bias` a (1, 1, out) tensor.
    pub fn conv1d(&self, x: Var, filters: Var, bias: Var, padding: Padding) -> Result<Var> {
        for v in [x, filters, bias] {
            self.check(v)?;
        }
        let out = {
            let nodes = self.nodes.borrow();
            ops::conv1d_raw(
                &nodes[x.id].value,
                &nodes[filters.id].value,
                nodes[bias.id].value.data(),
                padding,
            )?
        };
        let needs = self.needs(&[x.id, filters.id, bias.id]);
        Ok(self.push(
            out,
            Op::Conv {
                x: x.id,
                w: filters.id,
                b: bias.id,
                padding,
            },
            needs,
        ))
    }

    pub fn activation(&self, x: Var, kind: Activation) -> Result<Var> {
        self.unary(x, |t| Ok(ops::activation(t, kind)), Op::Act { x: x.id, kind })
    }

    pub fn decimate(&self, x: Var, require_odd: bool) -> Result<Var> {
        self.unary(x, |t| ops::decimate(t, require_odd), Op::Decimate { x: x.id })
    }

    pub fn upsample_linear(&self, x: Var) -> Result<Var> {
        let n = self.shape(x)?.frames;
        if n < 2 {
            return Err(Error::size("upsample", format!("need at least 2 frames, got {n}")));
        }
        self.resize_linear(x, 2 * n - 1)
    }

    pub fn resize_linear(&self, x: Var, target: usize) -> Result<Var> {
        self.unary(x, |t| ops::resize_linear(t, target), Op::Resize { x: x.id, target })
    }

    /// `w` is a (1, 1, channels) tensor of pre-sigmoid weights.
    pub fn upsample_learned(&self, x: Var, w: Var) -> Result<Var> {
        self.binary(
            x,
            w,
            |x, w| {
                ops::upsample_learned(
                    x,
                    &UpsampleWeights {
                        w: w.data().to_vec(),
                    },
                )
            },
            Op::Learned { x: x.id, w: w.id },
        )
    }

    pub fn crop_center(&self, x: Var, frames: usize) -> Result<Var> {
        self.unary(x, |t| ops::crop_center(t, frames), Op::Crop { x: x.id, frames })
    }

    pub fn concat_channels(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, ops::concat_channels, Op::Concat { a: a.id, b: b.id })
    }

    pub fn concat_crop(&self, high_level: Var, local: Var) -> Result<Var> {
        let frames = self.shape(high_level)?.frames;
        let cropped = self.crop_center(local, frames)?;
        self.concat_channels(high_level, cropped)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, ops::add, Op::Add { a: a.id, b: b.id })
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, ops::sub, Op::Sub { a: a.id, b: b.id })
    }

    pub fn mse(&self, pred: Var, target: Var) -> Result<Var> {
        self.binary(
            pred,
            target,
            |p, t| Ok(Tensor::scalar(ops::mse_loss(p, t)?)),
            Op::Mse { a: pred.id, b: target.id },
        )
    }

    /// Gradients of a scalar `loss` with respect to every leaf that requires
    /// them.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        self.check(loss)?;
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.data().len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got {}",
                nodes[loss.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.id).map(|_| None).collect();
        grads[loss.id] = Some(vec![T::one()]);

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[id] = Some(g);
                continue;
            }
            let mut send = |target: usize, contribution: Vec<T>| {
                if !nodes[target].needs_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(acc) => {
                        for (a, c) in acc.iter_mut().zip(contribution) {
                            *a = *a + c;
                        }
                    }
                    slot @ None => *slot = Some(contribution),
                }
            };
            match node.op {
                Op::Leaf => unreachable!(),
                Op::Conv { x, w, b, padding } => {
                    let cg = ops::conv1d_backward(&nodes[x].value, &nodes[w].value, padding, &g);
                    send(x, cg.input);
                    send(w, cg.filters);
                    send(b, cg.bias);
                }
                Op::Act { x, kind } => {
                    let gx = ops::activation_backward(
                        nodes[x].value.data(),
                        node.value.data(),
                        kind,
                        &g,
                    );
                    send(x, gx);
                }
                Op::Decimate { x } => send(x, ops::decimate_backward(nodes[x].value.shape(), &g)),
                Op::Resize { x, target } => {
                    send(x, ops::resize_linear_backward(nodes[x].value.shape(), target, &g))
                }
                Op::Learned { x, w } => {
                    let (gx, gw) =
                        ops::upsample_learned_backward(&nodes[x].value, nodes[w].value.data(), &g);
                    send(x, gx);
                    send(w, gw);
                }
                Op::Crop { x, frames } => {
                    send(x, ops::crop_center_backward(nodes[x].value.shape(), frames, &g))
                }
                Op::Concat { a, b } => {
                    let (ga, gb) = ops::concat_channels_backward(
                        nodes[a].value.channels(),
                        nodes[b].value.channels(),
                        &g,
                    );
                    send(a, ga);
                    send(b, gb);
                }
                Op::Add { a, b } => {
                    send(a, g.clone());
                    send(b, g);
                }
                Op::Sub { a, b } => {
                    send(a, g.clone());
                    send(b, g.iter().map(|&v| -v).collect());
                }
                Op::Mse { a, b } => {
                    let (pa, pb) = (nodes[a].value.data(), nodes[b].value.data());
                    let scale = T::from_f64(2.0) * g[0] / T::from_f64(pa.len() as f64);
                    let ga: Vec<T> = pa.iter().zip(pb).map(|(&p, &t)| scale * (p - t)).collect();
                    if nodes[b].needs_grad {
                        send(b, ga.iter().map(|&v| -v).collect());
                    }
                    send(a, ga);
                }
            }
        }

        let leaves = grads
            .into_iter()
            .enumerate()
            .filter_map(|(id, g)| {
                let node = &nodes[id];
                match (g, &node.op) {
                    (Some(g), Op::Leaf) => Some((id, Tensor::new(node.value.shape(), g).ok()?)),
                    _ => None,
                }
            })
            .collect();
        Ok(Gradients {
            tape: self.id,
            leaves,
        })
    }

    /// Copy of a leaf's value with its gradient attached.
    pub fn leaf_with_grad(&self, v: Var, grads: &Gradients<T>) -> Result<Tensor<T>> {
        let mut t = self.value(v)?.clone();
        t.grad = grads.get(v).map(|g| g.data().to_vec());
        Ok(t)
    }
}

/// Leaf gradients produced by one backward pass.
#[derive(Debug)]
pub struct Gradients<T> {
    tape: u64,
    leaves: Vec<(usize, Tensor<T>)>,
}

impl<T: Real> Gradients<T> {
    /// `None` when `v` is not a leaf requiring gradients, belongs to another
    /// tape, or does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.leaves
            .binary_search_by_key(&v.id, |(id, _)| *id)
            .ok()
            .map(|i| &self.leaves[i].1)
    }
}
