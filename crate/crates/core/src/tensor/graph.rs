use std::cell::{Cell, RefCell};
use std::rc::Rc;

use super::conv::{self, ConvDims};
use super::{sigmoid, softplus, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        dims: ConvDims,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Ln(Var),
    Recip(Var),
    ClampMin(Var, f64),
    Softmax(Var),
    Sum(Var),
    Reshape(Var),
    Concat(Vec<Var>),
    Slice {
        src: Var,
        start: usize,
    },
    Stack(Vec<Var>),
    KlDiv(Var, Var),
    SoftMin {
        inputs: Vec<Var>,
        weights: Vec<f64>,
    },
    SoftDtw {
        delta: Var,
        n: usize,
        m: usize,
        gamma: f64,
        table: Vec<f64>,
    },
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode tape. Ops append nodes; [`Graph::backward`] sweeps them in
/// reverse once.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Vec<f64>>>>,
    done: Cell<bool>,
}

fn shape_err<T>(what: &str, a: &[usize], b: &[usize]) -> Result<T> {
    Err(Error::Shape(format!("{what}: {a:?} vs {b:?}")))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// Registers a tensor; gradients are tracked only when `requires_grad`.
    pub fn leaf(&self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn param(&self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> Rc<Tensor> {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).map(f);
        let rg = self.needs(&[a]);
        self.push(value, op, rg)
    }

    fn binary(&self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return shape_err(what, va.shape(), vb.shape());
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::from_vec(va.shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    /// Same-padded cross-correlation of `input [C_in,H,W]` with
    /// `kernel [C_out,C_in,k,k]` plus optional `bias [C_out]`.
    pub fn conv2d(&self, input: Var, kernel: Var, bias: Option<Var>) -> Result<Var> {
        let (vi, vk) = (self.value(input), self.value(kernel));
        let (si, sk) = (vi.shape(), vk.shape());
        if si.len() != 3 || sk.len() != 4 || sk[1] != si[0] || sk[2] != sk[3] || sk[2] % 2 == 0 {
            return shape_err("conv2d input/kernel", si, sk);
        }
        let dims = ConvDims {
            c_in: si[0],
            c_out: sk[0],
            height: si[1],
            width: si[2],
            k: sk[2],
        };
        let vb = bias.map(|b| self.value(b));
        if let Some(b) = &vb {
            if b.shape() != [dims.c_out] {
                return shape_err("conv2d bias", b.shape(), &[dims.c_out]);
            }
        }
        let out = conv::forward(dims, vi.data(), vk.data(), vb.as_ref().map(|b| b.data()));
        let value = Tensor::from_vec(vec![dims.c_out, dims.height, dims.width], out)?;
        let mut deps = vec![input, kernel];
        deps.extend(bias);
        let rg = self.needs(&deps);
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                dims,
            },
            rg,
        ))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "hadamard", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scalar_mul(&self, a: Var, s: f64) -> Var {
        self.unary(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn add_scalar(&self, a: Var, s: f64) -> Var {
        self.unary(a, |x| x + s, Op::Offset(a))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn softplus(&self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    pub fn ln(&self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Ln(a))
    }

    pub fn recip(&self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / x, Op::Recip(a))
    }

    /// `max(a, lo)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&self, a: Var, lo: f64) -> Var {
        self.unary(a, |x| x.max(lo), Op::ClampMin(a, lo))
    }

    /// Softmax over every element of `a`, keeping its shape.
    pub fn map_softmax(&self, a: Var) -> Var {
        let va = self.value(a);
        let max = va.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = va.data().iter().map(|x| (x - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value =
            Tensor::from_vec(va.shape().to_vec(), exps.iter().map(|e| e / total).collect()).expect("same shape");
        let rg = self.needs(&[a]);
        self.push(value, Op::Softmax(a), rg)
    }

    pub fn sum(&self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).reshape(shape)?;
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Concatenation along the leading axis.
    pub fn concat(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty("concat of nothing".into()));
        }
        let first = self.value(parts[0]);
        let tail = first.shape()[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for p in parts {
            let v = self.value(*p);
            if v.shape()[1..] != tail[..] {
                return shape_err("concat", first.shape(), v.shape());
            }
            lead += v.shape()[0];
            data.extend_from_slice(v.data());
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        let value = Tensor::from_vec(shape, data)?;
        let rg = self.needs(parts);
        Ok(self.push(value, Op::Concat(parts.to_vec()), rg))
    }

    /// Rows `start..start + len` of the leading axis.
    pub fn slice(&self, src: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(src);
        let lead = v.shape()[0];
        if len == 0 || start + len > lead {
            return Err(Error::Shape(format!(
                "slice {start}..{} of leading axis {lead}",
                start + len
            )));
        }
        let inner: usize = v.shape()[1..].iter().product();
        let mut shape = v.shape().to_vec();
        shape[0] = len;
        let value = Tensor::from_vec(shape, v.data()[start * inner..(start + len) * inner].to_vec())?;
        let rg = self.needs(&[src]);
        Ok(self.push(value, Op::Slice { src, start }, rg))
    }

    /// Packs scalar nodes into a tensor of the given shape.
    pub fn stack(&self, scalars: &[Var], shape: &[usize]) -> Result<Var> {
        let mut data = Vec::with_capacity(scalars.len());
        for s in scalars {
            let v = self.value(*s);
            if v.len() != 1 {
                return shape_err("stack expects scalars", v.shape(), &[1]);
            }
            data.push(v.item());
        }
        let value = Tensor::from_vec(shape.to_vec(), data)?;
        let rg = self.needs(scalars);
        Ok(self.push(value, Op::Stack(scalars.to_vec()), rg))
    }

    /// `sum_j p_j ln(p_j / q_j)` over all elements.
    pub fn kl_div(&self, p: Var, q: Var) -> Result<Var> {
        let (vp, vq) = (self.value(p), self.value(q));
        if vp.shape() != vq.shape() {
            return shape_err("kl_div", vp.shape(), vq.shape());
        }
        let total = vp
            .data()
            .iter()
            .zip(vq.data())
            .map(|(a, b)| if *a == 0.0 { 0.0 } else { a * (a / b).ln() })
            .sum();
        let rg = self.needs(&[p, q]);
        Ok(self.push(Tensor::scalar(total), Op::KlDiv(p, q), rg))
    }

    /// `-gamma ln sum_i exp(-a_i / gamma)` over scalar nodes, max-shifted.
    pub fn soft_min(&self, inputs: &[Var], gamma: f64) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::Empty("soft_min of an empty list".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
        }
        let vals: Vec<f64> = inputs.iter().map(|v| self.scalar_value(*v)).collect();
        let (value, weights) = soft_min_weights(&vals, gamma);
        let rg = self.needs(inputs);
        Ok(self.push(
            Tensor::scalar(value),
            Op::SoftMin {
                inputs: inputs.to_vec(),
                weights,
            },
            rg,
        ))
    }

    /// Soft dynamic time warping over an `[n, m]` cost matrix.
    pub fn soft_dtw(&self, delta: Var, gamma: f64) -> Result<Var> {
        if !(gamma > 0.0) {
            return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
        }
        let vd = self.value(delta);
        if vd.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "soft_dtw needs an [n, m] matrix, got {:?}",
                vd.shape()
            )));
        }
        let (n, m) = (vd.shape()[0], vd.shape()[1]);
        let table = soft_dtw_table(vd.data(), n, m, gamma);
        let value = table[(n + 1) * (m + 1) - 1];
        let rg = self.needs(&[delta]);
        Ok(self.push(
            Tensor::scalar(value),
            Op::SoftDtw {
                delta,
                n,
                m,
                gamma,
                table,
            },
            rg,
        ))
    }

    /// Propagates d`loss`/d`node` to every node that requires a gradient.
    /// A graph can be differentiated once.
    pub fn backward(&self, loss: Var) -> Result<()> {
        if self.done.replace(true) {
            return Err(Error::Graph("backward already ran on this graph".into()));
        }
        let nodes = self.nodes.borrow();
        if nodes[loss.0].value.len() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            let mut acc = |v: Var, delta: &dyn Fn(usize) -> f64| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                let n = nodes[v.0].value.len();
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
                for (i, s) in slot.iter_mut().enumerate() {
                    *s += delta(i);
                }
            };
            let out = node.value.data();
            match &node.op {
                Op::Leaf => unreachable!("leaves are handled above"),
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    dims,
                } => {
                    let (vi, vk) = (&nodes[input.0].value, &nodes[kernel.0].value);
                    let (gi, gk, gb) = conv::backward(
                        *dims,
                        vi.data(),
                        vk.data(),
                        &g,
                        nodes[input.0].requires_grad,
                        nodes[kernel.0].requires_grad,
                    );
                    if let Some(gi) = gi {
                        acc(*input, &|i| gi[i]);
                    }
                    if let Some(gk) = gk {
                        acc(*kernel, &|i| gk[i]);
                    }
                    if let Some(b) = bias {
                        acc(*b, &|i| gb[i]);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, &|i| g[i]);
                    acc(*b, &|i| g[i]);
                }
                Op::Sub(a, b) => {
                    acc(*a, &|i| g[i]);
                    acc(*b, &|i| -g[i]);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    acc(*a, &|i| g[i] * vb[i]);
                    acc(*b, &|i| g[i] * va[i]);
                }
                Op::Scale(a, s) => acc(*a, &|i| g[i] * s),
                Op::Offset(a) | Op::Reshape(a) => acc(*a, &|i| g[i]),
                Op::Sigmoid(a) => acc(*a, &|i| g[i] * out[i] * (1.0 - out[i])),
                Op::Tanh(a) => acc(*a, &|i| g[i] * (1.0 - out[i] * out[i])),
                Op::Softplus(a) => {
                    let va = nodes[a.0].value.data();
                    acc(*a, &|i| g[i] * sigmoid(va[i]))
                }
                Op::Ln(a) => {
                    let va = nodes[a.0].value.data();
                    acc(*a, &|i| g[i] / va[i])
                }
                Op::Recip(a) => acc(*a, &|i| -g[i] * out[i] * out[i]),
                Op::ClampMin(a, lo) => {
                    let va = nodes[a.0].value.data();
                    acc(*a, &|i| if va[i] > *lo { g[i] } else { 0.0 })
                }
                Op::Softmax(a) => {
                    let dot: f64 = g.iter().zip(out).map(|(x, y)| x * y).sum();
                    acc(*a, &|i| out[i] * (g[i] - dot))
                }
                Op::Sum(a) => acc(*a, &|_| g[0]),
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = nodes[p.0].value.len();
                        acc(*p, &|i| g[offset + i]);
                        offset += n;
                    }
                }
                Op::Slice { src, start } => {
                    let inner: usize = nodes[src.0].value.shape()[1..].iter().product();
                    let lo = start * inner;
                    let hi = lo + g.len();
                    acc(*src, &|i| if i >= lo && i < hi { g[i - lo] } else { 0.0 })
                }
                Op::Stack(parts) => {
                    for (k, p) in parts.iter().enumerate() {
                        acc(*p, &|_| g[k]);
                    }
                }
                Op::KlDiv(p, q) => {
                    let (vp, vq) = (nodes[p.0].value.data(), nodes[q.0].value.data());
                    acc(*p, &|i| {
                        if vp[i] == 0.0 {
                            0.0
                        } else {
                            g[0] * ((vp[i] / vq[i]).ln() + 1.0)
                        }
                    });
                    acc(*q, &|i| -g[0] * vp[i] / vq[i]);
                }
                Op::SoftMin { inputs, weights } => {
                    for (v, w) in inputs.iter().zip(weights) {
                        acc(*v, &|_| g[0] * w);
                    }
                }
                Op::SoftDtw {
                    delta,
                    n,
                    m,
                    gamma,
                    table,
                } => {
                    let gd = soft_dtw_grad(table, *n, *m, *gamma);
                    acc(*delta, &|i| g[0] * gd[i]);
                }
            }
        }
        drop(nodes);
        *self.grads.borrow_mut() = grads;
        Ok(())
    }

    /// Gradient of the last backward pass with respect to `v`; zeros when `v`
    /// did not influence the loss.
    pub fn grad(&self, v: Var) -> Tensor {
        let shape = self.shape(v);
        match self.grads.borrow().get(v.0).and_then(|g| g.clone()) {
            Some(data) => Tensor::from_vec(shape, data).expect("gradient matches value shape"),
            None => Tensor::zeros(&shape),
        }
    }
}

/// Soft minimum and its gradient weights (a softmax of `-a / gamma`).
/// Infinite inputs are allowed and receive zero weight.
pub(crate) fn soft_min_weights(vals: &[f64], gamma: f64) -> (f64, Vec<f64>) {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if lo == f64::INFINITY {
        return (f64::INFINITY, vec![0.0; vals.len()]);
    }
    let exps: Vec<f64> = vals.iter().map(|a| (-(a - lo) / gamma).exp()).collect();
    let total: f64 = exps.iter().sum();
    let value = lo - gamma * total.ln();
    (value, exps.iter().map(|e| e / total).collect())
}

/// Forward table `R` of size `(n + 1) x (m + 1)` with `R[0][0] = 0` and
/// infinite borders.
pub(crate) fn soft_dtw_table(delta: &[f64], n: usize, m: usize, gamma: f64) -> Vec<f64> {
    let w = m + 1;
    let mut r = vec![f64::INFINITY; (n + 1) * w];
    r[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let prev = [r[(i - 1) * w + j], r[i * w + j - 1], r[(i - 1) * w + j - 1]];
            let (sm, _) = soft_min_weights(&prev, gamma);
            r[i * w + j] = delta[(i - 1) * m + (j - 1)] + sm;
        }
    }
    r
}

/// d R[n][m] / d delta, accumulated by walking the table backwards and
/// splitting each cell's adjoint over its predecessors with soft-min weights.
pub(crate) fn soft_dtw_grad(table: &[f64], n: usize, m: usize, gamma: f64) -> Vec<f64> {
    let w = m + 1;
    let mut adj = vec![0.0; (n + 1) * w];
    adj[n * w + m] = 1.0;
    let mut grad = vec![0.0; n * m];
    for i in (1..=n).rev() {
        for j in (1..=m).rev() {
            let a = adj[i * w + j];
            grad[(i - 1) * m + (j - 1)] = a;
            if a == 0.0 {
                continue;
            }
            let preds = [(i - 1, j), (i, j - 1), (i - 1, j - 1)];
            let prev: Vec<f64> = preds.iter().map(|(pi, pj)| table[pi * w + pj]).collect();
            let (_, weights) = soft_min_weights(&prev, gamma);
            for ((pi, pj), wt) in preds.iter().zip(weights) {
                adj[pi * w + pj] += a * wt;
            }
        }
    }
    grad
}
