//! Tape-style computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every training step. Builders run the
//! forward computation eagerly, so a node's value is available the moment it
//! is created; [`Graph::backward`] then walks the tape in reverse and returns
//! gradients keyed by parameter name.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::collections::BTreeMap;

/// Index of a node on the tape. Inputs of a node always have smaller indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Gradients keyed by parameter name, one entry per named parameter node in
/// the graph (zero tensors for parameters the loss does not reach).
pub type GradMap = BTreeMap<String, Tensor>;

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param { name: String, trainable: bool },
    MatMul,
    Add,
    Scale(f64),
    ConcatCols,
    LeakyRelu(f64),
    Relu,
    Tanh,
    Exp,
    Log,
    Mean,
    Sum,
    Mul,
    MaxConst(f64),
    Softmax,
    GatherRow(Vec<usize>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, inputs, value });
        id
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant leaf. No gradient is tracked through it.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, vec![], value)
    }

    /// Named parameter leaf. Names must be unique within one graph so the
    /// gradient map stays unambiguous.
    pub fn param(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<NodeId> {
        if self.nodes.iter().any(|n| matches!(&n.op, Op::Param { name: existing, .. } if existing == name)) {
            return Err(Error::InvalidArg(format!("duplicate parameter name {name:?} in graph")));
        }
        Ok(self.push(Op::Param { name: name.to_string(), trainable }, vec![], value))
    }

    /// `[m x k] . [k x n] -> [m x n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::shape("matmul", format!("{:?} . {:?}", ta.shape(), tb.shape())));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        mm_acc(ta.data(), tb.data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(Op::MatMul, vec![a, b], value))
    }

    /// Elementwise addition of equal shapes, or `[m x n] + [n]` with the
    /// vector broadcast across rows (bias form).
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let value = if ta.same_shape(tb) {
            let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else if ta.shape().len() == 2 && tb.shape().len() == 1 && ta.shape()[1] == tb.shape()[0] {
            let (m, n) = (ta.shape()[0], ta.shape()[1]);
            let mut data = ta.data().to_vec();
            for i in 0..m {
                for j in 0..n {
                    data[i * n + j] += tb.data()[j];
                }
            }
            Tensor::new(vec![m, n], data)?
        } else {
            return Err(Error::shape("add", format!("{:?} + {:?}", ta.shape(), tb.shape())));
        };
        Ok(self.push(Op::Add, vec![a, b], value))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| factor * x).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).unwrap();
        self.push(Op::Scale(factor), vec![a], value)
    }

    /// `[m x p]` and `[m x q]` side by side into `[m x (p+q)]`.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[0] != tb.shape()[0] {
            return Err(Error::shape("concat", format!("{:?} ++ {:?}", ta.shape(), tb.shape())));
        }
        let (m, p, q) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut data = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            data.extend_from_slice(ta.row(i));
            data.extend_from_slice(tb.row(i));
        }
        let _ = q;
        let value = Tensor::new(vec![m, p + q], data)?;
        Ok(self.push(Op::ConcatCols, vec![a, b], value))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| if x > 0.0 { x } else { slope * x }).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).unwrap();
        self.push(Op::LeakyRelu(slope), vec![a], value)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x.max(0.0)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).unwrap();
        self.push(Op::Relu, vec![a], value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x.tanh()).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).unwrap();
        self.push(Op::Tanh, vec![a], value)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x.exp()).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).unwrap();
        self.push(Op::Exp, vec![a], value)
    }

    /// Natural log. Rejects non-positive inputs.
    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = self.value(a);
        if let Some(bad) = ta.data().iter().find(|&&x| x <= 0.0) {
            return Err(Error::domain("log", format!("non-positive input {bad}")));
        }
        let data = ta.data().iter().map(|x| x.ln()).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Log, vec![a], value))
    }

    /// Mean over all elements, as a scalar.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let m = ta.data().iter().sum::<f64>() / ta.numel() as f64;
        self.push(Op::Mean, vec![a], Tensor::scalar(m))
    }

    /// Sum over all elements, as a scalar.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let s = ta.data().iter().sum::<f64>();
        self.push(Op::Sum, vec![a], Tensor::scalar(s))
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(Error::shape("elementwise-mul", format!("{:?} * {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Mul, vec![a, b], value))
    }

    /// `max(x, c)` elementwise against a constant.
    pub fn max_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x.max(c)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).unwrap();
        self.push(Op::MaxConst(c), vec![a], value)
    }

    /// Row-wise softmax of a matrix (a vector is one row).
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &ta.data()[i * n..(i + 1) * n];
            let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..n {
                let e = (row[j] - hi).exp();
                data[i * n + j] = e;
                z += e;
            }
            for j in 0..n {
                data[i * n + j] /= z;
            }
        }
        let value = Tensor::new(ta.shape().to_vec(), data).unwrap();
        self.push(Op::Softmax, vec![a], value)
    }

    /// Picks one entry per row: `y[i] = x[i, idx[i]]`, giving a length-m vector.
    pub fn gather_row(&mut self, a: NodeId, idx: &[usize]) -> Result<NodeId> {
        let ta = self.value(a);
        if ta.shape().len() != 2 || ta.shape()[0] != idx.len() {
            return Err(Error::shape(
                "gather-row",
                format!("{:?} with {} indices", ta.shape(), idx.len()),
            ));
        }
        let n = ta.shape()[1];
        if let Some(&bad) = idx.iter().find(|&&j| j >= n) {
            return Err(Error::shape("gather-row", format!("column {bad} out of range for width {n}")));
        }
        let data = idx.iter().enumerate().map(|(i, &j)| ta.at(i, j)).collect();
        let value = Tensor::new(vec![idx.len()], data)?;
        Ok(self.push(Op::GatherRow(idx.to_vec()), vec![a], value))
    }

    /// Reverse pass from a scalar loss. Returns one gradient tensor per
    /// named parameter in the graph; parameters the loss does not reach get
    /// zeros. Trainability is recorded on the node and does not gate the map,
    /// so callers can inspect frozen parameters too.
    pub fn backward(&self, loss: NodeId) -> Result<GradMap> {
        if !self.value(loss).is_scalar() {
            return Err(Error::InvalidArg(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.numel()]).collect();
        let mut live = vec![false; self.nodes.len()];
        grads[loss.0][0] = 1.0;
        live[loss.0] = true;

        for id in (0..=loss.0).rev() {
            if !live[id] {
                continue;
            }
            let g_out = std::mem::take(&mut grads[id]);
            let node = &self.nodes[id];
            for &inp in &node.inputs {
                live[inp.0] = true;
            }
            match &node.op {
                Op::Input | Op::Param { .. } => {}
                Op::MatMul => {
                    let a = node.inputs[0];
                    let b = node.inputs[1];
                    let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                    // dA += dC . B^T, dB += A^T . dC
                    mm_nt_acc(&g_out, tb.data(), &mut grads[a.0], m, n, k);
                    mm_tn_acc(ta.data(), &g_out, &mut grads[b.0], m, k, n);
                }
                Op::Add => {
                    let a = node.inputs[0];
                    let b = node.inputs[1];
                    for (g, &d) in grads[a.0].iter_mut().zip(&g_out) {
                        *g += d;
                    }
                    let bn = self.nodes[b.0].value.numel();
                    if bn == g_out.len() {
                        for (g, &d) in grads[b.0].iter_mut().zip(&g_out) {
                            *g += d;
                        }
                    } else {
                        // bias broadcast: sum over rows
                        for (i, &d) in g_out.iter().enumerate() {
                            grads[b.0][i % bn] += d;
                        }
                    }
                }
                Op::Scale(c) => {
                    let a = node.inputs[0];
                    for (g, &d) in grads[a.0].iter_mut().zip(&g_out) {
                        *g += c * d;
                    }
                }
                Op::ConcatCols => {
                    let a = node.inputs[0];
                    let b = node.inputs[1];
                    let (p, q) = (self.nodes[a.0].value.cols(), self.nodes[b.0].value.cols());
                    let m = self.nodes[a.0].value.rows();
                    for i in 0..m {
                        for j in 0..p {
                            grads[a.0][i * p + j] += g_out[i * (p + q) + j];
                        }
                        for j in 0..q {
                            grads[b.0][i * q + j] += g_out[i * (p + q) + p + j];
                        }
                    }
                }
                Op::LeakyRelu(slope) => {
                    let a = node.inputs[0];
                    let xa = self.nodes[a.0].value.data();
                    for ((g, &d), &x) in grads[a.0].iter_mut().zip(&g_out).zip(xa) {
                        *g += d * if x > 0.0 { 1.0 } else { *slope };
                    }
                }
                Op::Relu => {
                    let a = node.inputs[0];
                    let xa = self.nodes[a.0].value.data();
                    for ((g, &d), &x) in grads[a.0].iter_mut().zip(&g_out).zip(xa) {
                        if x > 0.0 {
                            *g += d;
                        }
                    }
                }
                Op::Tanh => {
                    let a = node.inputs[0];
                    let y = node.value.data();
                    for ((g, &d), &y) in grads[a.0].iter_mut().zip(&g_out).zip(y) {
                        *g += d * (1.0 - y * y);
                    }
                }
                Op::Exp => {
                    let a = node.inputs[0];
                    let y = node.value.data();
                    for ((g, &d), &y) in grads[a.0].iter_mut().zip(&g_out).zip(y) {
                        *g += d * y;
                    }
                }
                Op::Log => {
                    let a = node.inputs[0];
                    let xa = self.nodes[a.0].value.data();
                    for ((g, &d), &x) in grads[a.0].iter_mut().zip(&g_out).zip(xa) {
                        *g += d / x;
                    }
                }
                Op::Mean => {
                    let a = node.inputs[0];
                    let scale = g_out[0] / self.nodes[a.0].value.numel() as f64;
                    for g in grads[a.0].iter_mut() {
                        *g += scale;
                    }
                }
                Op::Sum => {
                    let a = node.inputs[0];
                    let d = g_out[0];
                    for g in grads[a.0].iter_mut() {
                        *g += d;
                    }
                }
                Op::Mul => {
                    let a = node.inputs[0];
                    let b = node.inputs[1];
                    // values borrowed up front so the grads vec can be split-borrowed below
                    let (va, vb) = (self.nodes[a.0].value.data().to_vec(), self.nodes[b.0].value.data().to_vec());
                    for ((g, &d), &y) in grads[a.0].iter_mut().zip(&g_out).zip(&vb) {
                        *g += d * y;
                    }
                    for ((g, &d), &x) in grads[b.0].iter_mut().zip(&g_out).zip(&va) {
                        *g += d * x;
                    }
                }
                Op::MaxConst(c) => {
                    let a = node.inputs[0];
                    let xa = self.nodes[a.0].value.data();
                    for ((g, &d), &x) in grads[a.0].iter_mut().zip(&g_out).zip(xa) {
                        if x > *c {
                            *g += d;
                        }
                    }
                }
                Op::Softmax => {
                    let a = node.inputs[0];
                    let y = node.value.data();
                    let (m, n) = (node.value.rows(), node.value.cols());
                    for i in 0..m {
                        let yi = &y[i * n..(i + 1) * n];
                        let di = &g_out[i * n..(i + 1) * n];
                        let dot: f64 = yi.iter().zip(di).map(|(y, d)| y * d).sum();
                        for j in 0..n {
                            grads[a.0][i * n + j] += yi[j] * (di[j] - dot);
                        }
                    }
                }
                Op::GatherRow(idx) => {
                    let a = node.inputs[0];
                    let n = self.nodes[a.0].value.cols();
                    for (i, &j) in idx.iter().enumerate() {
                        grads[a.0][i * n + j] += g_out[i];
                    }
                }
            }
            grads[id] = g_out;
        }

        let mut map = GradMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param { name, trainable: true } = &node.op {
                let t = Tensor::new(node.value.shape().to_vec(), grads[i].clone())?;
                map.insert(name.clone(), t);
            }
        }
        Ok(map)
    }
}

/// `out += a . b` with `a` of `m x k`, `b` of `k x n`. ikj order keeps the
/// inner loop contiguous in both `b` and `out`.
fn mm_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += aik * brow[j];
            }
        }
    }
}

/// `out += a . b^T` with `a` of `m x n`, `b` of `k x n`, out `m x k`.
fn mm_nt_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for kk in 0..k {
            let brow = &b[kk * n..(kk + 1) * n];
            let mut s = 0.0;
            for j in 0..n {
                s += arow[j] * brow[j];
            }
            out[i * k + kk] += s;
        }
    }
}

/// `out += a^T . b` with `a` of `m x k`, `b` of `m x n`, out `k x n`.
fn mm_tn_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let orow = &mut out[kk * n..(kk + 1) * n];
            for j in 0..n {
                orow[j] += aik * brow[j];
            }
        }
    }
}
