//! Generator, two-headed discriminator, and teacher classifier.
//!
//! All three are small fully-connected networks with leaky-relu hidden
//! activations and linear outputs. Each offers two forward paths: a
//! graph-building one for training (differentiable) and a plain one for
//! sampling and evaluation. The two are kept equal by test.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::param::{Binding, ParamSet};
use crate::tensor::{xavier_uniform, Tensor};
use rand::Rng;

pub const LEAKY_SLOPE: f64 = 0.2;

fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input;
    for &h in hidden {
        dims.push((prev, h));
        prev = h;
    }
    dims.push((prev, output));
    dims
}

fn init_stack<R: Rng>(ps: &mut ParamSet, prefix: &str, dims: &[(usize, usize)], rng: &mut R) -> Result<()> {
    for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = xavier_uniform(fan_in, fan_out, vec![fan_in, fan_out], rng)?;
        ps.push(&format!("{prefix}.w{i}"), w, true)?;
        ps.push(&format!("{prefix}.b{i}"), Tensor::zeros(vec![fan_out]), true)?;
    }
    Ok(())
}

fn linear_graph(g: &mut Graph, bind: &Binding, prefix: &str, i: usize, x: NodeId) -> Result<NodeId> {
    let w = bind.node(&format!("{prefix}.w{i}"))?;
    let b = bind.node(&format!("{prefix}.b{i}"))?;
    let xw = g.matmul(x, w)?;
    g.add(xw, b)
}

fn linear_plain(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if x.cols() != w.shape()[0] {
        return Err(Error::shape("linear", format!("{:?} . {:?}", x.shape(), w.shape())));
    }
    let (m, k, n) = (x.rows(), x.cols(), w.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for kk in 0..k {
            let xik = x.data()[i * k + kk];
            if xik == 0.0 {
                continue;
            }
            let wrow = &w.data()[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += xik * wrow[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] += b.data()[j];
        }
    }
    Tensor::new(vec![m, n], out)
}

fn leaky_plain(t: &mut Tensor) {
    for v in t.data_mut() {
        if *v < 0.0 {
            *v *= LEAKY_SLOPE;
        }
    }
}

fn stack_plain(ps: &ParamSet, prefix: &str, layers: usize, x: &Tensor) -> Result<Tensor> {
    let mut h = x.clone();
    for i in 0..layers {
        let w = ps.value(&format!("{prefix}.w{i}"))?;
        let b = ps.value(&format!("{prefix}.b{i}"))?;
        h = linear_plain(&h, w, b)?;
        if i + 1 < layers {
            leaky_plain(&mut h);
        }
    }
    Ok(h)
}

/// Generator `G(z, c)`: latent concatenated with a one-hot label, identity
/// output activation (targets are unbounded mixture samples).
#[derive(Debug, Clone)]
pub struct Generator {
    pub latent_dim: usize,
    pub classes: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub params: ParamSet,
}

impl Generator {
    pub fn init<R: Rng>(latent_dim: usize, classes: usize, output_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if latent_dim == 0 || classes < 2 || output_dim == 0 || hidden.is_empty() {
            return Err(Error::Config(format!(
                "generator dims: latent={latent_dim}, classes={classes}, out={output_dim}, hidden={hidden:?}"
            )));
        }
        let mut params = ParamSet::new();
        init_stack(&mut params, "gen", &layer_dims(latent_dim + classes, hidden, output_dim), rng)?;
        Ok(Generator { latent_dim, classes, output_dim, hidden: hidden.to_vec(), params })
    }

    fn check_labels(&self, labels: &[usize]) -> Result<()> {
        for &c in labels {
            if c >= self.classes {
                return Err(Error::LabelOutOfRange { label: c, classes: self.classes });
            }
        }
        Ok(())
    }

    /// Differentiable forward. `z` must be a `[batch x latent_dim]` node and
    /// `labels` one class per row.
    pub fn forward_graph(&self, g: &mut Graph, bind: &Binding, z: NodeId, labels: &[usize]) -> Result<NodeId> {
        self.check_labels(labels)?;
        if g.value(z).cols() != self.latent_dim || g.value(z).rows() != labels.len() {
            return Err(Error::shape(
                "generator_forward",
                format!("z {:?} with {} labels", g.value(z).shape(), labels.len()),
            ));
        }
        let onehot = g.input(Tensor::one_hot(labels, self.classes)?);
        let mut h = g.concat_cols(z, onehot)?;
        let layers = self.hidden.len() + 1;
        for i in 0..layers {
            h = linear_graph(g, bind, "gen", i, h)?;
            if i + 1 < layers {
                h = g.leaky_relu(h, LEAKY_SLOPE);
            }
        }
        Ok(h)
    }

    pub fn forward(&self, z: &Tensor, labels: &[usize]) -> Result<Tensor> {
        self.check_labels(labels)?;
        if z.cols() != self.latent_dim || z.rows() != labels.len() {
            return Err(Error::shape(
                "generator_forward",
                format!("z {:?} with {} labels", z.shape(), labels.len()),
            ));
        }
        let onehot = Tensor::one_hot(labels, self.classes)?;
        let mut rows = Vec::with_capacity(z.rows());
        for i in 0..z.rows() {
            let mut r = z.row(i).to_vec();
            r.extend_from_slice(onehot.row(i));
            rows.push(r);
        }
        let x = Tensor::from_rows(&rows)?;
        stack_plain(&self.params, "gen", self.hidden.len() + 1, &x)
    }
}

/// Discriminator trunk output for one graph, with both heads attached.
/// `pre_activations` holds the trunk pre-activation values (one tensor per
/// hidden layer), needed to assemble the penalty expression on real samples.
#[derive(Debug)]
pub struct DiscGraphOut {
    pub u_logit: NodeId,
    pub class_logits: NodeId,
    pub pre_activations: Vec<Tensor>,
}

/// Two-headed discriminator: shared trunk, scalar unconditional head, and a
/// conditional head over `2K` classes (real block `[0,K)`, fake block `[K,2K)`).
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub input_dim: usize,
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub params: ParamSet,
}

impl Discriminator {
    pub fn init<R: Rng>(input_dim: usize, classes: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if input_dim == 0 || classes < 2 || hidden.is_empty() {
            return Err(Error::Config(format!(
                "discriminator dims: input={input_dim}, classes={classes}, hidden={hidden:?}"
            )));
        }
        let mut params = ParamSet::new();
        let mut prev = input_dim;
        for (i, &h) in hidden.iter().enumerate() {
            let w = xavier_uniform(prev, h, vec![prev, h], rng)?;
            params.push(&format!("disc.w{i}"), w, true)?;
            params.push(&format!("disc.b{i}"), Tensor::zeros(vec![h]), true)?;
            prev = h;
        }
        let wu = xavier_uniform(prev, 1, vec![prev, 1], rng)?;
        params.push("disc.wu", wu, true)?;
        params.push("disc.bu", Tensor::zeros(vec![1]), true)?;
        let wc = xavier_uniform(prev, 2 * classes, vec![prev, 2 * classes], rng)?;
        params.push("disc.wc", wc, true)?;
        params.push("disc.bc", Tensor::zeros(vec![2 * classes]), true)?;
        Ok(Discriminator { input_dim, classes, hidden: hidden.to_vec(), params })
    }

    pub fn forward_graph(&self, g: &mut Graph, bind: &Binding, x: NodeId) -> Result<DiscGraphOut> {
        if g.value(x).cols() != self.input_dim {
            return Err(Error::shape(
                "discriminator_forward",
                format!("x {:?} vs input_dim {}", g.value(x).shape(), self.input_dim),
            ));
        }
        let mut h = x;
        let mut pre_activations = Vec::with_capacity(self.hidden.len());
        for i in 0..self.hidden.len() {
            let pre = linear_graph(g, bind, "disc", i, h)?;
            pre_activations.push(g.value(pre).clone());
            h = g.leaky_relu(pre, LEAKY_SLOPE);
        }
        let wu = bind.node("disc.wu")?;
        let bu = bind.node("disc.bu")?;
        let hu = g.matmul(h, wu)?;
        let u_logit = g.add(hu, bu)?;
        let wc = bind.node("disc.wc")?;
        let bc = bind.node("disc.bc")?;
        let hc = g.matmul(h, wc)?;
        let class_logits = g.add(hc, bc)?;
        Ok(DiscGraphOut { u_logit, class_logits, pre_activations })
    }

    /// Plain forward: `(u_logit[batch], class_logits[batch x 2K])`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        if x.cols() != self.input_dim {
            return Err(Error::shape(
                "discriminator_forward",
                format!("x {:?} vs input_dim {}", x.shape(), self.input_dim),
            ));
        }
        let mut h = x.clone();
        for i in 0..self.hidden.len() {
            let w = self.params.value(&format!("disc.w{i}"))?;
            let b = self.params.value(&format!("disc.b{i}"))?;
            h = linear_plain(&h, w, b)?;
            leaky_plain(&mut h);
        }
        let u2 = linear_plain(&h, self.params.value("disc.wu")?, self.params.value("disc.bu")?)?;
        let u = Tensor::new(vec![u2.rows()], u2.data().to_vec())?;
        let c = linear_plain(&h, self.params.value("disc.wc")?, self.params.value("disc.bc")?)?;
        Ok((u, c))
    }
}

/// Teacher classifier with a live copy and an exponential-moving-average copy
/// of identical structure. The EMA copy is only ever written by the EMA
/// update, never by an optimizer.
#[derive(Debug, Clone)]
pub struct Teacher {
    pub input_dim: usize,
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub live: ParamSet,
    pub ema: ParamSet,
}

impl Teacher {
    pub fn init<R: Rng>(input_dim: usize, classes: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if input_dim == 0 || classes < 2 || hidden.is_empty() {
            return Err(Error::Config(format!(
                "teacher dims: input={input_dim}, classes={classes}, hidden={hidden:?}"
            )));
        }
        let mut live = ParamSet::new();
        init_stack(&mut live, "teacher", &layer_dims(input_dim, hidden, classes), rng)?;
        let mut ema = ParamSet::new();
        for p in live.iter() {
            let name = p.name.replacen("teacher.", "teacher_ema.", 1);
            // frozen: no optimizer may step the EMA copy
            ema.push(&name, p.value.clone(), false)?;
        }
        Ok(Teacher { input_dim, classes, hidden: hidden.to_vec(), live, ema })
    }

    /// Differentiable forward over whichever copy `bind` holds; `prefix` is
    /// `"teacher"` for the live copy or `"teacher_ema"` for the EMA copy.
    pub fn forward_graph(&self, g: &mut Graph, bind: &Binding, prefix: &str, x: NodeId) -> Result<NodeId> {
        if g.value(x).cols() != self.input_dim {
            return Err(Error::shape(
                "teacher_forward",
                format!("x {:?} vs input_dim {}", g.value(x).shape(), self.input_dim),
            ));
        }
        let layers = self.hidden.len() + 1;
        let mut h = x;
        for i in 0..layers {
            h = linear_graph(g, bind, prefix, i, h)?;
            if i + 1 < layers {
                h = g.leaky_relu(h, LEAKY_SLOPE);
            }
        }
        Ok(h)
    }

    /// Plain logits over K classes; `use_ema` selects the EMA copy.
    pub fn forward(&self, x: &Tensor, use_ema: bool) -> Result<Tensor> {
        if x.cols() != self.input_dim {
            return Err(Error::shape(
                "teacher_forward",
                format!("x {:?} vs input_dim {}", x.shape(), self.input_dim),
            ));
        }
        let (ps, prefix) = if use_ema { (&self.ema, "teacher_ema") } else { (&self.live, "teacher") };
        stack_plain(ps, prefix, self.hidden.len() + 1, x)
    }
}
