//! Adversarial and teacher losses.
//!
//! The discriminator sees an unconditional hinge term, a conditional
//! multi-class hinge term over a 2K class layout (real classes in [0,K),
//! fake classes in [K,2K)), and a gradient penalty on real samples. The
//! conditional real term splits into a supervised part (samples with a
//! visible label) and an artificial part (samples selected by the
//! reliability mask). Empty selections contribute exactly 0, so the loss
//! stays defined at any labeling rate and while the mask is still all-zero.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::nets::{Discriminator, Generator, Teacher, LEAKY_SLOPE};
use crate::param::Binding;
use crate::tensor::Tensor;

/// How real samples feed the conditional loss: with their own labels where
/// visible, with teacher labels under the mask, or with both at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Artificial,
    Real,
    Both,
}

/// Generator adversarial form: the hinge written in the training algorithm,
/// or the common non-saturating mean(-D^U).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenLossForm {
    Hinge,
    NonSaturating,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_d_u: f64,
    pub l_d_c: f64,
    pub r1: f64,
    pub l_g_u: f64,
    pub l_g_c: f64,
    pub l_c: f64,
}

impl LossBreakdown {
    pub fn l_d(&self) -> f64 {
        self.l_d_u + self.l_d_c + self.r1
    }

    pub fn l_g(&self) -> f64 {
        self.l_g_u + self.l_g_c
    }
}

pub fn hinge(t: f64) -> f64 {
    (1.0 - t).max(0.0)
}

/// Crammer-Singer margin: max(0, 1 - logit[target] + max_{i != target} logit[i]).
pub fn multiclass_hinge(target: usize, logits: &[f64]) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::LabelOutOfRange { label: target, classes: logits.len() });
    }
    if logits.len() < 2 {
        return Err(Error::InvalidArg("multiclass hinge needs at least 2 classes".into()));
    }
    let competitor = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(v));
    Ok((1.0 - logits[target] + competitor).max(0.0))
}

/// -log softmax(logits)[target], computed via a max-shifted log-sum-exp.
pub fn softmax_cross_entropy(target: usize, logits: &[f64]) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::LabelOutOfRange { label: target, classes: logits.len() });
    }
    let hi = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = hi + logits.iter().map(|&v| (v - hi).exp()).sum::<f64>().ln();
    Ok(lse - logits[target])
}

/// (gamma/2) * mean over rows of the squared row norm. `grads` holds one
/// input-space gradient per row.
pub fn r1_value(grads: &Tensor, gamma: f64) -> f64 {
    let m = grads.rows() as f64;
    let total: f64 = grads.data().iter().map(|v| v * v).sum();
    gamma / 2.0 * total / m
}

/// mean over elements of max(0, 1 - sign*t).
pub fn mean_hinge_graph(g: &mut Graph, t: NodeId, sign: f64) -> Result<NodeId> {
    let shape = g.value(t).shape().to_vec();
    let neg = g.scale(t, -sign);
    let ones = g.input(Tensor::full(shape, 1.0));
    let shifted = g.add(neg, ones)?;
    let h = g.max_const(shifted, 0.0);
    Ok(g.mean(h))
}

/// Per-row Crammer-Singer margins of `logits` against `targets`, shape [m].
/// The competing class is fixed from the forward values (argmax over the
/// non-target logits, ties to the lowest index), which matches the loss's
/// subgradient away from ties.
pub fn multiclass_margins_graph(g: &mut Graph, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
    let v = g.value(logits);
    if v.shape().len() != 2 || v.rows() != targets.len() {
        return Err(Error::shape(
            "multiclass_hinge",
            format!("logits {:?} with {} targets", v.shape(), targets.len()),
        ));
    }
    let n = v.cols();
    if n < 2 {
        return Err(Error::InvalidArg("multiclass hinge needs at least 2 classes".into()));
    }
    let mut competitors = Vec::with_capacity(targets.len());
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::LabelOutOfRange { label: t, classes: n });
        }
        let row = v.row(i);
        let mut best = usize::MAX;
        let mut best_v = f64::NEG_INFINITY;
        for (j, &x) in row.iter().enumerate() {
            if j != t && x > best_v {
                best = j;
                best_v = x;
            }
        }
        competitors.push(best);
    }
    let gt = g.gather_row(logits, targets)?;
    let gc = g.gather_row(logits, &competitors)?;
    let neg_gt = g.scale(gt, -1.0);
    let diff = g.add(neg_gt, gc)?;
    let ones = g.input(Tensor::full(vec![targets.len()], 1.0));
    let shifted = g.add(diff, ones)?;
    Ok(g.max_const(shifted, 0.0))
}

/// Mean of the selected entries of a vector node, or None when nothing is
/// selected (the caller then leaves the term out, contributing 0).
pub fn masked_mean_graph(g: &mut Graph, values: NodeId, select: &[bool]) -> Result<Option<NodeId>> {
    let v = g.value(values);
    if v.numel() != select.len() {
        return Err(Error::shape(
            "masked_mean",
            format!("{} values vs {} flags", v.numel(), select.len()),
        ));
    }
    let count = select.iter().filter(|&&s| s).count();
    if count == 0 {
        return Ok(None);
    }
    let sel = Tensor::new(
        v.shape().to_vec(),
        select.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect(),
    )?;
    let sel_node = g.input(sel);
    let picked = g.mul(values, sel_node)?;
    let total = g.sum(picked);
    Ok(Some(g.scale(total, 1.0 / count as f64)))
}

/// Mean of -log softmax(logits)[target] over the batch. The target
/// probability is gathered before the log so the domain check applies only
/// to probabilities the loss actually consumes.
pub fn mean_cross_entropy_graph(g: &mut Graph, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
    let v = g.value(logits);
    if v.shape().len() != 2 || v.rows() != targets.len() {
        return Err(Error::shape(
            "cross_entropy",
            format!("logits {:?} with {} targets", v.shape(), targets.len()),
        ));
    }
    let probs = g.softmax(logits);
    let picked = g.gather_row(probs, targets)?;
    let logp = g.log(picked)?;
    let m = g.mean(logp);
    Ok(g.scale(m, -1.0))
}

/// Gradient penalty on real samples, as a differentiable expression.
///
/// The input-space gradient of the unconditional head is a product of the
/// trunk weights with the activation derivative pattern of the forward pass.
/// Those patterns are piecewise constant in the parameters, so fixing them
/// from the recorded pre-activations and differentiating the remaining
/// product gives the exact parameter gradient almost everywhere. Everything
/// is assembled in transposed (column-per-sample) orientation so parameter
/// matrices always sit on the left of a plain matmul.
pub fn r1_penalty_graph(
    g: &mut Graph,
    bind: &Binding,
    disc: &Discriminator,
    pre_activations: &[Tensor],
    gamma: f64,
) -> Result<NodeId> {
    if pre_activations.len() != disc.hidden.len() {
        return Err(Error::shape(
            "r1_penalty",
            format!("{} pre-activations for {} hidden layers", pre_activations.len(), disc.hidden.len()),
        ));
    }
    let batch = pre_activations[0].rows();
    // transposed activation-derivative masks, one per hidden layer
    let mut masks = Vec::with_capacity(pre_activations.len());
    for pre in pre_activations {
        let (m, h) = (pre.rows(), pre.cols());
        if m != batch {
            return Err(Error::shape("r1_penalty", "pre-activation batch sizes differ"));
        }
        let mut t = Tensor::zeros(vec![h, m]);
        for i in 0..m {
            for j in 0..h {
                t.data_mut()[j * m + i] = if pre.at(i, j) > 0.0 { 1.0 } else { LEAKY_SLOPE };
            }
        }
        masks.push(g.input(t));
    }
    // columns of r are the head weights, then pulled back layer by layer
    let wu = bind.node("disc.wu")?;
    let ones = g.input(Tensor::full(vec![1, batch], 1.0));
    let mut r = g.matmul(wu, ones)?;
    for k in (0..disc.hidden.len()).rev() {
        let s = g.mul(masks[k], r)?;
        let w = bind.node(&format!("disc.w{k}"))?;
        r = g.matmul(w, s)?;
    }
    let sq = g.mul(r, r)?;
    let total = g.sum(sq);
    Ok(g.scale(total, gamma / (2.0 * batch as f64)))
}

/// Real side of a discriminator step: the sample batch, its true labels with
/// visibility flags, and the teacher's labels with the reliability mask.
#[derive(Debug, Clone, Copy)]
pub struct RealSide<'a> {
    pub x: &'a Tensor,
    pub labels: &'a [usize],
    pub has_label: &'a [bool],
    pub art_labels: &'a [usize],
    pub mask: &'a [bool],
}

/// Fake side: generated samples (already detached) and their conditioning labels.
#[derive(Debug, Clone, Copy)]
pub struct FakeSide<'a> {
    pub x: &'a Tensor,
    pub labels: &'a [usize],
}

#[derive(Debug)]
pub struct DiscLossGraph {
    pub loss: NodeId,
    pub l_d_u: f64,
    pub l_d_c: f64,
    pub r1: f64,
}

pub fn discriminator_loss_graph(
    g: &mut Graph,
    bind: &Binding,
    disc: &Discriminator,
    real: RealSide,
    fake: FakeSide,
    mode: LabelMode,
    gamma: f64,
) -> Result<DiscLossGraph> {
    let n = real.x.rows();
    if real.labels.len() != n || real.has_label.len() != n || real.art_labels.len() != n || real.mask.len() != n {
        return Err(Error::shape(
            "discriminator_loss",
            format!(
                "real batch {} with labels {}, flags {}, artificial {}, mask {}",
                n,
                real.labels.len(),
                real.has_label.len(),
                real.art_labels.len(),
                real.mask.len()
            ),
        ));
    }
    if fake.labels.len() != fake.x.rows() {
        return Err(Error::shape(
            "discriminator_loss",
            format!("{} fakes with {} labels", fake.x.rows(), fake.labels.len()),
        ));
    }
    let k = disc.classes;

    let xr = g.input(real.x.clone());
    let out_r = disc.forward_graph(g, bind, xr)?;
    let xf = g.input(fake.x.clone());
    let out_f = disc.forward_graph(g, bind, xf)?;

    // hinge(D^U(x_r)) + hinge(-D^U(x_f)), each averaged over its own batch
    let h_real = mean_hinge_graph(g, out_r.u_logit, 1.0)?;
    let h_fake = mean_hinge_graph(g, out_f.u_logit, -1.0)?;
    let l_d_u_node = g.add(h_real, h_fake)?;

    let (sup_sel, art_sel): (Vec<bool>, Vec<bool>) = match mode {
        LabelMode::Real => (
            real.has_label.to_vec(),
            real.has_label.iter().zip(real.mask).map(|(&h, &s)| !h && s).collect(),
        ),
        LabelMode::Artificial => (vec![false; n], real.mask.to_vec()),
        LabelMode::Both => (real.has_label.to_vec(), real.mask.to_vec()),
    };

    let mut cond_terms = Vec::new();
    if sup_sel.iter().any(|&s| s) {
        for (i, &sel) in sup_sel.iter().enumerate() {
            if sel && real.labels[i] >= k {
                return Err(Error::LabelOutOfRange { label: real.labels[i], classes: k });
            }
        }
        let margins = multiclass_margins_graph(g, out_r.class_logits, real.labels)?;
        if let Some(t) = masked_mean_graph(g, margins, &sup_sel)? {
            cond_terms.push(t);
        }
    }
    if art_sel.iter().any(|&s| s) {
        for (i, &sel) in art_sel.iter().enumerate() {
            if sel && real.art_labels[i] >= k {
                return Err(Error::LabelOutOfRange { label: real.art_labels[i], classes: k });
            }
        }
        let margins = multiclass_margins_graph(g, out_r.class_logits, real.art_labels)?;
        if let Some(t) = masked_mean_graph(g, margins, &art_sel)? {
            cond_terms.push(t);
        }
    }
    let fake_targets: Vec<usize> = fake.labels.iter().map(|&c| c + k).collect();
    let fake_margins = multiclass_margins_graph(g, out_f.class_logits, &fake_targets)?;
    cond_terms.push(g.mean(fake_margins));

    let mut l_d_c_node = cond_terms[0];
    for &t in &cond_terms[1..] {
        l_d_c_node = g.add(l_d_c_node, t)?;
    }

    let r1_node = r1_penalty_graph(g, bind, disc, &out_r.pre_activations, gamma)?;

    let adv = g.add(l_d_u_node, l_d_c_node)?;
    let loss = g.add(adv, r1_node)?;
    Ok(DiscLossGraph {
        loss,
        l_d_u: g.value(l_d_u_node).data()[0],
        l_d_c: g.value(l_d_c_node).data()[0],
        r1: g.value(r1_node).data()[0],
    })
}

#[derive(Debug)]
pub struct GenLossGraph {
    pub loss: NodeId,
    pub l_g_u: f64,
    pub l_g_c: f64,
}

/// Build the generator loss. `gen_bind` must hold the generator parameters as
/// named parameters; the discriminator weights are inserted as constants by
/// the caller (via `bind_frozen`), so the gradient map stays generator-only.
pub fn generator_loss_graph(
    g: &mut Graph,
    gen: &Generator,
    gen_bind: &Binding,
    disc: &Discriminator,
    disc_bind: &Binding,
    z: &Tensor,
    labels: &[usize],
    form: GenLossForm,
) -> Result<GenLossGraph> {
    let zn = g.input(z.clone());
    let fakes = gen.forward_graph(g, gen_bind, zn, labels)?;
    let out = disc.forward_graph(g, disc_bind, fakes)?;
    let l_g_u_node = match form {
        GenLossForm::Hinge => mean_hinge_graph(g, out.u_logit, 1.0)?,
        GenLossForm::NonSaturating => {
            let m = g.mean(out.u_logit);
            g.scale(m, -1.0)
        }
    };
    for &c in labels {
        if c >= disc.classes {
            return Err(Error::LabelOutOfRange { label: c, classes: disc.classes });
        }
    }
    let margins = multiclass_margins_graph(g, out.class_logits, labels)?;
    let l_g_c_node = g.mean(margins);
    let loss = g.add(l_g_u_node, l_g_c_node)?;
    Ok(GenLossGraph {
        loss,
        l_g_u: g.value(l_g_u_node).data()[0],
        l_g_c: g.value(l_g_c_node).data()[0],
    })
}

/// Teacher cross-entropy on (already augmented, already detached) fakes
/// against their conditioning labels. `bind` holds whichever teacher copy is
/// being differentiated, under `prefix`.
pub fn teacher_loss_graph(
    g: &mut Graph,
    teacher: &Teacher,
    bind: &Binding,
    prefix: &str,
    x_aug: &Tensor,
    labels: &[usize],
) -> Result<NodeId> {
    let xn = g.input(x_aug.clone());
    let logits = teacher.forward_graph(g, bind, prefix, xn)?;
    mean_cross_entropy_graph(g, logits, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge(2.0), 0.0);
        assert_eq!(hinge(0.0), 1.0);
        assert_eq!(hinge(-1.0), 2.0);
    }

    #[test]
    fn multiclass_hinge_examples() {
        assert_eq!(multiclass_hinge(0, &[3.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(multiclass_hinge(1, &[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(multiclass_hinge(0, &[1.0, 2.0, 0.0]).unwrap(), 2.0);
        assert!(multiclass_hinge(3, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform = vec![0.0; 10];
        assert!((softmax_cross_entropy(0, &uniform).unwrap() - 10f64.ln()).abs() < 1e-9);
        assert!(softmax_cross_entropy(0, &[1000.0, 0.0]).unwrap().abs() < 1e-9);
        let two = [2f64.ln(), 0.0];
        assert!((softmax_cross_entropy(0, &two).unwrap() - 1.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn r1_value_linear_map() {
        // gradient rows all (3,4): (10/2) * 25 = 125
        let grads = Tensor::from_rows(&[vec![3.0, 4.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(r1_value(&grads, 10.0), 125.0);
    }

    #[test]
    fn r1_graph_on_effectively_linear_net() {
        // One hidden layer with identity weights and a large positive bias
        // keeps every unit in the linear region, so d_u(x) = 3x1 + 4x2 + const
        // and the penalty must equal (10/2) * 25 = 125 exactly.
        let mut disc = Discriminator::init(2, 2, &[2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        disc.params
            .set_value("disc.w0", Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap())
            .unwrap();
        disc.params.set_value("disc.b0", Tensor::new(vec![2], vec![100.0, 100.0]).unwrap()).unwrap();
        disc.params.set_value("disc.wu", Tensor::new(vec![2, 1], vec![3.0, 4.0]).unwrap()).unwrap();
        let x = Tensor::from_rows(&[vec![0.5, -0.25], vec![1.0, 2.0], vec![-3.0, 0.0]]).unwrap();
        let mut g = Graph::new();
        let bind = disc.params.bind(&mut g).unwrap();
        let xn = g.input(x);
        let out = disc.forward_graph(&mut g, &bind, xn).unwrap();
        let pen = r1_penalty_graph(&mut g, &bind, &disc, &out.pre_activations, 10.0).unwrap();
        assert!((g.value(pen).data()[0] - 125.0).abs() < 1e-9);
    }

    #[test]
    fn graph_cross_entropy_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let logits = Tensor::new(vec![5, 4], (0..20).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let targets = [0, 3, 1, 2, 2];
        let mut expected = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            expected += softmax_cross_entropy(t, logits.row(i)).unwrap();
        }
        expected /= 5.0;
        let mut g = Graph::new();
        let ln = g.input(logits);
        let ce = mean_cross_entropy_graph(&mut g, ln, &targets).unwrap();
        assert!((g.value(ce).data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn graph_margins_match_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let logits = Tensor::new(vec![6, 5], (0..30).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let targets = [4, 0, 2, 2, 1, 3];
        let mut g = Graph::new();
        let ln = g.input(logits.clone());
        let margins = multiclass_margins_graph(&mut g, ln, &targets).unwrap();
        for (i, &t) in targets.iter().enumerate() {
            let expected = multiclass_hinge(t, logits.row(i)).unwrap();
            assert!((g.value(margins).data()[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_mean_empty_is_none() {
        let mut g = Graph::new();
        let v = g.input(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        assert!(masked_mean_graph(&mut g, v, &[false, false, false]).unwrap().is_none());
        let m = masked_mean_graph(&mut g, v, &[true, false, true]).unwrap().unwrap();
        assert_eq!(g.value(m).data()[0], 2.0);
    }

    fn tiny_nets(seed: u64) -> (Generator, Discriminator) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen = Generator::init(3, 4, 2, &[6, 6], &mut rng).unwrap();
        let disc = Discriminator::init(2, 4, &[6, 6], &mut rng).unwrap();
        (gen, disc)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn disc_loss_components_nonnegative_and_additive() {
        let (gen, disc) = tiny_nets(11);
        let z = random_matrix(3, 3, 12);
        let fake_labels = [0, 1, 3];
        let fakes = gen.forward(&z, &fake_labels).unwrap();
        let x = random_matrix(4, 2, 13);
        let real = RealSide {
            x: &x,
            labels: &[0, 1, 2, 3],
            has_label: &[true, false, true, false],
            art_labels: &[1, 1, 0, 2],
            mask: &[true, true, false, true],
        };
        let mut g = Graph::new();
        let bind = disc.params.bind(&mut g).unwrap();
        let out = discriminator_loss_graph(
            &mut g,
            &bind,
            &disc,
            real,
            FakeSide { x: &fakes, labels: &fake_labels },
            LabelMode::Real,
            10.0,
        )
        .unwrap();
        assert!(out.l_d_u >= 0.0 && out.l_d_c >= 0.0 && out.r1 >= 0.0);
        let total = g.value(out.loss).data()[0];
        assert!((total - (out.l_d_u + out.l_d_c + out.r1)).abs() < 1e-12);
    }

    #[test]
    fn all_labeled_has_no_artificial_term() {
        // every real labeled, mask all ones: under Real mode the artificial
        // selection is empty, so flipping the teacher labels must not move the loss
        let (gen, disc) = tiny_nets(17);
        let z = random_matrix(2, 3, 18);
        let fakes = gen.forward(&z, &[0, 1]).unwrap();
        let x = random_matrix(3, 2, 19);
        let run = |art: &[usize]| {
            let mut g = Graph::new();
            let bind = disc.params.bind(&mut g).unwrap();
            let out = discriminator_loss_graph(
                &mut g,
                &bind,
                &disc,
                RealSide {
                    x: &x,
                    labels: &[0, 1, 2],
                    has_label: &[true, true, true],
                    art_labels: art,
                    mask: &[true, true, true],
                },
                FakeSide { x: &fakes, labels: &[0, 1] },
                LabelMode::Real,
                10.0,
            )
            .unwrap();
            out.l_d_c
        };
        assert_eq!(run(&[0, 0, 0]), run(&[3, 3, 3]));
    }

    #[test]
    fn degenerate_rate_paths_agree() {
        // same label assignment fed once through the supervised path and once
        // through the artificial path with a full mask
        let (gen, disc) = tiny_nets(23);
        let z = random_matrix(2, 3, 24);
        let fakes = gen.forward(&z, &[2, 3]).unwrap();
        let x = random_matrix(4, 2, 25);
        let labels = [0, 3, 1, 2];
        let run = |has: bool| {
            let mut g = Graph::new();
            let bind = disc.params.bind(&mut g).unwrap();
            let out = discriminator_loss_graph(
                &mut g,
                &bind,
                &disc,
                RealSide {
                    x: &x,
                    labels: &labels,
                    has_label: &[has; 4],
                    art_labels: &labels,
                    mask: &[true; 4],
                },
                FakeSide { x: &fakes, labels: &[2, 3] },
                LabelMode::Real,
                10.0,
            )
            .unwrap();
            out.l_d_c
        };
        assert!((run(true) - run(false)).abs() < 1e-12);
    }

    #[test]
    fn generator_loss_examples_and_gradient_keys() {
        let (gen, mut disc) = tiny_nets(29);
        // zero out the discriminator: all logits 0 so l_g_u = hinge(0) = 1 and
        // l_g_c = 1 (zero margin)
        let names: Vec<String> = disc.params.iter().map(|p| p.name.clone()).collect();
        for n in &names {
            let shape = disc.params.value(n).unwrap().shape().to_vec();
            disc.params.set_value(n, Tensor::zeros(shape)).unwrap();
        }
        let z = random_matrix(3, 3, 30);
        let labels = [0, 2, 1];
        let mut g = Graph::new();
        let gen_bind = gen.params.bind(&mut g).unwrap();
        let disc_bind = disc.params.bind_frozen(&mut g);
        let out = generator_loss_graph(&mut g, &gen, &gen_bind, &disc, &disc_bind, &z, &labels, GenLossForm::Hinge)
            .unwrap();
        assert!((out.l_g_u - 1.0).abs() < 1e-12);
        assert!((out.l_g_c - 1.0).abs() < 1e-12);
        let grads = g.backward(out.loss).unwrap();
        assert!(grads.keys().all(|k| k.starts_with("gen.")), "only generator parameters in the map");
    }

    #[test]
    fn generator_hinge_zero_when_discriminator_saturated() {
        let (gen, mut disc) = tiny_nets(31);
        let names: Vec<String> = disc.params.iter().map(|p| p.name.clone()).collect();
        for n in &names {
            let shape = disc.params.value(n).unwrap().shape().to_vec();
            disc.params.set_value(n, Tensor::zeros(shape)).unwrap();
        }
        // bias the unconditional head to 5: hinge(5) = 0
        disc.params.set_value("disc.bu", Tensor::new(vec![1], vec![5.0]).unwrap()).unwrap();
        let z = random_matrix(2, 3, 32);
        let mut g = Graph::new();
        let gen_bind = gen.params.bind(&mut g).unwrap();
        let disc_bind = disc.params.bind_frozen(&mut g);
        let out = generator_loss_graph(&mut g, &gen, &gen_bind, &disc, &disc_bind, &z, &[0, 1], GenLossForm::Hinge)
            .unwrap();
        assert_eq!(out.l_g_u, 0.0);
    }

    #[test]
    fn teacher_loss_near_ln_k_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let teacher = Teacher::init(2, 10, &[8, 8], &mut rng).unwrap();
        let x = random_matrix(16, 2, 38);
        let labels: Vec<usize> = (0..16).map(|i| i % 10).collect();
        let mut g = Graph::new();
        let bind = teacher.live.bind(&mut g).unwrap();
        let loss = teacher_loss_graph(&mut g, &teacher, &bind, "teacher", &x, &labels).unwrap();
        let v = g.value(loss).data()[0];
        assert!((v - 10f64.ln()).abs() < 0.5, "init loss {v} not near ln 10");
    }

    #[test]
    fn fake_targets_live_in_upper_block() {
        let (gen, disc) = tiny_nets(41);
        let z = random_matrix(2, 3, 42);
        let fakes = gen.forward(&z, &[0, 3]).unwrap();
        let x = random_matrix(2, 2, 43);
        let mut g = Graph::new();
        let bind = disc.params.bind(&mut g).unwrap();
        // label 4 is out of range for K=4: caught before any term is built
        let bad = discriminator_loss_graph(
            &mut g,
            &bind,
            &disc,
            RealSide { x: &x, labels: &[4, 0], has_label: &[true, false], art_labels: &[0, 0], mask: &[false, false] },
            FakeSide { x: &fakes, labels: &[0, 3] },
            LabelMode::Real,
            10.0,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn label_modes_select_expected_terms() {
        let (gen, disc) = tiny_nets(47);
        let z = random_matrix(2, 3, 48);
        let fakes = gen.forward(&z, &[1, 2]).unwrap();
        let x = random_matrix(2, 2, 49);
        let loss_of = |mode: LabelMode| {
            let mut g = Graph::new();
            let bind = disc.params.bind(&mut g).unwrap();
            discriminator_loss_graph(
                &mut g,
                &bind,
                &disc,
                RealSide {
                    x: &x,
                    labels: &[0, 1],
                    has_label: &[true, true],
                    art_labels: &[2, 3],
                    mask: &[true, true],
                },
                FakeSide { x: &fakes, labels: &[1, 2] },
                mode,
                0.0,
            )
            .unwrap()
            .l_d_c
        };
        let real = loss_of(LabelMode::Real);
        let art = loss_of(LabelMode::Artificial);
        let both = loss_of(LabelMode::Both);
        // everything labeled: Real keeps only the supervised term, Artificial
        // only the teacher term, Both their sum (all share the fake term)
        let fake_only = {
            let mut g = Graph::new();
            let bind = disc.params.bind(&mut g).unwrap();
            discriminator_loss_graph(
                &mut g,
                &bind,
                &disc,
                RealSide {
                    x: &x,
                    labels: &[0, 1],
                    has_label: &[false, false],
                    art_labels: &[2, 3],
                    mask: &[false, false],
                },
                FakeSide { x: &fakes, labels: &[1, 2] },
                LabelMode::Real,
                0.0,
            )
            .unwrap()
            .l_d_c
        };
        assert!((both - (real + art - fake_only)).abs() < 1e-12);
    }
}
