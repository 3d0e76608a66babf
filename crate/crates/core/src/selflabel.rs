//! Teacher-side mechanics: EMA maintenance, artificial-label assignment,
//! reliability scoring, the selection mask, and the weak/strong augmentations.

use crate::error::{Error, Result};
use crate::nets::Teacher;
use crate::param::ParamSet;
use crate::tensor::Tensor;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Labels, reliabilities, and the selection mask for one real batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfLabelResult {
    pub labels: Vec<usize>,
    pub reliabilities: Vec<f64>,
    pub mask: Vec<bool>,
}

impl SelfLabelResult {
    pub fn selected_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }
}

/// Vector-space stand-ins for image augmentation: the weak form is a small
/// Gaussian jitter (labeling), the strong form a larger jitter plus
/// per-coordinate dropout (teacher training).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub strong_dropout: f64,
    pub seed: u64,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weak_sigma < 0.0 || self.strong_sigma < 0.0 {
            return Err(Error::Config(format!(
                "augment sigmas must be nonnegative: weak {}, strong {}",
                self.weak_sigma, self.strong_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.strong_dropout) {
            return Err(Error::Config(format!("strong_dropout {} outside [0,1)", self.strong_dropout)));
        }
        Ok(())
    }
}

fn jitter<R: Rng>(x: &Tensor, sigma: f64, rng: &mut R) -> Tensor {
    if sigma == 0.0 {
        return x.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated nonnegative");
    let mut out = x.clone();
    for v in out.data_mut() {
        *v += normal.sample(rng);
    }
    out
}

pub fn weak_augment<R: Rng>(x: &Tensor, aug: &AugmentConfig, rng: &mut R) -> Tensor {
    jitter(x, aug.weak_sigma, rng)
}

pub fn strong_augment<R: Rng>(x: &Tensor, aug: &AugmentConfig, rng: &mut R) -> Tensor {
    let mut out = jitter(x, aug.strong_sigma, rng);
    if aug.strong_dropout > 0.0 {
        for v in out.data_mut() {
            if rng.gen::<f64>() < aug.strong_dropout {
                *v = 0.0;
            }
        }
    }
    out
}

/// Row-wise argmax (ties to the lowest index) and the softmax probability of
/// that entry.
pub fn label_rows(logits: &Tensor) -> (Vec<usize>, Vec<f64>) {
    let (m, n) = (logits.rows(), logits.cols());
    let mut labels = Vec::with_capacity(m);
    let mut rel = Vec::with_capacity(m);
    for i in 0..m {
        let row = logits.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        let hi = row[best];
        let z: f64 = row.iter().map(|&v| (v - hi).exp()).sum();
        labels.push(best);
        rel.push(1.0 / z);
        let _ = n;
    }
    (labels, rel)
}

/// S[i] = 1 iff reliability[i] >= th.
pub fn self_attention_mask(reliabilities: &[f64], th: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&th) {
        return Err(Error::Config(format!("threshold {th} outside [0,1]")));
    }
    Ok(reliabilities.iter().map(|&p| p >= th).collect())
}

/// One weak augmentation draw, one EMA-teacher forward, then labels,
/// reliabilities, and the mask from the same pass.
pub fn self_label<R: Rng>(
    x_r: &Tensor,
    teacher: &Teacher,
    aug: &AugmentConfig,
    th: f64,
    rng: &mut R,
) -> Result<SelfLabelResult> {
    let x_aug = weak_augment(x_r, aug, rng);
    let logits = teacher.forward(&x_aug, true)?;
    let (labels, reliabilities) = label_rows(&logits);
    let mask = self_attention_mask(&reliabilities, th)?;
    Ok(SelfLabelResult { labels, reliabilities, mask })
}

/// every EMA value <- decay*ema + (1-decay)*live. The two sets are paired by
/// construction order and must shape-match entry for entry.
pub fn ema_update(ema: &mut ParamSet, live: &ParamSet, decay: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&decay) {
        return Err(Error::Config(format!("EMA decay {decay} outside [0,1]")));
    }
    if ema.len() != live.len() {
        return Err(Error::shape(
            "ema_update",
            format!("{} EMA entries vs {} live entries", ema.len(), live.len()),
        ));
    }
    let live_values: Vec<&Tensor> = live.iter().map(|p| &p.value).collect();
    for (e, l) in ema.iter_mut().zip(live_values) {
        if !e.value.same_shape(l) {
            return Err(Error::shape(
                "ema_update",
                format!("{}: {:?} vs {:?}", e.name, e.value.shape(), l.shape()),
            ));
        }
        for (ev, &lv) in e.value.data_mut().iter_mut().zip(l.data()) {
            *ev = decay * *ev + (1.0 - decay) * lv;
        }
    }
    Ok(())
}
