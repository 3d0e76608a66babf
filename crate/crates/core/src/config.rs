//! Run configuration: a flat key=value text format plus defaults matching the
//! reference training recipe. Every field can be overridden by a `key=value`
//! pair, and `echo()` rewrites the full configuration so a run directory is
//! always re-launchable from its own echo file.

use crate::error::{Error, Result};
use crate::losses::{GenLossForm, LabelMode};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // data
    pub true_classes: usize,
    pub dim: usize,
    pub ring_radius: f64,
    pub mixture_sigma: f64,
    pub train_samples: usize,
    pub eval_real_samples: usize,
    pub data_seed: u64,
    pub label_rate: f64,
    pub label_seed: u64,
    // labeling method
    pub k: usize,
    pub th: f64,
    pub ema_decay: f64,
    pub self_labeling: bool,
    pub label_mode: LabelMode,
    pub generator_loss: GenLossForm,
    // optimizers
    pub gan_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub teacher_lr: f64,
    pub teacher_momentum: f64,
    pub r1_gamma: f64,
    // schedule
    pub batch_artificial: usize,
    pub batch_standard: usize,
    pub iterations: usize,
    pub eval_interval: usize,
    pub eval_samples: usize,
    // augmentation
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub strong_dropout: f64,
    // run identity
    pub seed: u64,
    pub latent_dim: usize,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            true_classes: 8,
            dim: 2,
            ring_radius: 4.0,
            mixture_sigma: 0.2,
            train_samples: 8192,
            eval_real_samples: 5000,
            data_seed: 17,
            label_rate: 0.0,
            label_seed: 23,
            k: 10,
            th: 0.95,
            ema_decay: 0.999,
            self_labeling: true,
            label_mode: LabelMode::Real,
            generator_loss: GenLossForm::Hinge,
            gan_lr: 2e-4,
            beta1: 0.0,
            beta2: 0.999,
            adam_eps: 1e-8,
            teacher_lr: 0.03,
            teacher_momentum: 0.9,
            r1_gamma: 10.0,
            batch_artificial: 128,
            batch_standard: 64,
            iterations: 2000,
            eval_interval: 250,
            eval_samples: 5000,
            weak_sigma: 0.04,
            strong_sigma: 0.4,
            strong_dropout: 0.1,
            seed: 1,
            latent_dim: 8,
            out_dir: "run".into(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse {key} from {value:?}")))
}

fn label_mode_from(value: &str) -> Result<LabelMode> {
    match value {
        "artificial" => Ok(LabelMode::Artificial),
        "real" => Ok(LabelMode::Real),
        "both" => Ok(LabelMode::Both),
        other => Err(Error::Config(format!(
            "label_mode must be artificial, real, or both, got {other:?}"
        ))),
    }
}

fn label_mode_str(mode: LabelMode) -> &'static str {
    match mode {
        LabelMode::Artificial => "artificial",
        LabelMode::Real => "real",
        LabelMode::Both => "both",
    }
}

fn gen_loss_from(value: &str) -> Result<GenLossForm> {
    match value {
        "hinge" => Ok(GenLossForm::Hinge),
        "non_saturating" => Ok(GenLossForm::NonSaturating),
        other => Err(Error::Config(format!(
            "generator_loss must be hinge or non_saturating, got {other:?}"
        ))),
    }
}

fn gen_loss_str(form: GenLossForm) -> &'static str {
    match form {
        GenLossForm::Hinge => "hinge",
        GenLossForm::NonSaturating => "non_saturating",
    }
}

impl RunConfig {
    /// Apply one `key=value` override. Does not re-validate; call
    /// [`RunConfig::validate`] after the last override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "true_classes" => self.true_classes = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "ring_radius" => self.ring_radius = parse(key, value)?,
            "mixture_sigma" => self.mixture_sigma = parse(key, value)?,
            "train_samples" => self.train_samples = parse(key, value)?,
            "eval_real_samples" => self.eval_real_samples = parse(key, value)?,
            "data_seed" => self.data_seed = parse(key, value)?,
            "label_rate" => self.label_rate = parse(key, value)?,
            "label_seed" => self.label_seed = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "th" => self.th = parse(key, value)?,
            "ema_decay" => self.ema_decay = parse(key, value)?,
            "self_labeling" => self.self_labeling = parse(key, value)?,
            "label_mode" => self.label_mode = label_mode_from(value)?,
            "generator_loss" => self.generator_loss = gen_loss_from(value)?,
            "gan_lr" => self.gan_lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            "teacher_lr" => self.teacher_lr = parse(key, value)?,
            "teacher_momentum" => self.teacher_momentum = parse(key, value)?,
            "r1_gamma" => self.r1_gamma = parse(key, value)?,
            "batch_artificial" => self.batch_artificial = parse(key, value)?,
            "batch_standard" => self.batch_standard = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "eval_samples" => self.eval_samples = parse(key, value)?,
            "weak_sigma" => self.weak_sigma = parse(key, value)?,
            "strong_sigma" => self.strong_sigma = parse(key, value)?,
            "strong_dropout" => self.strong_dropout = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "latent_dim" => self.latent_dim = parse(key, value)?,
            "out_dir" => self.out_dir = value.to_string(),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines ('#' starts a comment) on top of defaults,
    /// then validate.
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_text(&text)
    }

    /// Full configuration as key=value text; `from_text(echo())` reproduces
    /// the value exactly, which makes any run directory re-launchable.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("true_classes", format!("{}", self.true_classes));
        put("dim", format!("{}", self.dim));
        put("ring_radius", format!("{:?}", self.ring_radius));
        put("mixture_sigma", format!("{:?}", self.mixture_sigma));
        put("train_samples", format!("{}", self.train_samples));
        put("eval_real_samples", format!("{}", self.eval_real_samples));
        put("data_seed", format!("{}", self.data_seed));
        put("label_rate", format!("{:?}", self.label_rate));
        put("label_seed", format!("{}", self.label_seed));
        put("k", format!("{}", self.k));
        put("th", format!("{:?}", self.th));
        put("ema_decay", format!("{:?}", self.ema_decay));
        put("self_labeling", format!("{}", self.self_labeling));
        put("label_mode", label_mode_str(self.label_mode).into());
        put("generator_loss", gen_loss_str(self.generator_loss).into());
        put("gan_lr", format!("{:?}", self.gan_lr));
        put("beta1", format!("{:?}", self.beta1));
        put("beta2", format!("{:?}", self.beta2));
        put("adam_eps", format!("{:?}", self.adam_eps));
        put("teacher_lr", format!("{:?}", self.teacher_lr));
        put("teacher_momentum", format!("{:?}", self.teacher_momentum));
        put("r1_gamma", format!("{:?}", self.r1_gamma));
        put("batch_artificial", format!("{}", self.batch_artificial));
        put("batch_standard", format!("{}", self.batch_standard));
        put("iterations", format!("{}", self.iterations));
        put("eval_interval", format!("{}", self.eval_interval));
        put("eval_samples", format!("{}", self.eval_samples));
        put("weak_sigma", format!("{:?}", self.weak_sigma));
        put("strong_sigma", format!("{:?}", self.strong_sigma));
        put("strong_dropout", format!("{:?}", self.strong_dropout));
        put("seed", format!("{}", self.seed));
        put("latent_dim", format!("{}", self.latent_dim));
        put("out_dir", self.out_dir.clone());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.true_classes < 2 {
            return fail(format!("true_classes must be >= 2, got {}", self.true_classes));
        }
        if self.dim < 2 {
            return fail(format!("dim must be >= 2, got {}", self.dim));
        }
        if self.ring_radius <= 0.0 {
            return fail(format!("ring_radius must be positive, got {}", self.ring_radius));
        }
        if self.mixture_sigma < 0.0 {
            return fail(format!("mixture_sigma must be nonnegative, got {}", self.mixture_sigma));
        }
        if self.eval_real_samples < 2 || self.eval_samples < 2 {
            return fail("eval sample counts must be >= 2".into());
        }
        if !(0.0..=1.0).contains(&self.label_rate) {
            return fail(format!("label_rate {} outside [0,1]", self.label_rate));
        }
        if self.k < 2 {
            return fail(format!("k must be >= 2, got {}", self.k));
        }
        if !(0.0..=1.0).contains(&self.th) {
            return fail(format!("th {} outside [0,1]", self.th));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return fail(format!("ema_decay {} outside [0,1]", self.ema_decay));
        }
        if self.gan_lr <= 0.0 || self.teacher_lr <= 0.0 {
            return fail("learning rates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("Adam betas must lie in [0,1)".into());
        }
        if self.adam_eps <= 0.0 {
            return fail(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if !(0.0..1.0).contains(&self.teacher_momentum) {
            return fail(format!("teacher_momentum {} outside [0,1)", self.teacher_momentum));
        }
        if self.r1_gamma < 0.0 {
            return fail(format!("r1_gamma must be nonnegative, got {}", self.r1_gamma));
        }
        if self.batch_artificial == 0 || self.batch_standard == 0 {
            return fail("batch sizes must be >= 1".into());
        }
        if self.train_samples < self.batch_artificial.max(self.true_classes) {
            return fail(format!(
                "train_samples {} below batch_artificial {} or true_classes {}",
                self.train_samples, self.batch_artificial, self.true_classes
            ));
        }
        if self.eval_interval == 0 {
            return fail("eval_interval must be >= 1".into());
        }
        if self.weak_sigma < 0.0 || self.strong_sigma < 0.0 {
            return fail("augmentation sigmas must be nonnegative".into());
        }
        if !(0.0..1.0).contains(&self.strong_dropout) {
            return fail(format!("strong_dropout {} outside [0,1)", self.strong_dropout));
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be >= 1".into());
        }
        if self.out_dir.is_empty() {
            return fail("out_dir must be nonempty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_recipe() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.k, 10);
        assert_eq!(c.th, 0.95);
        assert_eq!(c.ema_decay, 0.999);
        assert_eq!(c.teacher_momentum, 0.9);
        assert_eq!(c.batch_artificial, 128);
        assert_eq!(c.batch_standard, 64);
        assert_eq!(c.r1_gamma, 10.0);
        assert_eq!(c.beta1, 0.0);
        assert_eq!(c.gan_lr, 2e-4);
    }

    #[test]
    fn echo_round_trips_exactly() {
        let mut c = RunConfig::default();
        c.th = 0.125;
        c.label_mode = LabelMode::Both;
        c.generator_loss = GenLossForm::NonSaturating;
        c.gan_lr = 3.5e-4;
        c.iterations = 123;
        c.out_dir = "elsewhere".into();
        let back = RunConfig::from_text(&c.echo()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "\n# comment\n  k = 12  # trailing\n\nth=0.5\nlabel_mode = artificial\n";
        let c = RunConfig::from_text(text).unwrap();
        assert_eq!(c.k, 12);
        assert_eq!(c.th, 0.5);
        assert_eq!(c.label_mode, LabelMode::Artificial);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_text("not_a_key = 3").is_err());
        assert!(RunConfig::from_text("k = banana").is_err());
        assert!(RunConfig::from_text("just a line").is_err());
        assert!(RunConfig::from_text("label_mode = never").is_err());
        assert!(RunConfig::from_text("generator_loss = wgan").is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_fields() {
        for bad in [
            "k = 1",
            "th = 1.5",
            "ema_decay = -0.1",
            "batch_artificial = 0",
            "label_rate = 2",
            "eval_interval = 0",
            "strong_dropout = 1.0",
            "gan_lr = 0",
            "beta2 = 1.0",
            "train_samples = 10",
            "dim = 1",
        ] {
            assert!(RunConfig::from_text(bad).is_err(), "{bad} should fail validation");
        }
    }

    #[test]
    fn overrides_change_single_fields() {
        let mut c = RunConfig::default();
        c.set("seed", "42").unwrap();
        c.set("self_labeling", "false").unwrap();
        assert_eq!(c.seed, 42);
        assert!(!c.self_labeling);
        c.validate().unwrap();
    }
}
