//! End-to-end training loop.
//!
//! Each iteration runs, in order: one sampling pass (latents, conditioning
//! labels, real batch), a teacher step on strongly augmented fakes followed
//! by the EMA update, self-labeling of the real batch through the updated
//! EMA teacher, a discriminator Adam step, and a generator Adam step reusing
//! the iteration's latent draw. Periodic evaluation runs on a held-out real
//! split with its own per-iteration RNG so it never perturbs the training
//! stream.

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::data::{make_mixture_dataset, mask_labels, sample_batch, Dataset, MixtureSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::losses::{
    discriminator_loss_graph, generator_loss_graph, mean_hinge_graph, r1_penalty_graph,
    teacher_loss_graph, DiscLossGraph, FakeSide, GenLossForm, RealSide,
};
use crate::metrics::{
    alignment_accuracy, class_distribution_vs_threshold, dominant_class_ratio_curve,
    frechet_distance, mode_coverage, summarize, GaussianSummary, ThresholdCurve,
};
use crate::nets::{Discriminator, Generator, Teacher};
use crate::optim::{Adam, AdamParams, MomentumParams, NesterovMomentum};
use crate::param::ParamSet;
use crate::selflabel::{ema_update, label_rows, self_attention_mask, self_label, strong_augment, AugmentConfig};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

/// Trunk widths are fixed: small enough for sub-minute runs, expressive
/// enough for 8-mode mixtures.
pub const GEN_HIDDEN: [usize; 3] = [128, 128, 128];
pub const DISC_HIDDEN: [usize; 3] = [128, 128, 128];
pub const TEACHER_HIDDEN: [usize; 2] = [64, 64];

/// Loss values of one training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub l_d_u: f64,
    pub l_d_c: f64,
    pub r1: f64,
    pub l_g_u: f64,
    pub l_g_c: f64,
    pub l_c: f64,
    /// Fraction of the real batch passing the reliability threshold.
    pub selected_fraction: f64,
}

/// Metrics of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    pub frechet: f64,
    pub alignment: f64,
    pub mode_coverage: usize,
    /// Fraction of held-out reals passing the reliability threshold.
    pub selected_fraction: f64,
}

/// Deterministic run record: everything here is a pure function of the
/// configuration, so identical configs produce byte-identical serializations.
/// Wall-clock numbers live in [`StageTimings`], outside this struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_echo: String,
    pub losses: Vec<IterationRecord>,
    pub evals: Vec<EvalRecord>,
}

impl RunReport {
    pub fn final_eval(&self) -> Option<&EvalRecord> {
        self.evals.last()
    }

    pub fn best_frechet(&self) -> Option<f64> {
        self.evals.iter().map(|e| e.frechet).fold(None, |best, v| match best {
            Some(b) if b <= v => Some(b),
            _ => Some(v),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("bad report JSON: {e}")))
    }

    pub fn losses_csv(&self) -> String {
        let mut s = String::from("iteration,l_d_u,l_d_c,r1,l_g_u,l_g_c,l_c,selected_fraction\n");
        for r in &self.losses {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.iteration, r.l_d_u, r.l_d_c, r.r1, r.l_g_u, r.l_g_c, r.l_c, r.selected_fraction
            ));
        }
        s
    }

    pub fn evals_csv(&self) -> String {
        let mut s = String::from("iteration,frechet,alignment,mode_coverage,selected_fraction\n");
        for e in &self.evals {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e.iteration, e.frechet, e.alignment, e.mode_coverage, e.selected_fraction
            ));
        }
        s
    }
}

/// Accumulated wall-clock seconds per stage. Never serialized with the
/// report: timing noise must not break report reproducibility.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub teacher_s: f64,
    pub self_label_s: f64,
    pub disc_s: f64,
    pub gen_s: f64,
    pub eval_s: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.teacher_s + self.self_label_s + self.disc_s + self.gen_s + self.eval_s
    }
}

/// Full mutable training state. Everything that influences future iterations
/// is either here or derivable from the config, which is what makes exact
/// checkpoint resume possible.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: RunConfig,
    pub iteration: usize,
    pub gen: Generator,
    pub disc: Discriminator,
    pub teacher: Teacher,
    pub adam_g: Adam,
    pub adam_d: Adam,
    pub teacher_opt: NesterovMomentum,
    pub rng: ChaCha8Rng,
    pub report: RunReport,
    pub timings: StageTimings,
    pub train_ds: Dataset,
    pub eval_ds: Dataset,
    aug: AugmentConfig,
}

fn ensure_finite(iteration: usize, term: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, term: term.into() })
    }
}

fn draw_latents<R: Rng>(n: usize, d: usize, rng: &mut R) -> Tensor {
    let mut t = Tensor::zeros(vec![n, d]);
    for v in t.data_mut() {
        *v = rng.sample(rand_distr::StandardNormal);
    }
    t
}

fn draw_labels<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

/// Evaluation RNG is a pure function of (seed, iteration): evaluation can be
/// repeated or skipped without moving the training stream.
fn eval_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ iteration.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn build_datasets(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    let spec = MixtureSpec::ring(
        config.true_classes,
        config.dim,
        config.ring_radius,
        config.mixture_sigma,
        config.data_seed,
    )?;
    let full = make_mixture_dataset(&spec, config.train_samples + config.eval_real_samples)?;
    let (mut train, eval) = full.split_at(config.train_samples)?;
    mask_labels(&mut train, config.label_rate, config.label_seed)?;
    Ok((train, eval))
}

impl TrainState {
    pub fn new(config: &RunConfig) -> Result<TrainState> {
        config.validate()?;
        let (train_ds, eval_ds) = build_datasets(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let gen = Generator::init(config.latent_dim, config.k, config.dim, &GEN_HIDDEN, &mut rng)?;
        let disc = Discriminator::init(config.dim, config.k, &DISC_HIDDEN, &mut rng)?;
        let teacher = Teacher::init(config.dim, config.k, &TEACHER_HIDDEN, &mut rng)?;
        let adam_hp = AdamParams {
            lr: config.gan_lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
        };
        let aug = AugmentConfig {
            weak_sigma: config.weak_sigma,
            strong_sigma: config.strong_sigma,
            strong_dropout: config.strong_dropout,
            seed: config.seed,
        };
        aug.validate()?;
        Ok(TrainState {
            config: config.clone(),
            iteration: 0,
            gen,
            disc,
            teacher,
            adam_g: Adam::new(adam_hp),
            adam_d: Adam::new(adam_hp),
            teacher_opt: NesterovMomentum::new(MomentumParams {
                lr: config.teacher_lr,
                mu: config.teacher_momentum,
            }),
            rng,
            report: RunReport {
                config_echo: config.echo(),
                losses: Vec::new(),
                evals: Vec::new(),
            },
            timings: StageTimings::default(),
            train_ds,
            eval_ds,
            aug,
        })
    }

    /// Train from the current iteration to `config.iterations`, evaluating at
    /// iteration 0, every `eval_interval`, and at the end.
    pub fn run(&mut self) -> Result<()> {
        if self.report.evals.is_empty() {
            self.evaluate()?;
        }
        while self.iteration < self.config.iterations {
            self.step_once()?;
            if self.iteration % self.config.eval_interval == 0 || self.iteration == self.config.iterations
            {
                self.evaluate()?;
            }
        }
        Ok(())
    }

    fn step_once(&mut self) -> Result<()> {
        let iter = self.iteration;
        let cfg = self.config.clone();

        // one sampling pass per iteration; the generator step reuses (z, c)
        let z = draw_latents(cfg.batch_standard, cfg.latent_dim, &mut self.rng);
        let c = draw_labels(cfg.batch_standard, cfg.k, &mut self.rng);
        let real = sample_batch(&self.train_ds, cfg.batch_artificial, &mut self.rng)?;
        let fakes = self.gen.forward(&z, &c)?;

        // teacher step on strongly augmented fakes, then the EMA update;
        // the labels used below come from the post-update EMA copy
        let (l_c, sl) = if cfg.self_labeling {
            let t0 = Instant::now();
            let strong = strong_augment(&fakes, &self.aug, &mut self.rng);
            let structure = self.teacher.clone();
            let mut l_c = f64::NAN;
            self.teacher_opt.step(&mut self.teacher.live, |look| {
                let mut g = Graph::new();
                let bind = look.bind(&mut g)?;
                let loss = teacher_loss_graph(&mut g, &structure, &bind, "teacher", &strong, &c)?;
                l_c = g.value(loss).data()[0];
                g.backward(loss)
            })?;
            ensure_finite(iter, "l_c", l_c)?;
            ema_update(&mut self.teacher.ema, &self.teacher.live, cfg.ema_decay)?;
            self.timings.teacher_s += t0.elapsed().as_secs_f64();

            let t1 = Instant::now();
            let sl = self_label(&real.x, &self.teacher, &self.aug, cfg.th, &mut self.rng)?;
            self.timings.self_label_s += t1.elapsed().as_secs_f64();
            (l_c, sl)
        } else {
            (0.0, crate::selflabel::SelfLabelResult {
                labels: vec![0; cfg.batch_artificial],
                reliabilities: vec![0.0; cfg.batch_artificial],
                mask: vec![false; cfg.batch_artificial],
            })
        };

        // discriminator step on reals and detached fakes
        let t2 = Instant::now();
        let real_labels = real.labels_or(0);
        let flags = real.flags();
        let d_out = {
            let mut g = Graph::new();
            let dbind = self.disc.params.bind(&mut g)?;
            let d_out = if cfg.self_labeling {
                discriminator_loss_graph(
                    &mut g,
                    &dbind,
                    &self.disc,
                    RealSide {
                        x: &real.x,
                        labels: &real_labels,
                        has_label: &flags,
                        art_labels: &sl.labels,
                        mask: &sl.mask,
                    },
                    FakeSide { x: &fakes, labels: &c },
                    cfg.label_mode,
                    cfg.r1_gamma,
                )?
            } else {
                unconditional_disc_loss_graph(&mut g, &dbind, &self.disc, &real.x, &fakes, cfg.r1_gamma)?
            };
            let grads = g.backward(d_out.loss)?;
            self.adam_d.step(&mut self.disc.params, &grads)?;
            d_out
        };
        ensure_finite(iter, "l_d", d_out.l_d_u + d_out.l_d_c + d_out.r1)?;
        self.timings.disc_s += t2.elapsed().as_secs_f64();

        // generator step: discriminator enters as frozen constants
        let t3 = Instant::now();
        let (l_g_u, l_g_c) = {
            let mut g = Graph::new();
            let gbind = self.gen.params.bind(&mut g)?;
            let dfrozen = self.disc.params.bind_frozen(&mut g);
            if cfg.self_labeling {
                let gl = generator_loss_graph(
                    &mut g,
                    &self.gen,
                    &gbind,
                    &self.disc,
                    &dfrozen,
                    &z,
                    &c,
                    cfg.generator_loss,
                )?;
                let grads = g.backward(gl.loss)?;
                self.adam_g.step(&mut self.gen.params, &grads)?;
                (gl.l_g_u, gl.l_g_c)
            } else {
                let zn = g.input(z.clone());
                let fk = self.gen.forward_graph(&mut g, &gbind, zn, &c)?;
                let out = self.disc.forward_graph(&mut g, &dfrozen, fk)?;
                let loss = match cfg.generator_loss {
                    GenLossForm::Hinge => mean_hinge_graph(&mut g, out.u_logit, 1.0)?,
                    GenLossForm::NonSaturating => {
                        let m = g.mean(out.u_logit);
                        g.scale(m, -1.0)
                    }
                };
                let l_g_u = g.value(loss).data()[0];
                let grads = g.backward(loss)?;
                self.adam_g.step(&mut self.gen.params, &grads)?;
                (l_g_u, 0.0)
            }
        };
        ensure_finite(iter, "l_g", l_g_u + l_g_c)?;
        self.timings.gen_s += t3.elapsed().as_secs_f64();

        self.report.losses.push(IterationRecord {
            iteration: iter,
            l_d_u: d_out.l_d_u,
            l_d_c: d_out.l_d_c,
            r1: d_out.r1,
            l_g_u,
            l_g_c,
            l_c,
            selected_fraction: sl.selected_fraction(),
        });
        self.iteration += 1;
        Ok(())
    }

    /// One full metric pass at the current state. Pure given the state: the
    /// evaluation RNG depends only on (seed, iteration), so recomputing this
    /// from a loaded checkpoint reproduces the in-training record exactly.
    pub fn compute_eval(&self) -> Result<EvalRecord> {
        let cfg = &self.config;
        let mut rng = eval_rng(cfg.seed, self.iteration as u64);
        let z = draw_latents(cfg.eval_samples, cfg.latent_dim, &mut rng);
        let c = draw_labels(cfg.eval_samples, cfg.k, &mut rng);
        let fakes = self.gen.forward(&z, &c)?;

        let real_summary = summarize(&self.eval_ds.x)?;
        let fake_summary = summarize(&fakes)?;
        let frechet = frechet_distance(&real_summary, &fake_summary)?;

        let logits = self.teacher.forward(&self.eval_ds.x, true)?;
        let (labels, reliabilities) = label_rows(&logits);
        let alignment = alignment_accuracy(&labels, &self.eval_ds.y, cfg.k, cfg.true_classes)?;
        let mask = self_attention_mask(&reliabilities, cfg.th)?;
        let selected = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;

        let radius = (3.0 * cfg.mixture_sigma).max(1e-9);
        let coverage = mode_coverage(&fakes, &self.eval_ds.spec.centers, radius)?;

        ensure_finite(self.iteration, "frechet", frechet)?;
        Ok(EvalRecord {
            iteration: self.iteration,
            frechet,
            alignment,
            mode_coverage: coverage,
            selected_fraction: selected,
        })
    }

    fn evaluate(&mut self) -> Result<()> {
        let t0 = Instant::now();
        let record = self.compute_eval()?;
        self.report.evals.push(record);
        self.timings.eval_s += t0.elapsed().as_secs_f64();
        Ok(())
    }

    /// Moment summary of the held-out real split (the Fréchet reference).
    pub fn real_summary(&self) -> Result<GaussianSummary> {
        summarize(&self.eval_ds.x)
    }

    /// EMA-teacher labels and reliabilities on the held-out reals.
    pub fn eval_real_labels(&self) -> Result<(Vec<usize>, Vec<f64>)> {
        let logits = self.teacher.forward(&self.eval_ds.x, true)?;
        Ok(label_rows(&logits))
    }

    /// Dominant-class-ratio curve on the held-out reals at the current state.
    pub fn threshold_curve(&self, thresholds: &[f64]) -> Result<ThresholdCurve> {
        let (labels, reliabilities) = self.eval_real_labels()?;
        dominant_class_ratio_curve(&self.eval_ds.y, &labels, &reliabilities, thresholds)
    }

    /// Per-threshold true-class distribution of held-out reals carrying one
    /// artificial label.
    pub fn class_distribution(
        &self,
        artificial_label: usize,
        thresholds: &[f64],
    ) -> Result<Vec<Option<Vec<f64>>>> {
        let (labels, reliabilities) = self.eval_real_labels()?;
        let mut truth = Vec::new();
        let mut rel = Vec::new();
        for i in 0..labels.len() {
            if labels[i] == artificial_label {
                truth.push(self.eval_ds.y[i]);
                rel.push(reliabilities[i]);
            }
        }
        class_distribution_vs_threshold(&truth, &rel, thresholds, self.config.true_classes)
    }

    fn push_param_values(cp: &mut Checkpoint, ps: &ParamSet) -> Result<()> {
        for p in ps.iter() {
            cp.push_f64(&p.name, p.value.data().to_vec())?;
        }
        Ok(())
    }

    fn push_moment_maps(
        cp: &mut Checkpoint,
        prefix: &str,
        maps: &[(&str, &std::collections::BTreeMap<String, Tensor>)],
    ) -> Result<()> {
        for (tag, map) in maps {
            for (name, tensor) in map.iter() {
                cp.push_f64(&format!("{prefix}.{tag}.{name}"), tensor.data().to_vec())?;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut cp = Checkpoint::new();
        cp.push_text("config", &self.config.echo())?;
        cp.push_u64("iteration", vec![self.iteration as u64])?;
        cp.push_u64("rng", rng_to_words(&self.rng))?;
        Self::push_param_values(&mut cp, &self.gen.params)?;
        Self::push_param_values(&mut cp, &self.disc.params)?;
        Self::push_param_values(&mut cp, &self.teacher.live)?;
        Self::push_param_values(&mut cp, &self.teacher.ema)?;
        cp.push_u64("adam_g.t", vec![self.adam_g.t()])?;
        Self::push_moment_maps(
            &mut cp,
            "adam_g",
            &[("m", self.adam_g.first_moments()), ("v", self.adam_g.second_moments())],
        )?;
        cp.push_u64("adam_d.t", vec![self.adam_d.t()])?;
        Self::push_moment_maps(
            &mut cp,
            "adam_d",
            &[("m", self.adam_d.first_moments()), ("v", self.adam_d.second_moments())],
        )?;
        Self::push_moment_maps(&mut cp, "teacher_opt", &[("v", self.teacher_opt.velocities())])?;
        cp.push_text("report", &serde_json::to_string(&self.report).expect("report serializes"))?;
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    fn restore_param_values(cp: &Checkpoint, ps: &mut ParamSet) -> Result<()> {
        let entries: Vec<(String, Vec<usize>)> =
            ps.iter().map(|p| (p.name.clone(), p.value.shape().to_vec())).collect();
        for (name, shape) in entries {
            let values = cp.f64s(&name)?.to_vec();
            ps.set_value(&name, Tensor::new(shape, values)?)?;
        }
        Ok(())
    }

    fn restore_moment_map(
        cp: &Checkpoint,
        prefix: &str,
        tag: &str,
        ps: &ParamSet,
    ) -> Result<std::collections::BTreeMap<String, Tensor>> {
        let mut map = std::collections::BTreeMap::new();
        for p in ps.iter() {
            if !p.trainable {
                continue;
            }
            let key = format!("{prefix}.{tag}.{}", p.name);
            if cp.has(&key) {
                map.insert(p.name.clone(), Tensor::new(p.value.shape().to_vec(), cp.f64s(&key)?.to_vec())?);
            }
        }
        Ok(map)
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<TrainState> {
        let config = RunConfig::from_text(cp.text("config")?)?;
        let mut st = TrainState::new(&config)?;
        let iter_words = cp.u64s("iteration")?;
        if iter_words.len() != 1 {
            return Err(Error::Checkpoint("iteration entry must hold one value".into()));
        }
        st.iteration = iter_words[0] as usize;
        st.rng = rng_from_words(cp.u64s("rng")?)?;
        Self::restore_param_values(cp, &mut st.gen.params)?;
        Self::restore_param_values(cp, &mut st.disc.params)?;
        Self::restore_param_values(cp, &mut st.teacher.live)?;
        Self::restore_param_values(cp, &mut st.teacher.ema)?;
        let t_g = cp.u64s("adam_g.t")?[0];
        let m_g = Self::restore_moment_map(cp, "adam_g", "m", &st.gen.params)?;
        let v_g = Self::restore_moment_map(cp, "adam_g", "v", &st.gen.params)?;
        st.adam_g.restore(t_g, m_g, v_g);
        let t_d = cp.u64s("adam_d.t")?[0];
        let m_d = Self::restore_moment_map(cp, "adam_d", "m", &st.disc.params)?;
        let v_d = Self::restore_moment_map(cp, "adam_d", "v", &st.disc.params)?;
        st.adam_d.restore(t_d, m_d, v_d);
        let vel = Self::restore_moment_map(cp, "teacher_opt", "v", &st.teacher.live)?;
        st.teacher_opt.restore(vel);
        st.report = RunReport::from_json(cp.text("report")?)?;
        Ok(st)
    }

    pub fn load(path: &Path) -> Result<TrainState> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Plain unconditional GAN discriminator loss (hinge + R1): the ablation
/// baseline when self-labeling is off. The conditional head stays untrained.
fn unconditional_disc_loss_graph(
    g: &mut Graph,
    bind: &crate::param::Binding,
    disc: &Discriminator,
    x_r: &Tensor,
    x_f: &Tensor,
    gamma: f64,
) -> Result<DiscLossGraph> {
    let xr = g.input(x_r.clone());
    let out_r = disc.forward_graph(g, bind, xr)?;
    let xf = g.input(x_f.clone());
    let out_f = disc.forward_graph(g, bind, xf)?;
    let h_r = mean_hinge_graph(g, out_r.u_logit, 1.0)?;
    let h_f = mean_hinge_graph(g, out_f.u_logit, -1.0)?;
    let adv = g.add(h_r, h_f)?;
    let r1 = r1_penalty_graph(g, bind, disc, &out_r.pre_activations, gamma)?;
    let loss = g.add(adv, r1)?;
    Ok(DiscLossGraph {
        loss,
        l_d_u: g.value(adv).data()[0],
        l_d_c: 0.0,
        r1: g.value(r1).data()[0],
    })
}

fn rng_to_words(rng: &ChaCha8Rng) -> Vec<u64> {
    let seed = rng.get_seed();
    let mut out = Vec::with_capacity(7);
    for c in seed.chunks_exact(8) {
        out.push(u64::from_le_bytes(c.try_into().expect("8 bytes")));
    }
    let wp = rng.get_word_pos();
    out.push(wp as u64);
    out.push((wp >> 64) as u64);
    out.push(rng.get_stream());
    out
}

fn rng_from_words(words: &[u64]) -> Result<ChaCha8Rng> {
    if words.len() != 7 {
        return Err(Error::Checkpoint(format!("rng entry has {} words, expected 7", words.len())));
    }
    let mut seed = [0u8; 32];
    for (i, w) in words[..4].iter().enumerate() {
        seed[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(words[6]);
    rng.set_word_pos((words[4] as u128) | ((words[5] as u128) << 64));
    Ok(rng)
}

/// Convenience wrapper: fresh state, full run, return the final state.
pub fn train(config: &RunConfig) -> Result<TrainState> {
    let mut st = TrainState::new(config)?;
    st.run()?;
    Ok(st)
}
