//! Randomized invariants: selection nesting, margin-loss bounds, distance
//! symmetry, label-assignment invariances, and round-trip identities.

use proptest::prelude::*;
use selfgan::checkpoint::Checkpoint;
use selfgan::config::RunConfig;
use selfgan::data::{make_mixture_dataset, mask_labels, MixtureSpec};
use selfgan::losses::{hinge, multiclass_hinge, softmax_cross_entropy};
use selfgan::metrics::{alignment_accuracy, frechet_distance, GaussianSummary};
use selfgan::optim::{Adam, AdamParams};
use selfgan::param::ParamSet;
use selfgan::selflabel::self_attention_mask;
use selfgan::tensor::Tensor;
use std::collections::BTreeMap;

proptest! {
    #[test]
    fn selection_is_nested_across_increasing_thresholds(
        rel in prop::collection::vec(0.0f64..=1.0, 1..64),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let loose = self_attention_mask(&rel, lo).unwrap();
        let tight = self_attention_mask(&rel, hi).unwrap();
        for i in 0..rel.len() {
            prop_assert!(!tight[i] || loose[i], "sample {i} selected at {hi} but not at {lo}");
        }
        let n_loose = loose.iter().filter(|&&s| s).count();
        let n_tight = tight.iter().filter(|&&s| s).count();
        prop_assert!(n_tight <= n_loose);
    }

    #[test]
    fn hinge_is_nonnegative_and_nonincreasing(t in -10.0f64..10.0, d in 0.0f64..5.0) {
        prop_assert!(hinge(t) >= 0.0);
        prop_assert!(hinge(t + d) <= hinge(t));
        if t >= 1.0 {
            prop_assert_eq!(hinge(t), 0.0);
        }
    }

    #[test]
    fn multiclass_hinge_is_zero_exactly_when_margin_met(
        logits in prop::collection::vec(-5.0f64..5.0, 2..8),
        target_raw in 0usize..8,
    ) {
        let target = target_raw % logits.len();
        let v = multiclass_hinge(target, &logits).unwrap();
        prop_assert!(v >= 0.0);
        let rival = logits
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != target)
            .map(|(_, &l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        if logits[target] - rival >= 1.0 {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!(v > 0.0);
        }
    }

    #[test]
    fn cross_entropy_is_positive_and_shift_invariant(
        logits in prop::collection::vec(-8.0f64..8.0, 2..8),
        target_raw in 0usize..8,
        shift in -5.0f64..5.0,
    ) {
        let target = target_raw % logits.len();
        let v = softmax_cross_entropy(target, &logits).unwrap();
        prop_assert!(v > 0.0);
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let w = softmax_cross_entropy(target, &shifted).unwrap();
        prop_assert!((v - w).abs() < 1e-9, "shift changed the loss: {v} vs {w}");
    }

    #[test]
    fn visible_label_count_is_exact(
        n in 1usize..400,
        rate in 0.0f64..=1.0,
        seed in 0u64..1000,
    ) {
        let spec = MixtureSpec::ring(4, 2, 2.0, 0.1, 7).unwrap();
        let mut ds = make_mixture_dataset(&spec, n.max(4)).unwrap();
        let mut again = ds.clone();
        mask_labels(&mut ds, rate, seed).unwrap();
        let visible = ds.has_label.iter().filter(|&&v| v).count();
        let expected = (rate * ds.len() as f64).round() as usize;
        prop_assert_eq!(visible, expected);
        mask_labels(&mut again, rate, seed).unwrap();
        prop_assert_eq!(&ds.has_label, &again.has_label);
    }

    #[test]
    fn distance_between_summaries_is_symmetric_and_nonnegative(
        raw_a in prop::collection::vec(-2.0f64..2.0, 4),
        raw_b in prop::collection::vec(-2.0f64..2.0, 4),
        mean_a in prop::collection::vec(-3.0f64..3.0, 2),
        mean_b in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let a = GaussianSummary::new(mean_a, synth_cov(&raw_a)).unwrap();
        let b = GaussianSummary::new(mean_b, synth_cov(&raw_b)).unwrap();
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-6, "asymmetric: {ab} vs {ba}");
        prop_assert!(frechet_distance(&a, &a).unwrap() < 1e-7);
    }

    #[test]
    fn alignment_is_bounded_and_survives_relabeling(
        pred in prop::collection::vec(0usize..3, 8..12),
        truth_raw in prop::collection::vec(0usize..3, 12),
        perm_pick in 0usize..6,
    ) {
        let truth = &truth_raw[..pred.len()];
        let acc = alignment_accuracy(&pred, truth, 3, 3).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let p = perms[perm_pick];
        let renamed: Vec<usize> = pred.iter().map(|&c| p[c]).collect();
        let acc2 = alignment_accuracy(&renamed, truth, 3, 3).unwrap();
        prop_assert!((acc - acc2).abs() < 1e-12, "relabeling moved accuracy: {acc} vs {acc2}");
    }

    #[test]
    fn checkpoint_bytes_round_trip(
        floats in prop::collection::vec(-1e12f64..1e12, 0..20),
        ints in prop::collection::vec(0u64..u64::MAX, 0..10),
        text in "[a-z0-9 ]{0,40}",
    ) {
        let mut cp = Checkpoint::new();
        cp.push_f64("floats", floats.clone()).unwrap();
        cp.push_u64("ints", ints.clone()).unwrap();
        cp.push_text("text", &text).unwrap();
        let bytes = cp.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        let fb = back.f64s("floats").unwrap();
        prop_assert_eq!(fb.len(), floats.len());
        for (x, y) in floats.iter().zip(fb) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(back.u64s("ints").unwrap(), &ints[..]);
        prop_assert_eq!(back.text("text").unwrap(), &text);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn first_adam_step_opposes_the_gradient(
        g in prop::collection::vec(-3.0f64..3.0, 1..6),
        lr in 1e-5f64..1e-1,
    ) {
        let dim = g.len();
        let mut params = ParamSet::new();
        params.push("w", Tensor::zeros(vec![1, dim]), true).unwrap();
        let mut grads: BTreeMap<String, Tensor> = BTreeMap::new();
        grads.insert("w".into(), Tensor::new(vec![1, dim], g.clone()).unwrap());
        let mut adam = Adam::new(AdamParams { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 });
        adam.step(&mut params, &grads).unwrap();
        let w = params.value("w").unwrap().data();
        for i in 0..dim {
            if g[i].abs() > 1e-12 {
                prop_assert!(w[i] * g[i] < 0.0, "coordinate {i} moved with the gradient");
            }
            prop_assert!(w[i].abs() <= lr * (1.0 + 1e-9));
        }
    }

    #[test]
    fn config_text_round_trips_through_echo(
        k in 2usize..12,
        th in 0.0f64..=1.0,
        rate in 0.0f64..=1.0,
        gamma in 0.0f64..20.0,
        iters in 1usize..50,
        seed in 0u64..10_000,
    ) {
        let mut cfg = RunConfig::default();
        cfg.k = k;
        cfg.th = th;
        cfg.label_rate = rate;
        cfg.r1_gamma = gamma;
        cfg.iterations = iters;
        cfg.seed = seed;
        cfg.validate().unwrap();
        let echoed = RunConfig::from_text(&cfg.echo()).unwrap();
        prop_assert_eq!(&echoed, &cfg);
        prop_assert_eq!(echoed.echo(), cfg.echo());
    }
}

/// 2x2 symmetric positive-definite matrix from four raw values.
fn synth_cov(raw: &[f64]) -> Vec<Vec<f64>> {
    let (a, b, c, d) = (raw[0], raw[1], raw[2], raw[3]);
    // A·Aᵀ + 0.1·I is symmetric with eigenvalues ≥ 0.1
    vec![
        vec![a * a + b * b + 0.1, a * c + b * d],
        vec![a * c + b * d, c * c + d * d + 0.1],
    ]
}
