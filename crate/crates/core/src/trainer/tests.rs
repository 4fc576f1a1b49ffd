use super::*;
use crate::nn::gradient_check;
use crate::scm::build_syntext;
use crate::synthgen::{assemble, AssembleConfig, DatasetSplits, RendererSpec, TextRenderer};
use ndarray::array;

fn splits(kappa: f64, observed: bool, seed: u64) -> DatasetSplits {
    let scm = build_syntext(kappa, observed).unwrap();
    let r = RendererSpec::BagOfWords(TextRenderer::default());
    assemble(&scm, &r, &AssembleConfig::new(120, kappa, seed, "spurious")).unwrap()
}

fn quick(objective: Method) -> TrainConfig {
    TrainConfig { objective, epochs: 40, ..Default::default() }
}

fn linear(w: f64, b: f64) -> Mlp {
    let mut m = Mlp::new(1, None, 1, 0);
    m.params = vec![w, b];
    m
}

#[test]
fn task_loss_examples() {
    let x = array![[1.0], [-1.0]];
    let y = [1.0, 0.0];
    assert!(loss_task(&linear(60.0, 0.0), &x, &y) < 1e-20);
    assert!((loss_task(&linear(0.0, 0.0), &x, &y) - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn regularizer_examples() {
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let pairs = |first: f64, second: f64, target: f64| RegPairs {
        first: array![[first], [first]],
        second: array![[second], [second]],
        target,
    };
    let blind = linear(0.0, 0.4);
    assert_eq!(loss_reg(&blind, &[pairs(1.0, -1.0, 0.0)]), 0.0);
    assert!((loss_reg(&blind, &[pairs(1.0, -1.0, 0.3)]) - 0.09).abs() < 1e-15);
    let gap = linear(1.0, 0.0);
    assert!(loss_reg(&gap, &[pairs(logit(0.8), 0.0, 0.3)]) < 1e-30);
    let two = [pairs(1.0, -1.0, 0.3), pairs(1.0, -1.0, 0.3)];
    assert!((loss_reg(&blind, &two) - 0.18).abs() < 1e-15);
}

fn check(batch: &Batch, hidden: Option<usize>) -> f64 {
    let net = Mlp::new(batch.x.ncols(), hidden, 1, 11);
    let (_, _, g) = composite_loss(&net, batch);
    let mut f = |p: &[f64]| {
        let mut m = net.clone();
        m.params = p.to_vec();
        composite_loss(&m, batch).0
    };
    gradient_check(&mut f, &net.params, &g, 12, 5)
}

#[test]
fn gradients_match_finite_differences() {
    let s = splits(0.8, true, 1);
    let cfg = TrainConfig {
        objective: Method::AutoAcer,
        effect_targets: [("spurious".to_string(), 0.3), ("causal".to_string(), -0.1)].into(),
        ..Default::default()
    };
    for hidden in [None, Some(5)] {
        let plain = Batch::plain(features(&s.train), float_labels(&s.train));
        assert!(check(&plain, hidden) < 1e-4, "cross-entropy");

        let mut weighted = plain.clone();
        weighted.weights = (0..plain.y.len()).map(|i| 1.0 + (i % 3) as f64).collect();
        assert!(check(&weighted, hidden) < 1e-4, "weighted cross-entropy");

        let mut reg = plain.clone();
        reg.reg = reg_pairs(&s.train, &cfg).unwrap();
        reg.r = 3.0;
        assert!(check(&reg, hidden) < 1e-4, "regularizer");

        let mut irm = plain.clone();
        irm.env = (0..plain.y.len()).map(|i| i % 2).collect();
        irm.irm_lambda = Some(5.0);
        assert!(check(&irm, hidden) < 1e-4, "IRMv1 penalty");
    }
}

#[test]
fn zero_strength_reproduces_erm_bitwise() {
    let s = splits(0.8, false, 2);
    let erm = train(&quick(Method::Erm), &s.train, &s.val).unwrap();
    let mut cfg = quick(Method::AutoAcer);
    cfg.effect_targets = [("spurious".to_string(), 0.5)].into();
    let acer = train(&cfg, &s.train, &s.val).unwrap();
    assert_eq!(erm.model.net.params, acer.model.net.params);
    let mut ck = acer.checkpoints.clone();
    ck.iter_mut().for_each(|c| c.r = 0.0);
    assert_eq!(erm.checkpoints, ck);
}

#[test]
fn large_strength_removes_the_spurious_gap() {
    let s = splits(0.9, false, 3);
    let cfg = TrainConfig {
        objective: Method::AutoAcer,
        r: 1000.0,
        effect_targets: [("spurious".to_string(), 0.0)].into(),
        epochs: 200,
        ..Default::default()
    };
    let run = train(&cfg, &s.train, &s.val).unwrap();
    let gap = prediction_gap(&run.model, &s.test, "spurious").unwrap();
    assert!(gap < 0.02, "gap {gap}");
}

#[test]
fn orientation_changes_the_pairs() {
    let s = splits(0.7, true, 4);
    let mut cfg = quick(Method::AutoAcer);
    cfg.effect_targets = [("spurious".to_string(), 0.1)].into();
    let fact = reg_pairs(&s.train, &cfg).unwrap();
    cfg.orientation = GapOrientation::AttributeOrdered;
    let ord = reg_pairs(&s.train, &cfg).unwrap();
    for (i, e) in s.train.examples.iter().enumerate() {
        let same = e.attribute("spurious").unwrap() == 1;
        assert_eq!(fact[0].first.row(i) == ord[0].first.row(i), same);
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let s = splits(0.7, true, 5);
    let mut cfg = quick(Method::AutoAcer);
    cfg.r = -1.0;
    assert!(matches!(train(&cfg, &s.train, &s.val), Err(Error::Config(_))));
    cfg.r = 1.0;
    cfg.effect_targets = [("nope".to_string(), 0.0)].into();
    assert!(matches!(train(&cfg, &s.train, &s.val), Err(Error::UnknownVariable(_))));
    assert!(train(&quick(Method::Irm), &s.train, &s.val).is_err());
}

#[test]
fn cad_with_no_attributes_is_erm() {
    let s = splits(0.8, true, 6);
    let erm = train(&quick(Method::Erm), &s.train, &s.val).unwrap();
    let cad = train(&quick(Method::Cad), &s.train, &s.val).unwrap();
    assert_eq!(erm.model.net.params, cad.model.net.params);
}

/// Copy of `data` where flipping `attribute` leaves the input unchanged.
fn inert_flip(data: &LabeledDataset, attribute: &str) -> LabeledDataset {
    let mut d = data.clone();
    for e in d.examples.iter_mut() {
        e.counterfactuals.insert(attribute.to_string(), e.features.clone());
    }
    d
}

#[test]
fn cad_with_identical_copies_matches_erm() {
    let s = splits(0.8, true, 7);
    let train_set = inert_flip(&s.train, "spurious");
    let erm = train(&quick(Method::Erm), &train_set, &s.val).unwrap();
    let mut cfg = quick(Method::Cad);
    cfg.cad_attributes = vec!["spurious".into()];
    let cad = train(&cfg, &train_set, &s.val).unwrap();
    for (a, b) in erm.model.net.params.iter().zip(&cad.model.net.params) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn jtt_without_upsampling_is_erm() {
    let s = splits(0.8, true, 8);
    let erm = train(&quick(Method::Erm), &s.train, &s.val).unwrap();
    let mut cfg = quick(Method::Jtt);
    cfg.jtt.lambda_up = 1;
    let jtt = train(&cfg, &s.train, &s.val).unwrap();
    assert_eq!(erm.model.net.params, jtt.model.net.params);
    assert_eq!(jtt.notes.len(), 1);
    assert_eq!(jtt_upsample(&[true, false], 4), vec![4.0, 1.0]);
}

#[test]
fn irm_environments() {
    let s = splits(0.8, true, 9);
    let cfg = TrainConfig { irm_lambda: 0.0, ..quick(Method::Irm) };
    assert!(matches!(train_irm(&[s.train.clone()], &s.val, &cfg), Err(Error::Config(_))));
    let erm = train(&quick(Method::Erm), &s.train, &s.val).unwrap();
    let irm = train_irm(&[s.train.clone(), s.train.clone()], &s.val, &cfg).unwrap();
    for (a, b) in erm.model.net.params.iter().zip(&irm.model.net.params) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn irm_penalty_with_equal_environment_gradients() {
    let s = splits(0.8, true, 10);
    let x = features(&s.train);
    let y = float_labels(&s.train);
    let net = Mlp::new(x.ncols(), None, 1, 3);
    let mut one = Batch::plain(x.clone(), y.clone());
    one.irm_lambda = Some(1.0);
    let (_, p1, _) = composite_loss(&net, &one);
    let mut three = Batch::plain(
        ndarray::concatenate(ndarray::Axis(0), &[x.view(), x.view(), x.view()]).unwrap(),
        [y.clone(), y.clone(), y].concat(),
    );
    three.env = (0..3).flat_map(|e| std::iter::repeat_n(e, x.nrows())).collect();
    three.irm_lambda = Some(1.0);
    let (_, p3, _) = composite_loss(&net, &three);
    assert!((p3.irm_penalty - 3.0 * p1.irm_penalty).abs() < 1e-12);
    assert!((p3.task - p1.task).abs() < 1e-12);
}

#[test]
fn random_labels_are_seeded() {
    assert_eq!(random_labels(50, 0.3, 1), random_labels(50, 0.3, 1));
    assert_ne!(random_labels(50, 0.3, 1), random_labels(50, 0.3, 2));
    assert!(random_labels(50, 0.0, 1).iter().all(|&v| v == 0.0));
}

#[test]
fn detection_ties_favor_the_smaller_subset() {
    let s = splits(0.8, true, 11);
    let train_set = inert_flip(&s.train, "spurious");
    let base = TrainConfig { epochs: 30, ..Default::default() };
    let cfg = MouliConfig { base, label_draws: 2, ..Default::default() };
    let (best, scores) = mouli_detect(&train_set, &s.val, &["spurious".to_string()], &cfg).unwrap();
    assert_eq!(scores.len(), 2);
    assert_eq!(scores[0].1, scores[1].1);
    assert!(best.is_empty());
}
