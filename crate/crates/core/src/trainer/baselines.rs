use super::{features, float_labels, optimize, Batch, TrainConfig, TrainRun, ValView};
use crate::error::{Error, Result};
use crate::nn::stack;
use crate::synthgen::LabeledDataset;
use ndarray::concatenate;
use ndarray::Axis;

/// Inputs and labels of `data` followed by one counterfactual copy per
/// example and attribute in `attributes`, each keeping its label.
pub fn augment_counterfactuals(data: &LabeledDataset, attributes: &[String]) -> Result<Batch> {
    let mut x = features(data);
    let mut y = float_labels(data);
    for attr in attributes {
        let rows = data.examples.iter().map(|e| e.counterfactual(attr)).collect::<Result<Vec<_>>>()?;
        x = concatenate(Axis(0), &[x.view(), stack(&rows).view()]).expect("matching widths");
        y.extend(data.examples.iter().map(|e| e.label as f64));
    }
    Ok(Batch::plain(x, y))
}

/// Counterfactual data augmentation followed by plain ERM.
pub fn train_cad(
    train: &LabeledDataset,
    val: &LabeledDataset,
    invariant_set: &[String],
    cfg: &TrainConfig,
) -> Result<TrainRun> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("CAD needs nonempty train and validation splits".into()));
    }
    let batch = augment_counterfactuals(train, invariant_set)?;
    optimize(&batch, Some(&ValView::new(val)?), cfg, cfg.epochs)
}

/// Task-loss weights equivalent to duplicating each error `lambda_up` times.
pub fn jtt_upsample(misclassified: &[bool], lambda_up: usize) -> Vec<f64> {
    misclassified.iter().map(|&m| if m { lambda_up as f64 } else { 1.0 }).collect()
}

/// Just Train Twice: ERM for `first_epochs`, then a fresh ERM run with the
/// first model's training errors upsampled.
pub fn train_jtt(train: &LabeledDataset, val: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainRun> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("JTT needs nonempty train and validation splits".into()));
    }
    let mut batch = Batch::plain(features(train), float_labels(train));
    let first = optimize(&batch, None, cfg, cfg.jtt.first_epochs.max(1))?;
    let errors: Vec<bool> = first
        .model
        .logits(batch.x.view())
        .iter()
        .zip(&batch.y)
        .map(|(&f, &y)| (f >= 0.0) != (y >= 0.5))
        .collect();
    let n_errors = errors.iter().filter(|&&e| e).count();
    batch.weights = jtt_upsample(&errors, cfg.jtt.lambda_up);
    let mut run = optimize(&batch, Some(&ValView::new(val)?), cfg, cfg.epochs)?;
    run.notes.push(if n_errors == 0 {
        "first stage classified every training example correctly; second stage is plain ERM".into()
    } else {
        format!("first stage misclassified {n_errors} of {} training examples", errors.len())
    });
    Ok(run)
}

/// IRMv1 over at least two environments, validated on `val`.
pub fn train_irm(environments: &[LabeledDataset], val: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainRun> {
    cfg.validate()?;
    if environments.len() < 2 {
        return Err(Error::Config(format!("IRM needs at least two environments, got {}", environments.len())));
    }
    if environments.iter().any(LabeledDataset::is_empty) || val.is_empty() {
        return Err(Error::Empty("IRM environments and validation split must be nonempty".into()));
    }
    let xs: Vec<_> = environments.iter().map(features).collect();
    let x = concatenate(Axis(0), &xs.iter().map(|a| a.view()).collect::<Vec<_>>())
        .map_err(|_| Error::Dataset("environments differ in input width".into()))?;
    let y: Vec<f64> = environments.iter().flat_map(float_labels).collect();
    let mut batch = Batch::plain(x, y);
    batch.env = environments.iter().enumerate().flat_map(|(e, d)| std::iter::repeat_n(e, d.len())).collect();
    batch.irm_lambda = Some(cfg.irm_lambda);
    optimize(&batch, Some(&ValView::new(val)?), cfg, cfg.epochs)
}

