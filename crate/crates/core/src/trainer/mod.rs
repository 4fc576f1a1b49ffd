//! Stage-2 training: task loss plus the effect-matching regularizer, and the
//! ERM, CAD, JTT, IRMv1 and invariance-score baselines.

mod baselines;
mod loss;
mod mouli;

pub use baselines::{augment_counterfactuals, jtt_upsample, train_cad, train_irm, train_jtt};
pub use loss::{composite_loss, loss_reg, loss_task, Batch, LossParts, RegPairs};
pub use mouli::{mouli_detect, mouli_score, random_labels, MouliConfig, MouliScore};

use crate::error::{Error, Result};
use crate::metrics::{group_accuracies_from, Candidate, Classifier};
use crate::nn::{sigmoid, stack, Mlp, OptState, Optimizer};
use crate::synthgen::LabeledDataset;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Logistic classifier `P(y=1|x) = σ(f(x))` with an optional tanh layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub net: Mlp,
}

impl ClassifierModel {
    pub fn new(input: usize, hidden: Option<usize>, seed: u64) -> Self {
        Self { net: Mlp::new(input, hidden, 1, seed) }
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.net.forward(x).out.column(0).to_vec()
    }
}

impl Classifier for ClassifierModel {
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.logits(x).into_iter().map(sigmoid).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erm,
    AutoAcer,
    Cad,
    Jtt,
    Irm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::AutoAcer => "autoacer",
            Method::Cad => "cad",
            Method::Jtt => "jtt",
            Method::Irm => "irm",
        }
    }
}

/// Which prediction difference the regularizer compares to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapOrientation {
    /// `c(x) - c(x′)`: factual minus counterfactual rendering.
    #[default]
    FactualMinusCounterfactual,
    /// `c(x | a=1) - c(x | a=0)` whichever rendering is factual.
    AttributeOrdered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JttConfig {
    pub lambda_up: usize,
    pub first_epochs: usize,
}

impl Default for JttConfig {
    fn default() -> Self {
        Self { lambda_up: 4, first_epochs: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub objective: Method,
    /// Regularization strength.
    pub r: f64,
    /// Attribute → snapped effect target.
    pub effect_targets: BTreeMap<String, f64>,
    pub orientation: GapOrientation,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub hidden: Option<usize>,
    pub checkpoint_every: usize,
    pub seed: u64,
    /// Attributes whose counterfactual copies CAD adds.
    pub cad_attributes: Vec<String>,
    pub jtt: JttConfig,
    /// IRMv1 penalty weight.
    pub irm_lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Method::Erm,
            r: 0.0,
            effect_targets: BTreeMap::new(),
            orientation: GapOrientation::default(),
            epochs: 300,
            optimizer: Optimizer::adam(0.01),
            hidden: None,
            checkpoint_every: 10,
            seed: 0,
            cad_attributes: Vec::new(),
            jtt: JttConfig::default(),
            irm_lambda: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::Config(format!("R must be finite and nonnegative, got {}", self.r)));
        }
        if self.epochs == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("epochs and checkpoint_every must be positive".into()));
        }
        if self.jtt.lambda_up == 0 {
            return Err(Error::Config("JTT upsampling factor must be at least 1".into()));
        }
        if self.irm_lambda < 0.0 {
            return Err(Error::Config("IRM penalty weight must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Validation summary of the model after `epoch` full-batch steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainCheckpoint {
    pub epoch: usize,
    pub r: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub acc_majority: f64,
    pub acc_minority: f64,
    pub delta_prob: f64,
    pub params: Vec<f64>,
}

impl TrainCheckpoint {
    pub fn candidate(&self) -> Candidate {
        Candidate {
            r: self.r,
            epoch: self.epoch,
            val_acc: self.val_acc,
            acc_majority: self.acc_majority,
            acc_minority: self.acc_minority,
            delta_prob: self.delta_prob,
            failed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    /// Weights after the last epoch.
    pub model: ClassifierModel,
    pub checkpoints: Vec<TrainCheckpoint>,
    /// Diagnostic notes, e.g. a JTT first stage with no errors.
    pub notes: Vec<String>,
}

impl TrainRun {
    pub fn model_at(&self, checkpoint: usize) -> ClassifierModel {
        let mut m = self.model.clone();
        m.net.params = self.checkpoints[checkpoint].params.clone();
        m
    }
}

pub(crate) fn features(data: &LabeledDataset) -> Array2<f64> {
    stack(&data.examples.iter().map(|e| e.features.as_slice()).collect::<Vec<_>>())
}

pub(crate) fn float_labels(data: &LabeledDataset) -> Vec<f64> {
    data.examples.iter().map(|e| e.label as f64).collect()
}

/// Precomputed validation inputs for checkpoint summaries.
pub(crate) struct ValView {
    x: Array2<f64>,
    flipped: Array2<f64>,
    y: Vec<usize>,
    attr: Vec<usize>,
}

impl ValView {
    pub(crate) fn new(val: &LabeledDataset) -> Result<Self> {
        let sp = &val.spurious_attribute;
        let flipped = val.examples.iter().map(|e| e.counterfactual(sp)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            x: features(val),
            flipped: stack(&flipped),
            y: val.labels(),
            attr: val.attribute_values(sp)?,
        })
    }

    fn summarize(&self, model: &ClassifierModel, epoch: usize, r: f64) -> Result<TrainCheckpoint> {
        let f = model.logits(self.x.view());
        let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
        let q = model.predict_proba(self.flipped.view());
        let y: Vec<f64> = self.y.iter().map(|&v| v as f64).collect();
        let report = group_accuracies_from(&p, &self.y, &self.attr)?;
        let hits = p.iter().zip(&self.y).filter(|(p, y)| usize::from(**p >= 0.5) == **y).count();
        Ok(TrainCheckpoint {
            epoch,
            r,
            val_loss: loss::bce(&f, &y),
            val_acc: hits as f64 / p.len() as f64,
            acc_majority: report.acc_majority,
            acc_minority: report.acc_minority,
            delta_prob: p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64,
            params: model.net.params.clone(),
        })
    }
}

/// Full-batch optimization of the composite objective from a fresh
/// initialization seeded by `cfg.seed`.
pub(crate) fn optimize(batch: &Batch, val: Option<&ValView>, cfg: &TrainConfig, epochs: usize) -> Result<TrainRun> {
    let mut model = ClassifierModel::new(batch.x.ncols(), cfg.hidden, cfg.seed);
    let mut opt = OptState::new(cfg.optimizer, model.net.n_params());
    let mut checkpoints = Vec::new();
    for epoch in 1..=epochs {
        let (loss, _, grad) = composite_loss(&model.net, batch);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { epoch, detail: format!("{} loss {loss} at R={}", cfg.objective.name(), cfg.r) });
        }
        opt.step(&mut model.net.params, &grad);
        if let Some(v) = val {
            if epoch % cfg.checkpoint_every == 0 || epoch == epochs {
                checkpoints.push(v.summarize(&model, epoch, cfg.r)?);
            }
        }
    }
    Ok(TrainRun { model, checkpoints, notes: Vec::new() })
}

/// Regularizer inputs for every targeted attribute.
pub fn reg_pairs(data: &LabeledDataset, cfg: &TrainConfig) -> Result<Vec<RegPairs>> {
    let known = data.attribute_names();
    cfg.effect_targets
        .iter()
        .map(|(attr, &target)| {
            if !known.contains(attr) {
                return Err(Error::UnknownVariable(attr.clone()));
            }
            let (first, second): (Vec<&[f64]>, Vec<&[f64]>) = data
                .examples
                .iter()
                .map(|e| match cfg.orientation {
                    GapOrientation::FactualMinusCounterfactual => Ok((e.features.as_slice(), e.counterfactual(attr)?)),
                    GapOrientation::AttributeOrdered => Ok((e.rendering_at(attr, 1)?, e.rendering_at(attr, 0)?)),
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            Ok(RegPairs { first: stack(&first), second: stack(&second), target })
        })
        .collect()
}

/// ERM or effect-regularized training; CAD and JTT dispatch to their own
/// routines, IRM needs environments and goes through [`train_irm`].
pub fn train(cfg: &TrainConfig, train: &LabeledDataset, val: &LabeledDataset) -> Result<TrainRun> {
    cfg.validate()?;
    match cfg.objective {
        Method::Erm | Method::AutoAcer => {
            if train.is_empty() || val.is_empty() {
                return Err(Error::Empty("training needs nonempty train and validation splits".into()));
            }
            let mut batch = Batch::plain(features(train), float_labels(train));
            if cfg.objective == Method::AutoAcer && cfg.r > 0.0 {
                batch.reg = reg_pairs(train, cfg)?;
                batch.r = cfg.r;
            }
            optimize(&batch, Some(&ValView::new(val)?), cfg, cfg.epochs)
        }
        Method::Cad => train_cad(train, val, &cfg.cad_attributes, cfg),
        Method::Jtt => train_jtt(train, val, cfg),
        Method::Irm => Err(Error::Config("IRM trains on environments; call train_irm".into())),
    }
}

/// Mean `|c(x) - c(x′)|` of `model` over flips of `attribute`.
pub fn prediction_gap(model: &ClassifierModel, data: &LabeledDataset, attribute: &str) -> Result<f64> {
    crate::metrics::delta_prob(model, data, attribute)
}

#[cfg(test)]
mod tests;
