//! Predictive correlation, group accuracies, ΔProb and model selection.

use crate::error::{Error, Result};
use crate::nn::stack;
use crate::synthgen::LabeledDataset;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

/// Anything that maps a batch of feature rows to `P(y = 1)`.
pub trait Classifier {
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64>;
}

/// `(1/N) Σ 1[s = t]`.
pub fn kappa(labels: &[usize], attribute: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("kappa of an empty sample".into()));
    }
    if labels.len() != attribute.len() {
        return Err(Error::MismatchedSupport("labels and attribute differ in length".into()));
    }
    let hits = labels.iter().zip(attribute).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub acc_majority: f64,
    pub acc_minority: f64,
    pub acc_average: f64,
    pub acc_worst: f64,
    pub delta_prob: f64,
    pub kappa: f64,
    /// `(y, a)` cells with no examples; excluded from the worst-group minimum.
    pub empty_cells: Vec<(usize, usize)>,
}

/// Accuracy fields of the report from thresholded probabilities;
/// `delta_prob` is left at 0.
pub fn group_accuracies_from(probs: &[f64], labels: &[usize], attribute: &[usize]) -> Result<GroupReport> {
    if probs.len() != labels.len() || labels.len() != attribute.len() {
        return Err(Error::MismatchedSupport("predictions, labels and attribute differ in length".into()));
    }
    let mut hits = [[0usize; 2]; 2];
    let mut counts = [[0usize; 2]; 2];
    for ((&p, &y), &a) in probs.iter().zip(labels).zip(attribute) {
        counts[y][a] += 1;
        hits[y][a] += usize::from(usize::from(p >= 0.5) == y);
    }
    let ratio = |h: usize, c: usize| if c == 0 { f64::NAN } else { h as f64 / c as f64 };
    let maj_h = hits[0][0] + hits[1][1];
    let maj_c = counts[0][0] + counts[1][1];
    let min_h = hits[0][1] + hits[1][0];
    let min_c = counts[0][1] + counts[1][0];
    let acc_majority = ratio(maj_h, maj_c);
    let acc_minority = ratio(min_h, min_c);
    let mut empty_cells = Vec::new();
    let mut worst = f64::INFINITY;
    for y in 0..2 {
        for a in 0..2 {
            if counts[y][a] == 0 {
                empty_cells.push((y, a));
            } else {
                worst = worst.min(ratio(hits[y][a], counts[y][a]));
            }
        }
    }
    Ok(GroupReport {
        acc_majority,
        acc_minority,
        acc_average: (acc_majority + acc_minority) / 2.0,
        acc_worst: if worst.is_finite() { worst } else { f64::NAN },
        delta_prob: 0.0,
        kappa: kappa(labels, attribute)?,
        empty_cells,
    })
}

fn features(data: &LabeledDataset) -> ndarray::Array2<f64> {
    stack(&data.examples.iter().map(|e| e.features.as_slice()).collect::<Vec<_>>())
}

fn counterfactuals(data: &LabeledDataset, attribute: &str) -> Result<ndarray::Array2<f64>> {
    let rows = data
        .examples
        .iter()
        .map(|e| e.counterfactual(attribute))
        .collect::<Result<Vec<_>>>()?;
    Ok(stack(&rows))
}

/// Group accuracies on the designated spurious attribute of `data`, with
/// `delta_prob` filled in for the same attribute.
pub fn group_accuracies(model: &dyn Classifier, data: &LabeledDataset) -> Result<GroupReport> {
    let sp = &data.spurious_attribute;
    let probs = model.predict_proba(features(data).view());
    let mut r = group_accuracies_from(&probs, &data.labels(), &data.attribute_values(sp)?)?;
    r.delta_prob = delta_prob(model, data, sp)?;
    Ok(r)
}

/// `mean |P(y=1|x) - P(y=1|x′)|` over single-attribute flips.
pub fn delta_prob(model: &dyn Classifier, data: &LabeledDataset, attribute: &str) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("delta_prob on an empty dataset".into()));
    }
    let p = model.predict_proba(features(data).view());
    let q = model.predict_proba(counterfactuals(data, attribute)?.view());
    Ok(p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
}

/// One point of an `(R, epoch)` sweep as seen by the selection criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub r: f64,
    pub epoch: usize,
    pub val_acc: f64,
    pub acc_majority: f64,
    pub acc_minority: f64,
    pub delta_prob: f64,
    pub failed: bool,
}

fn select_by(cands: &[Candidate], score: impl Fn(&Candidate) -> f64) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cands.iter().enumerate() {
        let s = score(c);
        if c.failed || s.is_nan() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let sb = score(&cands[b]);
                let key = |c: &Candidate| (c.r, c.epoch);
                let better = s > sb
                    || (s == sb && key(c).partial_cmp(&key(&cands[b])) == Some(std::cmp::Ordering::Less));
                Some(if better { i } else { b })
            }
        };
    }
    best.ok_or_else(|| Error::Empty("no successful candidates to select from".into()))
}

/// Highest validation accuracy; ties to smaller R, then earlier epoch.
pub fn select_by_accuracy(cands: &[Candidate]) -> Result<usize> {
    select_by(cands, |c| c.val_acc)
}

/// `(acc_majority + acc_minority + (1 - ΔProb)) / 3`, same tie rules.
pub fn spurious_known_score(c: &Candidate) -> f64 {
    (c.acc_majority + c.acc_minority + (1.0 - c.delta_prob)) / 3.0
}

pub fn select_spurious_known(cands: &[Candidate]) -> Result<usize> {
    select_by(cands, spurious_known_score)
}
