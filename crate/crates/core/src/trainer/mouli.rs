//! Finite-data surrogate of the invariance score used to detect spurious
//! attribute subsets: how much task loss invariance costs, minus how much it
//! costs a matched model fitting random labels.

use super::{float_labels, loss, optimize, reg_pairs, Batch, Method, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::Optimizer;
use crate::synthgen::LabeledDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MouliConfig {
    /// Training settings shared by every fit; objective, targets and R are
    /// overwritten per subset.
    pub base: TrainConfig,
    /// Invariance strength.
    pub r: f64,
    /// Random-label fits averaged per score.
    pub label_draws: usize,
}

impl Default for MouliConfig {
    fn default() -> Self {
        // long enough for the random-label fits to converge
        let base = TrainConfig { epochs: 1000, optimizer: Optimizer::adam(0.05), ..TrainConfig::default() };
        Self { base, r: 100.0, label_draws: 5 }
    }
}

/// Bernoulli(`p`) labels from a seeded stream.
pub fn random_labels(n: usize, p: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| f64::from(u8::from(rng.random::<f64>() < p))).collect()
}

fn invariant_config(cfg: &MouliConfig, subset: &[String]) -> TrainConfig {
    let mut c = cfg.base.clone();
    c.objective = Method::AutoAcer;
    c.r = if subset.is_empty() { 0.0 } else { cfg.r };
    c.effect_targets = subset.iter().map(|a| (a.clone(), 0.0)).collect();
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MouliScore {
    /// Validation cross-entropy of the subset-invariant model.
    pub true_loss: f64,
    /// Mean training cross-entropy of subset-invariant random-label fits.
    pub random_loss: f64,
    /// `true_loss - random_loss`; lower means more plausibly spurious.
    pub score: f64,
}

/// Validation loss of the subset-invariant model on true labels minus the
/// mean training loss of subset-invariant models fitted to random labels.
pub fn mouli_score(
    train: &LabeledDataset,
    val: &LabeledDataset,
    subset: &[String],
    cfg: &MouliConfig,
) -> Result<MouliScore> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("invariance score needs nonempty train and validation splits".into()));
    }
    if cfg.label_draws == 0 {
        return Err(Error::Config("at least one random-label draw is needed".into()));
    }
    let tc = invariant_config(cfg, subset);
    tc.validate()?;
    let mut batch = Batch::plain(super::features(train), float_labels(train));
    if tc.r > 0.0 {
        batch.reg = reg_pairs(train, &tc)?;
        batch.r = tc.r;
    }
    let fitted = optimize(&batch, None, &tc, tc.epochs)?.model;
    let true_loss = loss::bce(&fitted.logits(super::features(val).view()), &float_labels(val));

    let p = batch.y.iter().sum::<f64>() / batch.y.len() as f64;
    let mut random_loss = 0.0;
    for draw in 0..cfg.label_draws {
        let seed = cfg.base.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(draw as u64 + 1));
        batch.y = random_labels(train.len(), p, seed);
        let m = optimize(&batch, None, &tc, tc.epochs)?.model;
        random_loss += loss::bce(&m.logits(batch.x.view()), &batch.y);
    }
    let random_loss = random_loss / cfg.label_draws as f64;
    Ok(MouliScore { true_loss, random_loss, score: true_loss - random_loss })
}

/// Scores every subset of `attributes` and returns the minimizer with all
/// scores. Subsets are visited by size, so ties keep the smaller one.
pub fn mouli_detect(
    train: &LabeledDataset,
    val: &LabeledDataset,
    attributes: &[String],
    cfg: &MouliConfig,
) -> Result<(Vec<String>, Vec<(Vec<String>, MouliScore)>)> {
    if attributes.len() > 16 {
        return Err(Error::Config("too many candidate attributes for exhaustive search".into()));
    }
    let mut masks: Vec<u32> = (0..1u32 << attributes.len()).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut scores = Vec::with_capacity(masks.len());
    for m in masks {
        let subset: Vec<String> =
            attributes.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, a)| a.clone()).collect();
        let s = mouli_score(train, val, &subset, cfg)?;
        scores.push((subset, s));
    }
    let mut best = 0;
    for (i, (_, s)) in scores.iter().enumerate() {
        if s.score < scores[best].1.score {
            best = i;
        }
    }
    Ok((scores[best].0.clone(), scores))
}
