use super::effect::{select_checkpoint, snap, Checkpoint, EffectEstimate, EstimatorKind, Selection};
use super::{design, labels, Covariates};
use crate::error::{Error, Result};
use crate::nn::{sigmoid, Mlp, OptState, Optimizer};
use crate::synthgen::LabeledDataset;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub hidden: Option<usize>,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub checkpoint_every: usize,
    /// L2 strengths tried; checkpoints of all runs compete in selection.
    pub r2_grid: Vec<f64>,
    pub covariates: Covariates,
    pub seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            hidden: Some(32),
            optimizer: Optimizer::adam(0.01),
            epochs: 400,
            checkpoint_every: 10,
            r2_grid: vec![0.0, 0.1, 1.0, 10.0],
            covariates: Covariates::Neutral,
            seed: 0,
        }
    }
}

/// Outcome regression `g(X, A) = E[Y | X, A]` with its training checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub attribute: String,
    pub covariates: Covariates,
    pub net: Mlp,
    pub checkpoints: Vec<Checkpoint>,
}

/// `mean (y - σ(f))² + r2·‖W‖²` and its gradient.
pub fn regression_loss(net: &Mlp, x: ArrayView2<'_, f64>, y: &[f64], r2: f64) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let cache = net.forward(x);
    let mut dout = Array2::zeros((y.len(), 1));
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let p = sigmoid(cache.out[[i, 0]]);
        loss += (yi - p).powi(2);
        dout[[i, 0]] = 2.0 * (p - yi) * p * (1.0 - p) / n;
    }
    let mut grad = net.backward(x, &cache, dout.view());
    net.add_l2_grad(r2, &mut grad);
    (loss / n + r2 * net.l2(), grad)
}

fn mse_and_accuracy(net: &Mlp, x: ArrayView2<'_, f64>, y: &[f64]) -> (f64, f64) {
    let out = net.forward(x).out;
    let mut se = 0.0;
    let mut hits = 0usize;
    for (i, &yi) in y.iter().enumerate() {
        let p = sigmoid(out[[i, 0]]);
        se += (yi - p).powi(2);
        hits += usize::from((p >= 0.5) == (yi >= 0.5));
    }
    (se / y.len() as f64, hits as f64 / y.len() as f64)
}

pub fn fit_regression(
    train: &LabeledDataset,
    val: &LabeledDataset,
    attribute: &str,
    cfg: &RegressionConfig,
) -> Result<RegressionModel> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("regression needs nonempty train and validation splits".into()));
    }
    let x = design(train, attribute, cfg.covariates, None)?;
    let y = labels(train);
    let xv = design(val, attribute, cfg.covariates, None)?;
    let yv = labels(val);
    let mut checkpoints = Vec::new();
    let mut net = Mlp::new(x.ncols(), cfg.hidden, 1, cfg.seed);
    for &r2 in &cfg.r2_grid {
        net = Mlp::new(x.ncols(), cfg.hidden, 1, cfg.seed);
        let mut opt = OptState::new(cfg.optimizer, net.n_params());
        for epoch in 1..=cfg.epochs {
            let (loss, grad) = regression_loss(&net, x.view(), &y, r2);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, detail: format!("regression loss {loss} at r2={r2}") });
            }
            opt.step(&mut net.params, &grad);
            if epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs {
                let (val_loss, val_acc) = mse_and_accuracy(&net, xv.view(), &yv);
                checkpoints.push(Checkpoint { epoch, r2, val_loss, val_acc, params: net.params.clone() });
            }
        }
    }
    Ok(RegressionModel { attribute: attribute.to_string(), covariates: cfg.covariates, net, checkpoints })
}

impl RegressionModel {
    /// Copy whose network holds the checkpoint chosen by `criterion`.
    pub fn select(&self, criterion: Selection) -> Result<(RegressionModel, &Checkpoint)> {
        let i = select_checkpoint(&self.checkpoints, criterion)?;
        let mut m = self.clone();
        m.net.params = self.checkpoints[i].params.clone();
        Ok((m, &self.checkpoints[i]))
    }

    /// `g(X, a)` per example with the attribute input forced to `a`.
    pub fn predict(&self, data: &LabeledDataset, force: Option<usize>) -> Result<Vec<f64>> {
        let x = design(data, &self.attribute, self.covariates, force)?;
        let out = self.net.forward(x.view()).out;
        Ok(out.column(0).iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn estimate(&self, data: &LabeledDataset, criterion: Selection, grid: &[f64]) -> Result<EffectEstimate> {
        let (m, ck) = self.select(criterion)?;
        let value = direct_effect(&m, data, &self.attribute)?;
        Ok(EffectEstimate {
            attribute: self.attribute.clone(),
            value,
            estimator: EstimatorKind::Direct,
            selection: criterion,
            snapped: snap(value, grid)?,
            epoch: ck.epoch,
            r2: ck.r2,
        })
    }
}

/// `mean_X [g(X, 1) - g(X, 0)]` with the covariates held fixed.
pub fn direct_effect(model: &RegressionModel, data: &LabeledDataset, attribute: &str) -> Result<f64> {
    if attribute != model.attribute {
        return Err(Error::Config(format!(
            "model was fitted for `{}`, not `{attribute}`",
            model.attribute
        )));
    }
    let g1 = model.predict(data, Some(1))?;
    let g0 = model.predict(data, Some(0))?;
    Ok(g1.iter().zip(&g0).map(|(a, b)| a - b).sum::<f64>() / g1.len() as f64)
}
