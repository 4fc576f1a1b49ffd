use super::effect::{
    debiased_estimate, select_checkpoint, snap, Checkpoint, EffectEstimate, EstimatorKind, Selection,
};
use super::{design, labels, Covariates};
use crate::error::{Error, Result};
use crate::nn::{sigmoid, Mlp, OptState, Optimizer};
use crate::synthgen::LabeledDataset;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RieszConfig {
    /// Shared tanh encoder width.
    pub hidden: usize,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub checkpoint_every: usize,
    /// Weight of the representer loss.
    pub r1: f64,
    pub r2_grid: Vec<f64>,
    pub covariates: Covariates,
    pub seed: u64,
}

impl Default for RieszConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            optimizer: Optimizer::adam(0.01),
            epochs: 400,
            checkpoint_every: 10,
            r1: 1.0,
            r2_grid: vec![0.0, 0.1, 1.0, 10.0],
            covariates: Covariates::Neutral,
            seed: 0,
        }
    }
}

/// Shared encoder with two heads: output 0 is the logit of `g(X, A)`,
/// output 1 is the representer `α(X, A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszModel {
    pub attribute: String,
    pub covariates: Covariates,
    pub net: Mlp,
    pub checkpoints: Vec<Checkpoint>,
}

/// Design matrices at the factual attribute, at `a = 1` and at `a = 0`.
pub struct RieszInputs {
    pub factual: Array2<f64>,
    pub treated: Array2<f64>,
    pub control: Array2<f64>,
    pub y: Vec<f64>,
}

impl RieszInputs {
    pub fn new(data: &LabeledDataset, attribute: &str, covariates: Covariates) -> Result<Self> {
        Ok(Self {
            factual: design(data, attribute, covariates, None)?,
            treated: design(data, attribute, covariates, Some(1))?,
            control: design(data, attribute, covariates, Some(0))?,
            y: labels(data),
        })
    }
}

/// Loss parts of the Riesz objective (penalty excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszLossParts {
    pub reg: f64,
    pub rr: f64,
}

/// `mean (y - g)² + r1·mean[α(X,A)² - 2(α(X,1) - α(X,0))] + r2·‖W‖²` and its
/// gradient.
pub fn riesz_loss(net: &Mlp, inp: &RieszInputs, r1: f64, r2: f64) -> (f64, RieszLossParts, Vec<f64>) {
    let n = inp.y.len() as f64;
    let cf = net.forward(inp.factual.view());
    let c1 = net.forward(inp.treated.view());
    let c0 = net.forward(inp.control.view());
    let mut df = Array2::zeros((inp.y.len(), 2));
    let mut d1 = Array2::zeros((inp.y.len(), 2));
    let mut d0 = Array2::zeros((inp.y.len(), 2));
    let (mut reg, mut rr) = (0.0, 0.0);
    for (i, &yi) in inp.y.iter().enumerate() {
        let p = sigmoid(cf.out[[i, 0]]);
        let alpha = cf.out[[i, 1]];
        reg += (yi - p).powi(2);
        rr += alpha * alpha - 2.0 * (c1.out[[i, 1]] - c0.out[[i, 1]]);
        df[[i, 0]] = 2.0 * (p - yi) * p * (1.0 - p) / n;
        df[[i, 1]] = r1 * 2.0 * alpha / n;
        d1[[i, 1]] = -2.0 * r1 / n;
        d0[[i, 1]] = 2.0 * r1 / n;
    }
    let mut grad = net.backward(inp.factual.view(), &cf, df.view());
    if r1 != 0.0 {
        for (x, c, d) in [(&inp.treated, &c1, &d1), (&inp.control, &c0, &d0)] {
            for (g, h) in grad.iter_mut().zip(net.backward(x.view(), c, d.view())) {
                *g += h;
            }
        }
    }
    net.add_l2_grad(r2, &mut grad);
    let parts = RieszLossParts { reg: reg / n, rr: rr / n };
    (parts.reg + r1 * parts.rr + r2 * net.l2(), parts, grad)
}

fn g_accuracy(net: &Mlp, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
    let out = net.forward(x).out;
    let hits = y
        .iter()
        .enumerate()
        .filter(|(i, &yi)| (sigmoid(out[[*i, 0]]) >= 0.5) == (yi >= 0.5))
        .count();
    hits as f64 / y.len() as f64
}

pub fn fit_riesz(
    train: &LabeledDataset,
    val: &LabeledDataset,
    attribute: &str,
    cfg: &RieszConfig,
) -> Result<RieszModel> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("Riesz fit needs nonempty train and validation splits".into()));
    }
    if cfg.r1 < 0.0 || cfg.r2_grid.iter().any(|r| *r < 0.0) {
        return Err(Error::Config("Riesz loss weights must be nonnegative".into()));
    }
    let tr = RieszInputs::new(train, attribute, cfg.covariates)?;
    let va = RieszInputs::new(val, attribute, cfg.covariates)?;
    let input = tr.factual.ncols();
    let mut net = Mlp::new(input, Some(cfg.hidden), 2, cfg.seed);
    let mut checkpoints = Vec::new();
    for &r2 in &cfg.r2_grid {
        net = Mlp::new(input, Some(cfg.hidden), 2, cfg.seed);
        let mut opt = OptState::new(cfg.optimizer, net.n_params());
        for epoch in 1..=cfg.epochs {
            let (loss, _, grad) = riesz_loss(&net, &tr, cfg.r1, r2);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, detail: format!("Riesz loss {loss} at r2={r2}") });
            }
            opt.step(&mut net.params, &grad);
            if epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs {
                let (_, parts, _) = riesz_loss(&net, &va, cfg.r1, 0.0);
                checkpoints.push(Checkpoint {
                    epoch,
                    r2,
                    val_loss: parts.reg + cfg.r1 * parts.rr,
                    val_acc: g_accuracy(&net, va.factual.view(), &va.y),
                    params: net.params.clone(),
                });
            }
        }
    }
    Ok(RieszModel { attribute: attribute.to_string(), covariates: cfg.covariates, net, checkpoints })
}

impl RieszModel {
    pub fn select(&self, criterion: Selection) -> Result<(RieszModel, &Checkpoint)> {
        let i = select_checkpoint(&self.checkpoints, criterion)?;
        let mut m = self.clone();
        m.net.params = self.checkpoints[i].params.clone();
        Ok((m, &self.checkpoints[i]))
    }

    /// `(g, α)` per example with the attribute input forced to `a`.
    pub fn heads(&self, data: &LabeledDataset, force: Option<usize>) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = design(data, &self.attribute, self.covariates, force)?;
        let out = self.net.forward(x.view()).out;
        Ok((
            out.column(0).iter().map(|&z| sigmoid(z)).collect(),
            out.column(1).to_vec(),
        ))
    }

    pub fn estimate(
        &self,
        data: &LabeledDataset,
        kind: EstimatorKind,
        criterion: Selection,
        grid: &[f64],
    ) -> Result<EffectEstimate> {
        let (m, ck) = self.select(criterion)?;
        let value = match kind {
            EstimatorKind::Riesz => riesz_effect(&m, data)?,
            EstimatorKind::DebiasedRiesz => debiased_riesz_effect(&m, data)?,
            EstimatorKind::Direct => {
                return Err(Error::Config("the Riesz model does not provide the Direct estimator".into()))
            }
        };
        Ok(EffectEstimate {
            attribute: self.attribute.clone(),
            value,
            estimator: kind,
            selection: criterion,
            snapped: snap(value, grid)?,
            epoch: ck.epoch,
            r2: ck.r2,
        })
    }
}

/// `mean_X [g(X,1) - g(X,0)]` from the outcome head.
pub fn riesz_effect(model: &RieszModel, data: &LabeledDataset) -> Result<f64> {
    let (g1, _) = model.heads(data, Some(1))?;
    let (g0, _) = model.heads(data, Some(0))?;
    Ok(g1.iter().zip(&g0).map(|(a, b)| a - b).sum::<f64>() / g1.len() as f64)
}

/// `mean [(g(X,1) - g(X,0)) + α(X,A)(Y - g(X,A))]`.
pub fn debiased_riesz_effect(model: &RieszModel, data: &LabeledDataset) -> Result<f64> {
    let (g1, _) = model.heads(data, Some(1))?;
    let (g0, _) = model.heads(data, Some(0))?;
    let (_, alpha) = model.heads(data, None)?;
    let a = data.attribute_values(&model.attribute)?;
    let y = labels(data);
    let g = |i: usize, t: usize| if t == 1 { g1[i] } else { g0[i] };
    let al = |i: usize, _t: usize| alpha[i];
    Ok(debiased_estimate(&a, &y, &g, &al))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use crate::scm::build_mnist34_latent;
    use crate::synthgen::{assemble, AssembleConfig, GlyphRenderer, RendererSpec};

    fn splits() -> crate::synthgen::DatasetSplits {
        let scm = build_mnist34_latent(0.7).unwrap();
        let r = RendererSpec::GlyphImage(GlyphRenderer::default());
        assemble(&scm, &r, &AssembleConfig::new(60, 0.7, 1, "rotation")).unwrap()
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let s = splits();
        let inp = RieszInputs::new(&s.train, "rotation", Covariates::Neutral).unwrap();
        let net = Mlp::new(inp.factual.ncols(), Some(5), 2, 2);
        let (_, _, g) = riesz_loss(&net, &inp, 1.0, 0.1);
        let mut f = |p: &[f64]| {
            let mut m = net.clone();
            m.params = p.to_vec();
            riesz_loss(&m, &inp, 1.0, 0.1).0
        };
        assert!(gradient_check(&mut f, &net.params, &g, 10, 3) < 1e-4);
    }

    #[test]
    fn zero_representer_head_reduces_to_plug_in() {
        let s = splits();
        let cfg = RieszConfig { epochs: 20, r2_grid: vec![0.0], hidden: 8, ..Default::default() };
        let mut m = fit_riesz(&s.train, &s.val, "rotation", &cfg).unwrap();
        let h = 8;
        let w2 = h * m.net.input + h;
        for j in 0..h {
            m.net.params[w2 + h + j] = 0.0;
        }
        m.net.params[w2 + 2 * h + 1] = 0.0;
        let (_, alpha) = m.heads(&s.test, None).unwrap();
        assert!(alpha.iter().all(|a| *a == 0.0));
        let r = riesz_effect(&m, &s.test).unwrap();
        assert_eq!(debiased_riesz_effect(&m, &s.test).unwrap(), r);
    }

    #[test]
    fn negative_weights_rejected() {
        let s = splits();
        let cfg = RieszConfig { r1: -1.0, ..Default::default() };
        assert!(matches!(fit_riesz(&s.train, &s.val, "rotation", &cfg), Err(Error::Config(_))));
    }
}
