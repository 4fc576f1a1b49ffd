//! Stage-1 estimation of each attribute's average causal effect on the label.

mod effect;
mod regression;
mod riesz;

pub use effect::{
    debiased_estimate, select_checkpoint, snap, Checkpoint, EffectEstimate, EstimatorKind, Selection,
    GRID_DEFAULT, GRID_SYNTHETIC,
};
pub use regression::{direct_effect, fit_regression, regression_loss, RegressionConfig, RegressionModel};
pub use riesz::{
    debiased_riesz_effect, fit_riesz, riesz_effect, riesz_loss, RieszConfig, RieszInputs, RieszLossParts, RieszModel,
};

use crate::error::Result;
use crate::synthgen::LabeledDataset;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// How the input features enter the outcome regression next to the
/// attribute bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariates {
    /// Average of the factual and attribute-flipped renderings: identical for
    /// both attribute values, so the attribute bit is its only channel.
    #[default]
    Neutral,
    /// The factual rendering, which also encodes the attribute.
    Raw,
}

/// Design matrix `[covariates | a]`, with `a` replaced by `force` if given.
pub(crate) fn design(
    data: &LabeledDataset,
    attribute: &str,
    covariates: Covariates,
    force: Option<usize>,
) -> Result<Array2<f64>> {
    let d = data.dim();
    let mut m = Array2::zeros((data.len(), d + 1));
    for (mut row, e) in m.rows_mut().into_iter().zip(&data.examples) {
        let a = e.attribute(attribute)?;
        match covariates {
            Covariates::Raw => {
                for (j, v) in e.features.iter().enumerate() {
                    row[j] = *v;
                }
            }
            Covariates::Neutral => {
                let cf = e.counterfactual(attribute)?;
                for j in 0..d {
                    row[j] = 0.5 * (e.features[j] + cf[j]);
                }
            }
        }
        row[d] = force.unwrap_or(a) as f64;
    }
    Ok(m)
}

pub(crate) fn labels(data: &LabeledDataset) -> Vec<f64> {
    data.examples.iter().map(|e| e.label as f64).collect()
}
