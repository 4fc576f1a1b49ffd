use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const GRID_DEFAULT: [f64; 8] = [-1.0, -0.5, -0.1, 0.0, 0.1, 0.3, 0.5, 1.0];
pub const GRID_SYNTHETIC: [f64; 11] = [-1.0, -0.7, -0.5, -0.3, -0.1, 0.0, 0.1, 0.3, 0.5, 0.7, 1.0];

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Direct,
    Riesz,
    DebiasedRiesz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    ValLoss,
    ValAcc,
}

/// Model state saved during training with its validation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    /// L2 strength of the run that produced this checkpoint.
    pub r2: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub attribute: String,
    pub value: f64,
    pub estimator: EstimatorKind,
    pub selection: Selection,
    pub snapped: f64,
    pub epoch: usize,
    pub r2: f64,
}

/// Index of the best checkpoint: lowest validation loss or highest validation
/// accuracy; ties go to the earlier entry.
pub fn select_checkpoint(checkpoints: &[Checkpoint], criterion: Selection) -> Result<usize> {
    if checkpoints.is_empty() {
        return Err(Error::Empty("no checkpoints to select from".into()));
    }
    let mut best = 0;
    for (i, c) in checkpoints.iter().enumerate().skip(1) {
        let better = match criterion {
            Selection::ValLoss => c.val_loss < checkpoints[best].val_loss,
            Selection::ValAcc => c.val_acc > checkpoints[best].val_acc,
        };
        if better {
            best = i;
        }
    }
    Ok(best)
}

/// Clips `value` to `[-1, 1]` and returns the nearest grid element; equally
/// distant candidates resolve to the one closer to 0.
pub fn snap(value: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("effect grid".into()));
    }
    let v = if value.is_nan() { 0.0 } else { value.clamp(-1.0, 1.0) };
    let mut best = grid[0];
    for &g in &grid[1..] {
        let (dg, db) = ((g - v).abs(), (best - v).abs());
        if dg < db - TIE_TOLERANCE || ((dg - db).abs() <= TIE_TOLERANCE && g.abs() < best.abs()) {
            best = g;
        }
    }
    Ok(best)
}

/// `mean_i [(g(i,1) - g(i,0)) + α(i, a_i) (y_i - g(i, a_i))]` for outcome
/// model `g` and representer `α` evaluated per example index.
pub fn debiased_estimate(
    a: &[usize],
    y: &[f64],
    g: &dyn Fn(usize, usize) -> f64,
    alpha: &dyn Fn(usize, usize) -> f64,
) -> f64 {
    let n = a.len();
    (0..n)
        .map(|i| (g(i, 1) - g(i, 0)) + alpha(i, a[i]) * (y[i] - g(i, a[i])))
        .sum::<f64>()
        / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snapping_examples() {
        assert_eq!(snap(0.27, &GRID_DEFAULT).unwrap(), 0.3);
        assert_eq!(snap(0.0, &GRID_DEFAULT).unwrap(), 0.0);
        assert_eq!(snap(0.2, &GRID_DEFAULT).unwrap(), 0.1);
        assert_eq!(snap(-0.2, &GRID_DEFAULT).unwrap(), -0.1);
        assert_eq!(snap(3.0, &GRID_SYNTHETIC).unwrap(), 1.0);
        assert!(snap(0.1, &[]).is_err());
    }

    proptest! {
        #[test]
        fn snapping_is_odd_and_idempotent(v in -1.5f64..1.5) {
            for grid in [&GRID_DEFAULT[..], &GRID_SYNTHETIC[..]] {
                let s = snap(v, grid).unwrap();
                prop_assert_eq!(snap(s, grid).unwrap(), s);
                prop_assert!(grid.contains(&s));
            }
            // the default grid has no -0.3, so oddness only holds on the symmetric one
            let s = snap(v, &GRID_SYNTHETIC).unwrap();
            prop_assert_eq!(snap(-v, &GRID_SYNTHETIC).unwrap(), -s);
        }
    }

    fn ck(epoch: usize, loss: f64, acc: f64) -> Checkpoint {
        Checkpoint { epoch, r2: 0.0, val_loss: loss, val_acc: acc, params: vec![] }
    }

    #[test]
    fn checkpoint_selection() {
        let cs = [ck(10, 0.3, 0.8), ck(20, 0.2, 0.8), ck(30, 0.2, 0.9)];
        assert_eq!(select_checkpoint(&cs, Selection::ValLoss).unwrap(), 1);
        assert_eq!(select_checkpoint(&cs, Selection::ValAcc).unwrap(), 2);
        assert!(select_checkpoint(&[], Selection::ValAcc).is_err());
    }

    #[test]
    fn exact_outcome_model_cancels_correction() {
        let a = [0, 1, 1, 0];
        let g = |i: usize, t: usize| 0.1 * i as f64 + 0.3 * t as f64;
        let y: Vec<f64> = (0..4).map(|i| g(i, a[i])).collect();
        let alpha = |i: usize, t: usize| (i as f64 - 1.7) * (t as f64 + 0.4);
        let v = debiased_estimate(&a, &y, &g, &alpha);
        assert!((v - 0.3).abs() < 1e-15);
    }
}
