use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `f(α) = (1 - √(1+η-ηα²)) / (α-1)`, evaluated in the equivalent form
/// `η(α+1) / (1 + √(1+η-ηα²))` that stays exact as `α → 1`.
pub fn draft_f(alpha: f64, eta: f64) -> f64 {
    let beta = (1.0 + eta - eta * alpha * alpha).max(0.0).sqrt();
    eta * (alpha + 1.0) / (1.0 + beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub eta: f64,
    pub alpha_max: f64,
    pub points: usize,
    /// Strictly increasing along the grid.
    pub increasing: bool,
    /// `f(α) > η` at every grid point.
    pub above_eta: bool,
    /// `|f(1 + 1e-6) - η|`.
    pub limit_gap: f64,
    /// `√(1+η-ηα_max²)`, zero up to rounding.
    pub beta_at_max: f64,
    /// Largest disagreement between the direct quotient and the stable form
    /// where the quotient is well conditioned (`α - 1 ≥ 1e-2`).
    pub form_gap: f64,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.increasing && self.above_eta && self.limit_gap < 1e-4 && self.beta_at_max < 1e-6
    }
}

/// Walks `(1, α_max]` with `step` and checks monotonicity, the lower bound
/// by η and the limit at 1.
pub fn check_draft_lemma(eta: f64, step: f64) -> Result<LemmaReport> {
    if !(eta > 0.0) {
        return Err(Error::Config(format!("η must be positive, got {eta}")));
    }
    if !(step > 0.0) {
        return Err(Error::Config("grid step must be positive".into()));
    }
    let alpha_max = ((1.0 + eta) / eta).sqrt();
    let n = ((alpha_max - 1.0) / step).floor() as usize;
    let mut grid: Vec<f64> = (1..=n).map(|i| 1.0 + i as f64 * step).collect();
    if grid.last().is_none_or(|&a| a < alpha_max) {
        grid.push(alpha_max);
    }
    let values: Vec<f64> = grid.iter().map(|&a| draft_f(a, eta)).collect();
    let direct = |a: f64| (1.0 - (1.0 + eta - eta * a * a).max(0.0).sqrt()) / (a - 1.0);
    let form_gap = grid
        .iter()
        .zip(&values)
        .filter(|(a, _)| **a - 1.0 >= 1e-2)
        .map(|(a, v)| (direct(*a) - v).abs() / v.abs().max(1.0))
        .fold(0.0, f64::max);
    Ok(LemmaReport {
        eta,
        alpha_max,
        points: grid.len(),
        increasing: values.windows(2).all(|w| w[1] > w[0]),
        above_eta: values.iter().all(|&v| v > eta),
        limit_gap: (draft_f(1.0 + 1e-6, eta) - eta).abs(),
        beta_at_max: (1.0 + eta - eta * alpha_max * alpha_max).max(0.0).sqrt(),
        form_gap,
    })
}

/// `(harmonic mean, arithmetic mean)`; HM ≤ AM with equality iff all values
/// are equal.
pub fn check_hm_am(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("no values".into()));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Config("harmonic mean needs positive values".into()));
    }
    let n = values.len() as f64;
    let hm = n / values.iter().map(|v| 1.0 / v).sum::<f64>();
    let am = values.iter().sum::<f64>() / n;
    Ok((hm, am))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lemma_examples() {
        let r = check_draft_lemma(1.0, 1e-4).unwrap();
        assert!((r.alpha_max - 2f64.sqrt()).abs() < 1e-15);
        assert!(draft_f(1.2, 1.0) > 1.0);
        assert!(r.holds(), "{r:?}");
        assert!(r.form_gap < 1e-12);
        assert!(check_draft_lemma(0.0, 1e-4).is_err());
    }

    #[test]
    fn hm_am_examples() {
        let (h, a) = check_hm_am(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((h, a), (1.0, 1.0));
        let (h, a) = check_hm_am(&[1.0, 4.0]).unwrap();
        assert!((h - 1.6).abs() < 1e-15 && a == 2.5);
        assert!(check_hm_am(&[1.0, -1.0]).is_err());
    }

    proptest! {
        #[test]
        fn hm_never_exceeds_am(v in proptest::collection::vec(1e-3f64..1e3, 1..10)) {
            let (h, a) = check_hm_am(&v).unwrap();
            prop_assert!(h <= a * (1.0 + 1e-12));
        }
    }
}
