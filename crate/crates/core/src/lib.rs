//! Causal-effect-regularized classification at desk scale.
//!
//! * [`scm`]: exact discrete structural causal models and identification formulas.
//! * [`synthgen`]: toy text/glyph renderers, counterfactual flips, κ-controlled datasets.
//! * [`estimators`]: Direct and Riesz effect estimators with checkpoint selection and grid snapping.
//! * [`trainer`]: effect-matching regularized training plus ERM, CAD, JTT, IRMv1 and invariance-score baselines.
//! * [`metrics`]: κ, group accuracies, ΔProb and model-selection criteria.
//! * [`theory`]: max-margin solver and numerical checks of the regularization preference theorem.
//! * [`runner`]: config-driven sweeps, run records and reports.

pub mod error;
pub mod estimators;
pub mod metrics;
pub mod nn;
pub mod runner;
pub mod scm;
pub mod synthgen;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
