//! Browser bindings: each function returns a JSON document for the page in
//! `www/` to draw.

use causal_reg::scm::{build_syntext, identify_dgp2};
use causal_reg::synthgen::natural_kappa;
use causal_reg::theory::{
    check_draft_lemma, draft_f, mean_condition, planar_instance, r_threshold, BlockLinearClassifier, TheoremInstance,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Population quantities of the Syn-Text model for κ on `[0.5, 0.99]`: the
/// true effect of the spurious attribute, the raw association and the value
/// a perfect outcome regression on the observed attributes would report.
#[wasm_bindgen]
pub fn kappa_curves(confound_observed: bool, steps: usize) -> Result<String, String> {
    let steps = steps.max(2);
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let k = 0.5 + 0.49 * i as f64 / (steps - 1) as f64;
        let scm = build_syntext(k, confound_observed).map_err(err)?;
        let joint = scm.joint();
        let observed: Vec<&str> = scm.observed_names().into_iter().filter(|n| *n != "y").collect();
        let pv = joint.marginal(&observed).map_err(err)?;
        let pyv = joint.conditional(&["y"], &observed).map_err(err)?;
        rows.push(json!({
            "kappa": k,
            "natural_kappa": natural_kappa(&scm, "y", "spurious").map_err(err)?,
            "true_effect": scm.ace("spurious", "y").map_err(err)?,
            "association": joint.conditional(&["y"], &["spurious"]).map_err(err)?.effect().map_err(err)?,
            "adjusted": identify_dgp2(&pv, &pyv, "spurious").map_err(err)?.effect().map_err(err)?,
        }));
    }
    Ok(json!({ "confound_observed": confound_observed, "rows": rows }).to_string())
}

/// Regularized objective of every unit classifier `(θ, ±√(1-θ²))` on a seeded
/// planar data set, with the max-margin and causal-only classifiers marked.
#[wasm_bindgen]
pub fn loss_landscape(te_causal: f64, te_spurious: f64, r: f64, seed: u32, points: usize) -> Result<String, String> {
    let data = planar_instance(u64::from(seed), points.max(2), 0.85).map_err(err)?;
    let inst = TheoremInstance::new(data, &[te_causal], &[te_spurious], 2.0).map_err(err)?;
    let n = 401;
    let mut theta = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    for i in 0..n {
        let t = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        let s = (1.0 - t * t).max(0.0).sqrt();
        let c = |sp: f64| BlockLinearClassifier { w: vec![t, sp], ..inst.c_des.clone() };
        theta.push(t);
        upper.push(inst.loss(&c(s), r));
        lower.push(inst.loss(&c(-s), r));
    }
    let (mean_value, mean_holds) = mean_condition(&inst);
    Ok(json!({
        "theta": theta,
        "loss_positive_spurious": upper,
        "loss_negative_spurious": lower,
        "max_margin": { "w": inst.c_mm.w, "loss": inst.loss(&inst.c_mm, r) },
        "causal_only": { "w": inst.c_des.w, "loss": inst.loss(&inst.c_des, r) },
        "lambda": [inst.lambda_ca[0], inst.lambda_sp[0]],
        "mean_condition": { "value": mean_value, "holds": mean_holds },
        "r_threshold": r_threshold(&inst).ok(),
        "points": inst.data.z,
        "labels": inst.data.y,
    })
    .to_string())
}

/// `f(α)` on `(1, α_max]` for one η, with the lemma's checks.
#[wasm_bindgen]
pub fn lemma_curve(eta: f64, points: usize) -> Result<String, String> {
    let report = check_draft_lemma(eta, 1e-3).map_err(err)?;
    let n = points.max(2);
    let alpha: Vec<f64> = (1..=n).map(|i| 1.0 + (report.alpha_max - 1.0) * i as f64 / n as f64).collect();
    let f: Vec<f64> = alpha.iter().map(|&a| draft_f(a, eta)).collect();
    Ok(json!({
        "eta": eta,
        "alpha": alpha,
        "f": f,
        "alpha_max": report.alpha_max,
        "increasing": report.increasing,
        "above_eta": report.above_eta,
    })
    .to_string())
}
