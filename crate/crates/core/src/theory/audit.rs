use super::{mean_condition, r_threshold, strict_condition, verify_preference, DisentangledSet, TheoremInstance};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub instances: usize,
    pub seed: u64,
    pub points: usize,
    pub max_blocks: usize,
    pub max_block_dim: usize,
    pub noise: f64,
    /// Norm used in the penalties.
    pub p: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { instances: 100, seed: 0, points: 24, max_blocks: 3, max_block_dim: 3, noise: 0.3, p: 2.0 }
    }
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// A separable instance with `K, J ∈ 1..=max_blocks` whose max-margin
/// classifier puts weight on every spurious block. Spurious blocks agree with
/// the label with probability in `[0.8, 0.95]`.
pub fn random_instance(cfg: &AuditConfig, index: usize) -> Result<TheoremInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    for _ in 0..200 {
        let k = rng.random_range(1..=cfg.max_blocks);
        let j = rng.random_range(1..=cfg.max_blocks);
        let causal_dims: Vec<usize> = (0..k).map(|_| rng.random_range(1..=cfg.max_block_dim)).collect();
        let spurious_dims: Vec<usize> = (0..j).map(|_| rng.random_range(1..=cfg.max_block_dim)).collect();
        // (direction, scale, probability of agreeing with the label) per block
        let mut dirs: Vec<(Vec<f64>, f64, f64)> = Vec::new();
        for &d in &causal_dims {
            dirs.push((unit(&mut rng, d), rng.random_range(0.3..1.5), 1.0));
        }
        for &d in &spurious_dims {
            dirs.push((unit(&mut rng, d), rng.random_range(0.3..1.5), rng.random_range(0.8..0.95)));
        }
        let mut z = Vec::with_capacity(cfg.points);
        let mut y = Vec::with_capacity(cfg.points);
        for _ in 0..cfg.points {
            let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut row = Vec::new();
            for (u, scale, agree) in &dirs {
                let s = if rng.random::<f64>() < *agree { label } else { -label };
                for c in u {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    row.push(s * scale * c + cfg.noise * e);
                }
            }
            z.push(row);
            y.push(label);
        }
        let data = DisentangledSet::new(z, y, causal_dims, spurious_dims)?;
        let te_ca: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let te_sp: Vec<f64> = (0..j).map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random_range(0.0..0.6) }).collect();
        let Ok(inst) = TheoremInstance::new(data, &te_ca, &te_sp, cfg.p) else { continue };
        let (_, sp) = inst.c_mm.block_norms(cfg.p);
        if sp.iter().all(|&s| s > 1e-6) {
            return Ok(inst);
        }
    }
    Err(Error::Config(format!("no admissible instance found for index {index}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub instance: usize,
    pub k: usize,
    pub j: usize,
    pub mean_value: f64,
    pub mean_holds: bool,
    pub strict_holds: bool,
    pub all_eta_positive: bool,
    /// NaN when the penalty surplus of the max-margin classifier is not
    /// positive.
    pub r_threshold: f64,
    /// Preference at every tested `R` above `max(0, threshold)`.
    pub preferred: bool,
}

impl AuditRow {
    /// The theorem's claim fails on this row.
    pub fn counterexample(&self) -> bool {
        self.mean_holds && !self.preferred
    }

    /// Strict condition without the mean condition on positive η.
    pub fn implication_violated(&self) -> bool {
        self.all_eta_positive && self.strict_holds && !self.mean_holds
    }
}

/// Strengths strictly above `max(0, threshold)` at which preference is checked.
pub fn tested_strengths(threshold: f64) -> [f64; 3] {
    let t = threshold.max(0.0);
    [t * 1.01 + 1e-9, t * 2.0 + 1e-3, t * 10.0 + 1.0]
}

pub fn audit_instance(index: usize, inst: &TheoremInstance) -> AuditRow {
    let (mean_value, mean_holds) = mean_condition(inst);
    let threshold = r_threshold(inst).unwrap_or(f64::NAN);
    let preferred = !threshold.is_nan() && tested_strengths(threshold).iter().all(|&r| verify_preference(inst, r));
    AuditRow {
        instance: index,
        k: inst.k(),
        j: inst.j(),
        mean_value,
        mean_holds,
        strict_holds: strict_condition(inst),
        all_eta_positive: inst.eta().iter().flatten().all(|&e| e > 0.0),
        r_threshold: threshold,
        preferred,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub rows: Vec<AuditRow>,
    pub mean_holding: usize,
    pub counterexamples: usize,
    pub implication_violations: usize,
}

impl AuditSummary {
    pub fn passed(&self) -> bool {
        self.counterexamples == 0 && self.implication_violations == 0
    }
}

/// Generates and checks `cfg.instances` random instances in parallel.
pub fn audit(cfg: &AuditConfig) -> Result<AuditSummary> {
    let rows = (0..cfg.instances)
        .into_par_iter()
        .map(|i| random_instance(cfg, i).map(|inst| audit_instance(i, &inst)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditSummary {
        mean_holding: rows.iter().filter(|r| r.mean_holds).count(),
        counterexamples: rows.iter().filter(|r| r.counterexample()).count(),
        implication_violations: rows.iter().filter(|r| r.implication_violated()).count(),
        rows,
    })
}

/// A strength above which the causal-only classifier beats every unit
/// classifier that uses the spurious coordinate, for one 1-D causal and one
/// 1-D spurious block with `λ_ca < λ_sp`: the spurious coordinate adds at
/// most `√(1-θ²)·max|z_sp|` margin and at least `√(1-θ²)(λ_sp - λ_ca)` penalty.
pub fn sufficient_r_global(data: &DisentangledSet, lambda_ca: f64, lambda_sp: f64) -> Result<f64> {
    if lambda_ca >= lambda_sp {
        return Err(Error::Config("needs λ_ca < λ_sp".into()));
    }
    let m = data.z.iter().map(|z| z[1].abs()).fold(0.0, f64::max);
    Ok(m / (lambda_sp - lambda_ca))
}

/// `n` points with one causal and one spurious coordinate: the causal
/// coordinate always agrees with the label, the spurious one with
/// probability `agreement`.
pub fn planar_instance(seed: u64, n: usize, agreement: f64) -> Result<DisentangledSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let sign = if rng.random::<f64>() < agreement { 1.0 } else { -1.0 };
        z.push(vec![label * rng.random_range(0.3..1.5), label * sign * rng.random_range(0.2..1.5)]);
        y.push(label);
    }
    DisentangledSet::new(z, y, vec![1], vec![1])
}
