//! Numerical checks of when effect-proportional norm penalties make a
//! margin-based objective prefer the causal-only classifier over the
//! max-margin one, on frozen disentangled latents.

mod audit;
mod lemma;
mod maxmargin;

pub use audit::{
    audit, audit_instance, planar_instance, random_instance, sufficient_r_global, tested_strengths, AuditConfig,
    AuditRow, AuditSummary,
};
pub use lemma::{check_draft_lemma, check_hm_am, draft_f, LemmaReport};
pub use maxmargin::{angle_grid_margin, max_margin_direction, min_norm_point};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Causal,
    Spurious,
}

/// Latents `z` whose coordinates are split into `K` causal blocks followed by
/// `J` spurious blocks, with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisentangledSet {
    pub z: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub causal_dims: Vec<usize>,
    pub spurious_dims: Vec<usize>,
}

impl DisentangledSet {
    pub fn new(z: Vec<Vec<f64>>, y: Vec<f64>, causal_dims: Vec<usize>, spurious_dims: Vec<usize>) -> Result<Self> {
        let d: usize = causal_dims.iter().chain(&spurious_dims).sum();
        if z.is_empty() || z.len() != y.len() {
            return Err(Error::Config("latents and labels must be nonempty and of equal length".into()));
        }
        if z.iter().any(|r| r.len() != d) || causal_dims.iter().chain(&spurious_dims).any(|&b| b == 0) {
            return Err(Error::Config("block dimensions must be positive and cover every coordinate".into()));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Config("labels must be ±1".into()));
        }
        Ok(Self { z, y, causal_dims, spurious_dims })
    }

    pub fn dim(&self) -> usize {
        self.causal_dims.iter().chain(&self.spurious_dims).sum()
    }

    /// `(kind, start, end)` per block in coordinate order.
    pub fn blocks(&self) -> Vec<(BlockKind, usize, usize)> {
        let mut off = 0;
        let mut out = Vec::new();
        for (kind, dims) in [(BlockKind::Causal, &self.causal_dims), (BlockKind::Spurious, &self.spurious_dims)] {
            for &d in dims {
                out.push((kind, off, off + d));
                off += d;
            }
        }
        out
    }
}

/// Linear classifier `c(z) = w·z` read block by block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLinearClassifier {
    pub w: Vec<f64>,
    pub causal_dims: Vec<usize>,
    pub spurious_dims: Vec<usize>,
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

impl BlockLinearClassifier {
    pub fn margin(&self, data: &DisentangledSet) -> f64 {
        data.z
            .iter()
            .zip(&data.y)
            .map(|(z, y)| y * z.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// `(‖w_ca_k‖_p per k, ‖w_sp_j‖_p per j)`.
    pub fn block_norms(&self, p: f64) -> (Vec<f64>, Vec<f64>) {
        let mut off = 0;
        let mut take = |dims: &[usize]| {
            dims.iter()
                .map(|&d| {
                    let n = lp_norm(&self.w[off..off + d], p);
                    off += d;
                    n
                })
                .collect::<Vec<_>>()
        };
        let ca = take(&self.causal_dims);
        let sp = take(&self.spurious_dims);
        (ca, sp)
    }

    pub fn norm(&self) -> f64 {
        lp_norm(&self.w, 2.0)
    }
}

/// Unit-norm classifier maximizing `min_i y_i c(z_i)` using only the blocks
/// of the kinds in `kinds`; the other blocks stay zero.
pub fn max_margin(data: &DisentangledSet, kinds: &[BlockKind]) -> Result<BlockLinearClassifier> {
    let coords: Vec<usize> = data
        .blocks()
        .into_iter()
        .filter(|(k, _, _)| kinds.contains(k))
        .flat_map(|(_, a, b)| a..b)
        .collect();
    if coords.is_empty() {
        return Err(Error::Config("no blocks selected".into()));
    }
    let points: Vec<Vec<f64>> =
        data.z.iter().zip(&data.y).map(|(z, y)| coords.iter().map(|&c| y * z[c]).collect()).collect();
    let (u, margin) = max_margin_direction(&points);
    if margin <= 0.0 {
        return Err(Error::NotSeparable(margin));
    }
    let mut w = vec![0.0; data.dim()];
    for (c, v) in coords.iter().zip(u) {
        w[*c] = v;
    }
    Ok(BlockLinearClassifier { w, causal_dims: data.causal_dims.clone(), spurious_dims: data.spurious_dims.clone() })
}

/// `λ = 1 / max(|TE|, clamp_eps)`.
pub fn compute_lambdas(effects: &[f64], clamp_eps: f64) -> Vec<f64> {
    effects.iter().map(|t| 1.0 / t.abs().max(clamp_eps)).collect()
}

pub const LAMBDA_CLAMP: f64 = 1e-3;

/// Everything the preference theorem talks about for one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremInstance {
    pub data: DisentangledSet,
    pub c_mm: BlockLinearClassifier,
    pub c_des: BlockLinearClassifier,
    pub lambda_ca: Vec<f64>,
    pub lambda_sp: Vec<f64>,
    /// Norm used in the penalties.
    pub p: f64,
}

impl TheoremInstance {
    pub fn new(data: DisentangledSet, te_ca: &[f64], te_sp: &[f64], p: f64) -> Result<Self> {
        if te_ca.len() != data.causal_dims.len() || te_sp.len() != data.spurious_dims.len() {
            return Err(Error::Config("one effect per block is required".into()));
        }
        let c_mm = max_margin(&data, &[BlockKind::Causal, BlockKind::Spurious])?;
        let c_des = max_margin(&data, &[BlockKind::Causal])?;
        Ok(Self {
            data,
            c_mm,
            c_des,
            lambda_ca: compute_lambdas(te_ca, LAMBDA_CLAMP),
            lambda_sp: compute_lambdas(te_sp, LAMBDA_CLAMP),
            p,
        })
    }

    pub fn k(&self) -> usize {
        self.lambda_ca.len()
    }

    pub fn j(&self) -> usize {
        self.lambda_sp.len()
    }

    /// `η_{k,j} = (‖w^des_ca_k‖ - ‖w^mm_ca_k‖) / ‖w^mm_sp_j‖`.
    pub fn eta(&self) -> Vec<Vec<f64>> {
        let (des_ca, _) = self.c_des.block_norms(self.p);
        let (mm_ca, mm_sp) = self.c_mm.block_norms(self.p);
        des_ca.iter().zip(&mm_ca).map(|(d, m)| mm_sp.iter().map(|s| (d - m) / s).collect()).collect()
    }

    /// `-min_i y_i c(z_i) + R (Σ λ_ca ‖w_ca‖_p + Σ λ_sp ‖w_sp‖_p)`.
    pub fn loss(&self, c: &BlockLinearClassifier, r: f64) -> f64 {
        let (ca, sp) = c.block_norms(self.p);
        let pen = ca.iter().zip(&self.lambda_ca).map(|(n, l)| n * l).sum::<f64>()
            + sp.iter().zip(&self.lambda_sp).map(|(n, l)| n * l).sum::<f64>();
        -c.margin(&self.data) + r * pen
    }
}

/// Mean of `(λ_ca_k / λ_sp_j) η_{k,j}` over all pairs, and whether it is
/// below `J / K`.
pub fn mean_condition(inst: &TheoremInstance) -> (f64, bool) {
    let eta = inst.eta();
    let mut sum = 0.0;
    for (k, row) in eta.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            sum += inst.lambda_ca[k] / inst.lambda_sp[j] * e;
        }
    }
    let value = sum / (inst.k() * inst.j()) as f64;
    (value, value < inst.j() as f64 / inst.k() as f64)
}

/// `λ_sp_j > (K/J) η_{k,j} λ_ca_k` for every pair.
pub fn strict_condition(inst: &TheoremInstance) -> bool {
    let ratio = inst.k() as f64 / inst.j() as f64;
    inst.eta()
        .iter()
        .enumerate()
        .all(|(k, row)| row.iter().enumerate().all(|(j, e)| inst.lambda_sp[j] > ratio * e * inst.lambda_ca[k]))
}

/// Smallest `R` above which `c_des` has the lower loss: the margin deficit of
/// `c_des` divided by the penalty surplus of `c_mm`.
pub fn r_threshold(inst: &TheoremInstance) -> Result<f64> {
    let (des_ca, _) = inst.c_des.block_norms(inst.p);
    let (mm_ca, mm_sp) = inst.c_mm.block_norms(inst.p);
    let denom = inst.lambda_ca.iter().zip(mm_ca.iter().zip(&des_ca)).map(|(l, (m, d))| l * (m - d)).sum::<f64>()
        + inst.lambda_sp.iter().zip(&mm_sp).map(|(l, s)| l * s).sum::<f64>();
    if denom <= 0.0 {
        return Err(Error::Config(format!("penalty surplus {denom} is not positive; no R makes c_des preferred")));
    }
    Ok((inst.c_mm.margin(&inst.data) - inst.c_des.margin(&inst.data)) / denom)
}

/// Whether `c_des` has strictly lower loss than `c_mm` at strength `r`.
pub fn verify_preference(inst: &TheoremInstance, r: f64) -> bool {
    inst.loss(&inst.c_des, r) < inst.loss(&inst.c_mm, r)
}

/// `η(θ) = √((1-θ)/(1+θ))` for a unit classifier with causal weight norm θ.
pub fn eta_of_theta(theta: f64) -> f64 {
    ((1.0 - theta) / (1.0 + theta)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalOptimumReport {
    pub holds: bool,
    pub best_theta: f64,
    pub best_loss: f64,
    pub des_loss: f64,
}

/// Grid search over unit classifiers `(±θ, ±√(1-θ²))` for one causal and one
/// spurious coordinate, with θ stepped by `resolution`.
pub fn verify_global_optimum(
    data: &DisentangledSet,
    lambda_ca: f64,
    lambda_sp: f64,
    r: f64,
    resolution: f64,
) -> Result<GlobalOptimumReport> {
    if data.causal_dims != [1] || data.spurious_dims != [1] {
        return Err(Error::Config("the global-optimum search needs one 1-D causal and one 1-D spurious block".into()));
    }
    if !(resolution > 0.0 && resolution <= 0.01) {
        return Err(Error::Config(format!("grid resolution {resolution} is too coarse")));
    }
    let inst = TheoremInstance {
        data: data.clone(),
        c_mm: max_margin(data, &[BlockKind::Causal, BlockKind::Spurious])?,
        c_des: max_margin(data, &[BlockKind::Causal])?,
        lambda_ca: vec![lambda_ca],
        lambda_sp: vec![lambda_sp],
        p: 2.0,
    };
    let des_loss = inst.loss(&inst.c_des, r);
    let steps = (1.0 / resolution).round() as usize;
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 0..=steps {
        let theta = i as f64 / steps as f64;
        let rest = (1.0 - theta * theta).max(0.0).sqrt();
        for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let c = BlockLinearClassifier { w: vec![s1 * theta, s2 * rest], ..inst.c_des.clone() };
            let l = inst.loss(&c, r);
            if l < best.1 {
                best = (theta, l);
            }
        }
    }
    Ok(GlobalOptimumReport { holds: best.1 >= des_loss - 1e-9, best_theta: best.0, best_loss: best.1, des_loss })
}

#[cfg(test)]
mod tests;
