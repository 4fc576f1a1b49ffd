use crate::nn::{sigmoid, softplus, Mlp};
use ndarray::Array2;

/// Pairs of renderings whose prediction difference should equal `target`.
#[derive(Debug, Clone)]
pub struct RegPairs {
    pub first: Array2<f64>,
    pub second: Array2<f64>,
    pub target: f64,
}

/// Everything one full-batch step needs.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    /// Per-example weights of the task loss.
    pub weights: Vec<f64>,
    /// Environment index per example, used when `irm_lambda` is set.
    pub env: Vec<usize>,
    pub irm_lambda: Option<f64>,
    pub reg: Vec<RegPairs>,
    pub r: f64,
}

impl Batch {
    pub fn plain(x: Array2<f64>, y: Vec<f64>) -> Self {
        let n = y.len();
        Self { x, y, weights: vec![1.0; n], env: vec![0; n], irm_lambda: None, reg: Vec::new(), r: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub task: f64,
    pub reg: f64,
    pub irm_penalty: f64,
}

/// Binary cross-entropy of logit `f` against `y`.
fn bce_one(f: f64, y: f64) -> f64 {
    softplus(f) - y * f
}

/// Mean binary cross-entropy from logits.
pub(crate) fn bce(f: &[f64], y: &[f64]) -> f64 {
    f.iter().zip(y).map(|(&f, &y)| bce_one(f, y)).sum::<f64>() / f.len() as f64
}

/// Mean binary cross-entropy of `net` on `(x, y)`.
pub fn loss_task(net: &Mlp, x: &Array2<f64>, y: &[f64]) -> f64 {
    bce(&net.forward(x.view()).out.column(0).to_vec(), y)
}

/// `Σ_attributes mean_i (c(first_i) - c(second_i) - target)²`.
pub fn loss_reg(net: &Mlp, reg: &[RegPairs]) -> f64 {
    reg.iter()
        .map(|p| {
            let a = net.forward(p.first.view()).out;
            let b = net.forward(p.second.view()).out;
            let n = a.nrows() as f64;
            (0..a.nrows())
                .map(|i| (sigmoid(a[[i, 0]]) - sigmoid(b[[i, 0]]) - p.target).powi(2))
                .sum::<f64>()
                / n
        })
        .sum()
}

/// Composite objective and its gradient.
///
/// Without IRM: weighted mean cross-entropy `Σ w_i ℓ_i / Σ w_i`. With IRM:
/// the mean over environments of per-environment cross-entropy plus
/// `λ Σ_e G_e²`, where `G_e = mean_{i∈e} (σ(f_i) - y_i) f_i` is the derivative
/// of that environment's loss with respect to a scalar multiplier on the
/// logit, taken at 1. Both add `R · loss_reg`.
pub fn composite_loss(net: &Mlp, batch: &Batch) -> (f64, LossParts, Vec<f64>) {
    let n = batch.y.len();
    let cache = net.forward(batch.x.view());
    let f = cache.out.column(0);
    let mut dout = Array2::zeros((n, 1));
    let mut parts = LossParts::default();
    let total = match batch.irm_lambda {
        None => {
            let total: f64 = batch.weights.iter().sum();
            for i in 0..n {
                let w = batch.weights[i] / total;
                parts.task += w * bce_one(f[i], batch.y[i]);
                dout[[i, 0]] = w * (sigmoid(f[i]) - batch.y[i]);
            }
            parts.task
        }
        Some(lambda) => {
            let n_env = batch.env.iter().max().map_or(0, |m| m + 1);
            let mut counts = vec![0usize; n_env];
            let mut g = vec![0.0; n_env];
            let mut ce = vec![0.0; n_env];
            for i in 0..n {
                let e = batch.env[i];
                counts[e] += 1;
                g[e] += (sigmoid(f[i]) - batch.y[i]) * f[i];
                ce[e] += bce_one(f[i], batch.y[i]);
            }
            let present = counts.iter().filter(|&&c| c > 0).count() as f64;
            for e in 0..n_env {
                if counts[e] > 0 {
                    g[e] /= counts[e] as f64;
                    parts.task += ce[e] / counts[e] as f64 / present;
                    parts.irm_penalty += g[e] * g[e];
                }
            }
            for i in 0..n {
                let e = batch.env[i];
                let ne = counts[e] as f64;
                let s = sigmoid(f[i]);
                let d_g = (s * (1.0 - s) * f[i] + s - batch.y[i]) / ne;
                dout[[i, 0]] = (s - batch.y[i]) / ne / present + lambda * 2.0 * g[e] * d_g;
            }
            parts.task + lambda * parts.irm_penalty
        }
    };
    finish(net, batch, &cache, dout, parts, total)
}

fn finish(
    net: &Mlp,
    batch: &Batch,
    cache: &crate::nn::Cache,
    dout: Array2<f64>,
    mut parts: LossParts,
    mut total: f64,
) -> (f64, LossParts, Vec<f64>) {
    let mut grad = net.backward(batch.x.view(), cache, dout.view());
    if batch.r > 0.0 {
        for p in &batch.reg {
            let m = p.first.nrows();
            let ca = net.forward(p.first.view());
            let cb = net.forward(p.second.view());
            let mut da = Array2::zeros((m, 1));
            let mut db = Array2::zeros((m, 1));
            let mut sum = 0.0;
            for i in 0..m {
                let (sa, sb) = (sigmoid(ca.out[[i, 0]]), sigmoid(cb.out[[i, 0]]));
                let dev = sa - sb - p.target;
                sum += dev * dev;
                let c = batch.r * 2.0 * dev / m as f64;
                da[[i, 0]] = c * sa * (1.0 - sa);
                db[[i, 0]] = -c * sb * (1.0 - sb);
            }
            parts.reg += sum / m as f64;
            for (x, c, d) in [(&p.first, &ca, &da), (&p.second, &cb, &db)] {
                for (g, h) in grad.iter_mut().zip(net.backward(x.view(), c, d.view())) {
                    *g += h;
                }
            }
        }
        total += batch.r * parts.reg;
    }
    (total, parts, grad)
}
