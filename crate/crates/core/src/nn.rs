//! A one-hidden-layer perceptron with hand-written backpropagation over a
//! flat parameter vector, plus full-batch optimizers and finite-difference
//! helpers.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Optional tanh hidden layer followed by a linear map to `outputs` values.
///
/// Layout of `params`: `[W1 (hidden×input), b1, W2 (outputs×hidden), b2]`, or
/// `[W (outputs×input), b]` without a hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input: usize,
    pub hidden: Option<usize>,
    pub outputs: usize,
    pub params: Vec<f64>,
}

pub struct Cache {
    hidden: Option<Array2<f64>>,
    /// Raw outputs, one row per example.
    pub out: Array2<f64>,
}

impl Mlp {
    pub fn new(input: usize, hidden: Option<usize>, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut layer = |fan_in: usize, fan_out: usize, params: &mut Vec<f64>| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        };
        match hidden {
            Some(h) => {
                layer(input, h, &mut params);
                layer(h, outputs, &mut params);
            }
            None => layer(input, outputs, &mut params),
        }
        Self { input, hidden, outputs, params }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// `(weights offset, weights len, bias offset, bias len)` per layer.
    fn layers(&self) -> Vec<(usize, usize, usize, usize)> {
        let dims = match self.hidden {
            Some(h) => vec![(self.input, h), (h, self.outputs)],
            None => vec![(self.input, self.outputs)],
        };
        let mut off = 0;
        dims.into_iter()
            .map(|(i, o)| {
                let l = (off, i * o, off + i * o, o);
                off += i * o + o;
                l
            })
            .collect()
    }

    fn weights(&self, layer: usize, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        let (w, wl, _, _) = self.layers()[layer];
        ArrayView2::from_shape((rows, cols), &self.params[w..w + wl]).expect("layout")
    }

    fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (_, _, b, bl) = self.layers()[layer];
        ArrayView1::from(&self.params[b..b + bl])
    }

    /// Indices of weight (non-bias) parameters, the target of L2 penalties.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.params.len()];
        for (w, wl, _, _) in self.layers() {
            m[w..w + wl].iter_mut().for_each(|x| *x = true);
        }
        m
    }

    /// Sum of squared weights.
    pub fn l2(&self) -> f64 {
        self.params
            .iter()
            .zip(self.weight_mask())
            .filter(|(_, m)| *m)
            .map(|(p, _)| p * p)
            .sum()
    }

    pub fn add_l2_grad(&self, strength: f64, grad: &mut [f64]) {
        if strength == 0.0 {
            return;
        }
        for ((g, p), m) in grad.iter_mut().zip(&self.params).zip(self.weight_mask()) {
            if m {
                *g += 2.0 * strength * p;
            }
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Cache {
        match self.hidden {
            Some(h) => {
                let w1 = self.weights(0, h, self.input);
                let mut a = x.dot(&w1.t());
                a += &self.bias(0);
                a.mapv_inplace(f64::tanh);
                let w2 = self.weights(1, self.outputs, h);
                let mut out = a.dot(&w2.t());
                out += &self.bias(1);
                Cache { hidden: Some(a), out }
            }
            None => {
                let w = self.weights(0, self.outputs, self.input);
                let mut out = x.dot(&w.t());
                out += &self.bias(0);
                Cache { hidden: None, out }
            }
        }
    }

    /// Gradient of a loss with `dout = ∂loss/∂out` (same shape as `out`).
    pub fn backward(&self, x: ArrayView2<'_, f64>, cache: &Cache, dout: ArrayView2<'_, f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let layers = self.layers();
        let write = |grad: &mut Vec<f64>, (w, wl, b, bl): (usize, usize, usize, usize), gw: Array2<f64>, gb: Array1<f64>| {
            grad[w..w + wl].copy_from_slice(gw.as_standard_layout().as_slice().expect("contiguous"));
            grad[b..b + bl].copy_from_slice(gb.as_slice().expect("contiguous"));
        };
        match (&self.hidden, &cache.hidden) {
            (Some(h), Some(a)) => {
                write(&mut grad, layers[1], dout.t().dot(a), dout.sum_axis(Axis(0)));
                let w2 = self.weights(1, self.outputs, *h);
                let mut da = dout.dot(&w2);
                da.zip_mut_with(a, |d, &t| *d *= 1.0 - t * t);
                write(&mut grad, layers[0], da.t().dot(&x), da.sum_axis(Axis(0)));
            }
            _ => write(&mut grad, layers[0], dout.t().dot(&x), dout.sum_axis(Axis(0))),
        }
        grad
    }

    /// Raw outputs for one input row.
    pub fn output_row(&self, x: &[f64]) -> Vec<f64> {
        let v = ArrayView2::from_shape((1, x.len()), x).expect("row");
        self.forward(v).out.slice(s![0, ..]).to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Gd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-run optimizer state.
#[derive(Debug, Clone)]
pub struct OptState {
    opt: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptState {
    pub fn new(opt: Optimizer, n: usize) -> Self {
        Self { opt, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.opt {
            Optimizer::Gd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Central finite difference of `f` along coordinate `i`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, params: &[f64], i: usize, h: f64) -> f64 {
    let mut p = params.to_vec();
    p[i] = params[i] + h;
    let up = f(&p);
    p[i] = params[i] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Worst relative error between `analytic` and central differences on up to
/// `count` coordinates chosen with `seed`.
pub fn gradient_check(
    f: &mut dyn FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    count: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<usize> = if count >= params.len() {
        (0..params.len()).collect()
    } else {
        rand::seq::index::sample(&mut rng, params.len(), count).into_vec()
    };
    coords
        .into_iter()
        .map(|i| relative_error(analytic[i], central_difference(f, params, i, 1e-5), 1e-6))
        .fold(0.0, f64::max)
}

/// Rows of `rows` stacked into a matrix.
pub fn stack(rows: &[&[f64]]) -> Array2<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    let mut m = Array2::zeros((rows.len(), d));
    for (mut dst, src) in m.rows_mut().into_iter().zip(rows) {
        dst.assign(&ArrayView1::from(*src));
    }
    m
}
