use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fully connected network with hyperbolic-tangent hidden layers and a
/// linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub weights: Vec<Array2<f64>>,
    /// `1 x n` rows.
    pub biases: Vec<Array2<f64>>,
}

/// Activations kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input followed by each hidden activation.
    acts: Vec<Array2<f64>>,
}

impl Mlp {
    /// Uniform in `+-1/sqrt(fan_in)`; the output layer is further scaled by
    /// `out_scale`.
    pub fn init(sizes: &[usize], out_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let last = sizes.len() - 2;
        for (l, pair) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (pair[0] as f64).sqrt() * if l == last { out_scale } else { 1.0 };
            weights.push(Array2::from_shape_fn((pair[0], pair[1]), |_| rng.random_range(-bound..=bound)));
            biases.push(if l == last { Array2::zeros((1, pair[1])) } else { Array2::from_shape_fn((1, pair[1]), |_| rng.random_range(-bound..=bound)) });
        }
        Self { weights, biases }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array2::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().ncols()
    }

    /// Named tensors in layer order: `l{i}.w`, `l{i}.b`.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        self.weights
            .iter()
            .zip(&self.biases)
            .enumerate()
            .flat_map(|(i, (w, b))| [(format!("l{i}.w"), w), (format!("l{i}.b"), b)])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn sq_norm(&self) -> f64 {
        self.weights.iter().chain(&self.biases).map(|t| t.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mut acts = vec![x.clone()];
        let last = self.weights.len() - 1;
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = h.dot(w) + b;
            if l == last {
                return (z, MlpCache { acts });
            }
            h = z.mapv(f64::tanh);
            acts.push(h.clone());
        }
        unreachable!("network has at least one layer")
    }

    pub fn forward_one(&self, x: &[f64]) -> Array1<f64> {
        let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
        self.forward(&x).0.index_axis_move(Axis(0), 0)
    }

    /// Parameter gradients given the gradient at the output.
    pub fn backward(&self, cache: &MlpCache, dout: &Array2<f64>) -> Mlp {
        let mut g = self.zeros_like();
        let mut d = dout.clone();
        for l in (0..self.weights.len()).rev() {
            let input = &cache.acts[l];
            g.weights[l] = input.t().dot(&d);
            g.biases[l] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
            if l > 0 {
                let mut dh = d.dot(&self.weights[l].t());
                Zip::from(&mut dh).and(input).for_each(|dh, &h| *dh *= 1.0 - h * h);
                d = dh;
            }
        }
        g
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|v| v * s);
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Adam over an [`Mlp`].
#[derive(Debug, Clone)]
pub struct Adam {
    m: Mlp,
    v: Mlp,
    t: i32,
    pub lr: f64,
    pub eps: f64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;

    pub fn new(p: &Mlp, lr: f64, eps: f64) -> Self {
        Self { m: p.zeros_like(), v: p.zeros_like(), t: 0, lr, eps }
    }

    pub fn step(&mut self, p: &mut Mlp, g: &Mlp) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let (lr, eps) = (self.lr, self.eps);
        let grads = g.weights.iter().zip(&g.biases).flat_map(|(w, b)| [w, b]);
        for (((w, m), v), g) in p.tensors_mut().into_iter().zip(self.m.tensors_mut()).zip(self.v.tensors_mut()).zip(grads) {
            Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}
