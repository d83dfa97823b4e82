//! Layer primitives with explicit forward caches and reverse passes.

use ndarray::{s, Array1, Array2, Axis, Zip};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient through a rectifier given its pre-activation.
pub fn relu_backward(dy: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(pre).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x . w + b` with `b` a `1 x n` row broadcast over rows.
pub fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

pub fn col_sums(x: &Array2<f64>) -> Array2<f64> {
    x.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Per-channel statistics of one normalization call in training mode.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub mean: Array1<f64>,
    /// Biased variance over the batch.
    pub var: Array1<f64>,
}

/// Training-mode normalization over the rows of `x`.
pub fn bn_forward(x: &Array2<f64>, gamma: &Array2<f64>, beta: &Array2<f64>) -> (Array2<f64>, BnCache) {
    let m = x.nrows() as f64;
    let mean = x.sum_axis(Axis(0)) / m;
    let centered = x - &mean;
    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / m;
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let xhat = &centered * &inv_std;
    let y = &xhat * gamma + beta;
    (y, BnCache { xhat, inv_std, mean, var })
}

/// Inference-mode normalization with fixed statistics.
pub fn bn_eval(x: &Array2<f64>, gamma: &Array2<f64>, beta: &Array2<f64>, stats: &RunningStats) -> Array2<f64> {
    let inv_std = stats.var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    (x - &stats.mean) * &inv_std * gamma + beta
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn bn_backward(dy: &Array2<f64>, gamma: &Array2<f64>, cache: &BnCache) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let m = dy.nrows() as f64;
    let dgamma = col_sums(&(dy * &cache.xhat));
    let dbeta = col_sums(dy);
    let dxhat = dy * gamma;
    let sum_dxhat = dxhat.sum_axis(Axis(0));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
    let dx = (&dxhat * m - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat) * &cache.inv_std / m;
    (dx, dgamma, dbeta)
}

/// Exponential moving averages of normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl RunningStats {
    pub fn new(n: usize) -> Self {
        Self { mean: Array1::zeros(n), var: Array1::ones(n) }
    }

    /// Folds in one batch; the variance uses the unbiased estimate when the
    /// batch has more than one row.
    pub fn update(&mut self, cache: &BnCache, rows: usize) {
        let unbias = if rows > 1 { rows as f64 / (rows - 1) as f64 } else { 1.0 };
        self.mean = &self.mean * (1.0 - BN_MOMENTUM) + &cache.mean * BN_MOMENTUM;
        self.var = &self.var * (1.0 - BN_MOMENTUM) + &cache.var * (BN_MOMENTUM * unbias);
    }
}

pub fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Gradient of a row-wise softmax given its output `p`.
pub fn softmax_backward(dp: &Array2<f64>, p: &Array2<f64>) -> Array2<f64> {
    let dots = (dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
    p * &(dp - &dots)
}

/// Cached activations of one multi-head attention call.
#[derive(Debug, Clone)]
pub struct AttnCache {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Row-stochastic weights per head, `m_q x m_kv`.
    pub probs: Vec<Array2<f64>>,
    pub heads_out: Array2<f64>,
}

pub struct AttnWeights<'a> {
    pub q: &'a Array2<f64>,
    pub k: &'a Array2<f64>,
    pub v: &'a Array2<f64>,
    pub o: &'a Array2<f64>,
}

/// Scaled dot-product attention: queries from `xq`, keys and values from `xkv`.
pub fn mha_forward(xq: &Array2<f64>, xkv: &Array2<f64>, w: &AttnWeights, heads: usize) -> (Array2<f64>, AttnCache) {
    let q = xq.dot(w.q);
    let k = xkv.dot(w.k);
    let v = xkv.dot(w.v);
    let d = q.ncols() / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let mut heads_out = Array2::zeros((xq.nrows(), q.ncols()));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * d..(h + 1) * d];
        let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut p);
        heads_out.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
        probs.push(p);
    }
    let out = heads_out.dot(w.o);
    (out, AttnCache { q, k, v, probs, heads_out })
}

pub struct AttnGrads {
    pub dxq: Array2<f64>,
    pub dxkv: Array2<f64>,
    pub dq: Array2<f64>,
    pub dk: Array2<f64>,
    pub dv: Array2<f64>,
    pub do_: Array2<f64>,
}

pub fn mha_backward(
    dout: &Array2<f64>,
    xq: &Array2<f64>,
    xkv: &Array2<f64>,
    w: &AttnWeights,
    cache: &AttnCache,
) -> AttnGrads {
    let heads = cache.probs.len();
    let d = cache.q.ncols() / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let do_ = cache.heads_out.t().dot(dout);
    let dheads = dout.dot(&w.o.t());
    let mut dq = Array2::zeros(cache.q.raw_dim());
    let mut dk = Array2::zeros(cache.k.raw_dim());
    let mut dv = Array2::zeros(cache.v.raw_dim());
    for (h, p) in cache.probs.iter().enumerate() {
        let cols = s![.., h * d..(h + 1) * d];
        let dh = dheads.slice(cols);
        let dp = dh.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&dh));
        let ds = softmax_backward(&dp, p) * scale;
        dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
    }
    AttnGrads {
        dxq: dq.dot(&w.q.t()),
        dxkv: dk.dot(&w.k.t()) + dv.dot(&w.v.t()),
        dq: xq.t().dot(&dq),
        dk: xkv.t().dot(&dk),
        dv: xkv.t().dot(&dv),
        do_,
    }
}
