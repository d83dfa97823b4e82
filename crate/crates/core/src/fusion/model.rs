use super::idw::{IdwMatrix, IDW_EPS};
use super::loss::{hybrid_loss, LossValue, LossWeights};
use super::nn::{
    affine, bn_backward, bn_eval, bn_forward, col_sums, mha_backward, mha_forward, relu, relu_backward, sigmoid,
    AttnCache, AttnWeights, BnCache,
};
use super::params::{FusionConfig, FusionMode, FusionParams, NormState};
use super::{FusionError, FusionResult};
use crate::mesh::{Mesh, SampleSet, SpatialIndex};
use crate::unproject::FeatureField;
use ndarray::{concatenate, s, Array2, Axis};

/// `m x 6` rows of `[position; normal]`, positions centered on the mesh
/// vertex centroid and divided by the bounding-box diagonal.
pub fn assemble_geo_descriptors(mesh: &Mesh, sample: &SampleSet) -> Array2<f64> {
    let c = mesh.centroid();
    let scale = 1.0 / mesh.bbox_diagonal();
    let mut g = Array2::zeros((sample.indices.len(), 6));
    for (r, (p, n)) in sample.positions.iter().zip(&sample.normals).enumerate() {
        let q = (p - c) * scale;
        for k in 0..3 {
            g[[r, k]] = q[k];
            g[[r, 3 + k]] = n[k];
        }
    }
    g
}

/// Everything the network needs for one sampled mesh.
#[derive(Debug, Clone)]
pub struct FusionInput {
    pub geo: Array2<f64>,
    pub sem: Array2<f64>,
    /// Encoder pooling neighborhoods: `k` sample indices per sample, self included.
    pub neighbors: Vec<Vec<usize>>,
    /// Maps sample predictions onto the full vertex set.
    pub idw: IdwMatrix,
}

impl FusionInput {
    pub fn new(mesh: &Mesh, features: &FeatureField, sample: &SampleSet, cfg: &FusionConfig) -> FusionResult<Self> {
        if features.len() != mesh.len() {
            return Err(FusionError::Shape(format!("{} feature rows for {} vertices", features.len(), mesh.len())));
        }
        if features.dim() != cfg.sem_dim {
            return Err(FusionError::DimMismatch { expected: cfg.sem_dim, got: features.dim() });
        }
        let m = sample.indices.len();
        let sem = Array2::from_shape_vec((m, cfg.sem_dim), features.gather_rows(&sample.indices))
            .expect("gathered rows match the sample size");
        Ok(Self {
            geo: assemble_geo_descriptors(mesh, sample),
            sem,
            neighbors: pooling_neighbors(&sample.positions, cfg.enc_neighbors),
            idw: IdwMatrix::new(&sample.positions, mesh.vertices(), 3.min(m), IDW_EPS)?,
        })
    }

    pub fn len(&self) -> usize {
        self.geo.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.geo.nrows() == 0
    }
}

fn pooling_neighbors(points: &[nalgebra::Point3<f64>], k: usize) -> Vec<Vec<usize>> {
    let tree = SpatialIndex::new(points);
    points.iter().map(|p| tree.knn(p, k).into_iter().map(|(j, _)| j).collect()).collect()
}

/// Training uses batch statistics; inference uses the running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    enc_pre: Array2<f64>,
    enc: Array2<f64>,
    /// For each sample and channel, the neighbor that won the max-pool.
    pool_arg: Array2<usize>,
    raw: Array2<f64>,
    geo_pre: Array2<f64>,
    geo_bn: Option<BnCache>,
    pub h_geo: Array2<f64>,
    sem_pre1: Array2<f64>,
    sem_bn1: Option<BnCache>,
    sem_a1: Array2<f64>,
    sem_pre2: Array2<f64>,
    sem_bn2: Option<BnCache>,
    pub h_sem: Array2<f64>,
    /// Summed streams, the attention input in self-attention mode.
    mixed: Option<Array2<f64>>,
    pub attn: Option<AttnCache>,
    pub h_attn: Option<Array2<f64>>,
    cat_pre: Option<Array2<f64>>,
    pub h_fused: Array2<f64>,
    head_pre: Array2<f64>,
    head_a: Array2<f64>,
    /// Sample-level predictions in `(0, 1)`.
    pub y_sample: Vec<f64>,
    /// Predictions interpolated to every vertex.
    pub y_full: Vec<f64>,
}

impl ForwardCache {
    pub fn bn_caches(&self) -> [Option<&BnCache>; 3] {
        [self.geo_bn.as_ref(), self.sem_bn1.as_ref(), self.sem_bn2.as_ref()]
    }
}

fn norm_layer(
    x: &Array2<f64>,
    gamma: &Array2<f64>,
    beta: &Array2<f64>,
    phase: Phase,
    stats: &super::nn::RunningStats,
) -> (Array2<f64>, Option<BnCache>) {
    match phase {
        Phase::Train => {
            let (y, c) = bn_forward(x, gamma, beta);
            (y, Some(c))
        }
        Phase::Eval => (bn_eval(x, gamma, beta, stats), None),
    }
}

/// Shared MLP on each descriptor, max-pooled over pooling neighborhoods, then
/// concatenated with the per-point branch.
fn encode_geometry(geo: &Array2<f64>, neighbors: &[Vec<usize>], p: &FusionParams) -> (Array2<f64>, Array2<f64>, Array2<usize>, Array2<f64>) {
    let enc_pre = affine(geo, &p.enc_w, &p.enc_b);
    let enc = relu(&enc_pre);
    let (m, e) = enc.dim();
    let mut pooled = Array2::zeros((m, e));
    let mut arg = Array2::zeros((m, e));
    for (i, nb) in neighbors.iter().enumerate() {
        for c in 0..e {
            let mut best = nb[0];
            for &j in &nb[1..] {
                if enc[[j, c]] > enc[[best, c]] {
                    best = j;
                }
            }
            pooled[[i, c]] = enc[[best, c]];
            arg[[i, c]] = best;
        }
    }
    let raw = concatenate![Axis(1), enc, pooled];
    (enc_pre, enc, arg, raw)
}

pub fn forward(p: &FusionParams, norm: &NormState, cfg: &FusionConfig, input: &FusionInput, phase: Phase) -> ForwardCache {
    let (enc_pre, enc, pool_arg, raw) = encode_geometry(&input.geo, &input.neighbors, p);

    let geo_pre = raw.dot(&p.geo_w);
    let (geo_n, geo_bn) = norm_layer(&geo_pre, &p.geo_gamma, &p.geo_beta, phase, &norm.geo);
    let h_geo = relu(&geo_n);

    let sem_pre1 = input.sem.dot(&p.sem_w1);
    let (sem_n1, sem_bn1) = norm_layer(&sem_pre1, &p.sem_gamma1, &p.sem_beta1, phase, &norm.sem1);
    let sem_a1 = relu(&sem_n1);
    let sem_pre2 = sem_a1.dot(&p.sem_w2);
    let (sem_n2, sem_bn2) = norm_layer(&sem_pre2, &p.sem_gamma2, &p.sem_beta2, phase, &norm.sem2);
    let h_sem = relu(&sem_n2);

    let weights = AttnWeights { q: &p.attn_q, k: &p.attn_k, v: &p.attn_v, o: &p.attn_o };
    let (mut mixed, mut attn, mut h_attn, mut cat_pre) = (None, None, None, None);
    let h_fused = match cfg.mode {
        FusionMode::Cross => {
            let (out, c) = mha_forward(&h_geo, &h_sem, &weights, cfg.heads);
            let fused = &h_geo + &out;
            attn = Some(c);
            h_attn = Some(out);
            fused
        }
        FusionMode::SelfAttn => {
            let x = &h_geo + &h_sem;
            let (out, c) = mha_forward(&x, &x, &weights, cfg.heads);
            let fused = &x + &out;
            mixed = Some(x);
            attn = Some(c);
            h_attn = Some(out);
            fused
        }
        FusionMode::Concat => {
            let pre = affine(&concatenate![Axis(1), h_geo, h_sem], &p.cat_w, &p.cat_b);
            let fused = relu(&pre);
            cat_pre = Some(pre);
            fused
        }
        FusionMode::Add => &h_geo + &h_sem,
        FusionMode::GeoOnly => h_geo.clone(),
        FusionMode::SemOnly => h_sem.clone(),
    };

    let head_pre = affine(&h_fused, &p.head_w1, &p.head_b1);
    let head_a = relu(&head_pre);
    let logits = affine(&head_a, &p.head_w2, &p.head_b2);
    let y_sample: Vec<f64> = logits.column(0).iter().map(|&z| sigmoid(z)).collect();
    let y_full = input.idw.apply(&y_sample);

    ForwardCache {
        enc_pre,
        enc,
        pool_arg,
        raw,
        geo_pre,
        geo_bn,
        h_geo,
        sem_pre1,
        sem_bn1,
        sem_a1,
        sem_pre2,
        sem_bn2,
        h_sem,
        mixed,
        attn,
        h_attn,
        cat_pre,
        h_fused,
        head_pre,
        head_a,
        y_sample,
        y_full,
    }
}

/// Loss and gradients for one mesh in training phase.
pub fn loss_and_grad(
    p: &FusionParams,
    norm: &NormState,
    cfg: &FusionConfig,
    input: &FusionInput,
    gt: &[f64],
    weights: LossWeights,
) -> FusionResult<(LossValue, FusionParams, ForwardCache)> {
    let cache = forward(p, norm, cfg, input, Phase::Train);
    let (value, d_full) = hybrid_loss(&cache.y_full, gt, weights)?;
    let grads = backward(p, cfg, input, &cache, &d_full);
    Ok((value, grads, cache))
}

/// Training-phase loss only, for finite-difference checks.
pub fn loss_only(
    p: &FusionParams,
    norm: &NormState,
    cfg: &FusionConfig,
    input: &FusionInput,
    gt: &[f64],
    weights: LossWeights,
) -> FusionResult<LossValue> {
    let cache = forward(p, norm, cfg, input, Phase::Train);
    Ok(hybrid_loss(&cache.y_full, gt, weights)?.0)
}

/// Reverse pass from the gradient of the loss with respect to `y_full`.
pub fn backward(p: &FusionParams, cfg: &FusionConfig, input: &FusionInput, cache: &ForwardCache, d_full: &[f64]) -> FusionParams {
    let bn = |c: &Option<BnCache>| c.clone().expect("backward needs a training-phase forward pass");
    let mut g = p.zeros_like();

    let d_sample = input.idw.apply_transpose(d_full);
    let m = d_sample.len();
    let d_logit = Array2::from_shape_fn((m, 1), |(i, _)| {
        let y = cache.y_sample[i];
        d_sample[i] * y * (1.0 - y)
    });
    g.head_w2 = cache.head_a.t().dot(&d_logit);
    g.head_b2 = col_sums(&d_logit);
    let d_head = relu_backward(&d_logit.dot(&p.head_w2.t()), &cache.head_pre);
    g.head_w1 = cache.h_fused.t().dot(&d_head);
    g.head_b1 = col_sums(&d_head);
    let d_fused = d_head.dot(&p.head_w1.t());

    let weights = AttnWeights { q: &p.attn_q, k: &p.attn_k, v: &p.attn_v, o: &p.attn_o };
    let hidden = cfg.hidden;
    let (d_geo, d_sem): (Array2<f64>, Array2<f64>) = match cfg.mode {
        FusionMode::Cross => {
            let ag = mha_backward(&d_fused, &cache.h_geo, &cache.h_sem, &weights, cache.attn.as_ref().unwrap());
            (g.attn_q, g.attn_k, g.attn_v, g.attn_o) = (ag.dq, ag.dk, ag.dv, ag.do_);
            (&d_fused + &ag.dxq, ag.dxkv)
        }
        FusionMode::SelfAttn => {
            let x = cache.mixed.as_ref().unwrap();
            let ag = mha_backward(&d_fused, x, x, &weights, cache.attn.as_ref().unwrap());
            (g.attn_q, g.attn_k, g.attn_v, g.attn_o) = (ag.dq, ag.dk, ag.dv, ag.do_);
            let dx = &d_fused + &ag.dxq + &ag.dxkv;
            (dx.clone(), dx)
        }
        FusionMode::Concat => {
            let d_pre = relu_backward(&d_fused, cache.cat_pre.as_ref().unwrap());
            let cat = concatenate![Axis(1), cache.h_geo, cache.h_sem];
            g.cat_w = cat.t().dot(&d_pre);
            g.cat_b = col_sums(&d_pre);
            let d_cat = d_pre.dot(&p.cat_w.t());
            (d_cat.slice(s![.., ..hidden]).to_owned(), d_cat.slice(s![.., hidden..]).to_owned())
        }
        FusionMode::Add => (d_fused.clone(), d_fused),
        FusionMode::GeoOnly => (d_fused, Array2::zeros(cache.h_sem.raw_dim())),
        FusionMode::SemOnly => (Array2::zeros(cache.h_geo.raw_dim()), d_fused),
    };

    // semantic stream
    let d_n2 = relu_backward(&d_sem, &bn_out_pre(&cache.sem_pre2, &p.sem_gamma2, &p.sem_beta2, &bn(&cache.sem_bn2)));
    let (d_pre2, dg2, db2) = bn_backward(&d_n2, &p.sem_gamma2, &bn(&cache.sem_bn2));
    (g.sem_gamma2, g.sem_beta2) = (dg2, db2);
    g.sem_w2 = cache.sem_a1.t().dot(&d_pre2);
    let d_a1 = d_pre2.dot(&p.sem_w2.t());
    let d_n1 = relu_backward(&d_a1, &bn_out_pre(&cache.sem_pre1, &p.sem_gamma1, &p.sem_beta1, &bn(&cache.sem_bn1)));
    let (d_pre1, dg1, db1) = bn_backward(&d_n1, &p.sem_gamma1, &bn(&cache.sem_bn1));
    (g.sem_gamma1, g.sem_beta1) = (dg1, db1);
    g.sem_w1 = input.sem.t().dot(&d_pre1);

    // geometric stream
    let d_gn = relu_backward(&d_geo, &bn_out_pre(&cache.geo_pre, &p.geo_gamma, &p.geo_beta, &bn(&cache.geo_bn)));
    let (d_gpre, dgg, dgb) = bn_backward(&d_gn, &p.geo_gamma, &bn(&cache.geo_bn));
    (g.geo_gamma, g.geo_beta) = (dgg, dgb);
    g.geo_w = cache.raw.t().dot(&d_gpre);
    let d_raw = d_gpre.dot(&p.geo_w.t());
    let e = cache.enc.ncols();
    let mut d_enc = d_raw.slice(s![.., ..e]).to_owned();
    let d_pool = d_raw.slice(s![.., e..]);
    for ((i, c), &j) in cache.pool_arg.indexed_iter() {
        d_enc[[j, c]] += d_pool[[i, c]];
    }
    let d_enc_pre = relu_backward(&d_enc, &cache.enc_pre);
    g.enc_w = input.geo.t().dot(&d_enc_pre);
    g.enc_b = col_sums(&d_enc_pre);
    g
}

/// Post-normalization pre-activation, recomputed from the cache so the
/// rectifier mask matches the forward pass exactly.
fn bn_out_pre(_x: &Array2<f64>, gamma: &Array2<f64>, beta: &Array2<f64>, c: &BnCache) -> Array2<f64> {
    &c.xhat * gamma + beta
}
