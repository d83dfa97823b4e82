use super::loss::LossWeights;
use super::model::{forward, loss_and_grad, FusionInput, Phase};
use super::params::{FusionConfig, FusionParams, NormState};
use super::{FusionError, FusionResult};
use crate::mesh::{uniform_sample, Mesh};
use crate::unproject::FeatureField;
use ndarray::Zip;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Meshes whose gradients are averaged per optimizer step.
    pub batch_size: usize,
    /// Points sampled per mesh.
    pub samples: usize,
    pub loss: LossWeights,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm clip; zero disables it.
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-4,
            epochs: 100,
            batch_size: 1,
            samples: 2048,
            loss: LossWeights::default(),
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_grad_norm: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> FusionResult<()> {
        let rates = [self.lr, self.weight_decay, self.max_grad_norm];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(FusionError::Config("rates must be finite and non-negative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.samples < 3 {
            return Err(FusionError::Config("epochs and batch size must be positive, samples at least 3".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(FusionError::Config("moment decay rates must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Ordered `key=value` pairs, as echoed into checkpoints.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("train.lr", self.lr.to_string()),
            ("train.weight_decay", self.weight_decay.to_string()),
            ("train.epochs", self.epochs.to_string()),
            ("train.batch_size", self.batch_size.to_string()),
            ("train.samples", self.samples.to_string()),
            ("train.kl_weight", self.loss.kl.to_string()),
            ("train.cc_weight", self.loss.cc.to_string()),
            ("train.max_grad_norm", self.max_grad_norm.to_string()),
            ("train.seed", self.seed.to_string()),
        ]
    }
}

/// One training mesh with its per-vertex features and target map.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub mesh: Mesh,
    pub features: FeatureField,
    /// Target saliency, summing to one.
    pub gt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_kl: f64,
    pub mean_cc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the end of the lowest-loss epoch.
    pub params: FusionParams,
    pub norm: NormState,
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
    pub steps: usize,
}

impl TrainOutcome {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,mean_kl,mean_cc\n");
        for e in &self.curve {
            s.push_str(&format!("{},{:.9},{:.9},{:.9}\n", e.epoch, e.mean_loss, e.mean_kl, e.mean_cc));
        }
        s
    }
}

/// Decoupled weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: FusionParams,
    v: FusionParams,
    t: i32,
}

impl AdamW {
    pub fn new(p: &FusionParams) -> Self {
        Self { m: p.zeros_like(), v: p.zeros_like(), t: 0 }
    }

    pub fn step(&mut self, p: &mut FusionParams, g: &FusionParams, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let grads = g.tensors();
        for (((_, w), (_, m)), ((_, v), (_, gw))) in
            p.tensors_mut().into_iter().zip(self.m.tensors_mut()).zip(self.v.tensors_mut().into_iter().zip(grads))
        {
            Zip::from(w).and(m).and(v).and(gw).for_each(|w, m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *w -= cfg.lr * cfg.weight_decay * *w;
                *w -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
            });
        }
    }
}

fn add_into(acc: &mut FusionParams, g: &FusionParams) {
    for ((_, a), (_, b)) in acc.tensors_mut().into_iter().zip(g.tensors()) {
        *a += b;
    }
}

fn scale(p: &mut FusionParams, s: f64) {
    for (_, t) in p.tensors_mut() {
        t.mapv_inplace(|v| v * s);
    }
}

/// Sample seed for one mesh in one epoch.
fn sample_seed(seed: u64, epoch: usize, item: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (item as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

pub fn train_fusion(data: &[TrainExample], net: &FusionConfig, cfg: &TrainConfig) -> FusionResult<TrainOutcome> {
    train_fusion_from(data, net, cfg, FusionParams::init(net, cfg.seed)?, NormState::new(net))
}

/// Trains starting from the given parameters.
pub fn train_fusion_from(
    data: &[TrainExample],
    net: &FusionConfig,
    cfg: &TrainConfig,
    mut params: FusionParams,
    mut norm: NormState,
) -> FusionResult<TrainOutcome> {
    net.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(FusionError::Config("empty training set".into()));
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut opt = AdamW::new(&params);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, FusionParams, NormState)> = None;
    let mut steps = 0;
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let (mut sum_loss, mut sum_kl, mut sum_cc) = (0.0, 0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = params.zeros_like();
            for &item in batch {
                let ex = &data[item];
                let sample = uniform_sample(&ex.mesh, cfg.samples.min(ex.mesh.len()), sample_seed(cfg.seed, epoch, item))?;
                let input = FusionInput::new(&ex.mesh, &ex.features, &sample, net)?;
                let (value, grads, cache) = loss_and_grad(&params, &norm, net, &input, &ex.gt, cfg.loss)?;
                if !value.loss.is_finite() {
                    return Err(FusionError::NonFiniteLoss { epoch });
                }
                let rows = input.len();
                let [g, s1, s2] = cache.bn_caches();
                norm.geo.update(g.unwrap(), rows);
                norm.sem1.update(s1.unwrap(), rows);
                norm.sem2.update(s2.unwrap(), rows);
                add_into(&mut acc, &grads);
                sum_loss += value.loss;
                sum_kl += value.kl;
                sum_cc += value.cc;
            }
            scale(&mut acc, 1.0 / batch.len() as f64);
            if cfg.max_grad_norm > 0.0 {
                let n = acc.sq_norm().sqrt();
                if n > cfg.max_grad_norm {
                    scale(&mut acc, cfg.max_grad_norm / n);
                }
            }
            opt.step(&mut params, &acc, cfg);
            steps += 1;
            if !params.is_finite() {
                return Err(FusionError::NonFiniteLoss { epoch });
            }
        }
        let n = data.len() as f64;
        let stats = EpochStats { epoch, mean_loss: sum_loss / n, mean_kl: sum_kl / n, mean_cc: sum_cc / n };
        if best.as_ref().is_none_or(|b| stats.mean_loss < b.0) {
            best = Some((stats.mean_loss, epoch, params.clone(), norm.clone()));
        }
        curve.push(stats);
    }
    let (_, best_epoch, params, norm) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { params, norm, curve, best_epoch, steps })
}

/// Per-vertex saliency in `(0, 1)` using the running normalization statistics.
pub fn predict(
    mesh: &Mesh,
    features: &FeatureField,
    params: &FusionParams,
    norm: &NormState,
    net: &FusionConfig,
    samples: usize,
    seed: u64,
) -> FusionResult<Vec<f64>> {
    let sample = uniform_sample(mesh, samples.min(mesh.len()), seed)?;
    let input = FusionInput::new(mesh, features, &sample, net)?;
    check_shapes(params, net)?;
    Ok(forward(params, norm, net, &input, Phase::Eval).y_full)
}

/// Confirms the parameter tensors fit the network configuration.
pub fn check_shapes(p: &FusionParams, net: &FusionConfig) -> FusionResult<()> {
    let want = FusionParams::init(net, 0)?;
    for ((name, a), (_, b)) in p.tensors().into_iter().zip(want.tensors()) {
        if a.dim() != b.dim() {
            return Err(FusionError::Shape(format!("{name} is {:?}, expected {:?}", a.dim(), b.dim())));
        }
    }
    Ok(())
}
