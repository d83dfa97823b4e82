#![allow(dead_code)]

use mesh_attention::fusion::{loss_and_grad, loss_only, FusionConfig, FusionInput, FusionMode, FusionParams, LossWeights, NormState};
use mesh_attention::mesh::{icosphere, uniform_sample};
use mesh_attention::scanpath::mlp::Mlp;
use mesh_attention::unproject::FeatureField;
use ndarray::Array2;

pub const FD_STEP: f64 = 1e-4;
pub const FUSION_MODES: [FusionMode; 4] = [FusionMode::Cross, FusionMode::Concat, FusionMode::Add, FusionMode::SelfAttn];

/// Worst entry of one tensor.
#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel: f64,
}

/// Relative error with a floor so that entries whose true gradient is zero
/// are judged on absolute error.
pub fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3)
}

pub fn small_fusion(mode: FusionMode, m: usize, seed: u64) -> (FusionConfig, FusionInput, Vec<f64>) {
    let mesh = icosphere(2);
    let cfg = FusionConfig { sem_dim: 5, sem_hidden: 6, hidden: 8, heads: 2, head_hidden: 6, enc_hidden: 4, enc_neighbors: 4, mode };
    let data: Vec<f32> = (0..mesh.len() * 5).map(|i| ((i as f32) * 0.37 + seed as f32).sin()).collect();
    let field = FeatureField::new(mesh.len(), 5, data, vec![1; mesh.len()]).unwrap();
    let sample = uniform_sample(&mesh, m, seed).unwrap();
    let input = FusionInput::new(&mesh, &field, &sample, &cfg).unwrap();
    let raw: Vec<f64> = mesh.vertices().iter().map(|p| (2.0 * p.x - p.z).exp()).collect();
    let total: f64 = raw.iter().sum();
    (cfg, input, raw.iter().map(|v| v / total).collect())
}

/// Central differences on every entry of every fusion tensor.
///
/// The network is piecewise smooth (rectifiers, max-pooling), so a step that
/// straddles a kink can disagree with the one-sided analytic gradient.
pub fn fusion_gradient_check(mode: FusionMode, m: usize, seed: u64, step: f64) -> Vec<TensorCheck> {
    let (cfg, input, gt) = small_fusion(mode, m, seed);
    let p = FusionParams::init(&cfg, seed).unwrap();
    let norm = NormState::new(&cfg);
    let w = LossWeights::default();
    let (_, grads, _) = loss_and_grad(&p, &norm, &cfg, &input, &gt, w).unwrap();
    let loss = |q: &FusionParams| loss_only(q, &norm, &cfg, &input, &gt, w).unwrap().loss;
    let mut out = Vec::new();
    for (ti, (name, g)) in grads.tensors().into_iter().enumerate() {
        let mut worst = 0.0f64;
        for idx in ndarray::indices(g.raw_dim()) {
            let mut up = p.clone();
            let mut dn = p.clone();
            up.tensors_mut()[ti].1[idx] += step;
            dn.tensors_mut()[ti].1[idx] -= step;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * step);
            worst = worst.max(rel_err(fd, g[idx]));
        }
        out.push(TensorCheck { name: format!("{mode}.{name}"), entries: g.len(), max_rel: worst });
    }
    out
}

/// Central differences for a squared-error loss through an MLP.
pub fn mlp_gradient_check(label: &str, sizes: &[usize], out_scale: f64, seed: u64) -> Vec<TensorCheck> {
    let net = Mlp::init(sizes, out_scale, seed);
    let rows = 8;
    let x = Array2::from_shape_fn((rows, sizes[0]), |(i, j)| ((i * sizes[0] + j) as f64 * 0.61).sin());
    let target = Array2::from_shape_fn((rows, *sizes.last().unwrap()), |(i, j)| ((i + 3 * j) as f64 * 0.4).cos());
    let loss = |n: &Mlp| (n.forward(&x).0 - &target).mapv(|v| v * v).sum() * 0.5;
    let (y, cache) = net.forward(&x);
    let grads = net.backward(&cache, &(y - &target));
    let names: Vec<String> = grads.tensors().into_iter().map(|(n, _)| n).collect();
    let mut out = Vec::new();
    for (ti, name) in names.iter().enumerate() {
        let g = grads.tensors()[ti].1.clone();
        let mut worst = 0.0f64;
        for idx in ndarray::indices(g.raw_dim()) {
            let mut up = net.clone();
            let mut dn = net.clone();
            up.tensors_mut()[ti][idx] += FD_STEP;
            dn.tensors_mut()[ti][idx] -= FD_STEP;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(fd, g[idx]));
        }
        out.push(TensorCheck { name: format!("{label}.{name}"), entries: g.len(), max_rel: worst });
    }
    out
}
