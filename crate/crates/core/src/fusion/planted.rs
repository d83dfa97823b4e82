//! Synthetic saliency task with a known answer.
//!
//! Each mesh is a bumpy sphere. A smooth random field lives on its surface and
//! the target is a logistic of that field plus a curvature proxy. The first
//! semantic channel carries the field under heavy per-vertex noise; the
//! remaining channels are fixed smooth functions of surface direction, the
//! same for every mesh. Recovering the field requires pooling channel 0 over
//! nearby points, which only the attention paths can do.

use super::params::{FusionConfig, FusionMode};
use super::train::{predict, TrainConfig, TrainExample, TrainOutcome};
use super::FusionResult;
use crate::mesh::{bumpy_sphere, Mesh};
use crate::metrics::{cc_or_zero, normalize};
use crate::unproject::FeatureField;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed for the direction channels; fixed so every mesh shares them.
const CHANNEL_SEED: u64 = 0x5EED_C4A7;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub subdiv: u32,
    pub bumps: usize,
    pub sem_dim: usize,
    /// Standard deviation of the per-vertex noise on channel 0, relative to
    /// the unit-variance field.
    pub noise: f64,
    /// Gaussian lobes summed into the field.
    pub lobes: usize,
    /// Angular width of each lobe in radians.
    pub lobe_width: f64,
    pub signal_gain: f64,
    /// Fixed multiplier on the raw curvature proxy, shared by every mesh.
    pub curvature_gain: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self { subdiv: 4, bumps: 6, sem_dim: 32, noise: 1.0, lobes: 6, lobe_width: 0.5, signal_gain: 3.0, curvature_gain: 200.0 }
    }
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn direction(mesh: &Mesh, i: usize) -> Vector3<f64> {
    (mesh.vertices()[i] - mesh.centroid()).normalize()
}

/// Standardized smooth field: a signed sum of Gaussian lobes on the sphere of
/// directions.
pub fn planted_signal(mesh: &Mesh, cfg: &PlantedConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let lobes: Vec<(Vector3<f64>, f64)> = (0..cfg.lobes)
        .map(|_| (crate::mesh::fixtures::random_unit(&mut rng), if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
        .collect();
    let w2 = cfg.lobe_width * cfg.lobe_width;
    let mut s: Vec<f64> = (0..mesh.len())
        .map(|i| {
            let u = direction(mesh, i);
            lobes.iter().map(|(c, a)| a * ((u.dot(c) - 1.0) / w2).exp()).sum()
        })
        .collect();
    standardize(&mut s);
    s
}

/// Mean normal deviation `1 - n_i . n_j` over the 8 nearest other vertices.
pub fn curvature_proxy(mesh: &Mesh) -> Vec<f64> {
    (0..mesh.len())
        .map(|i| {
            let n = mesh.normals()[i];
            let nb = mesh.index().knn(&mesh.vertices()[i], 9);
            let others: Vec<usize> = nb.into_iter().map(|(j, _)| j).filter(|&j| j != i).take(8).collect();
            others.iter().map(|&j| 1.0 - n.dot(&mesh.normals()[j])).sum::<f64>() / others.len() as f64
        })
        .collect()
}

/// Semantic features: the noisy field, the unit direction, then fixed waves.
pub fn planted_features(mesh: &Mesh, signal: &[f64], cfg: &PlantedConfig, seed: u64) -> FeatureField {
    let d = cfg.sem_dim;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0017_E5E0);
    let mut wave_rng = ChaCha8Rng::seed_from_u64(CHANNEL_SEED);
    let waves: Vec<(Vector3<f64>, f64, f64)> = (4..d.max(4))
        .map(|_| {
            let dir = crate::mesh::fixtures::random_unit(&mut wave_rng);
            (dir, wave_rng.random_range(0.5..2.0), wave_rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let mut data = Vec::with_capacity(mesh.len() * d);
    for (i, s) in signal.iter().enumerate() {
        let u = direction(mesh, i);
        let row = std::iter::once(s + cfg.noise * gaussian(&mut noise_rng))
            .chain([u.x, u.y, u.z])
            .chain(waves.iter().map(|(w, f, ph)| (f * w.dot(&u) + ph).sin()))
            .take(d);
        data.extend(row.map(|v| v as f32));
    }
    FeatureField::new(mesh.len(), d, data, vec![1; mesh.len()]).expect("planted rows match the mesh")
}

/// Ground truth from the clean field and the curvature proxy.
pub fn planted_target(mesh: &Mesh, signal: &[f64], cfg: &PlantedConfig) -> Vec<f64> {
    let raw: Vec<f64> = curvature_proxy(mesh)
        .iter()
        .zip(signal)
        .map(|(k, s)| 1.0 / (1.0 + (-(cfg.signal_gain * s + cfg.curvature_gain * k)).exp()))
        .collect();
    normalize(&raw).expect("logistic values are positive")
}

pub fn planted_example(cfg: &PlantedConfig, seed: u64) -> TrainExample {
    let mesh = bumpy_sphere(cfg.subdiv, cfg.bumps, seed);
    let signal = planted_signal(&mesh, cfg, seed);
    let features = planted_features(&mesh, &signal, cfg, seed);
    let gt = planted_target(&mesh, &signal, cfg);
    TrainExample { mesh, features, gt }
}

/// Training and held-out meshes with disjoint seeds.
pub fn planted_split(cfg: &PlantedConfig, train: usize, held_out: usize, seed: u64) -> (Vec<TrainExample>, Vec<TrainExample>) {
    let base = seed.wrapping_mul(1000);
    let tr = (0..train as u64).map(|k| planted_example(cfg, base + k)).collect();
    let te = (0..held_out as u64).map(|k| planted_example(cfg, base + 500 + k)).collect();
    (tr, te)
}

/// Network sized for the planted task: the semantic input is narrow, so the
/// bottleneck is too.
pub fn planted_net(cfg: &PlantedConfig, mode: FusionMode) -> FusionConfig {
    FusionConfig { sem_dim: cfg.sem_dim, sem_hidden: 64, mode, ..FusionConfig::default() }
}

/// 400 optimizer steps of four meshes each over `train_meshes` meshes.
pub fn planted_train_config(train_meshes: usize, seed: u64) -> TrainConfig {
    let batch_size: usize = 4;
    TrainConfig { lr: 3e-3, epochs: (400 * batch_size).div_ceil(train_meshes), batch_size, samples: 512, seed, ..TrainConfig::default() }
}

/// Mean correlation of inference-mode predictions with the targets.
pub fn mean_cc(out: &TrainOutcome, net: &FusionConfig, data: &[TrainExample], samples: usize, seed: u64) -> FusionResult<f64> {
    let mut total = 0.0;
    for (i, ex) in data.iter().enumerate() {
        let y = predict(&ex.mesh, &ex.features, &out.params, &out.norm, net, samples, seed.wrapping_add(i as u64))?;
        total += cc_or_zero(&ex.gt, &y).map_err(|e| super::FusionError::Numeric(e.to_string()))?.0;
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cc;

    #[test]
    fn target_is_a_distribution_tied_to_the_signal() {
        let cfg = PlantedConfig::default();
        let ex = planted_example(&cfg, 4);
        assert!((ex.gt.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let signal = planted_signal(&ex.mesh, &cfg, 4);
        assert!(cc(&signal, &ex.gt).unwrap() > 0.8);
        let ch0: Vec<f64> = (0..ex.mesh.len()).map(|i| ex.features.row(i)[0] as f64).collect();
        let c = cc(&ch0, &signal).unwrap();
        assert!(c > 0.5 && c < 0.85, "noisy channel correlation {c}");
    }

    #[test]
    fn only_the_noisy_channel_depends_on_the_seed() {
        let cfg = PlantedConfig { subdiv: 2, ..PlantedConfig::default() };
        let mesh = bumpy_sphere(2, 6, 3);
        let signal = planted_signal(&mesh, &cfg, 3);
        let a = planted_features(&mesh, &signal, &cfg, 1);
        let b = planted_features(&mesh, &signal, &cfg, 2);
        assert_eq!(a.dim(), 32);
        for i in 0..mesh.len() {
            assert_ne!(a.row(i)[0], b.row(i)[0]);
            assert_eq!(a.row(i)[1..], b.row(i)[1..]);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = PlantedConfig { subdiv: 2, ..PlantedConfig::default() };
        assert_eq!(planted_example(&cfg, 9).gt, planted_example(&cfg, 9).gt);
    }
}
