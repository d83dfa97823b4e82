use super::{FusionError, FusionResult};
use crate::mesh::SpatialIndex;
use nalgebra::Point3;

pub const IDW_EPS: f64 = 1e-8;

/// Sparse row-normalized inverse-distance weights from `m` samples onto `n`
/// targets, `k` entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct IdwMatrix {
    n: usize,
    m: usize,
    k: usize,
    index: Vec<usize>,
    weight: Vec<f64>,
}

impl IdwMatrix {
    pub fn new(samples: &[Point3<f64>], targets: &[Point3<f64>], k: usize, eps: f64) -> FusionResult<Self> {
        if k == 0 || samples.len() < k {
            return Err(FusionError::Shape(format!("need at least k = {k} samples, have {}", samples.len())));
        }
        let tree = SpatialIndex::new(samples);
        let mut index = Vec::with_capacity(targets.len() * k);
        let mut weight = Vec::with_capacity(targets.len() * k);
        for t in targets {
            let nn = tree.knn(t, k);
            let raw: Vec<f64> = nn.iter().map(|&(_, d)| 1.0 / (d + eps)).collect();
            let total: f64 = raw.iter().sum();
            for ((j, _), w) in nn.into_iter().zip(raw) {
                index.push(j);
                weight.push(w / total);
            }
        }
        Ok(Self { n: targets.len(), m: samples.len(), k, index, weight })
    }

    pub fn targets(&self) -> usize {
        self.n
    }

    pub fn sources(&self) -> usize {
        self.m
    }

    /// Interpolated values at the targets.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.m);
        self.index
            .chunks_exact(self.k)
            .zip(self.weight.chunks_exact(self.k))
            .map(|(idx, w)| idx.iter().zip(w).map(|(&j, &wj)| wj * values[j]).sum())
            .collect()
    }

    /// Transpose product, used to pull gradients back onto the samples.
    pub fn apply_transpose(&self, grad: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.n);
        let mut out = vec![0.0; self.m];
        for (row, g) in grad.iter().enumerate() {
            for e in row * self.k..(row + 1) * self.k {
                out[self.index[e]] += self.weight[e] * g;
            }
        }
        out
    }
}

/// Inverse-distance interpolation of sample values onto target positions.
pub fn idw_interpolate(
    values: &[f64],
    samples: &[Point3<f64>],
    targets: &[Point3<f64>],
    k: usize,
    eps: f64,
) -> FusionResult<Vec<f64>> {
    if values.len() != samples.len() {
        return Err(FusionError::Shape(format!("{} values for {} samples", values.len(), samples.len())));
    }
    Ok(IdwMatrix::new(samples, targets, k, eps)?.apply(values))
}
