use super::{Mesh, MeshError, MeshResult};
use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A subset of mesh vertices drawn without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub indices: Vec<usize>,
    pub positions: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws `m` distinct vertices uniformly at random. Deterministic in `seed`.
pub fn uniform_sample(mesh: &Mesh, m: usize, seed: u64) -> MeshResult<SampleSet> {
    let n = mesh.len();
    if m == 0 || m > n {
        return Err(MeshError::InvalidCount { m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, n, m).into_vec();
    let positions = indices.iter().map(|&i| mesh.vertices()[i]).collect();
    let normals = indices.iter().map(|&i| mesh.normals()[i]).collect();
    Ok(SampleSet { indices, positions, normals, seed })
}
