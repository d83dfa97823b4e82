//! Triangle mesh substrate: loading, normals, adjacency, spatial queries and
//! point sampling.

pub(crate) mod fixtures;
mod io;
mod neighbors;
mod sample;
mod spatial;

pub use fixtures::{bumpy_sphere, cube, icosphere, torus};
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use neighbors::surface_neighbors;
pub use sample::{uniform_sample, SampleSet};
pub use spatial::SpatialIndex;

use nalgebra::{Point3, Vector3};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate mesh: {0}")]
    Degenerate(String),
    #[error("invalid sample count {m} for mesh with {n} vertices")]
    InvalidCount { m: usize, n: usize },
    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(usize),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type MeshResult<T> = Result<T, MeshError>;

/// Immutable triangulated surface with derived per-vertex data.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vector3<f64>>,
    adjacency: Vec<Vec<usize>>,
    bbox_min: Point3<f64>,
    bbox_max: Point3<f64>,
    centroid: Point3<f64>,
    nonmanifold_edges: usize,
    dropped_faces: usize,
    index: SpatialIndex,
}

impl Mesh {
    /// Builds a mesh, dropping faces that repeat a vertex index.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> MeshResult<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(MeshError::Degenerate(format!("{n} vertices")));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(MeshError::Degenerate(format!(
                    "face {fi} references vertex {bad} (only {n} vertices)"
                )));
            }
        }
        let before = faces.len();
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        let dropped_faces = before - faces.len();
        if faces.is_empty() {
            return Err(MeshError::Degenerate("zero faces".into()));
        }

        let normals = area_weighted_normals(&vertices, &faces);
        let (adjacency, nonmanifold_edges) = build_adjacency(n, &faces);

        let mut bbox_min = vertices[0];
        let mut bbox_max = vertices[0];
        let mut sum = Vector3::zeros();
        for v in &vertices {
            for a in 0..3 {
                bbox_min[a] = bbox_min[a].min(v[a]);
                bbox_max[a] = bbox_max[a].max(v[a]);
            }
            sum += v.coords;
        }
        let centroid = Point3::from(sum / n as f64);
        let index = SpatialIndex::new(&vertices);

        Ok(Self {
            vertices,
            faces,
            normals,
            adjacency,
            bbox_min,
            bbox_max,
            centroid,
            nonmanifold_edges,
            dropped_faces,
            index,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    /// 1-ring neighbors of every vertex, sorted ascending.
    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        (self.bbox_min, self.bbox_max)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        (self.bbox_max - self.bbox_min).norm()
    }

    /// Mean of all vertex positions.
    pub fn centroid(&self) -> Point3<f64> {
        self.centroid
    }

    /// Number of edges shared by more than two faces.
    pub fn nonmanifold_edges(&self) -> usize {
        self.nonmanifold_edges
    }

    /// Faces discarded at construction because they repeated a vertex.
    pub fn dropped_faces(&self) -> usize {
        self.dropped_faces
    }

    /// Spatial index over the vertex positions.
    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }
}

fn area_weighted_normals(vertices: &[Point3<f64>], faces: &[[usize; 3]]) -> Vec<Vector3<f64>> {
    let mut acc = vec![Vector3::zeros(); vertices.len()];
    for f in faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        // cross product magnitude is twice the area, so this is area weighting
        let n = (b - a).cross(&(c - a));
        for &i in f {
            acc[i] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                n / len
            } else {
                // isolated or zero-area neighborhood
                Vector3::z()
            }
        })
        .collect()
}

fn build_adjacency(n: usize, faces: &[[usize; 3]]) -> (Vec<Vec<usize>>, usize) {
    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut edge_faces = std::collections::HashMap::<(usize, usize), u32>::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            sets[a].insert(b);
            sets[b].insert(a);
            *edge_faces.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let nonmanifold = edge_faces.values().filter(|&&c| c > 2).count();
    (sets.into_iter().map(|s| s.into_iter().collect()).collect(), nonmanifold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_diagonal() {
        let m = cube();
        assert_eq!(m.len(), 8);
        assert_eq!(m.faces().len(), 12);
        assert!((m.bbox_diagonal() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn planar_triangle_normals() {
        let m = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for n in m.normals() {
            assert_eq!(*n, Vector3::new(0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn icosphere_normals_are_radial() {
        let m = icosphere(3);
        assert_eq!(m.len(), 642);
        for (v, n) in m.vertices().iter().zip(m.normals()) {
            assert!((n.norm() - 1.0).abs() < 1e-6);
            let radial = v.coords.normalize();
            let angle = n.dot(&radial).clamp(-1.0, 1.0).acos();
            assert!(angle < 2e-2, "angle {angle}");
        }
    }

    #[test]
    fn adjacency_is_symmetric() {
        let m = torus(1.0, 0.3, 12, 8);
        for (i, ring) in m.adjacency().iter().enumerate() {
            for &j in ring {
                assert!(m.adjacency()[j].binary_search(&i).is_ok());
            }
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(matches!(Mesh::new(pts, vec![]), Err(MeshError::Degenerate(_))));
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(matches!(
            Mesh::new(pts.clone(), vec![[0, 0, 1]]),
            Err(MeshError::Degenerate(_))
        ));
        assert!(Mesh::new(pts, vec![[0, 1, 5]]).is_err());
    }

    #[test]
    fn nonmanifold_edges_counted() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let m = Mesh::new(pts, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap();
        assert_eq!(m.nonmanifold_edges(), 1);
    }
}
