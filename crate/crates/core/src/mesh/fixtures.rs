//! Deterministic procedural meshes used as test and demo fixtures.

use super::Mesh;
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Axis-aligned unit cube `[0,1]^3`, 8 vertices, 12 outward-facing triangles.
pub fn cube() -> Mesh {
    let mut verts = Vec::with_capacity(8);
    for i in 0..8u32 {
        verts.push(Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
    }
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // z = 0
        [4, 5, 6], [5, 7, 6], // z = 1
        [0, 1, 4], [1, 5, 4], // y = 0
        [2, 6, 3], [3, 6, 7], // y = 1
        [0, 4, 2], [2, 4, 6], // x = 0
        [1, 3, 5], [3, 7, 5], // x = 1
    ];
    Mesh::new(verts, faces).expect("cube fixture is valid")
}

/// Unit icosphere; `10 * 4^subdiv + 2` vertices.
pub fn icosphere(subdiv: u32) -> Mesh {
    let (verts, faces) = icosphere_raw(subdiv);
    Mesh::new(verts, faces).expect("icosphere fixture is valid")
}

fn icosphere_raw(subdiv: u32) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ];
    let mut verts: Vec<Vector3<f64>> =
        base.iter().map(|&(x, y, z)| Vector3::new(x, y, z).normalize()).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (verts.into_iter().map(Point3::from).collect(), faces)
}

/// Torus around the z axis with major radius `r_major`, tube radius `r_minor`.
pub fn torus(r_major: f64, r_minor: f64, nu: usize, nv: usize) -> Mesh {
    let mut verts = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let ring = r_major + r_minor * v.cos();
            verts.push(Point3::new(ring * u.cos(), ring * u.sin(), r_minor * v.sin()));
        }
    }
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let a = i * nv + j;
            let b = ((i + 1) % nu) * nv + j;
            let c = ((i + 1) % nu) * nv + (j + 1) % nv;
            let d = i * nv + (j + 1) % nv;
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(verts, faces).expect("torus fixture is valid")
}

/// Icosphere with a seeded set of Gaussian radial bumps, giving spatially
/// varying curvature.
pub fn bumpy_sphere(subdiv: u32, bumps: usize, seed: u64) -> Mesh {
    let (verts, faces) = icosphere_raw(subdiv);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<(Vector3<f64>, f64, f64)> = (0..bumps)
        .map(|_| {
            let dir = random_unit(&mut rng);
            let amp = rng.random_range(0.12..0.3) * if rng.random_bool(0.75) { 1.0 } else { -0.6 };
            let width = rng.random_range(0.2..0.4);
            (dir, amp, width)
        })
        .collect();
    let verts = verts
        .into_iter()
        .map(|p| {
            let dir = p.coords;
            let r = 1.0
                + centers
                    .iter()
                    .map(|(c, amp, w)| {
                        let ang = dir.dot(c).clamp(-1.0, 1.0).acos();
                        amp * (-(ang * ang) / (2.0 * w * w)).exp()
                    })
                    .sum::<f64>();
            Point3::from(dir * r)
        })
        .collect();
    Mesh::new(verts, faces).expect("bumpy sphere fixture is valid")
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
