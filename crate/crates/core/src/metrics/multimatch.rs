use super::{MetricError, MetricResult};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Fixation {
    pub vertex: usize,
    pub position: Point3<f64>,
    /// Seconds.
    pub duration: f64,
}

/// Ordered fixation sequence on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    /// Path of the mesh the vertex indices refer to.
    pub mesh: String,
    pub fixations: Vec<Fixation>,
}

impl Scanpath {
    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }

    /// Checks positions against the mesh and that durations are positive.
    pub fn validate(&self, vertices: &[Point3<f64>]) -> MetricResult<()> {
        for (k, f) in self.fixations.iter().enumerate() {
            if f.vertex >= vertices.len() {
                return Err(MetricError::IndexOutOfRange(f.vertex, vertices.len()));
            }
            if vertices[f.vertex] != f.position {
                return Err(MetricError::InvalidValue(format!(
                    "fixation {k} position does not match vertex {}",
                    f.vertex
                )));
            }
            if !(f.duration > 0.0) {
                return Err(MetricError::InvalidValue(format!("fixation {k} has duration {}", f.duration)));
            }
        }
        Ok(())
    }

    fn saccades(&self) -> Vec<Vector3<f64>> {
        self.fixations.windows(2).map(|w| w[1].position - w[0].position).collect()
    }
}

/// Five similarity dimensions, each in `[0, 1]` with 1 meaning identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiMatchScore {
    pub shape: f64,
    pub direction: f64,
    pub length: f64,
    pub position: f64,
    pub duration: f64,
    pub mean: f64,
}

/// Scanpath similarity on a mesh.
///
/// Saccades are 3D vectors between consecutive fixations. The two saccade
/// sequences are aligned by a monotone dynamic-programming path (diagonal,
/// down and right moves, no gaps) minimizing the summed vector-difference
/// norm; each aligned pair is then scored per dimension with distances
/// normalized by the bounding-box diagonal `diag`.
pub fn multimatch(a: &Scanpath, b: &Scanpath, diag: f64) -> MetricResult<MultiMatchScore> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricError::TooShort);
    }
    if !(diag > 0.0) {
        return Err(MetricError::InvalidValue(format!("diagonal {diag}")));
    }
    let (sa, sb) = (a.saccades(), b.saccades());
    let path = align(&sa, &sb);

    let mut sums = [0.0f64; 5];
    for &(i, j) in &path {
        let (u, v) = (sa[i], sb[j]);
        let (fa, fb) = (&a.fixations[i], &b.fixations[j]);
        sums[0] += (u - v).norm() / (2.0 * diag);
        sums[1] += angle(&u, &v) / PI;
        sums[2] += (u.norm() - v.norm()).abs() / diag;
        sums[3] += (fa.position - fb.position).norm() / diag;
        let longest = fa.duration.max(fb.duration);
        sums[4] += if longest > 0.0 { (fa.duration - fb.duration).abs() / longest } else { 0.0 };
    }
    let score = |s: f64| (1.0 - s / path.len() as f64).clamp(0.0, 1.0);
    let dims = sums.map(score);
    Ok(MultiMatchScore {
        shape: dims[0],
        direction: dims[1],
        length: dims[2],
        position: dims[3],
        duration: dims[4],
        mean: dims.iter().sum::<f64>() / 5.0,
    })
}

fn angle(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return 0.0;
    }
    u.cross(v).norm().atan2(u.dot(v))
}

/// Minimum-cost monotone alignment as a list of `(i, j)` pairs in order.
fn align(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Vec<(usize, usize)> {
    let (p, q) = (a.len(), b.len());
    let cost = |i: usize, j: usize| (a[i] - b[j]).norm();
    let mut acc = vec![vec![f64::INFINITY; q]; p];
    for i in 0..p {
        for j in 0..q {
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(acc[i - 1][j - 1]);
                }
                if i > 0 {
                    best = best.min(acc[i - 1][j]);
                }
                if j > 0 {
                    best = best.min(acc[i][j - 1]);
                }
                best
            };
            acc[i][j] = prev + cost(i, j);
        }
    }
    let mut path = vec![(p - 1, q - 1)];
    let (mut i, mut j) = (p - 1, q - 1);
    while i > 0 || j > 0 {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[i - 1][j - 1];
            let up = acc[i - 1][j];
            let left = acc[i][j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up < left || (up == left && cost(i - 1, j) <= cost(i, j - 1)) {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    path
}
