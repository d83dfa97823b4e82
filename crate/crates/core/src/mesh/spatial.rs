use nalgebra::Point3;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

/// Exact k-d tree over a fixed point set.
///
/// All query results are ordered by `(distance, index)`, so equidistant points
/// resolve to the smaller index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SpatialIndex {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = self.points[self.order[start]];
        let mut hi = lo;
        for &i in &self.order[start..end] {
            let p = self.points[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = hi - lo;
        let axis = extent.iamax();
        if extent[axis] == 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// The `k` nearest points as `(index, distance)`, ascending.
    pub fn knn(&self, query: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2.sqrt())).collect()
    }

    fn knn_node(&self, node: usize, q: &Point3<f64>, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate { dist2: (self.points[i] - q).norm_squared(), index: i };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                // `<=` keeps equal-distance candidates with smaller indices reachable
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    /// Up to `cap` indices within `radius` of `center`, nearest first.
    pub fn ball_query(&self, center: &Point3<f64>, radius: f64, cap: usize) -> Vec<usize> {
        self.within(center, radius)
            .into_iter()
            .take(cap)
            .map(|(i, _)| i)
            .collect()
    }

    /// Every point within `radius` of `center` as `(index, distance)`, ascending.
    pub fn within(&self, center: &Point3<f64>, radius: f64) -> Vec<(usize, f64)> {
        if self.points.is_empty() || !(radius >= 0.0) {
            return Vec::new();
        }
        let r2 = radius * radius;
        let mut found = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let d2 = (self.points[i] - center).norm_squared();
                        if d2 <= r2 {
                            found.push(Candidate { dist2: d2, index: i });
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let diff = center[axis] - value;
                    if diff - radius <= 0.0 {
                        stack.push(left);
                    }
                    if diff + radius >= 0.0 {
                        stack.push(right);
                    }
                }
            }
        }
        found.sort();
        found.into_iter().map(|c| (c.index, c.dist2.sqrt())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_knn(points: &[Point3<f64>], q: &Point3<f64>, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> =
            points.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn knn_identity_and_collinear() {
        let pts: Vec<_> = (0..4).map(|x| Point3::new(x as f64, 0.0, 0.0)).collect();
        let idx = SpatialIndex::new(&pts);
        let r = idx.knn(&pts[2], 1);
        assert_eq!(r, vec![(2, 0.0)]);
        let r = idx.knn(&Point3::new(1.4, 0.0, 0.0), 2);
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 2]);
        let r = idx.knn(&Point3::new(10.0, 0.0, 0.0), 99);
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn knn_ties_prefer_smaller_index() {
        let pts = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
        ];
        let idx = SpatialIndex::new(&pts);
        let r = idx.knn(&Point3::origin(), 2);
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn ball_query_on_unit_grid() {
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..5 {
                    pts.push(Point3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let idx = SpatialIndex::new(&pts);
        let center = Point3::new(2.0, 2.0, 2.0);
        let mut got = idx.ball_query(&center, 1.001, 100);
        assert_eq!(got[0], 62);
        got.sort();
        let mut want: Vec<usize> = pts
            .iter()
            .enumerate()
            .filter(|(_, p)| (*p - center).norm() <= 1.001)
            .map(|(i, _)| i)
            .collect();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(got.len(), 7);

        assert_eq!(idx.ball_query(&center, 1e-9, 100), vec![62]);
        assert_eq!(idx.ball_query(&center, 3.0, 3).len(), 3);
        assert!(idx.ball_query(&Point3::new(50.0, 0.0, 0.0), 1.0, 10).is_empty());
    }

    proptest! {
        #[test]
        fn queries_match_brute_force(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..120),
            q in (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5),
            k in 1usize..20,
            radius in 0.0f64..1.0,
        ) {
            // quantize so exact ties actually occur
            let pts: Vec<_> = raw.iter()
                .map(|&(x, y, z)| Point3::new((x * 4.0).round() / 4.0, (y * 4.0).round() / 4.0, (z * 4.0).round() / 4.0))
                .collect();
            let q = Point3::new(q.0, q.1, q.2);
            let idx = SpatialIndex::new(&pts);
            let got: Vec<usize> = idx.knn(&q, k).into_iter().map(|x| x.0).collect();
            prop_assert_eq!(got, brute_knn(&pts, &q, k));

            let mut ball = idx.ball_query(&q, radius, usize::MAX);
            ball.sort();
            let want: Vec<usize> = pts.iter().enumerate()
                .filter(|(_, p)| (*p - q).norm_squared() <= radius * radius)
                .map(|(i, _)| i).collect();
            prop_assert_eq!(ball, want);
        }
    }
}
