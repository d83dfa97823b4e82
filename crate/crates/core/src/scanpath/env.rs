use super::{ScanpathError, ScanpathResult};
use crate::mesh::{surface_neighbors, Mesh};
use nalgebra::Point3;
use rand::Rng;

/// Moves per episode; a scanpath holds one more fixation than this.
pub const EPISODE_LEN: usize = 20;
pub const N_ACTIONS: usize = 6;
pub const OBS_DIM: usize = 16;
/// Recent fixations considered by the diversity term.
pub const DIVERSITY_WINDOW: usize = 5;
/// Distance, as a fraction of the bounding-box diagonal, at which diversity saturates.
pub const DIVERSITY_SCALE: f64 = 0.2;
/// Cells per axis of the region grid.
pub const REGION_GRID: usize = 4;

/// Coefficients of the per-move reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub saliency: f64,
    pub ior: f64,
    pub ior_scale: f64,
    pub new_region: f64,
    pub diversity: f64,
    pub step_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { saliency: 1.0, ior: 0.2, ior_scale: 2.0, new_region: 0.15, diversity: 0.1, step_penalty: 0.05 }
    }
}

impl RewardConfig {
    /// Reward contributions for a move onto a vertex with the given
    /// saliency, prior visit count, region status and diversity.
    pub fn terms(&self, saliency: f64, visits: u32, new_region: bool, diversity: f64) -> RewardTerms {
        RewardTerms {
            saliency: self.saliency * saliency,
            ior: -self.ior * (visits as f64 / self.ior_scale).tanh(),
            new_region: if new_region { self.new_region } else { 0.0 },
            diversity: self.diversity * diversity,
            step: -self.step_penalty,
        }
    }
}

/// The five signed reward contributions of one move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    pub saliency: f64,
    pub ior: f64,
    pub new_region: f64,
    pub diversity: f64,
    pub step: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.saliency + self.ior + self.new_region + self.diversity + self.step
    }
}

/// How the first fixation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartMode {
    /// Drawn from the saliency map treated as a distribution.
    #[default]
    Sample,
    /// The most salient vertex, ties to the smaller index.
    Argmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub current: usize,
    pub visit_counts: Vec<u32>,
    /// Every fixation so far, start included.
    pub history: Vec<usize>,
    pub step: usize,
    regions: [bool; REGION_GRID * REGION_GRID * REGION_GRID],
}

impl EnvState {
    pub fn region_visited(&self, cell: usize) -> bool {
        self.regions[cell]
    }

    pub fn done(&self) -> bool {
        self.step >= EPISODE_LEN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: [f64; OBS_DIM],
    pub reward: f64,
    pub terms: RewardTerms,
    pub next_vertex: usize,
    /// The target had been fixated before this move.
    pub revisit: bool,
    pub done: bool,
}

/// Walk over mesh vertices driven by a frozen saliency map.
#[derive(Debug, Clone)]
pub struct ScanEnv {
    mesh: Mesh,
    saliency: Vec<f64>,
    neighbors: Vec<[usize; N_ACTIONS]>,
    cells: Vec<usize>,
    cumulative: Vec<f64>,
    diag: f64,
    centroid: Point3<f64>,
    pub reward: RewardConfig,
}

impl ScanEnv {
    pub fn new(mesh: Mesh, saliency: Vec<f64>, reward: RewardConfig) -> ScanpathResult<Self> {
        let n = mesh.len();
        if saliency.len() != n {
            return Err(ScanpathError::Shape(format!("{} saliency values for {n} vertices", saliency.len())));
        }
        if saliency.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(ScanpathError::InvalidSaliency("values must be finite and non-negative".into()));
        }
        let mut neighbors = Vec::with_capacity(n);
        for v in 0..n {
            let nb = surface_neighbors(&mesh, v, N_ACTIONS)?;
            let arr: [usize; N_ACTIONS] = nb
                .try_into()
                .map_err(|nb: Vec<usize>| ScanpathError::Shape(format!("vertex {v} has {} neighbors", nb.len())))?;
            neighbors.push(arr);
        }
        let (lo, hi) = mesh.bbox();
        let cells = mesh
            .vertices()
            .iter()
            .map(|p| {
                let mut cell = 0;
                for k in 0..3 {
                    let extent = hi[k] - lo[k];
                    let c = if extent > 0.0 { ((p[k] - lo[k]) / extent * REGION_GRID as f64) as usize } else { 0 };
                    cell = cell * REGION_GRID + c.min(REGION_GRID - 1);
                }
                cell
            })
            .collect();
        let mut acc = 0.0;
        let cumulative = saliency
            .iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect();
        let diag = mesh.bbox_diagonal();
        let centroid = mesh.centroid();
        Ok(Self { mesh, saliency, neighbors, cells, cumulative, diag, centroid, reward })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn saliency(&self) -> &[f64] {
        &self.saliency
    }

    pub fn neighbors(&self, v: usize) -> &[usize; N_ACTIONS] {
        &self.neighbors[v]
    }

    /// Region grid cell of a vertex.
    pub fn cell(&self, v: usize) -> usize {
        self.cells[v]
    }

    pub fn start_vertex<R: Rng>(&self, mode: StartMode, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        match mode {
            StartMode::Sample if total > 0.0 => {
                let u = rng.random_range(0.0..total);
                self.cumulative.partition_point(|&c| c <= u).min(self.saliency.len() - 1)
            }
            StartMode::Sample => rng.random_range(0..self.saliency.len()),
            StartMode::Argmax => {
                let mut best = 0;
                for (i, &s) in self.saliency.iter().enumerate() {
                    if s > self.saliency[best] {
                        best = i;
                    }
                }
                best
            }
        }
    }

    pub fn reset<R: Rng>(&self, mode: StartMode, rng: &mut R) -> (EnvState, [f64; OBS_DIM]) {
        self.reset_at(self.start_vertex(mode, rng))
    }

    pub fn reset_at(&self, start: usize) -> (EnvState, [f64; OBS_DIM]) {
        let mut visit_counts = vec![0; self.saliency.len()];
        visit_counts[start] = 1;
        let mut regions = [false; REGION_GRID * REGION_GRID * REGION_GRID];
        regions[self.cells[start]] = true;
        let state = EnvState { current: start, visit_counts, history: vec![start], step: 0, regions };
        let obs = self.observe(&state);
        (state, obs)
    }

    /// `[saliency, inhibition, 6 neighbor saliencies, 6 neighbor distances,
    /// progress, distance from centroid]`, distances over the bbox diagonal.
    pub fn observe(&self, s: &EnvState) -> [f64; OBS_DIM] {
        let v = s.current;
        let p = self.mesh.vertices()[v];
        let mut o = [0.0; OBS_DIM];
        o[0] = self.saliency[v];
        o[1] = (s.visit_counts[v] as f64 / self.reward.ior_scale).tanh();
        for (a, &u) in self.neighbors[v].iter().enumerate() {
            o[2 + a] = self.saliency[u];
            o[8 + a] = (self.mesh.vertices()[u] - p).norm() / self.diag;
        }
        o[14] = s.step as f64 / EPISODE_LEN as f64;
        o[15] = (p - self.centroid).norm() / self.diag;
        o
    }

    pub fn is_new_region(&self, s: &EnvState, next: usize) -> bool {
        !s.regions[self.cells[next]]
    }

    /// Closeness to recent fixations mapped to `[0, 1]`; one when there is no history.
    pub fn diversity(&self, s: &EnvState, next: usize) -> f64 {
        let p = self.mesh.vertices()[next];
        let scale = DIVERSITY_SCALE * self.diag;
        s.history
            .iter()
            .rev()
            .take(DIVERSITY_WINDOW)
            .map(|&h| (self.mesh.vertices()[h] - p).norm())
            .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
            .map_or(1.0, |d| (d / scale).clamp(0.0, 1.0))
    }

    pub fn reward_terms(&self, s: &EnvState, next: usize) -> RewardTerms {
        self.reward.terms(self.saliency[next], s.visit_counts[next], self.is_new_region(s, next), self.diversity(s, next))
    }

    pub fn step(&self, s: &mut EnvState, action: usize) -> ScanpathResult<StepOutcome> {
        if action >= N_ACTIONS {
            return Err(ScanpathError::InvalidAction(action));
        }
        if s.done() {
            return Err(ScanpathError::EpisodeOver);
        }
        let next = self.neighbors[s.current][action];
        let terms = self.reward_terms(s, next);
        let revisit = s.visit_counts[next] > 0;
        s.visit_counts[next] += 1;
        s.regions[self.cells[next]] = true;
        s.history.push(next);
        s.current = next;
        s.step += 1;
        Ok(StepOutcome { obs: self.observe(s), reward: terms.total(), terms, next_vertex: next, revisit, done: s.done() })
    }
}

/// Saliency made of two Gaussian lobes on an icosphere, peaking near one.
pub fn two_lobe_saliency(mesh: &Mesh) -> Vec<f64> {
    let a = nalgebra::Vector3::new(1.0, 0.0, 0.0);
    let b = nalgebra::Vector3::new(0.0, 1.0, 0.0);
    let c = mesh.centroid();
    mesh.vertices()
        .iter()
        .map(|p| {
            let u = (p - c).normalize();
            let lobe = |d: &nalgebra::Vector3<f64>| ((u.dot(d) - 1.0) / 0.18).exp();
            (lobe(&a) + 0.8 * lobe(&b)).min(1.0)
        })
        .collect()
}
