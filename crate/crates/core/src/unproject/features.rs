use super::raster::ViewProjection;
use super::{UnprojectError, UnprojectResult};
use crate::mesh::fixtures::random_unit;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense per-pixel feature grid, row-major `height x width x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f32>,
}

impl PixelFeatureMap {
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<f32>) -> UnprojectResult<Self> {
        if data.len() != height * width * dim {
            return Err(UnprojectError::ShapeMismatch(format!(
                "{} values for {height}x{width}x{dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(UnprojectError::InvalidArgument("non-finite pixel feature".into()));
        }
        Ok(Self { height, width, dim, data })
    }

    pub fn filled(height: usize, width: usize, value: &[f32]) -> Self {
        let data = value.iter().copied().cycle().take(height * width * value.len()).collect();
        Self { height, width, dim: value.len(), data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let o = (row * self.width + col) * self.dim;
        &self.data[o..o + self.dim]
    }

    fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let o = (row * self.width + col) * self.dim;
        &mut self.data[o..o + self.dim]
    }

    /// Bilinear sample at normalized coordinates `(u, v)` in `[0, 1]`, with
    /// texel centers at `(i + 0.5) / size`; accumulates into `out`.
    pub fn sample_into(&self, u: f64, v: f64, out: &mut [f64]) {
        let x = (u * self.width as f64 - 0.5).clamp(0.0, (self.width - 1) as f64);
        let y = (v * self.height as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let taps = [
            (y0, x0, (1.0 - fx) * (1.0 - fy)),
            (y0, x1, fx * (1.0 - fy)),
            (y1, x0, (1.0 - fx) * fy),
            (y1, x1, fx * fy),
        ];
        for (r, c, wt) in taps {
            if wt == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.pixel(r, c)) {
                *o += wt * p as f64;
            }
        }
    }

    fn same_grid(&self, other: &Self) -> UnprojectResult<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(UnprojectError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    pub(crate) fn normalize_pixels(&mut self) {
        for px in self.data.chunks_exact_mut(self.dim.max(1)) {
            let n = px.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
            if n > 0.0 {
                px.iter_mut().for_each(|v| *v = (*v as f64 / n) as f32);
            }
        }
    }
}

/// Which end of the denoising trajectory to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSelection {
    /// The final, least noisy steps.
    #[default]
    LeastNoisy,
    /// The earliest, noisiest steps.
    MostNoisy,
}

/// Weights for the `n` selected steps in trajectory order: linear from 0.1 to 1.0.
pub fn step_weights(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| 0.1 + 0.9 * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Collapses per-step maps (ordered from the noisiest step to the final one)
/// into one map: keeps `ceil(0.75 T)` steps, weights them linearly, and
/// unit-normalizes each pixel.
pub fn weight_timesteps(per_step: &[PixelFeatureMap], selection: StepSelection) -> UnprojectResult<PixelFeatureMap> {
    let t = per_step.len();
    if t == 0 {
        return Err(UnprojectError::InvalidArgument("no timesteps".into()));
    }
    let first = &per_step[0];
    for m in per_step {
        first.same_grid(m)?;
        if m.dim != first.dim {
            return Err(UnprojectError::ShapeMismatch(format!("dim {} vs {}", m.dim, first.dim)));
        }
    }
    let n = (3 * t).div_ceil(4);
    let chosen = match selection {
        StepSelection::LeastNoisy => &per_step[t - n..],
        StepSelection::MostNoisy => &per_step[..n],
    };
    let mut acc = vec![0.0f64; first.data.len()];
    for (m, wt) in chosen.iter().zip(step_weights(n)) {
        for (a, &v) in acc.iter_mut().zip(&m.data) {
            *a += wt * v as f64;
        }
    }
    let mut out = PixelFeatureMap {
        height: first.height,
        width: first.width,
        dim: first.dim,
        data: acc.into_iter().map(|v| v as f32).collect(),
    };
    out.normalize_pixels();
    Ok(out)
}

/// Per pixel `[alpha * diff ; (1 - alpha) * dino]`, renormalized to unit length.
pub fn fuse_pixel_features(diff: &PixelFeatureMap, dino: &PixelFeatureMap, alpha: f64) -> UnprojectResult<PixelFeatureMap> {
    diff.same_grid(dino)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(UnprojectError::InvalidArgument(format!("alpha {alpha}")));
    }
    let dim = diff.dim + dino.dim;
    let mut data = Vec::with_capacity(diff.height * diff.width * dim);
    for r in 0..diff.height {
        for c in 0..diff.width {
            data.extend(diff.pixel(r, c).iter().map(|&v| (alpha * v as f64) as f32));
            data.extend(dino.pixel(r, c).iter().map(|&v| ((1.0 - alpha) * v as f64) as f32));
        }
    }
    let mut out = PixelFeatureMap { height: diff.height, width: diff.width, dim, data };
    out.normalize_pixels();
    Ok(out)
}

/// Seeded stand-in for learned image features.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticFeatures {
    /// Same vector on every pixel.
    Constant(Vec<f32>),
    /// Channel `j` is `sin(k_j . p / diag + phase_j)` of the surface point `p`
    /// seen through the pixel, with random directions and low frequencies.
    Smooth { dim: usize, seed: u64 },
}

impl SyntheticFeatures {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(v) => v.len(),
            Self::Smooth { dim, .. } => *dim,
        }
    }

    /// Renders the feature map for one view at the projection's resolution.
    /// Background pixels are zero for the smooth field.
    pub fn render(&self, view: &ViewProjection, diag: f64) -> PixelFeatureMap {
        let (h, w) = (view.camera.height, view.camera.width);
        match self {
            Self::Constant(v) => PixelFeatureMap::filled(h, w, v),
            Self::Smooth { dim, seed } => {
                let waves = smooth_waves(*dim, *seed);
                let mut map = PixelFeatureMap { height: h, width: w, dim: *dim, data: vec![0.0; h * w * dim] };
                for r in 0..h {
                    for c in 0..w {
                        if let Some(p) = view.surface_point(r, c) {
                            let px = map.pixel_mut(r, c);
                            for (o, (k, phase)) in px.iter_mut().zip(&waves) {
                                *o = (k.dot(&p.coords) / diag + phase).sin() as f32;
                            }
                        }
                    }
                }
                map
            }
        }
    }
}

fn smooth_waves(dim: usize, seed: u64) -> Vec<(Vector3<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| {
            let freq = rng.random_range(1.0..4.0);
            (random_unit(&mut rng) * freq, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect()
}
