//! Multi-view feature transfer: camera sampling, rasterized visibility,
//! timestep weighting, per-pixel fusion and per-vertex aggregation.

mod camera;
mod features;
mod field;
mod io;
mod raster;

pub use camera::{sample_view_sphere, Camera, CameraPose};
pub use features::{fuse_pixel_features, step_weights, weight_timesteps, PixelFeatureMap, StepSelection, SyntheticFeatures};
pub use field::{aggregate_views, unproject_view, FeatureField};
pub use io::{decode_featb, decode_pxf, encode_featb, encode_pxf, read_featb, read_pxf, write_featb, write_pxf};
pub use raster::{project_vertices, ProjectedVertex, ViewProjection};

use crate::mesh::Mesh;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UnprojectError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no vertex is covered by any view")]
    NoCoverage,
    #[error("invalid camera pose: {0}")]
    InvalidPose(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed feature file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type UnprojectResult<T> = Result<T, UnprojectError>;

/// Settings for the whole multi-view transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct UnprojectConfig {
    pub n_elev: usize,
    pub n_azim: usize,
    pub dist_scale: f64,
    /// `(height, width)` of the rendered views.
    pub image_size: (usize, usize),
    pub k: usize,
    pub radius_frac: f64,
    pub alpha: f64,
    pub selection: StepSelection,
}

impl Default for UnprojectConfig {
    fn default() -> Self {
        Self {
            n_elev: 10,
            n_azim: 10,
            dist_scale: 0.65,
            image_size: (512, 512),
            k: 100,
            radius_frac: 0.01,
            alpha: 0.5,
            selection: StepSelection::LeastNoisy,
        }
    }
}

/// Renders every view, asks `view_features` for that view's fused pixel map,
/// transfers it to the vertices and averages over views.
pub fn unproject_mesh<F>(mesh: &Mesh, cfg: &UnprojectConfig, mut view_features: F) -> UnprojectResult<FeatureField>
where
    F: FnMut(usize, &ViewProjection) -> UnprojectResult<PixelFeatureMap>,
{
    let poses = sample_view_sphere(mesh, cfg.n_elev, cfg.n_azim, cfg.dist_scale, cfg.image_size)?;
    let mut fields = Vec::with_capacity(poses.len());
    for (v, pose) in poses.iter().enumerate() {
        let view = project_vertices(mesh, pose)?;
        let fused = view_features(v, &view)?;
        fields.push(unproject_view(&fused, &view, mesh, cfg.k, cfg.radius_frac)?);
    }
    aggregate_views(&fields, mesh)
}

/// Synthetic stand-ins for the two image feature sources of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSources {
    /// Per-step diffusion field; every step renders the same field.
    pub diffusion: SyntheticFeatures,
    pub steps: usize,
    pub dino: SyntheticFeatures,
}

impl SyntheticSources {
    /// Per-step diffusion maps and the DINO map for one view.
    pub fn render(&self, view: &ViewProjection, diag: f64) -> (Vec<PixelFeatureMap>, PixelFeatureMap) {
        let diff = self.diffusion.render(view, diag);
        (vec![diff; self.steps.max(1)], self.dino.render(view, diag))
    }

    /// Fused map for one view, running the same weighting and fusion as real
    /// features. The DINO map is unit-normalized per pixel first.
    pub fn fused(&self, view: &ViewProjection, diag: f64, cfg: &UnprojectConfig) -> UnprojectResult<PixelFeatureMap> {
        let (steps, mut dino) = self.render(view, diag);
        dino.normalize_pixels();
        let diff = weight_timesteps(&steps, cfg.selection)?;
        fuse_pixel_features(&diff, &dino, cfg.alpha)
    }
}
