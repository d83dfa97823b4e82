use super::features::PixelFeatureMap;
use super::raster::ViewProjection;
use super::{UnprojectError, UnprojectResult};
use crate::mesh::{Mesh, SpatialIndex};

/// Per-vertex feature rows with the number of views that produced each row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    n: usize,
    dim: usize,
    data: Vec<f32>,
    coverage: Vec<u16>,
}

impl FeatureField {
    pub fn new(n: usize, dim: usize, data: Vec<f32>, coverage: Vec<u16>) -> UnprojectResult<Self> {
        if data.len() != n * dim || coverage.len() != n {
            return Err(UnprojectError::ShapeMismatch(format!(
                "{} values and {} coverage entries for {n}x{dim}",
                data.len(),
                coverage.len()
            )));
        }
        Ok(Self { n, dim, data, coverage })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self { n, dim, data: vec![0.0; n * dim], coverage: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn coverage(&self) -> &[u16] {
        &self.coverage
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows for the given vertices, widened to `f64`.
    pub fn gather_rows(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().flat_map(|&i| self.row(i).iter().map(|&v| v as f64)).collect()
    }
}

/// Transfers one view's pixel features onto the visible vertices.
///
/// Each visible vertex averages the features of foreground pixels whose
/// surface points lie within `radius_frac * diag` of it, nearest first and at
/// most `k`. The vertex's own pixel always contributes when its surface point
/// is within the radius or two pixel footprints. Feature maps at a different
/// resolution from the render are sampled bilinearly.
pub fn unproject_view(
    fused: &PixelFeatureMap,
    view: &ViewProjection,
    mesh: &Mesh,
    k: usize,
    radius_frac: f64,
) -> UnprojectResult<FeatureField> {
    if view.vertices.len() != mesh.len() {
        return Err(UnprojectError::ShapeMismatch(format!(
            "projection has {} vertices, mesh {}",
            view.vertices.len(),
            mesh.len()
        )));
    }
    if k == 0 || !(radius_frac >= 0.0) {
        return Err(UnprojectError::InvalidArgument(format!("k {k}, radius_frac {radius_frac}")));
    }
    let cam = &view.camera;
    let (h, w) = (cam.height, cam.width);
    let radius = radius_frac * mesh.bbox_diagonal();
    let r2 = radius * radius;
    let dim = fused.dim();
    let mut out = FeatureField::zeros(mesh.len(), dim);
    let mut acc = vec![0.0f64; dim];
    let mut picked: Vec<(f64, usize)> = Vec::new();

    for (vi, pv) in view.vertices.iter().enumerate() {
        if !pv.visible {
            continue;
        }
        let p = mesh.vertices()[vi];
        let (own_r, own_c) = pv.pixel().expect("visible vertices are inside the image");
        picked.clear();

        let own = view.surface_point(own_r, own_c).and_then(|q| {
            let footprint = 2.0 * pv.depth / cam.focal;
            let d2 = (q - p).norm_squared();
            (d2 <= r2.max(footprint * footprint)).then_some(own_r * w + own_c)
        });

        let reach = if pv.depth > radius { cam.focal * radius / (pv.depth - radius) } else { w.max(h) as f64 };
        let span = (reach.ceil() as usize + 1).min(w.max(h));
        for r in own_r.saturating_sub(span)..(own_r + span + 1).min(h) {
            for c in own_c.saturating_sub(span)..(own_c + span + 1).min(w) {
                let idx = r * w + c;
                if Some(idx) == own {
                    continue;
                }
                if let Some(q) = view.surface_point(r, c) {
                    let d2 = (q - p).norm_squared();
                    if d2 <= r2 {
                        picked.push((d2, idx));
                    }
                }
            }
        }
        picked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let take = k - own.is_some() as usize;
        let chosen = own.into_iter().chain(picked.iter().take(take).map(|&(_, i)| i));

        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut count = 0usize;
        for idx in chosen {
            let (r, c) = (idx / w, idx % w);
            fused.sample_into((c as f64 + 0.5) / w as f64, (r as f64 + 0.5) / h as f64, &mut acc);
            count += 1;
        }
        if count > 0 {
            let row = &mut out.data[vi * dim..(vi + 1) * dim];
            for (o, a) in row.iter_mut().zip(&acc) {
                *o = (a / count as f64) as f32;
            }
            out.coverage[vi] = 1;
        }
    }
    Ok(out)
}

/// Averages per-view fields over the views that cover each vertex; vertices
/// no view covers copy the row of the nearest covered vertex.
pub fn aggregate_views(per_view: &[FeatureField], mesh: &Mesh) -> UnprojectResult<FeatureField> {
    let first = per_view
        .first()
        .ok_or_else(|| UnprojectError::InvalidArgument("no views".into()))?;
    let (n, dim) = (first.n, first.dim);
    if n != mesh.len() {
        return Err(UnprojectError::ShapeMismatch(format!("field has {n} rows, mesh {}", mesh.len())));
    }
    for f in per_view {
        if (f.n, f.dim) != (n, dim) {
            return Err(UnprojectError::ShapeMismatch(format!("{}x{} vs {n}x{dim}", f.n, f.dim)));
        }
    }
    let mut sum = vec![0.0f64; n * dim];
    let mut coverage = vec![0u32; n];
    for f in per_view {
        for i in 0..n {
            if f.coverage[i] == 0 {
                continue;
            }
            coverage[i] += f.coverage[i] as u32;
            for (s, &v) in sum[i * dim..(i + 1) * dim].iter_mut().zip(f.row(i)) {
                *s += v as f64;
            }
        }
    }
    let covered: Vec<usize> = (0..n).filter(|&i| coverage[i] > 0).collect();
    if covered.is_empty() {
        return Err(UnprojectError::NoCoverage);
    }
    let mut data = vec![0.0f32; n * dim];
    for &i in &covered {
        let c = coverage[i] as f64;
        for (o, s) in data[i * dim..(i + 1) * dim].iter_mut().zip(&sum[i * dim..(i + 1) * dim]) {
            *o = (s / c) as f32;
        }
    }
    if covered.len() < n {
        let pts: Vec<_> = covered.iter().map(|&i| mesh.vertices()[i]).collect();
        let index = SpatialIndex::new(&pts);
        for i in 0..n {
            if coverage[i] == 0 {
                let src = covered[index.knn(&mesh.vertices()[i], 1)[0].0];
                let row: Vec<f32> = data[src * dim..(src + 1) * dim].to_vec();
                data[i * dim..(i + 1) * dim].copy_from_slice(&row);
            }
        }
    }
    Ok(FeatureField {
        n,
        dim,
        data,
        coverage: coverage.into_iter().map(|c| c.min(u16::MAX as u32) as u16).collect(),
    })
}
