use super::camera::{Camera, CameraPose};
use super::UnprojectResult;
use crate::mesh::Mesh;
use nalgebra::{Point3, Vector3};

const TILE: usize = 8;

/// Screen-space triangle with per-corner inverse depth for perspective-correct
/// interpolation.
#[derive(Debug, Clone, Copy)]
struct ScreenTri {
    x: [f64; 3],
    y: [f64; 3],
    inv_z: [f64; 3],
    area: f64,
}

impl ScreenTri {
    fn new(pts: &[Vector3<f64>; 3], cam: &Camera) -> Option<Self> {
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        let mut inv_z = [0.0; 3];
        for k in 0..3 {
            (x[k], y[k]) = cam.to_screen(&pts[k]);
            inv_z[k] = 1.0 / pts[k].z;
        }
        let area = edge(x[0], y[0], x[1], y[1], x[2], y[2]);
        (area.abs() > 1e-12).then_some(Self { x, y, inv_z, area })
    }

    /// Barycentric weights of a screen point, sign-normalized for either winding.
    fn weights(&self, px: f64, py: f64) -> [f64; 3] {
        let (x, y) = (&self.x, &self.y);
        [
            edge(x[1], y[1], x[2], y[2], px, py) / self.area,
            edge(x[2], y[2], x[0], y[0], px, py) / self.area,
            edge(x[0], y[0], x[1], y[1], px, py) / self.area,
        ]
    }

    fn depth(&self, w: &[f64; 3]) -> f64 {
        1.0 / (w[0] * self.inv_z[0] + w[1] * self.inv_z[1] + w[2] * self.inv_z[2])
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let (x, y) = (&self.x, &self.y);
        (
            x[0].min(x[1]).min(x[2]),
            x[0].max(x[1]).max(x[2]),
            y[0].min(y[1]).min(y[2]),
            y[0].max(y[1]).max(y[2]),
        )
    }
}

fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Clips a camera-space triangle to `z >= near`, returning a fan of 0 to 2 triangles.
fn clip_near(tri: [Vector3<f64>; 3], near: f64) -> Vec<[Vector3<f64>; 3]> {
    if tri.iter().all(|p| p.z >= near) {
        return vec![tri];
    }
    let mut poly: Vec<Vector3<f64>> = Vec::with_capacity(4);
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let (ina, inb) = (a.z >= near, b.z >= near);
        if ina {
            poly.push(a);
        }
        if ina != inb {
            let t = (near - a.z) / (b.z - a.z);
            poly.push(a + (b - a) * t);
        }
    }
    (1..poly.len().saturating_sub(1)).map(|k| [poly[0], poly[k], poly[k + 1]]).collect()
}

/// Per-vertex projection result for one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedVertex {
    /// Continuous image row; the pixel row is `row.floor()`.
    pub row: f64,
    /// Continuous image column.
    pub col: f64,
    /// Camera-space depth along the viewing axis.
    pub depth: f64,
    pub visible: bool,
    pub behind_camera: bool,
}

impl ProjectedVertex {
    pub fn pixel(&self) -> Option<(usize, usize)> {
        (self.row >= 0.0 && self.col >= 0.0).then(|| (self.row as usize, self.col as usize))
    }
}

/// Rasterized view: depth buffer plus every vertex's projection.
#[derive(Debug, Clone)]
pub struct ViewProjection {
    pub camera: Camera,
    /// Row-major `height * width` camera depths, `+inf` on background.
    pub depth: Vec<f64>,
    pub vertices: Vec<ProjectedVertex>,
    /// Visibility tolerance in world units.
    pub tolerance: f64,
}

impl ViewProjection {
    pub fn is_foreground(&self, row: usize, col: usize) -> bool {
        self.depth[row * self.camera.width + col].is_finite()
    }

    /// Surface point seen through the center of a foreground pixel.
    pub fn surface_point(&self, row: usize, col: usize) -> Option<Point3<f64>> {
        let z = self.depth[row * self.camera.width + col];
        z.is_finite().then(|| self.camera.unproject_pixel(row, col, z))
    }

    pub fn visible_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.visible).count()
    }
}

/// Projects every vertex and decides visibility.
///
/// Faces are rasterized into a depth buffer sampled at pixel centers. A vertex
/// is visible when it lies inside the image in front of the camera and no
/// face covering its exact screen position is nearer by more than
/// `1e-4 * diag`.
pub fn project_vertices(mesh: &Mesh, pose: &CameraPose) -> UnprojectResult<ViewProjection> {
    pose.validate()?;
    let cam = pose.camera();
    let (h, w) = (cam.height, cam.width);
    let tolerance = 1e-4 * mesh.bbox_diagonal();
    let cam_pts: Vec<Vector3<f64>> = mesh.vertices().iter().map(|p| cam.to_camera(p)).collect();

    let mut tris = Vec::with_capacity(mesh.faces().len());
    for f in mesh.faces() {
        for t in clip_near([cam_pts[f[0]], cam_pts[f[1]], cam_pts[f[2]]], cam.near) {
            if let Some(st) = ScreenTri::new(&t, &cam) {
                tris.push(st);
            }
        }
    }

    let mut depth = vec![f64::INFINITY; h * w];
    let (tiles_w, tiles_h) = (w.div_ceil(TILE), h.div_ceil(TILE));
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_w * tiles_h];
    for (ti, t) in tris.iter().enumerate() {
        let (x0, x1, y0, y1) = t.bounds();
        if x1 < 0.0 || y1 < 0.0 || x0 >= w as f64 || y0 >= h as f64 {
            continue;
        }
        let tx = (x0.max(0.0) as usize / TILE, (x1.min(w as f64 - 1.0) as usize) / TILE);
        let ty = (y0.max(0.0) as usize / TILE, (y1.min(h as f64 - 1.0) as usize) / TILE);
        for by in ty.0..=ty.1 {
            for bx in tx.0..=tx.1 {
                bins[by * tiles_w + bx].push(ti as u32);
            }
        }

        let c0 = (x0 - 0.5).ceil().max(0.0) as usize;
        let r0 = (y0 - 0.5).ceil().max(0.0) as usize;
        let c1 = ((x1 - 0.5).floor()).min(w as f64 - 1.0);
        let r1 = ((y1 - 0.5).floor()).min(h as f64 - 1.0);
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        for r in r0..=r1 as usize {
            let py = r as f64 + 0.5;
            for c in c0..=c1 as usize {
                let wts = t.weights(c as f64 + 0.5, py);
                if wts.iter().all(|&v| v >= 0.0) {
                    let z = t.depth(&wts);
                    let slot = &mut depth[r * w + c];
                    if z < *slot {
                        *slot = z;
                    }
                }
            }
        }
    }

    let vertices = cam_pts
        .iter()
        .map(|c| {
            if c.z < cam.near {
                return ProjectedVertex { row: f64::NAN, col: f64::NAN, depth: c.z, visible: false, behind_camera: true };
            }
            let (x, y) = cam.to_screen(c);
            let inside = x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64;
            let visible = inside && {
                let bin = &bins[(y as usize / TILE) * tiles_w + x as usize / TILE];
                !bin.iter().any(|&ti| {
                    let t = &tris[ti as usize];
                    let wts = t.weights(x, y);
                    wts.iter().all(|&v| v >= -1e-9) && t.depth(&wts) < c.z - tolerance
                })
            };
            ProjectedVertex { row: y, col: x, depth: c.z, visible, behind_camera: false }
        })
        .collect();

    Ok(ViewProjection { camera: cam, depth, vertices, tolerance })
}
