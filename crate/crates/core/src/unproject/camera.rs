use super::{UnprojectError, UnprojectResult};
use crate::mesh::Mesh;
use nalgebra::{Point3, Vector3};

/// Camera on a sphere around the object, looking at `look_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    /// Degrees.
    pub elevation: f64,
    /// Degrees.
    pub azimuth: f64,
    pub distance: f64,
    pub look_at: Point3<f64>,
    /// Vertical field of view in radians.
    pub fov_y: f64,
    /// `(height, width)` in pixels.
    pub image_size: (usize, usize),
}

impl CameraPose {
    /// Pose whose vertical field of view just contains a sphere of `radius`
    /// around `look_at`.
    pub fn new(
        elevation: f64,
        azimuth: f64,
        distance: f64,
        look_at: Point3<f64>,
        radius: f64,
        image_size: (usize, usize),
    ) -> UnprojectResult<Self> {
        let pose = Self {
            elevation,
            azimuth,
            distance,
            look_at,
            fov_y: 2.0 * (radius / distance).clamp(1e-6, 0.99).asin(),
            image_size,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> UnprojectResult<()> {
        if !(self.distance > 0.0) || !self.distance.is_finite() {
            return Err(UnprojectError::InvalidPose(format!("distance {}", self.distance)));
        }
        if self.image_size.0 < 16 || self.image_size.1 < 16 {
            return Err(UnprojectError::InvalidPose(format!("image size {:?}", self.image_size)));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(UnprojectError::InvalidPose(format!("fov {}", self.fov_y)));
        }
        Ok(())
    }

    pub fn eye(&self) -> Point3<f64> {
        let (el, az) = (self.elevation.to_radians(), self.azimuth.to_radians());
        let dir = Vector3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos());
        self.look_at + dir * self.distance
    }

    pub fn camera(&self) -> Camera {
        let eye = self.eye();
        let forward = (self.look_at - eye).normalize();
        let mut right = forward.cross(&Vector3::y());
        if right.norm() < 1e-9 {
            right = forward.cross(&Vector3::z());
        }
        let right = right.normalize();
        let up = right.cross(&forward);
        let (height, width) = self.image_size;
        Camera {
            eye,
            right,
            up,
            forward,
            focal: 0.5 * height as f64 / (0.5 * self.fov_y).tan(),
            near: 1e-4 * self.distance,
            height,
            width,
        }
    }
}

/// `n_elev * n_azim` poses on a grid, both angles spaced over `[0, 360)`
/// degrees, at `dist_scale` times the bounding-box diagonal from the centroid.
/// The field of view contains every vertex.
pub fn sample_view_sphere(
    mesh: &Mesh,
    n_elev: usize,
    n_azim: usize,
    dist_scale: f64,
    image_size: (usize, usize),
) -> UnprojectResult<Vec<CameraPose>> {
    if n_elev == 0 || n_azim == 0 {
        return Err(UnprojectError::InvalidArgument(format!("view grid {n_elev}x{n_azim}")));
    }
    let distance = dist_scale * mesh.bbox_diagonal();
    let c = mesh.centroid();
    let radius = mesh.vertices().iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    let mut poses = Vec::with_capacity(n_elev * n_azim);
    for i in 0..n_elev {
        for j in 0..n_azim {
            poses.push(CameraPose::new(
                360.0 * i as f64 / n_elev as f64,
                360.0 * j as f64 / n_azim as f64,
                distance,
                c,
                radius,
                image_size,
            )?);
        }
    }
    Ok(poses)
}

/// Pinhole camera with derived orthonormal frame and focal length in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub eye: Point3<f64>,
    pub right: Vector3<f64>,
    pub up: Vector3<f64>,
    pub forward: Vector3<f64>,
    pub focal: f64,
    pub near: f64,
    pub height: usize,
    pub width: usize,
}

impl Camera {
    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.eye;
        Vector3::new(d.dot(&self.right), d.dot(&self.up), d.dot(&self.forward))
    }

    /// Continuous image coordinates `(col, row)` of a camera-space point;
    /// pixel `(r, c)` covers `[c, c+1) x [r, r+1)`.
    pub fn to_screen(&self, c: &Vector3<f64>) -> (f64, f64) {
        (
            0.5 * self.width as f64 + self.focal * c.x / c.z,
            0.5 * self.height as f64 - self.focal * c.y / c.z,
        )
    }

    /// World point at camera depth `z` behind the center of pixel `(row, col)`.
    pub fn unproject_pixel(&self, row: usize, col: usize, z: f64) -> Point3<f64> {
        let x = (col as f64 + 0.5 - 0.5 * self.width as f64) * z / self.focal;
        let y = (0.5 * self.height as f64 - (row as f64 + 0.5)) * z / self.focal;
        self.eye + self.right * x + self.up * y + self.forward * z
    }
}
