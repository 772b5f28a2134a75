//! Synthetic single-view capture: procedural objects, a z-depth renderer with
//! ground-truth masks, and pinhole back-projection.

pub mod objects;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Frame, SimilarityPose, UnitVec3, Vec3};
use crate::mesh::{MeshError, TriMesh};

pub use objects::{canonical_scale, generate_object, generate_object_with_parts, Category, ShapeParams, SurfacePart};

/// Geometry closer than this to the image plane is treated as behind it.
const NEAR_PLANE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("cannot render an empty mesh")]
    EmptyMesh,
    #[error("no masked pixel has a depth return")]
    EmptyForeground,
    #[error("resolution mismatch: depth {depth:?} vs mask {mask:?}")]
    ResolutionMismatch { depth: (usize, usize), mask: (usize, usize) },
    #[error("invalid shape parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Mesh(MeshError),
}

/// Row-major z-depth raster in meters; 0 means no return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
    pub sensor_pose: Frame,
}

impl DepthImage {
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.depth[v * self.width + u]
    }
}

/// Row-major binary foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<bool>,
}

impl SegmentationMask {
    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<UnitVec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points, normals: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, pose: &SimilarityPose) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| pose.apply(*p)).collect(),
            normals: self.normals.as_ref().map(|ns| {
                ns.iter().map(|n| UnitVec3::new(pose.apply_direction(n.get())).unwrap_or(*n)).collect()
            }),
        }
    }
}

/// Integer pixel coordinates `(u, v)` of back-projected points.
pub type PixelCoords = Vec<(usize, usize)>;

/// Ray from the camera center through the pixel `(u, v)`, scaled so its z
/// component is 1 (the hit parameter is then the z-depth).
#[inline]
fn pixel_ray(intr: &CameraIntrinsics, u: usize, v: usize) -> Vec3 {
    Vec3::new((u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0)
}

/// Möller–Trumbore from the origin; returns the ray parameter of the hit.
#[inline]
fn ray_triangle_from_origin(dir: Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    ray_triangle(Vec3::ZERO, dir, tri)
}

/// Möller–Trumbore with inclusive edges. Returns `t` such that the hit is
/// `origin + t·dir`, only for `t > 0`.
#[inline]
pub fn ray_triangle(origin: Vec3, dir: Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    const EPS: f64 = 1e-12;
    if !(-EPS..=1.0 + EPS).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -EPS || u + v > 1.0 + EPS {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 0.0).then_some(t)
}

/// Renders z-depth and a foreground mask of `mesh` placed in the world by
/// `object_pose`, seen from `camera` (a frame whose z axis is the optical
/// axis, x the image right and y the image down).
pub fn render_depth(
    mesh: &TriMesh,
    object_pose: &SimilarityPose,
    camera: &Frame,
    intr: &CameraIntrinsics,
) -> Result<(DepthImage, SegmentationMask), SceneError> {
    if mesh.is_empty() {
        return Err(SceneError::EmptyMesh);
    }
    let (w, h) = (intr.width, intr.height);
    let cam_pts: Vec<Vec3> = mesh.vertices.iter().map(|v| camera.to_local(object_pose.apply(*v))).collect();

    // bin triangles by the image rows their projection covers
    let mut rows: Vec<Vec<(u32, usize, usize)>> = vec![Vec::new(); h];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = [cam_pts[tri[0] as usize], cam_pts[tri[1] as usize], cam_pts[tri[2] as usize]];
        let in_front = p.iter().filter(|q| q.z > NEAR_PLANE).count();
        if in_front == 0 {
            continue;
        }
        let (u0, u1, v0, v1) = if in_front < 3 {
            (0, w - 1, 0, h - 1)
        } else {
            let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for q in &p {
                let (u, v) = intr.project(*q).expect("in front");
                umin = umin.min(u);
                umax = umax.max(u);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
            if umax < -1.0 || vmax < -1.0 || umin > w as f64 || vmin > h as f64 {
                continue;
            }
            let clamp = |x: f64, hi: usize| x.max(0.0).min(hi as f64) as usize;
            (clamp(umin.floor() - 1.0, w - 1), clamp(umax.ceil() + 1.0, w - 1), clamp(vmin.floor() - 1.0, h - 1), clamp(vmax.ceil() + 1.0, h - 1))
        };
        for row in rows.iter_mut().take(v1 + 1).skip(v0) {
            row.push((t as u32, u0, u1));
        }
    }

    let depth: Vec<f32> = rows
        .par_iter()
        .enumerate()
        .flat_map_iter(|(v, bins)| {
            let mut line = vec![f64::INFINITY; w];
            for &(t, u0, u1) in bins {
                let tri = mesh.triangles[t as usize];
                let p = [cam_pts[tri[0] as usize], cam_pts[tri[1] as usize], cam_pts[tri[2] as usize]];
                for (u, best) in line.iter_mut().enumerate().take(u1 + 1).skip(u0) {
                    if let Some(t) = ray_triangle_from_origin(pixel_ray(intr, u, v), &p) {
                        if t > NEAR_PLANE && t < *best {
                            *best = t;
                        }
                    }
                }
            }
            line.into_iter().map(|d| if d.is_finite() { d as f32 } else { 0.0 })
        })
        .collect();
    let mask = SegmentationMask { width: w, height: h, values: depth.iter().map(|&d| d > 0.0).collect() };
    Ok((DepthImage { width: w, height: h, depth, sensor_pose: *camera }, mask))
}

/// Adds zero-mean Gaussian noise to every nonzero depth sample.
pub fn add_depth_noise(image: &mut DepthImage, sigma: f64, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for d in image.depth.iter_mut().filter(|d| **d > 0.0) {
        *d = (*d as f64 + normal.sample(&mut rng)).max(1e-4) as f32;
    }
}

/// Inverse pinhole projection of the masked depth: `(d·(u−cx)/fx, d·(v−cy)/fy, d)`
/// in the camera frame, skipping zero returns.
pub fn backproject(depth: &DepthImage, mask: &SegmentationMask, intr: &CameraIntrinsics) -> Result<PointCloud, SceneError> {
    Ok(backproject_with_pixels(depth, mask, intr)?.0)
}

pub fn backproject_with_pixels(
    depth: &DepthImage,
    mask: &SegmentationMask,
    intr: &CameraIntrinsics,
) -> Result<(PointCloud, PixelCoords), SceneError> {
    if (depth.width, depth.height) != (mask.width, mask.height) {
        return Err(SceneError::ResolutionMismatch {
            depth: (depth.width, depth.height),
            mask: (mask.width, mask.height),
        });
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = v * depth.width + u;
            let d = depth.depth[i];
            if mask.values[i] && d > 0.0 {
                points.push(intr.unproject(u as f64, v as f64, d as f64));
                pixels.push((u, v));
            }
        }
    }
    if points.is_empty() {
        return Err(SceneError::EmptyForeground);
    }
    Ok((PointCloud::new(points), pixels))
}
