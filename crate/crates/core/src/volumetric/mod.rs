//! Voxel fields in the canonical frame: the projective TSDF of a single
//! view, completed occupancy probabilities, and gradient-norm confidence.
//!
//! Voxel `(i, j, k)` has its center at `origin + (i + ½, j + ½, k + ½)·h`
//! and is stored at `(k·N + j)·N + i` (x fastest).

mod complete;

#[cfg(test)]
pub(crate) use complete::box_filter;
pub use complete::{complete, indicator, Completer, RevolutionParams, Strategy};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{UnitVec3, Vec3};
use crate::scene::PointCloud;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolumeError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("unknown completion strategy `{0}` (expected revolution, mirror or partial)")]
    UnknownStrategy(String),
    #[error("point {0:?} is outside the grid interior")]
    OutOfBounds([f64; 3]),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Lattice geometry shared by a TSDF and the occupancy grid completed from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    /// Minimum corner of the grid (not the first voxel center).
    pub origin: Vec3,
    pub voxel_size: f64,
    pub truncation: f64,
}

impl GridSpec {
    pub const DEFAULT_RESOLUTION: usize = 64;
    pub const TRUNCATION_VOXELS: f64 = 4.0;

    /// `resolution³` voxels tiling the unit cube centered at the origin.
    pub fn unit_cube(resolution: usize) -> Self {
        let h = 1.0 / resolution as f64;
        GridSpec {
            resolution,
            origin: Vec3::splat(-0.5),
            voxel_size: h,
            truncation: Self::TRUNCATION_VOXELS * h,
        }
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        let bad = |m: &str| Err(VolumeError::InvalidGrid(m.into()));
        if self.resolution < 2 || self.resolution > 1024 {
            return bad("resolution must be in 2..=1024");
        }
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return bad("voxel_size must be positive");
        }
        if !(self.truncation >= self.voxel_size) || !self.truncation.is_finite() {
            return bad("truncation must be at least one voxel");
        }
        if !self.origin.is_finite() {
            return bad("origin must be finite");
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution.pow(3)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.resolution;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel_size
    }

    /// Continuous voxel-center coordinates: voxel `i` sits at `i`.
    #[inline]
    pub fn to_index_space(&self, p: Vec3) -> Vec3 {
        (p - self.origin) / self.voxel_size - Vec3::splat(0.5)
    }

    #[inline]
    pub fn from_index_space(&self, u: Vec3) -> Vec3 {
        self.origin + (u + Vec3::splat(0.5)) * self.voxel_size
    }

    pub fn upper_corner(&self) -> Vec3 {
        self.origin + Vec3::splat(self.resolution as f64 * self.voxel_size)
    }
}

/// Per-voxel evidence state of a TSDF sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weight {
    Observed,
    Unobserved,
}

/// Truncated signed distance normalized to `[-1, 1]`; positive is free space.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    pub spec: GridSpec,
    pub values: Vec<f32>,
    pub weights: Vec<Weight>,
}

impl TsdfVolume {
    pub fn new(spec: GridSpec, values: Vec<f32>, weights: Vec<Weight>) -> Result<Self, VolumeError> {
        spec.validate()?;
        if values.len() != spec.len() || weights.len() != spec.len() {
            return Err(VolumeError::InvalidGrid(format!("expected {} voxels", spec.len())));
        }
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(VolumeError::InvalidGrid("TSDF values must lie in [-1, 1]".into()));
        }
        Ok(TsdfVolume { spec, values, weights })
    }

    pub fn observed_count(&self) -> usize {
        self.weights.iter().filter(|w| **w == Weight::Observed).count()
    }
}

/// Occupancy probabilities on a [`GridSpec`] lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    pub values: Vec<f32>,
}

impl OccupancyGrid {
    pub fn new(spec: GridSpec, values: Vec<f32>) -> Result<Self, VolumeError> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(VolumeError::InvalidGrid(format!("expected {} voxels", spec.len())));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(VolumeError::InvalidGrid("occupancy must lie in [0, 1]".into()));
        }
        Ok(OccupancyGrid { spec, values })
    }

    /// Voxel value with zero padding outside the lattice.
    #[inline]
    pub fn voxel(&self, i: i64, j: i64, k: i64) -> f64 {
        let n = self.spec.resolution as i64;
        if i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n {
            0.0
        } else {
            self.values[self.spec.index(i as usize, j as usize, k as usize)] as f64
        }
    }

    /// Trilinear interpolation in voxel-center index space, treating the
    /// field as zero beyond the lattice.
    #[inline]
    pub fn sample_index(&self, u: Vec3) -> f64 {
        let (fx, fy, fz) = (u.x.floor(), u.y.floor(), u.z.floor());
        let (tx, ty, tz) = (u.x - fx, u.y - fy, u.z - fz);
        let (i, j, k) = (fx as i64, fy as i64, fz as i64);
        let c = |di, dj, dk| self.voxel(i + di, j + dj, k + dk);
        let x00 = c(0, 0, 0) * (1.0 - tx) + c(1, 0, 0) * tx;
        let x10 = c(0, 1, 0) * (1.0 - tx) + c(1, 1, 0) * tx;
        let x01 = c(0, 0, 1) * (1.0 - tx) + c(1, 0, 1) * tx;
        let x11 = c(0, 1, 1) * (1.0 - tx) + c(1, 1, 1) * tx;
        let y0 = x00 * (1.0 - ty) + x10 * ty;
        let y1 = x01 * (1.0 - ty) + x11 * ty;
        y0 * (1.0 - tz) + y1 * tz
    }

    /// Trilinear interpolation at a canonical-frame point.
    pub fn sample(&self, p: Vec3) -> f64 {
        self.sample_index(self.spec.to_index_space(p))
    }

    pub fn occupied_count(&self, iso: f32) -> usize {
        self.values.iter().filter(|&&v| v >= iso).count()
    }
}

/// `‖∇P(v)‖` by central differences of the trilinear interpolant with step
/// `h = voxel_size / 2`, in probability per unit length.
pub fn vertex_confidence(occ: &OccupancyGrid, v: Vec3) -> Result<f64, VolumeError> {
    let s = &occ.spec;
    let lo = s.origin + Vec3::splat(s.voxel_size);
    let hi = s.upper_corner() - Vec3::splat(s.voxel_size);
    if !v.is_finite() || v.x < lo.x || v.y < lo.y || v.z < lo.z || v.x > hi.x || v.y > hi.y || v.z > hi.z {
        return Err(VolumeError::OutOfBounds(v.to_array()));
    }
    let h = s.voxel_size / 2.0;
    let d = |e: Vec3| (occ.sample(v + e * h) - occ.sample(v - e * h)) / (2.0 * h);
    Ok(Vec3::new(d(Vec3::X), d(Vec3::Y), d(Vec3::Z)).norm())
}

/// Projective TSDF of a single view.
///
/// Each voxel center `c` takes the cloud point nearest to it (Euclidean)
/// among those within an angular cone of half-angle `voxel_size / ‖c − cam‖`
/// around the camera ray through `c`. The signed distance is
/// `‖p − cam‖ − ‖c − cam‖`. Within the truncation band the voxel is
/// Observed with `sdf/δ`; in front of the band it is Observed free space
/// (+1); behind the band it is Unobserved (−1); voxels whose ray sees no
/// point are Unobserved (+1).
pub fn voxelize_tsdf(cloud: &PointCloud, camera_center: Vec3, spec: &GridSpec) -> Result<TsdfVolume, VolumeError> {
    spec.validate()?;
    if cloud.is_empty() {
        return Err(VolumeError::EmptyCloud);
    }
    let index = ConeIndex::new(&cloud.points, camera_center);
    let delta = spec.truncation;
    let voxels: Vec<(f32, Weight)> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = spec.coords(idx);
            let c = spec.center(i, j, k);
            let dc = c.distance(camera_center);
            let Some(p) = index.query(c, dc, spec.voxel_size / dc) else {
                return (1.0, Weight::Unobserved);
            };
            let sdf = p.distance(camera_center) - dc;
            if sdf > delta {
                (1.0, Weight::Observed)
            } else if sdf < -delta {
                (-1.0, Weight::Unobserved)
            } else {
                ((sdf / delta).clamp(-1.0, 1.0) as f32, Weight::Observed)
            }
        })
        .collect();
    let (values, weights) = voxels.into_iter().unzip();
    TsdfVolume::new(*spec, values, weights)
}

/// Cloud points binned by gnomonic (central) projection about the mean
/// viewing direction, for angular cone queries from the camera center.
struct ConeIndex<'a> {
    points: &'a [Vec3],
    dirs: Vec<Vec3>,
    cam: Vec3,
    axis: Vec3,
    e1: Vec3,
    e2: Vec3,
    min: (f64, f64),
    bin: f64,
    dims: (usize, usize),
    /// Start offsets into `items` per bin (CSR layout).
    starts: Vec<u32>,
    items: Vec<u32>,
    /// Sec² of the widest point angle, bounding gnomonic stretch.
    stretch: f64,
}

/// Directions more than ~72° off the mean view axis are not indexed.
const MIN_AXIS_COS: f64 = 0.3;

impl<'a> ConeIndex<'a> {
    fn new(points: &'a [Vec3], cam: Vec3) -> Self {
        let dirs: Vec<Vec3> = points.iter().map(|p| UnitVec3::new(*p - cam).map(|u| u.get()).unwrap_or(Vec3::ZERO)).collect();
        let mean = dirs.iter().fold(Vec3::ZERO, |a, d| a + *d);
        let axis = mean.normalize().map(|u| u.get()).unwrap_or(Vec3::Z);
        let helper = if axis.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let e1 = axis.cross(helper).normalize().expect("helper not parallel").get();
        let e2 = axis.cross(e1);
        let gn = |d: Vec3| {
            let c = d.dot(axis);
            (c > MIN_AXIS_COS).then(|| (d.dot(e1) / c, d.dot(e2) / c))
        };
        let g: Vec<Option<(f64, f64)>> = dirs.iter().map(|d| gn(*d)).collect();
        let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
        let mut min_cos: f64 = 1.0;
        for (d, q) in dirs.iter().zip(&g) {
            if let Some((x, y)) = q {
                lo = (lo.0.min(*x), lo.1.min(*y));
                hi = (hi.0.max(*x), hi.1.max(*y));
                min_cos = min_cos.min(d.dot(axis));
            }
        }
        // ~4 points per bin for a uniformly covered footprint, clamped to a sane grid
        let n_valid = g.iter().filter(|q| q.is_some()).count().max(1);
        let area = ((hi.0 - lo.0) * (hi.1 - lo.1)).max(1e-12);
        let bin = (area * 4.0 / n_valid as f64).sqrt().max((hi.0 - lo.0).max(hi.1 - lo.1) / 2048.0).max(1e-9);
        let dims = (((hi.0 - lo.0) / bin) as usize + 1, ((hi.1 - lo.1) / bin) as usize + 1);
        let cell = |x: f64, y: f64| (((x - lo.0) / bin) as usize).min(dims.0 - 1) + dims.0 * (((y - lo.1) / bin) as usize).min(dims.1 - 1);
        let mut counts = vec![0u32; dims.0 * dims.1 + 1];
        for q in g.iter().flatten() {
            counts[cell(q.0, q.1) + 1] += 1;
        }
        for b in 1..counts.len() {
            counts[b] += counts[b - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; *starts.last().unwrap() as usize];
        for (i, q) in g.iter().enumerate() {
            if let Some((x, y)) = q {
                let b = cell(*x, *y);
                items[fill[b] as usize] = i as u32;
                fill[b] += 1;
            }
        }
        ConeIndex {
            points,
            dirs,
            cam,
            axis,
            e1,
            e2,
            min: lo,
            bin,
            dims,
            starts,
            items,
            stretch: 1.0 / (min_cos * min_cos),
        }
    }

    /// Nearest point to `c` among points whose viewing direction is within
    /// `half_angle` of the ray through `c`.
    fn query(&self, c: Vec3, dist_c: f64, half_angle: f64) -> Option<Vec3> {
        let u = (c - self.cam) / dist_c;
        let cosu = u.dot(self.axis);
        if cosu <= MIN_AXIS_COS * 0.5 {
            return None;
        }
        let (gx, gy) = (u.dot(self.e1) / cosu, u.dot(self.e2) / cosu);
        // gnomonic distances stretch by at most sec² of the angle off-axis
        let reach = half_angle * self.stretch.max(1.0 / (cosu * cosu)) * 1.05;
        let to_bin = |x: f64, lo: f64, n: usize| -> Option<(usize, usize)> {
            let a = ((x - reach - lo) / self.bin).floor();
            let b = ((x + reach - lo) / self.bin).floor();
            if b < 0.0 || a > (n - 1) as f64 {
                None
            } else {
                Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
            }
        };
        let (bx0, bx1) = to_bin(gx, self.min.0, self.dims.0)?;
        let (by0, by1) = to_bin(gy, self.min.1, self.dims.1)?;
        let cos_limit = half_angle.cos();
        let mut best: Option<(f64, u32)> = None;
        for by in by0..=by1 {
            for bx in bx0..=bx1 {
                let b = by * self.dims.0 + bx;
                for &i in &self.items[self.starts[b] as usize..self.starts[b + 1] as usize] {
                    if self.dirs[i as usize].dot(u) < cos_limit {
                        continue;
                    }
                    let d2 = self.points[i as usize].distance_squared(c);
                    if best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && i < bi)) {
                        best = Some((d2, i));
                    }
                }
            }
        }
        best.map(|(_, i)| self.points[i as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense patch on the plane z = `z0`, seen from a camera on the +Z axis.
    fn plane_patch(z0: f64, half: f64, step: f64) -> PointCloud {
        let n = (2.0 * half / step) as i64;
        let mut pts = Vec::new();
        for a in 0..=n {
            for b in 0..=n {
                pts.push(Vec3::new(-half + a as f64 * step, -half + b as f64 * step, z0));
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn sign_flips_across_observed_plane() {
        let spec = GridSpec::unit_cube(32);
        let cam = Vec3::new(0.0, 0.0, 3.0);
        let tsdf = voxelize_tsdf(&plane_patch(0.01, 0.2, 0.002), cam, &spec).unwrap();
        let h = spec.voxel_size;
        // voxel centers on the axis column i = j = 16 sit at z = (k + 0.5)h − 0.5
        for k in 0..32 {
            let z = spec.center(16, 16, k).z;
            let idx = spec.index(16, 16, k);
            let v = tsdf.values[idx];
            if z > 0.01 + 0.5 * h {
                assert!(v > 0.0, "k={k} z={z} v={v}");
                assert_eq!(tsdf.weights[idx], Weight::Observed);
            } else if z < 0.01 - 0.5 * h {
                assert!(v < 0.0, "k={k} z={z} v={v}");
            }
        }
        // far behind the patch is occluded
        assert_eq!(tsdf.weights[spec.index(16, 16, 0)], Weight::Unobserved);
        assert_eq!(tsdf.values[spec.index(16, 16, 0)], -1.0);
        // rays that miss the patch see nothing
        assert_eq!(tsdf.weights[spec.index(1, 1, 20)], Weight::Unobserved);
        assert_eq!(tsdf.values[spec.index(1, 1, 20)], 1.0);
    }

    #[test]
    fn voxels_containing_points_lie_in_the_surface_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = GridSpec::unit_cube(64);
        let cam = Vec3::new(0.3, -2.0, 1.5);
        // a tilted sphere cap seen from the camera
        let mut pts = Vec::new();
        while pts.len() < 40_000 {
            let d = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            if let Some(u) = d.normalize() {
                let p = u.get() * 0.3;
                if (p - cam).dot(p) < 0.0 {
                    pts.push(p);
                }
            }
        }
        let cloud = PointCloud::new(pts);
        let tsdf = voxelize_tsdf(&cloud, cam, &spec).unwrap();
        let bound = (spec.voxel_size / spec.truncation) as f32;
        for p in cloud.points.iter().step_by(97) {
            let u = spec.to_index_space(*p);
            let (i, j, k) = ((u.x + 0.5) as usize, (u.y + 0.5) as usize, (u.z + 0.5) as usize);
            let idx = spec.index(i, j, k);
            assert_eq!(tsdf.weights[idx], Weight::Observed);
            assert!(tsdf.values[idx].abs() <= bound, "{} > {bound}", tsdf.values[idx]);
        }
    }

    #[test]
    fn empty_cloud_rejected() {
        let spec = GridSpec::unit_cube(8);
        assert_eq!(voxelize_tsdf(&PointCloud::default(), Vec3::Z, &spec), Err(VolumeError::EmptyCloud));
    }

    fn ramp_grid(a: f64) -> OccupancyGrid {
        let spec = GridSpec::unit_cube(64);
        let values = (0..spec.len())
            .map(|idx| {
                let (i, j, k) = spec.coords(idx);
                (a * spec.center(i, j, k).x + 0.5).clamp(0.0, 1.0) as f32
            })
            .collect();
        OccupancyGrid::new(spec, values).unwrap()
    }

    #[test]
    fn confidence_of_constant_and_ramp() {
        let spec = GridSpec::unit_cube(16);
        let flat = OccupancyGrid::new(spec, vec![0.5; spec.len()]).unwrap();
        assert_eq!(vertex_confidence(&flat, Vec3::new(0.1, -0.2, 0.3)).unwrap(), 0.0);
        let ramp = ramp_grid(5.0);
        for x in [-0.05, 0.0, 0.031, 0.07] {
            let c = vertex_confidence(&ramp, Vec3::new(x, 0.12, -0.2)).unwrap();
            assert!((c - 5.0).abs() <= 0.1, "{c}");
        }
        assert!(matches!(vertex_confidence(&ramp, Vec3::new(0.499, 0.0, 0.0)), Err(VolumeError::OutOfBounds(_))));
    }

    #[test]
    fn confidence_peaks_at_smoothed_sphere_surface() {
        let spec = GridSpec::unit_cube(64);
        let raw: Vec<f32> = (0..spec.len())
            .map(|idx| {
                let (i, j, k) = spec.coords(idx);
                (spec.center(i, j, k).norm() <= 0.25) as u8 as f32
            })
            .collect();
        let occ = complete::box_filter(&spec, &raw);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let u = d.normalize().unwrap().get();
            let at = vertex_confidence(&occ, u * 0.25).unwrap();
            let away = vertex_confidence(&occ, u * (0.25 + 3.0 * spec.voxel_size)).unwrap();
            assert!(at > away, "{at} <= {away}");
        }
    }

    #[test]
    fn confidence_is_translation_covariant() {
        let a = ramp_grid(3.0);
        let mut b = a.clone();
        let shift = Vec3::new(0.125, -0.25, 0.0625);
        b.spec.origin = b.spec.origin + shift;
        for p in [Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.1, -0.1, 0.2)] {
            let ca = vertex_confidence(&a, p).unwrap();
            let cb = vertex_confidence(&b, p + shift).unwrap();
            assert!((ca - cb).abs() <= 1e-9);
        }
    }
}
