//! Shape accuracy between surface samples: accuracy, completeness,
//! Chamfer-L1 (their mean, un-squared Euclidean distances) and normal
//! consistency (mean absolute normal dot product of nearest pairs).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{UnitVec3, Vec3};
use crate::kdtree::KdTree;
use crate::mesh::{MeshError, TriMesh, DEGENERATE_AREA};

pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSurface {
    pub points: Vec<Vec3>,
    pub normals: Vec<UnitVec3>,
}

impl SampledSurface {
    pub fn new(points: Vec<Vec3>, normals: Vec<UnitVec3>) -> Result<Self, MeshError> {
        if points.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        if points.len() != normals.len() {
            return Err(MeshError::AttributeLength { name: "normals", got: normals.len(), expected: points.len() });
        }
        Ok(SampledSurface { points, normals })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn scaled(&self, k: f64) -> SampledSurface {
        SampledSurface { points: self.points.iter().map(|p| *p * k).collect(), normals: self.normals.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub chamfer_l1: f64,
    /// Mean distance from predicted samples to the ground truth.
    pub accuracy: f64,
    /// Mean distance from ground-truth samples to the prediction.
    pub completeness: f64,
    pub normal_consistency: f64,
}

/// Area-weighted uniform samples with face normals, deterministic in `seed`.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<SampledSurface, MeshError> {
    mesh.validate()?;
    let faces: Vec<(usize, f64)> =
        (0..mesh.triangles.len()).map(|t| (t, mesh.triangle_area(t))).filter(|(_, a)| *a > DEGENERATE_AREA).collect();
    if faces.is_empty() || n == 0 {
        return Err(MeshError::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(faces.len());
    let mut total = 0.0;
    for (_, a) in &faces {
        total += a;
        cdf.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random::<f64>() * total;
        let f = cdf.partition_point(|&c| c <= x).min(faces.len() - 1);
        let t = faces[f].0;
        let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        let [a, b, c] = mesh.corners(t);
        points.push(a + (b - a) * r1 + (c - a) * r2);
        normals.push(UnitVec3::new(mesh.face_cross(t)).expect("non-degenerate face"));
    }
    SampledSurface::new(points, normals)
}

/// Directed sums from `from` onto `to`: (Σ distance, Σ |n·n'|).
fn directed(from: &SampledSurface, to: &SampledSurface, tree: &KdTree) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = from
        .points
        .par_iter()
        .zip(&from.normals)
        .map(|(p, n)| {
            let (j, d2) = tree.nearest(*p).expect("nonempty target");
            (d2.sqrt(), n.dot(to.normals[j].get()).abs().min(1.0))
        })
        .collect();
    // sequential reduction keeps the sum independent of thread scheduling
    pairs.iter().fold((0.0, 0.0), |(d, c), (pd, pc)| (d + pd, c + pc))
}

pub fn shape_metrics(pred: &SampledSurface, gt: &SampledSurface) -> ShapeMetrics {
    let gt_tree = KdTree::new(&gt.points);
    let pred_tree = KdTree::new(&pred.points);
    let (acc_sum, acc_nc) = directed(pred, gt, &gt_tree);
    let (comp_sum, comp_nc) = directed(gt, pred, &pred_tree);
    combine(acc_sum, acc_nc, pred.len(), comp_sum, comp_nc, gt.len())
}

fn combine(acc_sum: f64, acc_nc: f64, n_pred: usize, comp_sum: f64, comp_nc: f64, n_gt: usize) -> ShapeMetrics {
    let accuracy = acc_sum / n_pred as f64;
    let completeness = comp_sum / n_gt as f64;
    ShapeMetrics {
        chamfer_l1: 0.5 * (accuracy + completeness),
        accuracy,
        completeness,
        normal_consistency: 0.5 * (acc_nc / n_pred as f64 + comp_nc / n_gt as f64),
    }
}

/// O(n·m) reference with the same nearest-neighbor tie rule as the tree.
pub fn shape_metrics_brute_force(pred: &SampledSurface, gt: &SampledSurface) -> ShapeMetrics {
    let dir = |from: &SampledSurface, to: &SampledSurface| {
        let mut d = 0.0;
        let mut c = 0.0;
        for (p, n) in from.points.iter().zip(&from.normals) {
            let (j, d2) = crate::kdtree::brute_force_nearest(&to.points, *p).expect("nonempty");
            d += d2.sqrt();
            c += n.dot(to.normals[j].get()).abs().min(1.0);
        }
        (d, c)
    };
    let (a, an) = dir(pred, gt);
    let (b, bn) = dir(gt, pred);
    combine(a, an, pred.len(), b, bn, gt.len())
}
