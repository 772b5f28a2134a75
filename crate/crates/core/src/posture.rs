//! Per-vertex grasp posture labels and their transfer from a hand-labeled
//! canonical reference onto new instances.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::io::{self, IoError};
use crate::kdtree::KdTree;
use crate::mesh::TriMesh;
use crate::scene::objects::{canonical_scale, generate_object_with_parts, Category, ShapeParams, SurfacePart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PostureLabel {
    #[serde(rename = "NG")]
    NonGraspable,
    #[serde(rename = "MW")]
    MediumWrap,
    #[serde(rename = "T")]
    Tripod,
}

impl PostureLabel {
    pub const ALL: [PostureLabel; 3] = [PostureLabel::NonGraspable, PostureLabel::MediumWrap, PostureLabel::Tripod];

    /// Value of the PLY `posture` property.
    pub fn code(self) -> u8 {
        match self {
            PostureLabel::NonGraspable => 0,
            PostureLabel::MediumWrap => 1,
            PostureLabel::Tripod => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PostureLabel::NonGraspable),
            1 => Some(PostureLabel::MediumWrap),
            2 => Some(PostureLabel::Tripod),
            _ => None,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            PostureLabel::NonGraspable => "NG",
            PostureLabel::MediumWrap => "MW",
            PostureLabel::Tripod => "T",
        }
    }
}

#[derive(Debug, Error)]
pub enum PostureError {
    #[error("target and reference bounding boxes overlap with IoU {iou:.3} < 0.10; is the target canonicalized?")]
    FrameMismatch { iou: f64 },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("reference has {missing} unlabeled vertices")]
    MissingLabels { missing: usize },
    #[error("failed to parse reference: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// A canonical-frame mesh where every vertex carries a posture label.
#[derive(Debug, Clone)]
pub struct LabeledCanonicalMesh {
    pub mesh: TriMesh,
    pub category: Option<Category>,
    labels: Vec<PostureLabel>,
}

impl LabeledCanonicalMesh {
    pub fn new(mesh: TriMesh, category: Option<Category>) -> Result<Self, PostureError> {
        if mesh.vertices.is_empty() {
            return Err(PostureError::EmptyMesh);
        }
        let labels = match &mesh.postures {
            Some(l) if l.len() == mesh.vertices.len() => l.clone(),
            Some(l) => return Err(PostureError::MissingLabels { missing: mesh.vertices.len().saturating_sub(l.len()) }),
            None => return Err(PostureError::MissingLabels { missing: mesh.vertices.len() }),
        };
        Ok(LabeledCanonicalMesh { mesh, category, labels })
    }

    pub fn labels(&self) -> &[PostureLabel] {
        &self.labels
    }

    pub fn save(&self, path: &Path) -> Result<(), PostureError> {
        io::ply::write_ply(path, &self.mesh)?;
        Ok(())
    }
}

/// Anything that assigns a posture label to each vertex of a canonical mesh.
pub trait PosturePredictor {
    fn predict(&self, target: &TriMesh) -> Result<Vec<PostureLabel>, PostureError>;
}

/// k-nearest-neighbor majority vote against a labeled reference.
pub struct KnnTransfer<'a> {
    reference: &'a LabeledCanonicalMesh,
    tree: KdTree,
    k: usize,
}

impl<'a> KnnTransfer<'a> {
    pub fn new(reference: &'a LabeledCanonicalMesh, k: usize) -> Result<Self, PostureError> {
        if k == 0 {
            return Err(PostureError::InvalidK);
        }
        Ok(KnnTransfer { reference, tree: KdTree::new(&reference.mesh.vertices), k })
    }

    fn vote(&self, q: Vec3) -> PostureLabel {
        let nn = self.tree.k_nearest(q, self.k);
        let labels = self.reference.labels();
        let mut counts = [0usize; 3];
        for &(i, _) in &nn {
            counts[labels[i].code() as usize] += 1;
        }
        let top = *counts.iter().max().expect("three counters");
        let winners: Vec<PostureLabel> =
            PostureLabel::ALL.iter().copied().filter(|l| counts[l.code() as usize] == top).collect();
        if winners.len() == 1 {
            winners[0]
        } else {
            labels[nn[0].0]
        }
    }
}

impl PosturePredictor for KnnTransfer<'_> {
    fn predict(&self, target: &TriMesh) -> Result<Vec<PostureLabel>, PostureError> {
        if target.vertices.is_empty() {
            return Err(PostureError::EmptyMesh);
        }
        let iou = bbox_iou(&target.vertices, &self.reference.mesh.vertices);
        if iou < 0.10 {
            return Err(PostureError::FrameMismatch { iou });
        }
        use rayon::prelude::*;
        Ok(target.vertices.par_iter().map(|v| self.vote(*v)).collect())
    }
}

/// Attaches labels to `target` by majority vote over the `k` nearest
/// reference vertices (ties go to the single nearest neighbor's label).
pub fn transfer_postures(target: &TriMesh, reference: &LabeledCanonicalMesh, k: usize) -> Result<TriMesh, PostureError> {
    let labels = KnnTransfer::new(reference, k)?.predict(target)?;
    let mut out = target.clone();
    out.postures = Some(labels);
    Ok(out)
}

fn bbox(points: &[Vec3]) -> (Vec3, Vec3) {
    points.iter().fold(
        (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY)),
        |(lo, hi), &p| (lo.min(p), hi.max(p)),
    )
}

fn bbox_iou(a: &[Vec3], b: &[Vec3]) -> f64 {
    let (alo, ahi) = bbox(a);
    let (blo, bhi) = bbox(b);
    let vol = |lo: Vec3, hi: Vec3| {
        let d = (hi - lo).max(Vec3::ZERO);
        d.x * d.y * d.z
    };
    let inter = vol(alo.max(blo), ahi.min(bhi));
    let union = vol(alo, ahi) + vol(blo, bhi) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn load_labeled_reference(path: &Path) -> Result<LabeledCanonicalMesh, PostureError> {
    let mesh = io::ply::read_ply(path).map_err(|e| match e {
        IoError::Parse(m) => PostureError::Parse(m),
        other => PostureError::Io(other),
    })?;
    let category = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok());
    LabeledCanonicalMesh::new(mesh, category)
}

/// Fraction of the height below the rim treated as the "rim band".
const RIM_BAND: f64 = 0.15;

/// The shipped labeling convention: cup and bottle bodies MW; cup rim and
/// bottle neck/cap T; bowl rim T; interiors, bases and handles NG. The mesh
/// is the category's default instance scaled into the canonical frame.
pub fn build_reference(category: Category) -> LabeledCanonicalMesh {
    use PostureLabel::*;
    use SurfacePart::*;
    let params = ShapeParams::default_for(category);
    let obj = generate_object_with_parts(category, Some(&params), 0).expect("default params are valid");
    let (_, hi) = params.bounding_box();
    let rim_z = hi.z;
    let height = 2.0 * hi.z;
    let labels: Vec<PostureLabel> = obj
        .mesh
        .vertices
        .iter()
        .zip(&obj.parts)
        .map(|(v, part)| {
            let in_rim_band = v.z >= rim_z - RIM_BAND * height;
            match (category, part) {
                (_, Rim) => Tripod,
                (_, OuterBottom) | (_, InnerBottom) | (_, Handle) => NonGraspable,
                (Category::Cup, OuterWall) => {
                    if in_rim_band {
                        Tripod
                    } else {
                        MediumWrap
                    }
                }
                (Category::Bowl, OuterWall) => {
                    if in_rim_band {
                        Tripod
                    } else {
                        NonGraspable
                    }
                }
                (_, InnerWall) => {
                    if v.z >= rim_z - 0.5 * RIM_BAND * height {
                        Tripod
                    } else {
                        NonGraspable
                    }
                }
                (Category::Bottle, OuterWall) | (Category::Bottle, Shoulder) => MediumWrap,
                (_, Neck) | (_, Cap) => Tripod,
                (_, Shoulder) => MediumWrap,
            }
        })
        .collect();
    let s = canonical_scale(&obj.mesh);
    let mut mesh = obj.mesh.transformed(&crate::geometry::SimilarityPose {
        scale: s,
        ..Default::default()
    });
    mesh.postures = Some(labels);
    LabeledCanonicalMesh::new(mesh, Some(category)).expect("labels complete")
}

static CUP_PLY: &[u8] = include_bytes!("../assets/references/cup.ply");
static BOTTLE_PLY: &[u8] = include_bytes!("../assets/references/bottle.ply");
static BOWL_PLY: &[u8] = include_bytes!("../assets/references/bowl.ply");

/// The repo-shipped labeled reference for `category`, decoded once.
pub fn shipped_reference(category: Category) -> &'static LabeledCanonicalMesh {
    use std::sync::OnceLock;
    static CACHE: [OnceLock<LabeledCanonicalMesh>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let (slot, bytes) = match category {
        Category::Cup => (0, CUP_PLY),
        Category::Bottle => (1, BOTTLE_PLY),
        Category::Bowl => (2, BOWL_PLY),
    };
    CACHE[slot].get_or_init(|| {
        let mesh = io::ply::decode_ply(bytes).expect("shipped reference parses");
        LabeledCanonicalMesh::new(mesh, Some(category)).expect("shipped reference is labeled")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SimilarityPose;

    #[test]
    fn shipped_references_match_builder() {
        for c in [Category::Cup, Category::Bottle, Category::Bowl] {
            let built = io::ply::encode_ply(&build_reference(c).mesh).unwrap();
            let shipped = io::ply::encode_ply(&shipped_reference(c).mesh).unwrap();
            assert!(built == shipped, "{} reference is stale; rerun the write_references example", c.name());
        }
    }

    #[test]
    fn shipped_cup_has_three_labels() {
        let r = shipped_reference(Category::Cup);
        for l in PostureLabel::ALL {
            assert!(r.labels().contains(&l), "missing {l:?}");
        }
    }

    #[test]
    fn self_transfer_is_identity() {
        let r = build_reference(Category::Cup);
        let out = transfer_postures(&r.mesh, &r, 5).unwrap();
        // k = 1 is exactly the identity; k = 5 must agree on nearly all vertices
        let exact = transfer_postures(&r.mesh, &r, 1).unwrap();
        assert_eq!(exact.postures.as_deref().unwrap(), r.labels());
        let agree = out.postures.unwrap().iter().zip(r.labels()).filter(|(a, b)| a == b).count();
        assert!(agree as f64 >= 0.97 * r.labels().len() as f64);
    }

    #[test]
    fn scaled_self_transfer_oracle() {
        let r = build_reference(Category::Cup);
        let scaled = r.mesh.transformed(&SimilarityPose { scale: 1.1, ..Default::default() });
        let out = transfer_postures(&scaled, &r, 1).unwrap();
        let labels = out.postures.unwrap();
        let tree = KdTree::new(&r.mesh.vertices);
        let mut eligible = 0;
        let mut agree = 0;
        for (i, v) in scaled.vertices.iter().enumerate() {
            if tree.nearest(*v).unwrap().0 == i {
                eligible += 1;
                agree += (labels[i] == r.labels()[i]) as usize;
            }
        }
        assert_eq!(agree, eligible);
        assert!(eligible as f64 >= 0.05 * scaled.vertices.len() as f64);
    }

    #[test]
    fn constant_reference_gives_constant_labels() {
        let mut r = build_reference(Category::Bowl);
        r.labels = vec![PostureLabel::NonGraspable; r.labels.len()];
        let target = build_reference(Category::Cup).mesh;
        let out = transfer_postures(&target, &r, 5).unwrap();
        assert!(out.postures.unwrap().iter().all(|&l| l == PostureLabel::NonGraspable));
    }

    #[test]
    fn frame_mismatch_detected() {
        let r = build_reference(Category::Cup);
        let far = r.mesh.transformed(&SimilarityPose { translation: Vec3::new(3.0, 0.0, 0.0), ..Default::default() });
        assert!(matches!(transfer_postures(&far, &r, 5), Err(PostureError::FrameMismatch { .. })));
        assert!(matches!(transfer_postures(&r.mesh, &r, 0), Err(PostureError::InvalidK)));
    }

    #[test]
    fn permutation_invariance() {
        let r = build_reference(Category::Bottle);
        let target = build_reference(Category::Bottle).mesh.transformed(&SimilarityPose { scale: 0.95, ..Default::default() });
        let base = transfer_postures(&target, &r, 5).unwrap().postures.unwrap();
        let mut perm = target.clone();
        perm.vertices.reverse();
        perm.triangles.clear();
        let rev = transfer_postures(&perm, &r, 5).unwrap().postures.unwrap();
        let mut rev = rev;
        rev.reverse();
        assert_eq!(base, rev);
    }

    #[test]
    fn references_carry_expected_label_sets() {
        let cup = build_reference(Category::Cup);
        let distinct: std::collections::BTreeSet<_> = cup.labels().iter().collect();
        assert_eq!(distinct.len(), 3);
        let bowl = build_reference(Category::Bowl);
        assert!(bowl.labels().contains(&PostureLabel::Tripod));
        assert!(bowl.labels().contains(&PostureLabel::NonGraspable));
    }

    #[test]
    fn missing_labels_rejected() {
        let mut m = build_reference(Category::Cup).mesh;
        m.postures = None;
        assert!(matches!(LabeledCanonicalMesh::new(m, None), Err(PostureError::MissingLabels { .. })));
    }
}
