//! Grasp selection and planning on a labeled, confidence-annotated mesh in the
//! robot base frame, plus a kinematic feasibility check that stands in for
//! executing the grasp.
//!
//! Conventions: `normal` on a candidate is the outward surface normal. The
//! hand travels along `−normal`; the compensation axis is built from that
//! travel direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{horizontal_projection, Frame, Rotation3, UnitVec3, Vec3};
use crate::mesh::TriMesh;
use crate::posture::PostureLabel;
use crate::scene::ray_triangle;

/// Below this norm a projected axis is treated as vanished.
pub const AXIS_EPS: f64 = 1e-9;
/// Rounding slack on the inclusive inclination threshold.
const INCLINATION_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no vertex passes the octant, label and height filters")]
    NoGraspableVertex,
    #[error("side approach needs a non-vertical normal")]
    DegenerateNormal,
    #[error("compensation axis vanishes while its displacement is nonzero")]
    DegenerateAxis,
    #[error("mesh lacks {0}")]
    MissingAttribute(&'static str),
    #[error("invalid workspace config: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Ray layout of the simulated hand, in the wrist frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandGeometry {
    /// Ulnar (ŷ_h) offsets of index, middle, ring and little finger rays (m).
    pub finger_offsets: [f64; 4],
    /// Length of every finger and thumb ray (m).
    pub ray_length: f64,
    /// Distal offset of the thumb ray origin from the palm center (m); the
    /// thumb closes across the object in front of the palm, not along the
    /// palm's own tangent plane.
    pub thumb_depth: f64,
    /// Clearance kept from the object along the palm path (m).
    pub path_clearance: f64,
}

impl Default for HandGeometry {
    fn default() -> Self {
        HandGeometry { finger_offsets: [-0.040, -0.020, 0.020, 0.040], ray_length: 0.100, thumb_depth: 0.030, path_clearance: 0.005 }
    }
}

/// Motor-current success rule of the physical hand. Recorded for reference;
/// the simulator uses ray contacts instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurrentRule {
    pub current_ma: f64,
    pub hold_s: f64,
    pub min_motors_medium_wrap: usize,
    pub min_motors_tripod: usize,
}

impl Default for CurrentRule {
    fn default() -> Self {
        CurrentRule { current_ma: 400.0, hold_s: 4.0, min_motors_medium_wrap: 4, min_motors_tripod: 3 }
    }
}

/// Physical constants of the grasping workspace (meters, radians), all in
/// the robot base frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub table_height: f64,
    pub inclination_threshold_rad: f64,
    pub min_side_grasp_z: f64,
    pub approach_offset: f64,
    pub travel_distance: f64,
    pub palm_to_fingertip: f64,
    /// Wrist to middle fingertip in flat configuration (l).
    pub wrist_to_fingertip: f64,
    pub lift_side: f64,
    pub lift_top: f64,
    pub side_wrist_extension_rad: f64,
    pub idle_waypoint: Vec3,
    /// Reachability is a sphere about the base origin.
    pub reach_radius: f64,
    pub hand: HandGeometry,
    pub success_rule: CurrentRule,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            // 73 mm metallic table + 120 mm wooden plate above the base
            table_height: 0.193,
            inclination_threshold_rad: std::f64::consts::FRAC_PI_4,
            min_side_grasp_z: 0.045,
            approach_offset: 0.050,
            travel_distance: 0.150,
            palm_to_fingertip: 0.100,
            wrist_to_fingertip: 0.180,
            lift_side: 0.100,
            lift_top: 0.200,
            side_wrist_extension_rad: std::f64::consts::FRAC_PI_4,
            idle_waypoint: Vec3::new(-0.3, 0.4, 0.6),
            reach_radius: 0.855,
            hand: HandGeometry::default(),
            success_rule: CurrentRule::default(),
        }
    }
}

impl WorkspaceConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        let lengths = [
            ("approach_offset", self.approach_offset),
            ("travel_distance", self.travel_distance),
            ("palm_to_fingertip", self.palm_to_fingertip),
            ("wrist_to_fingertip", self.wrist_to_fingertip),
            ("lift_side", self.lift_side),
            ("lift_top", self.lift_top),
            ("min_side_grasp_z", self.min_side_grasp_z),
            ("reach_radius", self.reach_radius),
            ("hand.ray_length", self.hand.ray_length),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.table_height.is_finite() || !self.idle_waypoint.is_finite() {
            return bad("table_height and idle_waypoint must be finite".into());
        }
        if !(self.hand.path_clearance >= 0.0) {
            return bad("hand.path_clearance must be non-negative".into());
        }
        let t = self.inclination_threshold_rad;
        if !(t > 0.0 && t < std::f64::consts::FRAC_PI_2) {
            return bad(format!("inclination threshold must lie in (0, π/2), got {t}"));
        }
        if (self.travel_distance - (self.approach_offset + self.palm_to_fingertip)).abs() > 1e-12 {
            return bad(format!(
                "travel_distance {} must equal approach_offset {} + palm_to_fingertip {}",
                self.travel_distance, self.approach_offset, self.palm_to_fingertip
            ));
        }
        Ok(())
    }

    /// SHA-256 (hex) of the JSON serialization.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 (hex) of the JSON serialization of any config value.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    /// Vertex index in the source mesh.
    pub index: usize,
    pub vertex: Vec3,
    pub normal: UnitVec3,
    pub confidence: f64,
    pub posture: PostureLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApproachType {
    Side,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SelectionCriterion {
    #[serde(alias = "MaxConfidence", alias = "max_confidence")]
    Confidence,
    #[serde(alias = "Arbitrary")]
    Arbitrary { seed: u64 },
}

impl SelectionCriterion {
    pub fn name(self) -> &'static str {
        match self {
            SelectionCriterion::Confidence => "confidence",
            SelectionCriterion::Arbitrary { .. } => "arbitrary",
        }
    }
}

/// Vertices whose outward normal lies in the closed first octant (not all
/// zero), labeled graspable, and — for side approaches — high enough above
/// the table.
pub fn filter_candidates(mesh: &TriMesh, cfg: &WorkspaceConfig) -> Result<Vec<GraspCandidate>, SolverError> {
    if mesh.normals.len() != mesh.vertices.len() {
        return Err(SolverError::MissingAttribute("normals"));
    }
    let confidence = mesh.confidence.as_ref().ok_or(SolverError::MissingAttribute("confidence"))?;
    let postures = mesh.postures.as_ref().ok_or(SolverError::MissingAttribute("posture labels"))?;
    let out: Vec<GraspCandidate> = (0..mesh.vertices.len())
        .filter_map(|i| {
            let n = mesh.normals[i];
            let d = n.get();
            let in_octant = d.x >= 0.0 && d.y >= 0.0 && d.z >= 0.0 && (d.x > 0.0 || d.y > 0.0 || d.z > 0.0);
            if !in_octant || postures[i] == PostureLabel::NonGraspable {
                return None;
            }
            let v = mesh.vertices[i];
            if classify_approach(n, cfg) == ApproachType::Side && v.z < cfg.table_height + cfg.min_side_grasp_z {
                return None;
            }
            Some(GraspCandidate { index: i, vertex: v, normal: n, confidence: confidence[i] as f64, posture: postures[i] })
        })
        .collect();
    if out.is_empty() {
        return Err(SolverError::NoGraspableVertex);
    }
    Ok(out)
}

/// Highest confidence (ties: lowest vertex index) or a seeded uniform pick.
pub fn select_candidate(cands: &[GraspCandidate], criterion: SelectionCriterion) -> Result<GraspCandidate, SolverError> {
    if cands.is_empty() {
        return Err(SolverError::NoGraspableVertex);
    }
    Ok(match criterion {
        SelectionCriterion::Confidence => *cands
            .iter()
            .reduce(|best, c| {
                if c.confidence > best.confidence || (c.confidence == best.confidence && c.index < best.index) {
                    c
                } else {
                    best
                }
            })
            .expect("nonempty"),
        SelectionCriterion::Arbitrary { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            cands[rng.random_range(0..cands.len())]
        }
    })
}

/// Top iff the normal's inclination above the XY plane is at least the
/// threshold (inclusive).
pub fn classify_approach(n: UnitVec3, cfg: &WorkspaceConfig) -> ApproachType {
    if n.get().z >= cfg.inclination_threshold_rad.sin() - INCLINATION_EPS {
        ApproachType::Top
    } else {
        ApproachType::Side
    }
}

/// Wrist orientation with distal axis `x̂_h = −n` (columns x̂_h, ŷ_h, ẑ_h).
///
/// Side keeps base +Z in the x̂_h–ŷ_h plane; Top keeps it in the x̂_h–ẑ_h
/// plane. A Top frame looking straight down falls back to base −X as the
/// reference for ẑ_h.
pub fn wrist_frame(n: UnitVec3, approach: ApproachType) -> Result<Rotation3, SolverError> {
    let x = -n.get();
    let reject = |a: Vec3| a - x * a.dot(x);
    let up = reject(Vec3::Z);
    let axes = match approach {
        ApproachType::Side => {
            let y = up.normalize().filter(|_| up.norm() >= AXIS_EPS).ok_or(SolverError::DegenerateNormal)?.get();
            (x, y, x.cross(y))
        }
        ApproachType::Top => {
            let r = if up.norm() >= AXIS_EPS { up } else { reject(-Vec3::X) };
            let z = r.normalize().ok_or(SolverError::DegenerateNormal)?.get();
            (x, z.cross(x), z)
        }
    };
    Rotation3::from_columns(axes.0, axes.1, axes.2).map_err(|_| SolverError::DegenerateNormal)
}

/// Displacement `l(1−cos γ)·ê_x' + l·sin γ·(0,0,−1)` with `e_x'` the
/// horizontal projection of the travel direction `n`.
pub fn compensation(gamma: f64, l: f64, n: UnitVec3) -> Result<Vec3, SolverError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&gamma) {
        return Err(SolverError::InvalidArgument(format!("γ = {gamma} outside [0, π/2]")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(SolverError::InvalidArgument(format!("l = {l} must be positive")));
    }
    let d_ex = l * (1.0 - gamma.cos());
    let d_z = l * gamma.sin();
    let e = horizontal_projection(n);
    let norm = e.norm();
    let horizontal = if norm < AXIS_EPS {
        if d_ex > 0.0 {
            return Err(SolverError::DegenerateAxis);
        }
        Vec3::ZERO
    } else {
        e * (d_ex / norm)
    };
    Ok(horizontal + Vec3::new(0.0, 0.0, -d_z))
}

/// Fixed hand settings applied before moving in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreGrasp {
    pub wrist_extension_rad: f64,
    pub thumb_palmar_abduction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec3,
    pub wrist: Rotation3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspPlan {
    pub candidate: GraspCandidate,
    pub approach: ApproachType,
    pub wrist: Rotation3,
    pub gamma: f64,
    pub compensation: Vec3,
    /// Idle, approach point, grasp point.
    pub waypoints: [Waypoint; 3],
    pub grasp_type: PostureLabel,
    pub lift: Vec3,
    pub pre_grasp: PreGrasp,
}

impl GraspPlan {
    pub fn approach_point(&self) -> Vec3 {
        self.waypoints[1].position
    }

    pub fn grasp_point(&self) -> Vec3 {
        self.waypoints[2].position
    }

    pub fn wrist_frame(&self) -> Frame {
        Frame::new(self.grasp_point(), self.wrist)
    }

    pub fn to_file(&self, config_hash: &str) -> GraspPlanFile {
        let frame = |r: &Rotation3, origin: Vec3| FrameFile { rotation: r.matrix(), origin };
        GraspPlanFile {
            index: self.candidate.index,
            vertex: self.candidate.vertex,
            normal: self.candidate.normal.get(),
            confidence: self.candidate.confidence,
            posture: self.grasp_type,
            approach: self.approach,
            gamma_rad: self.gamma,
            compensation: self.compensation,
            wrist_frame: frame(&self.wrist, self.grasp_point()),
            waypoints: self.waypoints.iter().map(|w| WaypointFile { position: w.position, wrist_frame: frame(&w.wrist, w.position) }).collect(),
            lift: self.lift,
            pre_grasp: self.pre_grasp,
            config_hash: config_hash.to_string(),
        }
    }
}

/// Row-major rotation plus origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFile {
    pub rotation: [[f64; 3]; 3],
    pub origin: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointFile {
    pub position: Vec3,
    pub wrist_frame: FrameFile,
}

/// On-disk plan (see `docs/formats.md`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPlanFile {
    pub index: usize,
    pub vertex: Vec3,
    pub normal: Vec3,
    pub confidence: f64,
    pub posture: PostureLabel,
    pub approach: ApproachType,
    pub gamma_rad: f64,
    pub compensation: Vec3,
    pub wrist_frame: FrameFile,
    pub waypoints: Vec<WaypointFile>,
    pub lift: Vec3,
    pub pre_grasp: PreGrasp,
    pub config_hash: String,
}

impl GraspPlanFile {
    pub fn to_plan(&self) -> Result<GraspPlan, SolverError> {
        let rot = |f: &FrameFile| Rotation3::from_matrix(f.rotation).map_err(|e| SolverError::InvalidArgument(e.to_string()));
        let normal = UnitVec3::from_stored(self.normal).map_err(|e| SolverError::InvalidArgument(e.to_string()))?;
        if self.waypoints.len() != 3 {
            return Err(SolverError::InvalidArgument(format!("expected 3 waypoints, got {}", self.waypoints.len())));
        }
        let wp = |i: usize| -> Result<Waypoint, SolverError> {
            Ok(Waypoint { position: self.waypoints[i].position, wrist: rot(&self.waypoints[i].wrist_frame)? })
        };
        Ok(GraspPlan {
            candidate: GraspCandidate {
                index: self.index,
                vertex: self.vertex,
                normal,
                confidence: self.confidence,
                posture: self.posture,
            },
            approach: self.approach,
            wrist: rot(&self.wrist_frame)?,
            gamma: self.gamma_rad,
            compensation: self.compensation,
            waypoints: [wp(0)?, wp(1)?, wp(2)?],
            grasp_type: self.posture,
            lift: self.lift,
            pre_grasp: self.pre_grasp,
        })
    }
}

pub fn plan_grasp(cand: &GraspCandidate, cfg: &WorkspaceConfig) -> Result<GraspPlan, SolverError> {
    cfg.validate()?;
    if cand.posture == PostureLabel::NonGraspable {
        return Err(SolverError::InvalidArgument("candidate is labeled non-graspable".into()));
    }
    let n = cand.normal;
    let gamma = n.get().z.abs().min(1.0).asin();
    let approach = classify_approach(n, cfg);
    let wrist = wrist_frame(n, approach)?;
    let c = compensation(gamma, cfg.wrist_to_fingertip, n.negate())?;
    let approach_point = cand.vertex + n.get() * cfg.approach_offset;
    let grasp_point = approach_point - n.get() * cfg.travel_distance + c;
    let (lift, pre_grasp) = match approach {
        ApproachType::Side => (
            cfg.lift_side,
            PreGrasp { wrist_extension_rad: cfg.side_wrist_extension_rad, thumb_palmar_abduction: true },
        ),
        ApproachType::Top => (cfg.lift_top, PreGrasp { wrist_extension_rad: 0.0, thumb_palmar_abduction: false }),
    };
    let at = |position| Waypoint { position, wrist };
    Ok(GraspPlan {
        candidate: *cand,
        approach,
        wrist,
        gamma,
        compensation: c,
        waypoints: [at(cfg.idle_waypoint), at(approach_point), at(grasp_point)],
        grasp_type: cand.posture,
        lift: Vec3::new(0.0, 0.0, lift),
        pre_grasp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    TableCollision,
    Unreachable,
    Penetration,
    NoContact,
    InsufficientContact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub feasible: bool,
    pub failure_reason: Option<FailureReason>,
    /// Finger and thumb rays that touched the object at the grasp pose.
    pub contacts: usize,
}

impl SimResult {
    fn fail(reason: FailureReason, contacts: usize) -> Self {
        SimResult { feasible: false, failure_reason: Some(reason), contacts }
    }
}

/// Nearest hit of the ray `origin + t·dir` (unit `dir`) with `t ≤ max_t`.
fn first_hit(mesh: &TriMesh, origin: Vec3, dir: Vec3, max_t: f64) -> Option<f64> {
    (0..mesh.triangles.len())
        .filter_map(|t| ray_triangle(origin, dir, &mesh.corners(t)))
        .filter(|&t| t <= max_t)
        .min_by(f64::total_cmp)
}

/// Palm center for an end-effector (middle fingertip) position.
fn palm_center(ee: Vec3, wrist: &Rotation3, cfg: &WorkspaceConfig) -> Vec3 {
    ee - wrist.column(0) * cfg.palm_to_fingertip
}

/// Kinematic stand-in for executing `plan` on the true object (base frame):
/// table clearance and reach of every palm waypoint, a collision-free palm
/// path, and finger-ray closure (MW: 4 of 5 rays, T: thumb, index, middle).
///
/// The compensation `c` exists to cancel the fingertip displacement the
/// wrist rotation causes, so the hand is evaluated where the compensated
/// command lands it: the grasp waypoint minus `c`.
pub fn simulate_grasp(plan: &GraspPlan, object: &TriMesh, cfg: &WorkspaceConfig) -> SimResult {
    let reached: Vec<Vec3> = plan
        .waypoints
        .iter()
        .enumerate()
        .map(|(k, w)| if k == 2 { w.position - plan.compensation } else { w.position })
        .collect();
    let palms: Vec<Vec3> = reached.iter().zip(&plan.waypoints).map(|(&p, w)| palm_center(p, &w.wrist, cfg)).collect();
    if palms.iter().any(|p| p.z < cfg.table_height) {
        return SimResult::fail(FailureReason::TableCollision, 0);
    }
    // reach is an arm property: it bounds the commanded end-effector only
    if reached.iter().any(|p| p.norm() > cfg.reach_radius) {
        return SimResult::fail(FailureReason::Unreachable, 0);
    }
    for (k, seg) in palms.windows(2).enumerate() {
        let delta = seg[1] - seg[0];
        let len = delta.norm();
        let Some(dir) = delta.normalize() else { continue };
        // the final segment may stop `path_clearance` short of contact
        let limit = if k == palms.len() - 2 { len - cfg.hand.path_clearance } else { len };
        if limit > 0.0 && first_hit(object, seg[0], dir.get(), limit).is_some() {
            return SimResult::fail(FailureReason::Penetration, 0);
        }
    }

    let palm = palms[2];
    let w = &plan.waypoints[2].wrist;
    let (distal, ulnar, palmar) = (w.column(0), w.column(1), w.column(2));
    let len = cfg.hand.ray_length;
    let hits = |origin: Vec3, dir: Vec3| first_hit(object, origin, dir, len).is_some();
    let fingers: Vec<bool> = cfg.hand.finger_offsets.iter().map(|&o| hits(palm + ulnar * o, distal)).collect();
    let thumb = hits(palm + distal * cfg.hand.thumb_depth, palmar);
    let contacts = fingers.iter().filter(|&&b| b).count() + thumb as usize;
    if contacts == 0 {
        return SimResult::fail(FailureReason::NoContact, 0);
    }
    let closed = match plan.grasp_type {
        PostureLabel::MediumWrap => contacts >= 4,
        // thumb, index, middle
        PostureLabel::Tripod => thumb && fingers[0] && fingers[1],
        PostureLabel::NonGraspable => false,
    };
    if closed {
        SimResult { feasible: true, failure_reason: None, contacts }
    } else {
        SimResult::fail(FailureReason::InsufficientContact, contacts)
    }
}
