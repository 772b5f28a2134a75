//! End-to-end single-view run: synthetic capture → canonical TSDF →
//! completion → mesh with confidence and posture labels → grasp plan →
//! feasibility check, with shape metrics against the ground truth.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Frame, Rotation3, SimilarityPose, Vec3};
use crate::scene::{DepthImage, SegmentationMask};
use crate::volumetric::{OccupancyGrid, TsdfVolume};
use crate::io;
use crate::mesh::TriMesh;
use crate::meshing::{attach_confidence, extract_mesh_mise, DEFAULT_INITIAL_RES, DEFAULT_ISO, DEFAULT_REFINEMENT_STEPS};
use crate::metrics::{sample_surface, shape_metrics, ShapeMetrics, DEFAULT_SAMPLES};
use crate::posture::{shipped_reference, transfer_postures};
use crate::scene::{add_depth_noise, backproject, canonical_scale, generate_object, render_depth, Category, ShapeParams};
use crate::solver::{
    config_hash, filter_candidates, plan_grasp, select_candidate, simulate_grasp, GraspPlan, SelectionCriterion, SimResult,
    WorkspaceConfig,
};
use crate::volumetric::{complete, voxelize_tsdf, Completer, GridSpec, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub category: Category,
    /// Explicit shape; `None` draws one from `seed`.
    pub params: Option<ShapeParams>,
    pub seed: u64,
    /// Object base center on the table (x, y) in the robot base frame.
    pub position: [f64; 2],
    /// Rotation about +Z; 0 puts a cup handle along base +X.
    pub yaw_rad: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            category: Category::Cup,
            params: Some(ShapeParams::default_for(Category::Cup)),
            seed: 0,
            position: [-0.45, 0.35],
            yaw_rad: 0.0,
        }
    }
}

/// A pitched camera aimed at `target`, placed at `height` on the side given
/// by `azimuth_rad` (direction from target to camera in the XY plane).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub height: f64,
    pub pitch_rad: f64,
    pub azimuth_rad: f64,
    pub target: Vec3,
    pub width: usize,
    pub height_px: usize,
    pub hfov_rad: f64,
    /// Standard deviation of Gaussian depth noise (m); 0 disables it.
    pub noise_sigma: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        let target = Vec3::new(-0.45, 0.35, 0.193 + 0.05);
        CameraConfig {
            // 515 mm above the metallic table, which sits 73 mm above the base
            height: 0.073 + 0.515,
            pitch_rad: 30f64.to_radians(),
            // across the table, facing the robot: the robot-facing side of
            // the object is the occluded one
            azimuth_rad: target.y.atan2(target.x),
            target,
            width: 640,
            height_px: 480,
            hfov_rad: 60f64.to_radians(),
            noise_sigma: 0.0,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics, String> {
        CameraIntrinsics::from_fov(self.width, self.height_px, self.hfov_rad).map_err(|e| e.to_string())
    }

    pub fn frame(&self) -> Result<Frame, String> {
        if !(self.pitch_rad > 0.0 && self.pitch_rad < std::f64::consts::FRAC_PI_2) {
            return Err(format!("camera pitch must lie in (0, π/2), got {}", self.pitch_rad));
        }
        let drop = self.height - self.target.z;
        if !(drop > 0.0) {
            return Err("camera must sit above its target".into());
        }
        let reach = drop / self.pitch_rad.tan();
        let eye = Vec3::new(
            self.target.x + reach * self.azimuth_rad.cos(),
            self.target.y + reach * self.azimuth_rad.sin(),
            self.height,
        );
        Frame::look_at(eye, self.target, Vec3::Z).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiseConfig {
    pub iso: f64,
    pub initial_res: usize,
    pub refinement_steps: usize,
}

impl Default for MiseConfig {
    fn default() -> Self {
        MiseConfig { iso: DEFAULT_ISO, initial_res: DEFAULT_INITIAL_RES, refinement_steps: DEFAULT_REFINEMENT_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub scene: SceneConfig,
    pub camera: CameraConfig,
    pub completer: Completer,
    pub criterion: SelectionCriterion,
    pub workspace: WorkspaceConfig,
    pub grid_resolution: usize,
    pub mise: MiseConfig,
    pub posture_k: usize,
    pub metric_samples: usize,
    pub metric_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scene: SceneConfig::default(),
            camera: CameraConfig::default(),
            completer: Completer::new(Strategy::Revolution, Some(Category::Cup)),
            criterion: SelectionCriterion::Confidence,
            workspace: WorkspaceConfig::default(),
            grid_resolution: GridSpec::DEFAULT_RESOLUTION,
            mise: MiseConfig::default(),
            posture_k: 5,
            metric_samples: DEFAULT_SAMPLES,
            metric_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::new(Stage::Config, m));
        if let Some(p) = &self.scene.params {
            if p.category() != self.scene.category {
                return err(format!("params are for {} but category is {}", p.category().name(), self.scene.category.name()));
            }
            p.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
        }
        if self.grid_resolution < 4 {
            return err(format!("grid_resolution must be at least 4, got {}", self.grid_resolution));
        }
        if self.posture_k == 0 || self.metric_samples == 0 {
            return err("posture_k and metric_samples must be positive".into());
        }
        let m = &self.mise;
        if !(m.iso > 0.0 && m.iso < 1.0) || m.initial_res == 0 {
            return err("mise iso must lie in (0, 1) and initial_res be positive".into());
        }
        if !(self.camera.noise_sigma >= 0.0) {
            return err("camera noise_sigma must be non-negative".into());
        }
        self.camera.intrinsics().map_err(|e| PipelineError::new(Stage::Config, e))?;
        self.camera.frame().map_err(|e| PipelineError::new(Stage::Config, e))?;
        self.workspace.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Pose placing the object frame (origin at mid-height) on the table.
    pub fn object_pose(&self, params: &ShapeParams) -> SimilarityPose {
        let (lo, _) = params.bounding_box();
        let [x, y] = self.scene.position;
        SimilarityPose::rigid(Rotation3::rot_z(self.scene.yaw_rad), Vec3::new(x, y, self.workspace.table_height - lo.z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Generate,
    Render,
    Backproject,
    Voxelize,
    Complete,
    Mesh,
    Confidence,
    Label,
    Filter,
    Select,
    Plan,
    Simulate,
    Metrics,
    Io,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Generate => "generate",
            Stage::Render => "render",
            Stage::Backproject => "backproject",
            Stage::Voxelize => "voxelize",
            Stage::Complete => "complete",
            Stage::Mesh => "mesh",
            Stage::Confidence => "confidence",
            Stage::Label => "label",
            Stage::Filter => "filter",
            Stage::Select => "select",
            Stage::Plan => "plan",
            Stage::Simulate => "simulate",
            Stage::Metrics => "metrics",
            Stage::Io => "io",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[error("{} stage failed: {message}", stage.name())]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, e: impl ToString) -> Self {
        PipelineError { stage, message: e.to_string() }
    }
}

/// Everything a run produces. The grasp half may fail on its own (e.g. no
/// graspable vertex) while reconstruction still yields metrics.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub config_hash: String,
    /// Ground truth in the canonical frame.
    pub gt_canonical: TriMesh,
    /// Completed mesh in the canonical frame with confidence and labels.
    pub mesh_canonical: TriMesh,
    pub mesh_world: TriMesh,
    pub metrics: ShapeMetrics,
    pub grasp: Result<(GraspPlan, SimResult), PipelineError>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub mesh: TriMesh,
    pub plan: GraspPlan,
    pub sim: SimResult,
    pub metrics: ShapeMetrics,
}

/// Summary written next to the intermediates as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub metrics: Option<ShapeMetrics>,
    pub sim: Option<SimResult>,
    pub error: Option<PipelineError>,
}

impl RunSummary {
    pub fn new(config_hash: &str, metrics: impl Into<Option<ShapeMetrics>>, grasp: &Result<(GraspPlan, SimResult), PipelineError>) -> Self {
        RunSummary {
            config_hash: config_hash.to_string(),
            metrics: metrics.into(),
            sim: grasp.as_ref().ok().map(|(_, s)| s.clone()),
            error: grasp.as_ref().err().cloned(),
        }
    }
}

pub fn run_pipeline(cfg: &PipelineConfig, out: Option<&Path>) -> Result<PipelineOutput, PipelineError> {
    let rec = run_trial(cfg, out)?;
    let (plan, sim) = rec.grasp?;
    Ok(PipelineOutput { mesh: rec.mesh_canonical, plan, sim, metrics: rec.metrics })
}

/// The posed ground-truth object and the frames around it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub params: ShapeParams,
    /// Ground truth in the object frame (origin at mid-height, up +Z).
    pub object: TriMesh,
    pub world_from_object: SimilarityPose,
    /// Pure scale; the ground-truth pose stands in for a learned estimator.
    pub cano_from_object: SimilarityPose,
}

impl Scene {
    pub fn gt_world(&self) -> TriMesh {
        self.object.transformed(&self.world_from_object)
    }

    pub fn gt_canonical(&self) -> TriMesh {
        self.object.transformed(&self.cano_from_object)
    }

    pub fn world_from_cano(&self) -> SimilarityPose {
        let object_from_cano = self.cano_from_object.inverse().expect("canonical scale is positive");
        self.world_from_object.compose(&object_from_cano)
    }

    /// Camera frame to canonical frame for a sensor at `camera`.
    pub fn cano_from_camera(&self, camera: &Frame) -> SimilarityPose {
        let object_from_world = self.world_from_object.inverse().expect("rigid pose");
        self.cano_from_object.compose(&object_from_world).compose(&camera.as_pose())
    }
}

pub fn build_scene(cfg: &PipelineConfig) -> Result<Scene, PipelineError> {
    let category = cfg.scene.category;
    let params = cfg.scene.params.clone().unwrap_or_else(|| ShapeParams::sample(category, cfg.scene.seed));
    let object = generate_object(category, Some(&params), cfg.scene.seed).map_err(|e| PipelineError::new(Stage::Generate, e))?;
    let world_from_object = cfg.object_pose(&params);
    let cano_from_object = SimilarityPose::new(Rotation3::IDENTITY, Vec3::ZERO, canonical_scale(&object))
        .map_err(|e| PipelineError::new(Stage::Generate, e))?;
    Ok(Scene { params, object, world_from_object, cano_from_object })
}

/// Noisy z-depth and the object mask from the configured camera.
pub fn render_view(cfg: &PipelineConfig, scene: &Scene) -> Result<(DepthImage, SegmentationMask, CameraIntrinsics), PipelineError> {
    let intr = cfg.camera.intrinsics().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let camera = cfg.camera.frame().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let (mut depth, mask) =
        render_depth(&scene.object, &scene.world_from_object, &camera, &intr).map_err(|e| PipelineError::new(Stage::Render, e))?;
    add_depth_noise(&mut depth, cfg.camera.noise_sigma, cfg.scene.seed);
    Ok((depth, mask, intr))
}

/// Back-projects the view into the canonical frame, fuses it into a TSDF
/// and completes it. The sensor pose is taken from `depth`.
pub fn reconstruct(
    cfg: &PipelineConfig,
    scene: &Scene,
    depth: &DepthImage,
    mask: &SegmentationMask,
    intr: &CameraIntrinsics,
) -> Result<(TsdfVolume, OccupancyGrid), PipelineError> {
    let cloud = backproject(depth, mask, intr).map_err(|e| PipelineError::new(Stage::Backproject, e))?;
    let cano_from_cam = scene.cano_from_camera(&depth.sensor_pose);
    let cloud = cloud.transformed(&cano_from_cam);
    let spec = GridSpec::unit_cube(cfg.grid_resolution);
    let tsdf = voxelize_tsdf(&cloud, cano_from_cam.apply(Vec3::ZERO), &spec).map_err(|e| PipelineError::new(Stage::Voxelize, e))?;
    let occ = complete(&tsdf, &cfg.completer).map_err(|e| PipelineError::new(Stage::Complete, e))?;
    Ok((tsdf, occ))
}

/// Canonical-frame mesh with normals and per-vertex confidence.
pub fn extract(cfg: &PipelineConfig, occ: &OccupancyGrid) -> Result<TriMesh, PipelineError> {
    let m = &cfg.mise;
    let mut mesh = extract_mesh_mise(occ, m.iso, m.initial_res, m.refinement_steps).map_err(|e| PipelineError::new(Stage::Mesh, e))?;
    attach_confidence(&mut mesh, occ).map_err(|e| PipelineError::new(Stage::Confidence, e))?;
    // keep the stored (f32) precision so staged and end-to-end runs agree
    if let Some(c) = mesh.confidence.as_mut() {
        c.iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
    Ok(mesh)
}

pub fn label(cfg: &PipelineConfig, mesh: &TriMesh) -> Result<TriMesh, PipelineError> {
    transfer_postures(mesh, shipped_reference(cfg.scene.category), cfg.posture_k).map_err(|e| PipelineError::new(Stage::Label, e))
}

/// Shape metrics of a canonical-frame mesh against the ground truth.
pub fn evaluate(cfg: &PipelineConfig, scene: &Scene, mesh: &TriMesh) -> Result<ShapeMetrics, PipelineError> {
    let pred = sample_surface(mesh, cfg.metric_samples, cfg.metric_seed).map_err(|e| PipelineError::new(Stage::Metrics, e))?;
    let truth = sample_surface(&scene.gt_canonical(), cfg.metric_samples, cfg.metric_seed ^ 0x9e37_79b9_7f4a_7c15)
        .map_err(|e| PipelineError::new(Stage::Metrics, e))?;
    Ok(shape_metrics(&pred, &truth))
}

/// Moves the labeled canonical mesh into the base frame, then filters,
/// selects, plans and simulates against the true object.
pub fn grasp(
    cfg: &PipelineConfig,
    scene: &Scene,
    mesh_canonical: &TriMesh,
) -> (TriMesh, Result<(GraspPlan, SimResult), PipelineError>) {
    let mesh_world = mesh_canonical.transformed(&scene.world_from_cano());
    let result = (|| {
        let cands = filter_candidates(&mesh_world, &cfg.workspace).map_err(|e| PipelineError::new(Stage::Filter, e))?;
        let cand = select_candidate(&cands, cfg.criterion).map_err(|e| PipelineError::new(Stage::Select, e))?;
        let plan = plan_grasp(&cand, &cfg.workspace).map_err(|e| PipelineError::new(Stage::Plan, e))?;
        let sim = simulate_grasp(&plan, &scene.gt_world(), &cfg.workspace);
        Ok((plan, sim))
    })();
    (mesh_world, result)
}

/// Runs every stage; reconstruction errors abort, grasp-stage errors are
/// kept in [`TrialRecord::grasp`]. With `out`, intermediates are written
/// there.
pub fn run_trial(cfg: &PipelineConfig, out: Option<&Path>) -> Result<TrialRecord, PipelineError> {
    cfg.validate()?;
    let config_hash = cfg.hash();
    let write = |name: &str, f: &dyn Fn(&Path) -> Result<(), io::IoError>| -> Result<(), PipelineError> {
        match out {
            Some(dir) => f(&dir.join(name)).map_err(|e| PipelineError::new(Stage::Io, e)),
            None => Ok(()),
        }
    };
    write("config.json", &|p| io::write_json(p, cfg))?;

    let scene = build_scene(cfg)?;
    write("gt_world.ply", &|p| io::ply::write_ply(p, &scene.gt_world()))?;
    let (depth, mask, intr) = render_view(cfg, &scene)?;
    write("depth.f32", &|p| io::raster::write_depth(p, &depth, &intr))?;
    write("mask.u8", &|p| io::raster::write_mask(p, &mask))?;

    let (tsdf, occ) = reconstruct(cfg, &scene, &depth, &mask, &intr)?;
    write("tsdf.grid", &|p| io::grid::write_tsdf(p, &tsdf))?;
    write("occupancy.grid", &|p| io::grid::write_occupancy(p, &occ))?;

    let mesh = label(cfg, &extract(cfg, &occ)?)?;
    write("mesh_canonical.ply", &|p| io::ply::write_ply(p, &mesh))?;
    let metrics = evaluate(cfg, &scene, &mesh)?;
    write("metrics.json", &|p| io::write_json(p, &metrics))?;

    let (mesh_world, grasp) = grasp(cfg, &scene, &mesh);
    write("mesh_world.ply", &|p| io::ply::write_ply(p, &mesh_world))?;
    if let Ok((plan, _)) = &grasp {
        write("plan.json", &|p| io::write_json(p, &plan.to_file(&config_hash)))?;
    }
    let summary = RunSummary::new(&config_hash, metrics, &grasp);
    write("result.json", &|p| io::write_json(p, &summary))?;

    Ok(TrialRecord { config_hash, gt_canonical: scene.gt_canonical(), mesh_canonical: mesh, mesh_world, metrics, grasp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::GraspPlanFile;

    fn quick(strategy: Strategy) -> PipelineConfig {
        let mut cfg = PipelineConfig { metric_samples: 20_000, ..PipelineConfig::default() };
        cfg.completer = Completer::new(strategy, Some(Category::Cup));
        cfg
    }

    #[test]
    fn default_cup_smoke() {
        let out = run_pipeline(&quick(Strategy::Revolution), None).unwrap();
        assert!(out.sim.feasible, "{:?}", out.sim);
        let m = out.metrics;
        for v in [m.chamfer_l1, m.accuracy, m.completeness, m.normal_consistency] {
            assert!(v.is_finite() && v > 0.0, "{m:?}");
        }
        assert!(out.mesh.confidence.is_some() && out.mesh.postures.is_some());
    }

    #[test]
    fn completion_beats_partial_on_occluded_cup() {
        let rev = run_trial(&quick(Strategy::Revolution), None).unwrap();
        let part = run_trial(&quick(Strategy::Partial), None).unwrap();
        assert!(part.metrics.chamfer_l1 > rev.metrics.chamfer_l1, "{:?} vs {:?}", part.metrics, rev.metrics);
    }

    #[test]
    fn identical_configs_write_identical_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = quick(Strategy::Revolution);
        run_trial(&cfg, Some(a.path())).unwrap();
        run_trial(&cfg, Some(b.path())).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 11, "{names:?}");
        for n in names {
            let (x, y) = (std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap());
            assert!(x == y, "{n:?} differs");
        }
    }

    #[test]
    fn intermediates_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let cfg = quick(Strategy::Revolution);
        let rec = run_trial(&cfg, Some(d)).unwrap();

        let back: PipelineConfig = io::read_json(&d.join("config.json")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), rec.config_hash);

        for name in ["gt_world.ply", "mesh_canonical.ply", "mesh_world.ply"] {
            let bytes = std::fs::read(d.join(name)).unwrap();
            let mesh = io::ply::read_ply(&d.join(name)).unwrap();
            assert_eq!(io::ply::encode_ply(&mesh).unwrap(), bytes, "{name}");
        }
        let canon = io::ply::read_ply(&d.join("mesh_canonical.ply")).unwrap();
        assert_eq!(canon.vertices, rec.mesh_canonical.vertices);
        assert_eq!(canon.postures, rec.mesh_canonical.postures);

        let (depth, intr) = io::raster::read_depth(&d.join("depth.f32")).unwrap();
        assert_eq!(intr, cfg.camera.intrinsics().unwrap());
        let mask = io::raster::read_mask(&d.join("mask.u8"), depth.width, depth.height).unwrap();
        assert!(mask.count() > 0);
        assert!(depth.depth.iter().zip(&mask.values).all(|(z, &m)| (*z > 0.0) == m));

        let tsdf: TsdfVolume = io::grid::read_tsdf(&d.join("tsdf.grid")).unwrap();
        let occ: OccupancyGrid = io::grid::read_occupancy(&d.join("occupancy.grid")).unwrap();
        assert_eq!(tsdf.spec, occ.spec);
        let again = complete(&tsdf, &cfg.completer).unwrap();
        assert_eq!(again, occ);

        let file: GraspPlanFile = io::read_json(&d.join("plan.json")).unwrap();
        let (plan, sim) = rec.grasp.unwrap();
        assert_eq!(file.to_plan().unwrap(), plan);
        assert_eq!(file.config_hash, rec.config_hash);
        let summary: RunSummary = io::read_json(&d.join("result.json")).unwrap();
        assert_eq!(summary.sim, Some(sim));
        assert_eq!(summary.metrics, Some(rec.metrics));
        let metrics: ShapeMetrics = io::read_json(&d.join("metrics.json")).unwrap();
        assert_eq!(metrics, rec.metrics);
    }

    #[test]
    fn config_errors_name_their_stage() {
        let mut cfg = PipelineConfig::default();
        cfg.grid_resolution = 2;
        assert_eq!(run_trial(&cfg, None).unwrap_err().stage, Stage::Config);
        let mut cfg = PipelineConfig::default();
        cfg.scene.params = Some(ShapeParams::default_for(Category::Bowl));
        let e = run_pipeline(&cfg, None).unwrap_err();
        assert_eq!(e.stage, Stage::Config);
        assert!(e.to_string().starts_with("config stage failed"));
        let mut cfg = PipelineConfig::default();
        cfg.camera.target.z = 1.0;
        assert_eq!(cfg.validate().unwrap_err().stage, Stage::Config);
    }

    #[test]
    fn grasp_failures_keep_reconstruction() {
        // side grasps gated out and top grasps restricted to exactly vertical normals
        let mut cfg = quick(Strategy::Revolution);
        cfg.workspace.min_side_grasp_z = 1.0;
        cfg.workspace.inclination_threshold_rad = std::f64::consts::FRAC_PI_2 - 1e-9;
        let rec = run_trial(&cfg, None).unwrap();
        assert!(rec.metrics.chamfer_l1 > 0.0);
        // flat rim vertices are exactly vertical, which compensation rejects
        let stage = rec.grasp.unwrap_err().stage;
        assert!(matches!(stage, Stage::Filter | Stage::Plan), "{stage:?}");
    }
}
