//! Single-view shape completion and anthropomorphic grasp planning on
//! synthetic scenes.
//!
//! The pipeline renders a posed object, back-projects the masked depth,
//! voxelizes it into a canonical-frame TSDF, completes it into occupancy
//! probabilities, extracts a mesh with per-vertex confidence, transfers
//! grasp-posture labels, and plans and simulates a grasp.

pub mod experiment;
pub mod geometry;
pub mod io;
pub mod kdtree;
pub mod mesh;
pub mod meshing;
pub mod metrics;
pub mod pipeline;
pub mod posture;
pub mod scene;
pub mod solver;
pub mod volumetric;

pub use geometry::{
    apply_similarity, horizontal_projection, invert_similarity, CameraIntrinsics, Frame, GeometryError, Rotation3,
    SimilarityPose, UnitVec3, Vec3,
};
pub use mesh::{vertex_normals, MeshError, TriMesh};
pub use meshing::{extract_mesh_mise, attach_confidence};
pub use metrics::{sample_surface, shape_metrics, SampledSurface, ShapeMetrics};
pub use pipeline::{run_pipeline, run_trial, PipelineConfig, PipelineError, PipelineOutput, Stage};
pub use experiment::{run_benchmark, ExperimentReport, SuiteConfig};
pub use posture::{load_labeled_reference, transfer_postures, LabeledCanonicalMesh, PostureLabel};
pub use scene::{backproject, generate_object, render_depth, Category, DepthImage, PointCloud, SegmentationMask, ShapeParams};
pub use solver::{
    classify_approach, compensation, filter_candidates, plan_grasp, select_candidate, simulate_grasp, wrist_frame, ApproachType,
    FailureReason, GraspCandidate, GraspPlan, SelectionCriterion, SimResult, SolverError, WorkspaceConfig,
};
pub use volumetric::{complete, vertex_confidence, voxelize_tsdf, Completer, GridSpec, OccupancyGrid, Strategy, TsdfVolume};
