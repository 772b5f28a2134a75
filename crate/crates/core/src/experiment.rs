//! Seeded batch runs over object suites and the feasibility report laid
//! out per completer and per posture. "Success" here is always simulator
//! feasibility.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{self, IoError};
use crate::metrics::ShapeMetrics;
use crate::pipeline::{run_trial, PipelineConfig, PipelineError};
use crate::posture::PostureLabel;
use crate::scene::{Category, ShapeParams};
use crate::solver::{config_hash, ApproachType, FailureReason, SelectionCriterion};
use crate::volumetric::{Completer, Strategy};

/// Label attached to every rate in a report.
pub const SUCCESS_LABEL: &str = "simulator feasibility";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Confidence,
    Arbitrary,
}

impl CriterionKind {
    fn with_seed(self, seed: u64) -> SelectionCriterion {
        match self {
            CriterionKind::Confidence => SelectionCriterion::Confidence,
            CriterionKind::Arbitrary => SelectionCriterion::Arbitrary { seed },
        }
    }
}

/// One experimental condition: a completer paired with a selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arm {
    pub completer: Strategy,
    pub criterion: CriterionKind,
}

impl Arm {
    pub fn name(&self) -> String {
        format!("{}+{}", self.completer.name(), match self.criterion {
            CriterionKind::Confidence => "confidence",
            CriterionKind::Arbitrary => "arbitrary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub params: ShapeParams,
}

/// A benchmark: every object is placed in `trials_per_object` seeded poses
/// and each pose is run under every arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    /// Camera, workspace, grid and metric settings shared by all trials.
    pub base: PipelineConfig,
    pub objects: Vec<ObjectSpec>,
    pub trials_per_object: usize,
    pub arms: Vec<Arm>,
    pub seed: u64,
    /// Half-width of the uniform placement jitter around the base position (m).
    pub position_jitter: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            base: PipelineConfig::default(),
            objects: shipped_cups(),
            trials_per_object: 10,
            arms: default_arms(),
            seed: 0,
            position_jitter: 0.03,
        }
    }
}

/// Completion with confidence selection against the reconstruction-only
/// baseline, which has no confidence to rank by.
pub fn default_arms() -> Vec<Arm> {
    vec![
        Arm { completer: Strategy::Revolution, criterion: CriterionKind::Confidence },
        Arm { completer: Strategy::Partial, criterion: CriterionKind::Arbitrary },
    ]
}

/// The shipped five-cup suite: everyday mug proportions, all with handles.
pub fn shipped_cups() -> Vec<ObjectSpec> {
    [
        (0.040, 0.100, 0.004, 0.006),
        (0.036, 0.095, 0.004, 0.006),
        (0.045, 0.110, 0.005, 0.007),
        (0.042, 0.120, 0.004, 0.006),
        (0.038, 0.105, 0.005, 0.006),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(radius, height, wall, bottom))| ObjectSpec {
        id: format!("cup{}", i + 1),
        params: ShapeParams::Cup { radius, height, wall, bottom, handle: true },
    })
    .collect()
}

impl SuiteConfig {
    /// `per_category` objects of each category drawn from the shape ranges.
    pub fn sampled(categories: &[Category], per_category: usize, trials_per_object: usize, seed: u64) -> Self {
        let objects = categories
            .iter()
            .flat_map(|&c| {
                (0..per_category).map(move |i| ObjectSpec {
                    id: format!("{}{}", c.name(), i + 1),
                    params: ShapeParams::sample(c, seed.wrapping_mul(1_000_003).wrapping_add(i as u64)),
                })
            })
            .collect();
        SuiteConfig { objects, trials_per_object, seed, ..SuiteConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.position_jitter >= 0.0 && self.position_jitter.is_finite()) {
            return Err(ExperimentError::InvalidSuite("position_jitter must be a non-negative length".into()));
        }
        for o in &self.objects {
            o.params.validate().map_err(|e| ExperimentError::InvalidSuite(format!("{}: {e}", o.id)))?;
        }
        if !self.objects.is_empty() && self.trials_per_object > 0 {
            self.base.validate().map_err(|e| ExperimentError::InvalidSuite(e.to_string()))?;
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Expands the suite into per-trial configs in row order
    /// (object, pose, arm).
    pub fn trials(&self) -> Vec<TrialSpec> {
        let mut out = Vec::new();
        for (oi, obj) in self.objects.iter().enumerate() {
            for pose in 0..self.trials_per_object {
                let scene_seed = trial_seed(self.seed, oi, pose);
                let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
                let yaw = rng.random_range(0.0..std::f64::consts::TAU);
                let j = self.position_jitter;
                let (dx, dy) = if j > 0.0 { (rng.random_range(-j..=j), rng.random_range(-j..=j)) } else { (0.0, 0.0) };
                for arm in &self.arms {
                    let mut cfg = self.base.clone();
                    let category = obj.params.category();
                    cfg.scene.category = category;
                    cfg.scene.params = Some(obj.params.clone());
                    cfg.scene.seed = scene_seed;
                    cfg.scene.yaw_rad = yaw;
                    cfg.scene.position = [self.base.scene.position[0] + dx, self.base.scene.position[1] + dy];
                    cfg.completer = Completer { strategy: arm.completer, category: Some(category), ..self.base.completer.clone() };
                    cfg.criterion = arm.criterion.with_seed(scene_seed);
                    out.push(TrialSpec { trial: out.len(), object_id: obj.id.clone(), pose, arm: *arm, config: cfg });
                }
            }
        }
        out
    }
}

fn trial_seed(seed: u64, object: usize, pose: usize) -> u64 {
    // SplitMix64 finalizer over the packed indices
    let mut z = seed ^ ((object as u64) << 32 | pose as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub trial: usize,
    pub object_id: String,
    pub pose: usize,
    pub arm: Arm,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub object_id: String,
    pub category: Category,
    pub pose: usize,
    pub scene_seed: u64,
    pub yaw_rad: f64,
    pub position: [f64; 2],
    pub completer: Strategy,
    pub criterion: CriterionKind,
    pub approach: Option<ApproachType>,
    pub posture: Option<PostureLabel>,
    pub feasible: bool,
    pub failure_reason: Option<FailureReason>,
    /// Stage error that prevented a plan (or a reconstruction).
    pub error: Option<PipelineError>,
    pub metrics: Option<ShapeMetrics>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub trials: usize,
    pub feasible: usize,
    pub rate: f64,
}

impl Rate {
    fn from_counts(trials: usize, feasible: usize) -> Self {
        Rate { trials, feasible, rate: if trials == 0 { 0.0 } else { feasible as f64 / trials as f64 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub chamfer_l1: f64,
    pub accuracy: f64,
    pub completeness: f64,
    pub normal_consistency: f64,
}

/// Table-style aggregate for one arm: rates for medium wrap, tripod and
/// all trials (trials that produced no plan count only toward the total).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub medium_wrap: Rate,
    pub tripod: Rate,
    pub total: Rate,
    pub no_plan: usize,
    pub failures: BTreeMap<String, usize>,
    pub mean_metrics: Option<MeanMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub suite_hash: String,
    pub success_label: String,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<ArmSummary>,
}

impl ExperimentReport {
    pub fn from_rows(suite_hash: String, arms: &[Arm], rows: Vec<TrialRow>) -> Self {
        let aggregates = arms.iter().map(|arm| summarize(arm, &rows)).collect();
        ExperimentReport { suite_hash, success_label: SUCCESS_LABEL.into(), rows, aggregates }
    }

    pub fn arm(&self, arm: &Arm) -> Option<&ArmSummary> {
        self.aggregates.iter().find(|a| a.arm == arm.name())
    }

    pub fn to_json(&self) -> Result<Vec<u8>, ExperimentError> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(IoError::from)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvRow::from(r)).map_err(|e| ExperimentError::Csv(e.to_string()))?;
        }
        w.into_inner().map_err(|e| ExperimentError::Csv(e.to_string()))
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        io::write_bytes(&dir.join("report.json"), &self.to_json()?)?;
        io::write_bytes(&dir.join("report.csv"), &self.to_csv()?)?;
        Ok(())
    }
}

fn summarize(arm: &Arm, rows: &[TrialRow]) -> ArmSummary {
    let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.completer == arm.completer && r.criterion == arm.criterion).collect();
    let rate = |p: Option<PostureLabel>| {
        let sel: Vec<_> = mine.iter().filter(|r| p.is_none() || r.posture == p).collect();
        Rate::from_counts(sel.len(), sel.iter().filter(|r| r.feasible).count())
    };
    let mut failures = BTreeMap::new();
    for r in &mine {
        let key = match (&r.failure_reason, &r.error) {
            (Some(f), _) => format!("{f:?}"),
            (None, Some(e)) => format!("error:{}", e.stage.name()),
            _ => continue,
        };
        *failures.entry(key).or_insert(0) += 1;
    }
    let measured: Vec<&ShapeMetrics> = mine.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let mean_metrics = (!measured.is_empty()).then(|| {
        let n = measured.len() as f64;
        let mean = |f: fn(&ShapeMetrics) -> f64| measured.iter().map(|m| f(m)).sum::<f64>() / n;
        MeanMetrics {
            chamfer_l1: mean(|m| m.chamfer_l1),
            accuracy: mean(|m| m.accuracy),
            completeness: mean(|m| m.completeness),
            normal_consistency: mean(|m| m.normal_consistency),
        }
    });
    ArmSummary {
        arm: arm.name(),
        medium_wrap: rate(Some(PostureLabel::MediumWrap)),
        tripod: rate(Some(PostureLabel::Tripod)),
        total: rate(None),
        no_plan: mine.iter().filter(|r| r.posture.is_none()).count(),
        failures,
        mean_metrics,
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    trial: usize,
    object_id: &'a str,
    category: &'static str,
    pose: usize,
    scene_seed: u64,
    yaw_rad: f64,
    x: f64,
    y: f64,
    completer: &'static str,
    criterion: &'static str,
    approach: String,
    posture: &'static str,
    feasible: bool,
    failure_reason: String,
    error: String,
    chamfer_l1: Option<f64>,
    accuracy: Option<f64>,
    completeness: Option<f64>,
    normal_consistency: Option<f64>,
}

impl<'a> From<&'a TrialRow> for CsvRow<'a> {
    fn from(r: &'a TrialRow) -> Self {
        CsvRow {
            trial: r.trial,
            object_id: &r.object_id,
            category: r.category.name(),
            pose: r.pose,
            scene_seed: r.scene_seed,
            yaw_rad: r.yaw_rad,
            x: r.position[0],
            y: r.position[1],
            completer: r.completer.name(),
            criterion: match r.criterion {
                CriterionKind::Confidence => "confidence",
                CriterionKind::Arbitrary => "arbitrary",
            },
            approach: r.approach.map(|a| format!("{a:?}")).unwrap_or_default(),
            posture: r.posture.map(|p| p.short()).unwrap_or(""),
            feasible: r.feasible,
            failure_reason: r.failure_reason.map(|f| format!("{f:?}")).unwrap_or_default(),
            error: r.error.as_ref().map(|e| e.to_string()).unwrap_or_default(),
            chamfer_l1: r.metrics.map(|m| m.chamfer_l1),
            accuracy: r.metrics.map(|m| m.accuracy),
            completeness: r.metrics.map(|m| m.completeness),
            normal_consistency: r.metrics.map(|m| m.normal_consistency),
        }
    }
}

/// Runs one trial to a row; stage failures become row data.
pub fn run_row(spec: &TrialSpec) -> TrialRow {
    let cfg = &spec.config;
    let mut row = TrialRow {
        trial: spec.trial,
        object_id: spec.object_id.clone(),
        category: cfg.scene.category,
        pose: spec.pose,
        scene_seed: cfg.scene.seed,
        yaw_rad: cfg.scene.yaw_rad,
        position: cfg.scene.position,
        completer: spec.arm.completer,
        criterion: spec.arm.criterion,
        approach: None,
        posture: None,
        feasible: false,
        failure_reason: None,
        error: None,
        metrics: None,
    };
    match run_trial(cfg, None) {
        Err(e) => row.error = Some(e),
        Ok(rec) => {
            row.metrics = Some(rec.metrics);
            match rec.grasp {
                Err(e) => row.error = Some(e),
                Ok((plan, sim)) => {
                    row.approach = Some(plan.approach);
                    row.posture = Some(plan.grasp_type);
                    row.feasible = sim.feasible;
                    row.failure_reason = sim.failure_reason;
                }
            }
        }
    }
    row
}

/// Runs every trial on a pool of `jobs` workers (0 = all cores); rows come
/// back in trial order regardless of completion order.
pub fn run_benchmark(suite: &SuiteConfig, jobs: usize) -> Result<ExperimentReport, ExperimentError> {
    suite.validate()?;
    let specs = suite.trials();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let rows: Vec<TrialRow> = pool.install(|| specs.par_iter().map(run_row).collect());
    Ok(ExperimentReport::from_rows(suite.hash(), &suite.arms, rows))
}
