//! `revgrasp`: run the single-view completion and grasp pipeline stage by
//! stage, end to end, or as a seeded benchmark.
//!
//! Every stage reads its inputs from and writes its outputs to the output
//! directory (`--out`, else `$REVGRASP_OUT`, else `./revgrasp-out`), so
//! `render`, `complete`, `mesh`, `label`, `metrics` and `plan` chain.
//! Exit codes: 0 success, 2 configuration error, 3 stage failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use revgrasp::experiment::{run_benchmark, Arm, CriterionKind, SuiteConfig};
use revgrasp::io;
use revgrasp::pipeline::{self as pl, PipelineConfig, PipelineError, RunSummary};
use revgrasp::{SelectionCriterion, Strategy};

const OUT_ENV: &str = "REVGRASP_OUT";
const DEFAULT_OUT: &str = "revgrasp-out";

#[derive(Parser, Debug)]
#[command(name = "revgrasp", version, about = "Single-view shape completion and grasp planning on synthetic scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// JSON config: a pipeline config, or a suite config for `bench`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scene seed (suite seed for `bench`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    completer: Option<CompleterArg>,
    #[arg(long, global = true, value_enum)]
    criterion: Option<CriterionArg>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate and place the object, render depth and mask.
    Render,
    /// Fuse the rendered view into a canonical TSDF and complete it.
    Complete,
    /// Extract the mesh with per-vertex confidence from the occupancy grid.
    Mesh,
    /// Transfer posture labels onto the canonical mesh.
    Label,
    /// Compare the canonical mesh with the ground truth.
    Metrics,
    /// Select, plan and simulate a grasp on the labeled mesh.
    Plan,
    /// Run every stage.
    Pipeline,
    /// Run a seeded suite and write report.json and report.csv.
    Bench,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum CompleterArg {
    Revolution,
    Mirror,
    Partial,
}

impl From<CompleterArg> for Strategy {
    fn from(c: CompleterArg) -> Self {
        match c {
            CompleterArg::Revolution => Strategy::Revolution,
            CompleterArg::Mirror => Strategy::Mirror,
            CompleterArg::Partial => Strategy::Partial,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum CriterionArg {
    Confidence,
    Arbitrary,
}

impl From<CriterionArg> for CriterionKind {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Confidence => CriterionKind::Confidence,
            CriterionArg::Arbitrary => CriterionKind::Arbitrary,
        }
    }
}

enum CliError {
    Config(String),
    Stage(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage(_) => 3,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e.stage {
            pl::Stage::Config => CliError::Config(e.to_string()),
            _ => CliError::Stage(e.to_string()),
        }
    }
}

fn stage_io(stage: &str) -> impl Fn(io::IoError) -> CliError + '_ {
    move |e| CliError::Stage(format!("{stage} stage failed: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Config(m) | CliError::Stage(m)) = &e;
            eprintln!("revgrasp: {m}");
            ExitCode::from(e.code())
        }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => io::read_json(p).map_err(|e| CliError::Config(format!("cannot load config {}: {e}", p.display()))),
    }
}

fn pipeline_config(opts: &Opts) -> Result<PipelineConfig, CliError> {
    let mut cfg: PipelineConfig = load_config(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.scene.seed = seed;
        if let SelectionCriterion::Arbitrary { .. } = cfg.criterion {
            cfg.criterion = SelectionCriterion::Arbitrary { seed };
        }
    }
    if let Some(c) = opts.completer {
        cfg.completer.strategy = c.into();
    }
    if let Some(c) = opts.criterion {
        cfg.criterion = match c {
            CriterionArg::Confidence => SelectionCriterion::Confidence,
            CriterionArg::Arbitrary => SelectionCriterion::Arbitrary { seed: cfg.scene.seed },
        };
    }
    // the completer's container hint follows the scene
    cfg.completer.category = Some(cfg.scene.category);
    cfg.validate()?;
    Ok(cfg)
}

fn suite_config(opts: &Opts) -> Result<SuiteConfig, CliError> {
    let mut suite: SuiteConfig = load_config(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        suite.seed = seed;
    }
    if opts.completer.is_some() || opts.criterion.is_some() {
        suite.arms = vec![Arm {
            completer: opts.completer.map(Into::into).unwrap_or(Strategy::Revolution),
            criterion: opts.criterion.map(Into::into).unwrap_or(CriterionKind::Confidence),
        }];
    }
    suite.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(suite)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let opts = &cli.opts;
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if cli.command == Command::Bench {
        let suite = suite_config(opts)?;
        let report = run_benchmark(&suite, opts.jobs).map_err(|e| CliError::Stage(e.to_string()))?;
        report.write(&out).map_err(|e| CliError::Stage(e.to_string()))?;
        print_json(&report.aggregates);
        return Ok(());
    }

    let cfg = pipeline_config(opts)?;
    if opts.jobs > 0 {
        // ignore a pool that is already set up (only possible in-process)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build_global();
    }
    let d = out.as_path();
    let hash = cfg.hash();
    match cli.command {
        Command::Pipeline => {
            let rec = pl::run_trial(&cfg, Some(d))?;
            let summary = RunSummary::new(&rec.config_hash, rec.metrics, &rec.grasp);
            print_json(&summary);
            rec.grasp?;
        }
        Command::Render => {
            io::write_json(&d.join("config.json"), &cfg).map_err(stage_io("io"))?;
            let scene = pl::build_scene(&cfg)?;
            let (depth, mask, intr) = pl::render_view(&cfg, &scene)?;
            io::ply::write_ply(&d.join("gt_world.ply"), &scene.gt_world()).map_err(stage_io("io"))?;
            io::raster::write_depth(&d.join("depth.f32"), &depth, &intr).map_err(stage_io("io"))?;
            io::raster::write_mask(&d.join("mask.u8"), &mask).map_err(stage_io("io"))?;
            println!("rendered {} masked pixels", mask.count());
        }
        Command::Complete => {
            let scene = pl::build_scene(&cfg)?;
            let (depth, intr) = io::raster::read_depth(&d.join("depth.f32")).map_err(stage_io("complete"))?;
            let mask = io::raster::read_mask(&d.join("mask.u8"), depth.width, depth.height).map_err(stage_io("complete"))?;
            let (tsdf, occ) = pl::reconstruct(&cfg, &scene, &depth, &mask, &intr)?;
            io::grid::write_tsdf(&d.join("tsdf.grid"), &tsdf).map_err(stage_io("io"))?;
            io::grid::write_occupancy(&d.join("occupancy.grid"), &occ).map_err(stage_io("io"))?;
            println!("{} observed voxels, {} occupied", tsdf.observed_count(), occ.occupied_count(0.5));
        }
        Command::Mesh => {
            let occ = io::grid::read_occupancy(&d.join("occupancy.grid")).map_err(stage_io("mesh"))?;
            let mesh = pl::extract(&cfg, &occ)?;
            io::ply::write_ply(&d.join("mesh_canonical.ply"), &mesh).map_err(stage_io("io"))?;
            println!("{} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
        }
        Command::Label => {
            let mesh = io::ply::read_ply(&d.join("mesh_canonical.ply")).map_err(stage_io("label"))?;
            let labeled = pl::label(&cfg, &mesh)?;
            io::ply::write_ply(&d.join("mesh_canonical.ply"), &labeled).map_err(stage_io("io"))?;
            let labels = labeled.postures.as_deref().unwrap_or_default();
            let count = |l| labels.iter().filter(|&&x| x == l).count();
            use revgrasp::PostureLabel::*;
            println!("NG {} MW {} T {}", count(NonGraspable), count(MediumWrap), count(Tripod));
        }
        Command::Metrics => {
            let scene = pl::build_scene(&cfg)?;
            let mesh = io::ply::read_ply(&d.join("mesh_canonical.ply")).map_err(stage_io("metrics"))?;
            let metrics = pl::evaluate(&cfg, &scene, &mesh)?;
            io::write_json(&d.join("metrics.json"), &metrics).map_err(stage_io("io"))?;
            print_json(&metrics);
        }
        Command::Plan => {
            let scene = pl::build_scene(&cfg)?;
            let mesh = io::ply::read_ply(&d.join("mesh_canonical.ply")).map_err(stage_io("plan"))?;
            let (mesh_world, grasp) = pl::grasp(&cfg, &scene, &mesh);
            io::ply::write_ply(&d.join("mesh_world.ply"), &mesh_world).map_err(stage_io("io"))?;
            if let Ok((plan, _)) = &grasp {
                io::write_json(&d.join("plan.json"), &plan.to_file(&hash)).map_err(stage_io("io"))?;
            }
            let summary = RunSummary::new(&hash, None, &grasp);
            io::write_json(&d.join("result.json"), &summary).map_err(stage_io("io"))?;
            print_json(&summary);
            grasp?;
        }
        Command::Bench => unreachable!("handled above"),
    }
    Ok(())
}
