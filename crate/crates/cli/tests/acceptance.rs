//! Acceptance suite: one PASS/FAIL line per criterion, with timings.
//! Runs without the libtest harness so the lines always reach the console.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use revgrasp::experiment::{default_arms, run_benchmark, shipped_cups, SuiteConfig};
use revgrasp::kdtree::KdTree;
use revgrasp::meshing::{extract_mesh_dense, extract_mesh_mise};
use revgrasp::metrics::shape_metrics_brute_force;
use revgrasp::pipeline::{run_trial, PipelineConfig};
use revgrasp::{
    classify_approach, compensation, filter_candidates, horizontal_projection, plan_grasp, shape_metrics, wrist_frame,
    ApproachType, Completer, GraspCandidate, GridSpec, OccupancyGrid, PostureLabel, SampledSurface, Strategy, TriMesh,
    UnitVec3, Vec3, WorkspaceConfig,
};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn random_unit(rng: &mut ChaCha8Rng) -> UnitVec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitVec3::new(v).unwrap();
        }
    }
}

fn random_non_vertical(rng: &mut ChaCha8Rng) -> UnitVec3 {
    loop {
        let n = random_unit(rng);
        if horizontal_projection(n).norm() > 1e-3 {
            return n;
        }
    }
}

fn compensation_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0f64;
    for _ in 0..10_000 {
        let gamma = rng.random_range(0.0..=FRAC_PI_2);
        let l = rng.random_range(0.01..0.5);
        let n = random_non_vertical(&mut rng);
        let c = compensation(gamma, l, n).map_err(|e| e.to_string())?;
        let nz = n.get();
        let axis = nz - Vec3::Z * nz.dot(Vec3::Z);
        let horizontal = Vec3::new(c.x, c.y, 0.0);
        let d_ex = l * (1.0 - gamma.cos());
        let d_z = l * gamma.sin();
        let errs = [
            (horizontal.norm() - d_ex).abs(),
            (-c.z - d_z).abs(),
            (horizontal - axis.normalize().unwrap().get() * d_ex).norm(),
            (horizontal_projection(n) - axis).norm(),
            (c.norm() - 2.0 * l * (gamma / 2.0).sin()).abs(),
        ];
        let e = errs.iter().copied().fold(0.0, f64::max);
        worst = worst.max(e);
        check(e <= 1e-9, format!("γ={gamma} l={l} n={nz:?}: residual {e:e}"))?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("10000 samples, max residual {worst:.1e}, {:.0?}", start.elapsed()))
}

fn wrist_frames() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0f64;
    for _ in 0..10_000 {
        let n = random_non_vertical(&mut rng);
        for approach in [ApproachType::Side, ApproachType::Top] {
            let r = wrist_frame(n, approach).map_err(|e| e.to_string())?;
            let (x, y, z) = (r.column(0), r.column(1), r.column(2));
            let plane = match approach {
                ApproachType::Side => Vec3::Z.dot(z),
                ApproachType::Top => Vec3::Z.dot(y),
            };
            let errs = [r.orthonormality_error(), (r.determinant() - 1.0).abs(), (x + n.get()).norm(), plane.abs()];
            let e = errs.iter().copied().fold(0.0, f64::max);
            worst = worst.max(e);
            check(e <= 1e-9, format!("{approach:?} n={:?}: residual {e:e}", n.get()))?;
        }
    }
    Ok(format!("10000 normals × 2 rules, max residual {worst:.1e}, {:.0?}", start.elapsed()))
}

fn smooth_field(seed: u64) -> OccupancyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(Vec3, f64)> = (0..rng.random_range(2..6))
        .map(|_| {
            let c = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            (c, rng.random_range(0.08..0.18))
        })
        .collect();
    let spec = GridSpec::unit_cube(32);
    let values = (0..spec.len())
        .map(|i| {
            let (a, b, c) = spec.coords(i);
            let p = spec.center(a, b, c);
            blobs.iter().map(|(c, r)| (-(p.distance(*c) / r).powi(2)).exp()).sum::<f64>().min(1.0) as f32
        })
        .collect();
    OccupancyGrid::new(spec, values).unwrap()
}

fn covered(a: &TriMesh, b: &TriMesh, tol: f64) -> bool {
    let tree = KdTree::new(&b.vertices);
    a.vertices.iter().all(|v| tree.nearest(*v).is_some_and(|(_, d2)| d2.sqrt() <= tol))
}

fn mise_oracle() -> Outcome {
    let start = Instant::now();
    let mut tris = 0;
    for seed in 0..10 {
        let occ = smooth_field(seed);
        let mise = extract_mesh_mise(&occ, 0.5, 16, 2).map_err(|e| e.to_string())?;
        let dense = extract_mesh_dense(&occ, 0.5, 64).map_err(|e| e.to_string())?;
        check(!dense.triangles.is_empty(), format!("field {seed} has no surface"))?;
        check(mise.triangles.len() == dense.triangles.len(), format!("field {seed}: {} vs {} triangles", mise.triangles.len(), dense.triangles.len()))?;
        check(covered(&mise, &dense, 1e-6) && covered(&dense, &mise, 1e-6), format!("field {seed}: vertex sets differ"))?;
        tris += dense.triangles.len();
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("10 fields, {tris} triangles matched, {:.1?}", start.elapsed()))
}

fn random_surface(rng: &mut ChaCha8Rng, n: usize) -> SampledSurface {
    let points = (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
    let normals = (0..n).map(|_| random_unit(rng)).collect();
    SampledSurface::new(points, normals).unwrap()
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..20 {
        let a = random_surface(&mut rng, 50);
        let b = random_surface(&mut rng, 50);
        let fast = shape_metrics(&a, &b);
        check(fast == shape_metrics_brute_force(&a, &b), format!("case {case}: index differs from brute force"))?;
        let own = shape_metrics(&a, &a);
        check(own.chamfer_l1 == 0.0 && own.accuracy == 0.0 && own.completeness == 0.0, format!("case {case}: self distance {own:?}"))?;
        let k = rng.random_range(0.1..10.0);
        let scaled = shape_metrics(&a.scaled(k), &b.scaled(k));
        check((scaled.chamfer_l1 - k * fast.chamfer_l1).abs() <= 1e-12 * k.max(1.0), format!("case {case}: chamfer not linear in scale"))?;
        check(scaled.normal_consistency == fast.normal_consistency, format!("case {case}: consistency changed under scaling"))?;
        check((0.0..=1.0).contains(&fast.normal_consistency), format!("case {case}: consistency {}", fast.normal_consistency))?;
    }
    Ok("20 cases equal brute force exactly; axioms hold".into())
}

fn completion_metrics() -> Outcome {
    let start = Instant::now();
    let mut improved = 0;
    let mut ratios = Vec::new();
    for obj in shipped_cups() {
        let run = |strategy| {
            let mut cfg = PipelineConfig::default();
            cfg.scene.params = Some(obj.params.clone());
            cfg.completer = Completer::new(strategy, Some(cfg.scene.category));
            run_trial(&cfg, None).map(|r| r.metrics).map_err(|e| e.to_string())
        };
        let (rev, part) = (run(Strategy::Revolution)?, run(Strategy::Partial)?);
        if rev.chamfer_l1 < part.chamfer_l1 && rev.completeness < part.completeness && rev.normal_consistency > part.normal_consistency {
            improved += 1;
        }
        ratios.push(rev.chamfer_l1 / part.chamfer_l1);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let msg = format!("{improved}/5 cups improved on all metrics, mean chamfer ratio {mean:.3}, {:.1?}", start.elapsed());
    check(improved >= 4 && mean <= 0.6, msg.clone())?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(msg)
}

fn feasibility_ablation() -> Outcome {
    let start = Instant::now();
    let suite = SuiteConfig::default();
    let report = run_benchmark(&suite, 0).map_err(|e| e.to_string())?;
    check(report.rows.len() == 100, format!("{} rows", report.rows.len()))?;
    let arms = default_arms();
    let rate = |i: usize| report.arm(&arms[i]).map(|a| a.total.rate).unwrap_or(0.0);
    let (completed, partial) = (rate(0), rate(1));
    let msg = format!(
        "completion {:.0}% vs partial-only {:.0}% ({:+.0} pp), {:.0?}",
        100.0 * completed,
        100.0 * partial,
        100.0 * (completed - partial),
        start.elapsed()
    );
    check(completed >= 0.70 && completed - partial >= 0.15 - 1e-12, msg.clone())?;
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(msg)
}

fn labeled_point(z: f64, n: UnitVec3) -> TriMesh {
    TriMesh {
        vertices: vec![Vec3::new(-0.4, 0.3, z)],
        normals: vec![n],
        confidence: Some(vec![1.0]),
        postures: Some(vec![PostureLabel::MediumWrap]),
        ..Default::default()
    }
}

fn thresholds() -> Outcome {
    let cfg = WorkspaceConfig::default();
    let at = |deg: f64| {
        let t = deg.to_radians();
        UnitVec3::new(Vec3::new(t.cos(), 0.0, t.sin())).unwrap()
    };
    check(classify_approach(at(45.0), &cfg) == ApproachType::Top, "45° must be Top")?;
    check(classify_approach(at(45.0 - 1e-6), &cfg) == ApproachType::Side, "just under 45° must be Side")?;
    check((cfg.inclination_threshold_rad - FRAC_PI_4).abs() == 0.0, "threshold is not 45°")?;

    let table = cfg.table_height;
    check(filter_candidates(&labeled_point(table + 0.044, UnitVec3::X), &cfg).is_err(), "44 mm vertex kept")?;
    check(filter_candidates(&labeled_point(table + 0.046, UnitVec3::X), &cfg).map(|c| c.len()) == Ok(1), "46 mm vertex dropped")?;

    let side = GraspCandidate { index: 0, vertex: Vec3::new(-0.40, 0.30, 0.12), normal: UnitVec3::X, confidence: 1.0, posture: PostureLabel::MediumWrap };
    let p = plan_grasp(&side, &cfg).map_err(|e| e.to_string())?;
    let close = |a: Vec3, b: Vec3| (a - b).norm() <= 1e-12;
    check(close(p.approach_point(), Vec3::new(-0.35, 0.30, 0.12)), format!("approach {:?}", p.approach_point()))?;
    check(close(p.grasp_point(), Vec3::new(-0.50, 0.30, 0.12)), format!("grasp {:?}", p.grasp_point()))?;
    check(close(p.lift, Vec3::new(0.0, 0.0, 0.100)), format!("side lift {:?}", p.lift))?;
    let top = GraspCandidate { normal: at(60.0), posture: PostureLabel::Tripod, ..side };
    let p = plan_grasp(&top, &cfg).map_err(|e| e.to_string())?;
    check(p.approach == ApproachType::Top && close(p.lift, Vec3::new(0.0, 0.0, 0.200)), format!("top lift {:?}", p.lift))?;
    let travelled = p.grasp_point() - p.compensation - p.approach_point();
    check(close(p.approach_point(), top.vertex + top.normal.get() * 0.050), "top approach offset")?;
    check(close(travelled, top.normal.get() * -0.150), format!("top travel {travelled:?}"))?;
    Ok("45° inclusive, 44/46 mm gate, 50/150 mm travel, 100/200 mm lifts".into())
}

fn bench_once(dir: &Path, config: &Path, jobs: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_revgrasp"))
        .args(["bench", "--config", config.to_str().unwrap(), "--jobs", jobs, "--out", dir.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), format!("bench exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
    let read = |n: &str| std::fs::read(dir.join(n)).map_err(|e| format!("{n}: {e}"));
    Ok((read("report.json")?, read("report.csv")?))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = SuiteConfig { objects: shipped_cups()[..2].to_vec(), trials_per_object: 3, ..SuiteConfig::default() };
    let config = tmp.path().join("suite.json");
    std::fs::write(&config, serde_json::to_vec(&suite).unwrap()).map_err(|e| e.to_string())?;
    let (a_dir, b_dir) = (tmp.path().join("a"), tmp.path().join("b"));
    let a = bench_once(&a_dir, &config, "1")?;
    let b = bench_once(&b_dir, &config, "4")?;
    check(a.0 == b.0, "report.json differs between runs")?;
    check(a.1 == b.1, "report.csv differs between runs")?;
    Ok(format!("12-row suite, 1 vs 4 workers, byte-identical JSON ({} B) and CSV ({} B), {:.1?}", a.0.len(), a.1.len(), start.elapsed()))
}

fn main() {
    // `cargo test -- <filter>` passes arguments; run everything regardless
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("compensation identities", compensation_identities),
        ("wrist-frame contract", wrist_frames),
        ("MISE oracle equivalence", mise_oracle),
        ("metric oracle equivalence", metric_oracle),
        ("completion improves reconstruction", completion_metrics),
        ("grasp-feasibility ablation", feasibility_ablation),
        ("threshold conformance", thresholds),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
