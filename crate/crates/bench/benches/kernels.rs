use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use revgrasp::pipeline::{self as pl, PipelineConfig};
use revgrasp::{compensation, extract_mesh_mise, sample_surface, shape_metrics, UnitVec3, Vec3};

fn stages(c: &mut Criterion) {
    let cfg = PipelineConfig::default();
    let scene = pl::build_scene(&cfg).unwrap();
    let (depth, mask, intr) = pl::render_view(&cfg, &scene).unwrap();
    let (_, occ) = pl::reconstruct(&cfg, &scene, &depth, &mask, &intr).unwrap();
    let mesh = pl::extract(&cfg, &occ).unwrap();

    c.bench_function("render", |b| b.iter(|| pl::render_view(&cfg, black_box(&scene)).unwrap()));
    c.bench_function("voxelize+complete", |b| {
        b.iter(|| pl::reconstruct(&cfg, &scene, black_box(&depth), &mask, &intr).unwrap())
    });
    c.bench_function("mise", |b| {
        let m = &cfg.mise;
        b.iter(|| extract_mesh_mise(black_box(&occ), m.iso, m.initial_res, m.refinement_steps).unwrap())
    });
    c.bench_function("label", |b| b.iter(|| pl::label(&cfg, black_box(&mesh)).unwrap()));

    let gt = sample_surface(&scene.gt_canonical(), 20_000, 1).unwrap();
    let pred = sample_surface(&mesh, 20_000, 2).unwrap();
    c.bench_function("metrics 20k", |b| b.iter(|| shape_metrics(black_box(&pred), black_box(&gt))));
}

fn solver(c: &mut Criterion) {
    let n = UnitVec3::new(Vec3::new(0.6, 0.3, 0.5)).unwrap();
    c.bench_function("compensation", |b| b.iter(|| compensation(black_box(0.6), 0.18, black_box(n)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = stages, solver
}
criterion_main!(benches);
