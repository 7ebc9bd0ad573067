use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kurzmani::dichotomy::{
    spectral_projection, verify_dichotomy, DichotomyOptions, ProjectionMode,
};
use kurzmani::kurzweil::{cross_check, ks_integral_ref, NodeFn, ReferenceOptions};
use kurzmani::linsys::{FundamentalOperator, MeshRequest};
use kurzmani::lp_manifold::{manifold_graph, solve_lp, LpMode};
use kurzmani::StieltjesMeasure;
use kurzmani_bench::{impulsive_saddle, planar_context, weierstrass};

fn integrals(c: &mut Criterion) {
    let w = weierstrass(12);
    c.bench_function("ks_integral_ref/weierstrass_increment", |b| {
        b.iter(|| {
            ks_integral_ref(
                &NodeFn(black_box(&w)),
                0.0,
                1.0,
                &ReferenceOptions::default(),
            )
            .unwrap()
        })
    });
    let mu = StieltjesMeasure::new(
        kurzmani::PiecewisePath::scalar(1.0),
        vec![(0.25, 0.5), (0.75, -0.25)],
    )
    .unwrap();
    c.bench_function("cross_check/weierstrass_lebesgue_atoms", |b| {
        b.iter(|| cross_check(black_box(&w), &mu, 0.0, 1.0, 1e-8).unwrap())
    });
}

fn fundamental(c: &mut Criterion) {
    let spec = impulsive_saddle();
    c.bench_function("fundamental_operator/impulsive_saddle_0_40", |b| {
        b.iter(|| {
            FundamentalOperator::new(black_box(&spec), &MeshRequest::new(0.0, 40.0, 0.01)).unwrap()
        })
    });
    let op = FundamentalOperator::new(&spec, &MeshRequest::new(0.0, 40.0, 0.01)).unwrap();
    c.bench_function("fundamental_operator/eval_off_mesh", |b| {
        b.iter(|| op.eval(black_box(31.237), black_box(2.001)).unwrap())
    });
}

fn dichotomy(c: &mut Criterion) {
    let spec = impulsive_saddle();
    let t0 = spec.t0();
    let p0 = spectral_projection(&spec, t0, &ProjectionMode::Autonomous { period: Some(1.0) })
        .unwrap()
        .matrix;
    let grid: Vec<f64> = (-20..=20).map(|k| t0 + 0.5 * k as f64).collect();
    c.bench_function("verify_dichotomy/impulsive_saddle", |b| {
        b.iter(|| {
            verify_dichotomy(
                &spec,
                &p0,
                t0,
                black_box(&grid),
                &DichotomyOptions::default(),
            )
            .unwrap()
        })
    });
}

fn lyapunov_perron(c: &mut Criterion) {
    let ctx = planar_context(LpMode::Fast, 40.0);
    let disc = ctx.discretize(0.0, &[]).unwrap();
    let zeta = disc.zeta_from_coords(&[0.1]).unwrap();
    c.bench_function("solve_lp/planar_fast", |b| {
        b.iter(|| solve_lp(&ctx, &disc, black_box(&zeta)).unwrap())
    });
    let grid: Vec<Vec<f64>> = (-4..=4).map(|k| vec![0.05 * k as f64]).collect();
    c.bench_function("manifold_graph/planar_fast_9", |b| {
        b.iter(|| manifold_graph(&ctx, 0.0, black_box(&grid)).unwrap())
    });

    let reference = planar_context(LpMode::Reference, 10.0);
    let disc = reference.discretize(0.0, &[]).unwrap();
    let mut group = c.benchmark_group("reference");
    group.sample_size(10);
    group.bench_function("solve_lp/planar_reference_T10", |b| {
        b.iter(|| solve_lp(&reference, &disc, black_box(&zeta)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, integrals, fundamental, dichotomy, lyapunov_perron);
criterion_main!(benches);
