//! Rayon-versus-sequential timings for the data-parallel inner loops: grid
//! norms of the recursive evaluators and batched point evaluation.
//!
//! Run with `cargo bench`; the parallel side follows `RAYON_NUM_THREADS`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use transport_lab::geometry::Cube;
use transport_lab::lr::{LrField, LrParams};
use transport_lab::{analysis, par};

fn grid_norm_parallel_vs_seq(c: &mut Criterion) {
    let field = LrField::new(LrParams::paper_defaults()).unwrap();
    let t = 0.037;
    let mut group = c.benchmark_group("grid_norm_256");
    for &res in &[128usize, 256] {
        group.bench_with_input(BenchmarkId::new("parallel", res), &res, |b, &res| {
            b.iter(|| {
                let dens = |x: &[f64]| field.density(1, t, x).unwrap();
                analysis::lr_norm_grid(&dens, 1.5, res, &Cube::unit(2))
            })
        });
        group.bench_with_input(BenchmarkId::new("sequential", res), &res, |b, &res| {
            b.iter(|| {
                // same midpoint rule, explicit single-thread loop
                let h = 1.0 / res as f64;
                let rows = par::map_range_seq(res, |j0| {
                    let x0 = -0.5 + (j0 as f64 + 0.5) * h;
                    let mut sum = 0.0;
                    for j1 in 0..res {
                        let x1 = -0.5 + (j1 as f64 + 0.5) * h;
                        sum += field.density(1, t, &[x0, x1]).unwrap().powf(1.5);
                    }
                    sum
                });
                (rows.iter().sum::<f64>() * h * h).powf(1.0 / 1.5)
            })
        });
    }
    group.finish();
}

fn velocity_batch(c: &mut Criterion) {
    let field = LrField::new(LrParams::paper_defaults()).unwrap();
    let pts: Vec<[f64; 2]> = (0..4096)
        .map(|i| {
            let a = i as f64 / 4096.0;
            [a - 0.5, (a * 7.31).fract() - 0.5]
        })
        .collect();
    let mut group = c.benchmark_group("velocity_batch_4096");
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let v = par::map_collect(&pts, |x| field.velocity(1, 0.31, x).unwrap().0);
            v.len()
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let v: Vec<_> = pts.iter().map(|x| field.velocity(1, 0.31, x).unwrap().0).collect();
            v.len()
        })
    });
    group.finish();
}

criterion_group!(benches, grid_norm_parallel_vs_seq, velocity_batch);
criterion_main!(benches);
