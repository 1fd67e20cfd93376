//! Compares the sequential and rayon-partitioned grid scans on the
//! six-variant catalog. Run with `--no-default-features` to bench the
//! sequential scan alone.

use std::hint::black_box;

use auditcert::builtin::six_variant_model;
use auditcert::certify::coverage;
use auditcert::gridverify::{max_violation_sequential, GridSpec};
use auditcert::metric::{lift, ScoreKind};
use auditcert::rational::Q;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num::Zero;

#[cfg(feature = "parallel")]
use auditcert::gridverify::max_violation_parallel;

fn grid_scan(c: &mut Criterion) {
    let model = six_variant_model();
    let alpha = coverage(&model.catalog, &Q::zero())
        .global_alpha
        .expect("harmful classes present");
    let fragile = lift(&model.catalog, ScoreKind::Fragile);

    let mut group = c.benchmark_group("max_violation");
    group.sample_size(20);
    for k in [10u64, 20] {
        let spec = GridSpec::new(k, 6);
        group.bench_with_input(BenchmarkId::new("sequential", k), &spec, |b, spec| {
            b.iter(|| {
                max_violation_sequential(
                    black_box(&model.catalog),
                    black_box(&fragile),
                    black_box(&alpha),
                    spec,
                )
                .expect("grid fits guard")
            })
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", k), &spec, |b, spec| {
            b.iter(|| {
                max_violation_parallel(
                    black_box(&model.catalog),
                    black_box(&fragile),
                    black_box(&alpha),
                    spec,
                )
                .expect("grid fits guard")
            })
        });
    }
    group.finish();
}

criterion_group!(benches, grid_scan);
criterion_main!(benches);
