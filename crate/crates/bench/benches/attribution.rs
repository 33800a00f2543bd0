use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use xspace::attribution::attribute;
use xspace::{Method, MethodConfig, SpaceKind};
use xspace_bench::{signal, wrapped};

fn methods(c: &mut Criterion) {
    let n = 128;
    let cfg = MethodConfig {
        shap_coalitions: 100,
        lime_samples: 100,
        gs_samples: 10,
        ..MethodConfig::default()
    };
    let mut group = c.benchmark_group("attribution");
    group.sample_size(10);
    for kind in [SpaceKind::Time, SpaceKind::Frequency] {
        let w = wrapped(kind, n);
        let z = w.space().forward(&signal(n)).unwrap();
        for method in Method::ALL {
            group.bench_with_input(BenchmarkId::new(kind.as_str(), method), &z, |b, z| {
                b.iter(|| attribute(&w, black_box(z), 0, method, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, methods);
criterion_main!(benches);
