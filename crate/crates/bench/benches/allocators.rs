use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qpart_bench::{heavy_hex, queues};
use qpart_core::allocators::{allocate_attractor, allocate_comdap, allocate_cri_greedy, CriGreedyConfig};
use qpart_core::routing::map_and_route;
use qpart_core::{build_hierarchy, HierarchyConfig};

fn allocators(c: &mut Criterion) {
    let g = heavy_hex(0);
    let tree = build_hierarchy(&g, &HierarchyConfig::default()).unwrap();
    let qs: Vec<_> = queues(3, g.qubit_count()).iter().map(|q| q.ordered()).collect();
    let cri = CriGreedyConfig::default();
    let mut group = c.benchmark_group("allocate");
    for (i, q) in qs.iter().enumerate() {
        group.bench_with_input(BenchmarkId::new("attractor", i), q, |b, q| {
            b.iter(|| allocate_attractor(black_box(q), &g).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cri_greedy", i), q, |b, q| {
            b.iter(|| allocate_cri_greedy(black_box(q), &g, &cri).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("comdap", i), q, |b, q| {
            b.iter(|| allocate_comdap(black_box(q), &tree, &g).unwrap())
        });
    }
    group.finish();
}

fn routing(c: &mut Criterion) {
    let g = heavy_hex(0);
    let tree = build_hierarchy(&g, &HierarchyConfig::default()).unwrap();
    let q = queues(1, g.qubit_count())[0].ordered();
    let plan = allocate_comdap(&q, &tree, &g).unwrap();
    c.bench_function("route_queue", |b| {
        b.iter(|| {
            for p in &plan.partitions {
                black_box(map_and_route(&q[p.program_index], &p.qubits, &g).unwrap());
            }
        })
    });
}

criterion_group!(benches, allocators, routing);
criterion_main!(benches);
