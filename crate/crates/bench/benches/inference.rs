use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use unilift::{expand, ground_ve, lifted_query, parse_query, query_all};
use unilift_bench::{epidemic, universe};

fn lifted_vs_ground(c: &mut Criterion) {
    let q = parse_query("P(Epid | Travel(x1)=true)").unwrap();
    let mut g = c.benchmark_group("epidemic");
    for n in [10, 100, 1000] {
        let m = epidemic(n, 3);
        g.bench_with_input(BenchmarkId::new("lifted", n), &m, |b, m| {
            b.iter(|| lifted_query(black_box(m), &q).unwrap())
        });
        if n <= 100 {
            g.bench_with_input(BenchmarkId::new("ground", n), &m, |b, m| {
                b.iter(|| ground_ve(black_box(m), &q).unwrap())
            });
        }
    }
    g.finish();
}

fn universe_pipeline(c: &mut Criterion) {
    let u = universe(Some(0.05));
    c.bench_function("expand", |b| b.iter(|| expand(black_box(&u)).unwrap()));
    let e = expand(&u).unwrap();
    let q = parse_query("P(Sick(x1) | Travel(x2)=true)").unwrap();
    c.bench_function("query_all", |b| {
        b.iter(|| query_all(black_box(&e.models), &q).unwrap())
    });
}

criterion_group!(benches, lifted_vs_ground, universe_pipeline);
criterion_main!(benches);
