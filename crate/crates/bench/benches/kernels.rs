use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nestq::ops::{argmin_per_event, combinations};
use nestq::queries::execute_row_group;
use nestq::{Collection, ColumnarRowGroup, Histogram, HistogramSpec, Query, QueryConfig};
use nestq_bench::{events, fixed_jet_row_group};

fn bench_combinations(c: &mut Criterion) {
    let mut group = c.benchmark_group("combinations");
    for jets in [6usize, 20, 50] {
        let rg = fixed_jet_row_group(64, jets);
        let offsets = rg.collection(Collection::Jets).unwrap().offsets().clone();
        group.throughput(Throughput::Elements(64));
        group.bench_with_input(BenchmarkId::new("triples", jets), &offsets, |b, o| {
            b.iter(|| combinations(o, 3).unwrap())
        });
    }
    group.finish();
}

fn bench_argmin(c: &mut Criterion) {
    let rg = fixed_jet_row_group(64, 20);
    let triples = combinations(rg.collection(Collection::Jets).unwrap().offsets(), 3).unwrap();
    let keys: Vec<f64> = (0..triples.num_tuples())
        .map(|i| ((i * 7919) % 1000) as f64)
        .collect();
    c.bench_function("argmin_per_event/20_jets", |b| {
        b.iter(|| argmin_per_event(&keys, &triples.offsets))
    });
}

fn bench_queries(c: &mut Criterion) {
    let rg = ColumnarRowGroup::from_events(&events(7, 4096));
    let cfg = QueryConfig::default();
    let mut group = c.benchmark_group("query_row_group");
    group.throughput(Throughput::Elements(rg.num_events() as u64));
    for q in Query::ALL {
        let projected = rg.project(&q.projection());
        group.bench_with_input(BenchmarkId::from_parameter(q), &projected, |b, rg| {
            b.iter(|| execute_row_group(q, rg, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_histogram(c: &mut Criterion) {
    let spec = HistogramSpec::new(0.0, 2000.0, 100).unwrap();
    let xs: Vec<f64> = (0..100_000)
        .map(|i| (i as f64 * 0.37) % 2500.0 - 100.0)
        .collect();
    let mut group = c.benchmark_group("histogram");
    group.throughput(Throughput::Elements(xs.len() as u64));
    group.bench_function("fill", |b| {
        b.iter(|| {
            let mut h = Histogram::new(spec);
            h.fill_all(xs.iter().copied());
            h
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_combinations,
    bench_argmin,
    bench_queries,
    bench_histogram
);
criterion_main!(benches);
