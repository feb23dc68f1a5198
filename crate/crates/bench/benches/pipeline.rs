use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use reweigh_bench::{surface, syndromes};
use reweigh_core::matcher::{decode, Decoder};
use reweigh_core::nnrw::{FeatureSchema, Mlp, NnReweighter};
use reweigh_core::reweight::{CorrReweighter, Heuristic};
use reweigh_core::sampler::Sampler;
use reweigh_core::tracer::{PairProbs, PairSet, TraceStore};

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample");
    for d in [3, 5, 7] {
        let (model, _) = surface(d, 0.01);
        let sampler = Sampler::new(&model, 1);
        let mut i = 0u64;
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| {
                i += 1;
                black_box(sampler.sample(i))
            })
        });
    }
    g.finish();
}

fn decoding(c: &mut Criterion) {
    let mut g = c.benchmark_group("decode");
    for (d, p) in [(3, 0.01), (5, 0.01), (5, 0.001), (7, 0.001)] {
        let (model, graph) = surface(d, p);
        let shots = syndromes(&model, 256, 2);
        let decoder = Decoder::new(graph.clone());
        let mut k = 0;
        g.bench_function(format!("cached/d{d}/p{p}"), |b| {
            b.iter(|| {
                k = (k + 1) % shots.len();
                black_box(decoder.decode(&shots[k]).unwrap())
            })
        });
        g.bench_function(format!("uncached/d{d}/p{p}"), |b| {
            b.iter(|| {
                k = (k + 1) % shots.len();
                black_box(decode(&graph, &shots[k]).unwrap())
            })
        });
    }
    g.finish();
}

fn tracing(c: &mut Criterion) {
    let (model, graph) = surface(5, 0.01);
    let decoder = Decoder::new(graph.clone());
    let matchings: Vec<_> = syndromes(&model, 256, 3)
        .iter()
        .map(|s| decoder.decode(s).unwrap())
        .collect();
    let mut store = TraceStore::with_pairs(&graph, PairSet::local(&graph));
    let mut k = 0;
    c.bench_function("trace/record/d5", |b| {
        b.iter(|| {
            k = (k + 1) % matchings.len();
            store.record(&matchings[k]);
        })
    });
}

fn correlation(c: &mut Criterion) {
    let (model, graph) = surface(3, 0.01);
    let pairs = PairProbs::truth(&graph);
    let first = decoder_first(&model, &graph);
    let heuristic = Heuristic::new(&pairs, graph.probabilities(), 0.0, 1.0);
    c.bench_function("reweight/heuristic/d3", |b| {
        b.iter(|| black_box(heuristic.reweight(&graph, &first)))
    });
    let schema = FeatureSchema::new(&graph);
    let nn = NnReweighter::new(schema.clone(), Mlp::init(schema.dim(), 64, 1), pairs).unwrap();
    c.bench_function("reweight/nn/d3", |b| {
        b.iter(|| black_box(nn.reweight(&graph, &first)))
    });
}

fn decoder_first(
    model: &reweigh_core::dem::DetectorErrorModel,
    graph: &reweigh_core::dem::DecodingGraph,
) -> reweigh_core::matcher::Matching {
    let dets = syndromes(model, 64, 4)
        .into_iter()
        .max_by_key(|d| d.len())
        .unwrap();
    decode(graph, &dets).unwrap()
}

criterion_group!(benches, sampling, decoding, tracing, correlation);
criterion_main!(benches);
