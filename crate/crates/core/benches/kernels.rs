//! Sequential (one-thread pool) vs data-parallel (default pool) kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;

use ccnn::autograd::Tape;
use ccnn::nn::{checkered_conv, convert_to_ccnn, cross_entropy, Activation, FeatureMap, LayerGraph, Mode};
use ccnn::sampler::SamplerBank;
use ccnn::trace::{random_sequence, TraceState};
use ccnn::train::TOY_GRAPH;
use ccnn::Tensor;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn checkered_forward(c: &mut Criterion) {
    let x = Tensor::uniform(&[8, 16, 1, 32, 32], -1.0, 1.0, 1);
    let w = Tensor::uniform(&[32, 16, 3, 3], -0.1, 0.1, 2);
    let mut group = c.benchmark_group("checkered_conv_forward");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                pool.install(|| {
                    let mut tape = Tape::new();
                    let fx = FeatureMap::from_parts(&mut tape, x.clone(), vec![ccnn::trace::SubmapMeta::root(32, 32)], false)
                        .unwrap();
                    let wv = tape.constant(w.clone());
                    checkered_conv(&mut tape, &fx, wv, None, 1).unwrap().var
                })
            })
        });
    }
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let cnn = LayerGraph::from_text(TOY_GRAPH, 0).unwrap();
    let ccnn = convert_to_ccnn(&cnn).unwrap();
    let x = Tensor::uniform(&[16, 1, 32, 32], -1.0, 1.0, 3);
    let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
    let mut group = c.benchmark_group("forward_backward");
    for (graph_name, graph) in [("cnn", &cnn), ("ccnn", &ccnn)] {
        for (name, pool) in pools() {
            group.bench_function(BenchmarkId::new(graph_name, name), |b| {
                b.iter(|| {
                    pool.install(|| {
                        let mut tape = Tape::new();
                        let input = FeatureMap::from_images(&mut tape, x.clone(), false).unwrap();
                        let out = graph
                            .forward_range(&mut tape, Activation::Map(input), Mode::Train { seed: 0 }, 0..graph.len())
                            .unwrap();
                        let loss = cross_entropy(&mut tape, out.output().unwrap().var(), &labels).unwrap();
                        tape.backward(loss).unwrap()
                    })
                })
            });
        }
    }
    group.finish();
}

fn tracing(c: &mut Criterion) {
    let bank = SamplerBank::standard(2).unwrap();
    let seq = random_sequence(2, 8, 5);
    let mut group = c.benchmark_group("trace_256x256_8_steps");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| TraceState::new(256, 256, 2).unwrap().apply_sequence(&bank, &seq).unwrap()))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = checkered_forward, training_step, tracing
}
criterion_main!(benches);
