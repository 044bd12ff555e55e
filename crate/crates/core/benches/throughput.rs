//! Sequential vs rayon throughput of the hot loops. "sequential" runs inside
//! a one-thread pool, where the `par` helpers execute inline; "parallel"
//! uses a pool with one worker per available core (at least two).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nodedp::accountant::{calibrate_sigma, rdp_gamma, AccountantConfig};
use nodedp::gnn::{clip_gradient, tree_sum, Arch, ModelParams, ModelShape};
use nodedp::graph::{gen_planted_classes, PlantedConfig};
use nodedp::par;
use nodedp::sampler::{heter_poisson, SampleKey, SamplerConfig};
use rayon::{ThreadPool, ThreadPoolBuilder};
use std::hint::black_box;

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let cores = std::thread::available_parallelism().map_or(2, |n| n.get()).max(2);
    vec![
        ("sequential", ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", ThreadPoolBuilder::new().num_threads(cores).build().unwrap()),
    ]
}

fn sampling_and_gradients(c: &mut Criterion) {
    let g = gen_planted_classes(&PlantedConfig {
        n: 5000,
        d: 16,
        classes: 4,
        p_intra: 0.004,
        p_inter: 0.0005,
        separation: 5.0,
        seed: 1,
    })
    .unwrap();
    let ids: Vec<usize> = (0..g.node_count()).collect();
    let cfg = SamplerConfig::train(0.1, 2.0, true);
    let params = ModelParams::init(ModelShape::new(Arch::Gcn, 16, 64, 4), 1).unwrap();
    let batch = heter_poisson(&g, &ids, &cfg, SampleKey { seed: 1, round: 0 }).unwrap();

    let mut group = c.benchmark_group("heter_poisson");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            let mut round = 0;
            b.iter(|| {
                round += 1;
                pool.install(|| black_box(heter_poisson(&g, &ids, &cfg, SampleKey { seed: 1, round }).unwrap()))
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("clipped_gradient_sum");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                pool.install(|| {
                    let parts = par::map(&batch.subgraphs, |s| clip_gradient(params.loss_and_grad(s).unwrap().1).flat);
                    black_box(tree_sum(parts, params.param_count()))
                })
            })
        });
    }
    group.finish();
}

fn accounting(c: &mut Criterion) {
    let n = 5000;
    let cfg = AccountantConfig::new(0.05, 2.0, 180, (n as f64).powf(-1.1), n);
    let mut group = c.benchmark_group("accountant");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("rdp_gamma", name), |b| {
            b.iter(|| pool.install(|| black_box(rdp_gamma(&cfg, 8.0, 4.0).unwrap())))
        });
        group.bench_function(BenchmarkId::new("calibrate_sigma", name), |b| {
            b.iter(|| pool.install(|| black_box(calibrate_sigma(2.0, &cfg).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, sampling_and_gradients, accounting);
criterion_main!(benches);
