use criterion::{black_box, criterion_group, criterion_main, Criterion};
use exmo_bench::{filled, filters, stacks};
use exmo_core::autoencoder::{batch_gradients, Model, NetworkConfig};
use exmo_core::ops::{conv2d, deconv2d, maxpool2};

fn kernels(c: &mut Criterion) {
    let x = filled(&[16, 64, 64], 1);
    let bank = filters(16, 16);
    c.bench_function("conv2d 16x64x64 -> 16", |b| b.iter(|| conv2d(black_box(&x), &bank).unwrap()));
    c.bench_function("deconv2d 16x64x64 -> 16", |b| b.iter(|| deconv2d(black_box(&x), &bank).unwrap()));
    c.bench_function("maxpool2 16x64x64", |b| b.iter(|| maxpool2(black_box(&x)).unwrap()));
}

fn network(c: &mut Criterion) {
    let data = stacks(4);
    let mut g = c.benchmark_group("network base 8");
    g.sample_size(10);
    let model = Model::build(NetworkConfig::with_base(8, 0)).unwrap();
    g.bench_function("forward 5x128x128", |b| b.iter(|| model.forward(black_box(data[0].as_ref())).unwrap()));
    let batch: Vec<_> = data.iter().collect();
    g.bench_function("batch gradients x4", |b| b.iter(|| batch_gradients(&model, black_box(&batch)).unwrap()));
    g.finish();
}

criterion_group!(benches, kernels, network);
criterion_main!(benches);
