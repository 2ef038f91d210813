use criterion::{criterion_group, criterion_main, Criterion};
use semcolor_bench::{chroma, guide, lightness};
use semcolor_core::bilateral::{joint_bilateral_filter, joint_bilateral_upsample};
use semcolor_core::chroma::{encode_map, rebalance_weights};
use semcolor_core::loss::colorization_loss;
use semcolor_core::toynet::Objective;
use semcolor_core::*;
use std::hint::black_box;

fn bilateral(c: &mut Criterion) {
    let params = BilateralParams::default();
    let low = chroma(16, 16);
    let g = guide(64, 64);
    c.bench_function("jbu 16x16 -> 64x64", |b| {
        b.iter(|| joint_bilateral_upsample(black_box(&low), black_box(&g), &params).unwrap())
    });
    let full = chroma(64, 64);
    c.bench_function("joint bilateral filter 64x64", |b| {
        b.iter(|| joint_bilateral_filter(black_box(&full), black_box(&g), &params).unwrap())
    });
}

fn quantizer_and_loss(c: &mut Criterion) {
    let grid = ChromaGrid::default_grid();
    let ab = chroma(32, 32);
    c.bench_function("soft-encode 32x32", |b| {
        b.iter(|| encode_map(black_box(&ab), &grid, EncodeParams::default()).unwrap())
    });
    let target = encode_map(&chroma(8, 8), &grid, EncodeParams::default()).unwrap();
    let prior = vec![1.0 / grid.q() as f64; grid.q()];
    let weights = rebalance_weights(&prior, 0.5).unwrap();
    let logits = LogitsMap::zeros(8, 8, grid.q());
    c.bench_function("colorization loss 8x8xQ", |b| {
        b.iter(|| colorization_loss(black_box(&logits), &target, &weights, Reduction::Mean).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let grid = ChromaGrid::default_grid();
    let net = ToyNet::build(ToyNetConfig {
        q: grid.q(),
        ..ToyNetConfig::default()
    })
    .unwrap();
    let l = lightness(32, 32);
    c.bench_function("toynet forward 32x32", |b| b.iter(|| net.forward(black_box(&l)).unwrap()));

    let target = encode_map(&chroma(8, 8), &grid, EncodeParams::default()).unwrap();
    let labels = SegLabelMap::new(32, 32, (0..1024).map(|i| (i / 7) % 4).collect()).unwrap();
    let rebalance = RebalanceWeights::uniform(grid.q());
    let seg_weights = SegClassWeights::uniform(4);
    let obj = Objective {
        weights: LossWeights::default(),
        rebalance: &rebalance,
        seg_weights: &seg_weights,
        reduction: Reduction::Mean,
    };
    c.bench_function("toynet backward 32x32", |b| {
        b.iter(|| net.backward(black_box(&l), &target, &labels, &obj).unwrap())
    });
}

criterion_group!(benches, bilateral, quantizer_and_loss, network);
criterion_main!(benches);
