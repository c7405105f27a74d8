use std::hint::black_box;

use afflab_core::affine::act_on_set;
use afflab_core::construction::build_x;
use afflab_core::experiments::min_invariant_set;
use afflab_core::spectral::{averaged_operator, kron_matvec, op_norm, seeded_vector};
use afflab_core::{AffineMap, ConstructionParams, Epsilon, GeneratorSet, NormOptions, PrimeField};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_x");
    for (p, a, e) in [(100003u64, vec![2u64], "1/4"), (10000019, vec![3], "1/7"), (1000003, vec![2, 3], "1/2")] {
        let params = ConstructionParams::new(p, &a, e.parse::<Epsilon>().unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("p{p}-k{}-e{e}", a.len())), &params, |b, params| {
            b.iter(|| build_x(black_box(params)).unwrap())
        });
    }
    g.finish();
}

fn set_actions(c: &mut Criterion) {
    let p = 10000019;
    let field = PrimeField::new(p).unwrap();
    let params = ConstructionParams::new(p, &[3], "1/7".parse().unwrap()).unwrap();
    let x = build_x(&params).unwrap().x;
    let dilate = AffineMap::new(&field, 3, 0).unwrap();
    let translate = AffineMap::new(&field, 1, 3).unwrap();
    c.bench_function("dilate", |b| b.iter(|| act_on_set(&field, dilate, black_box(&x))));
    c.bench_function("translate", |b| b.iter(|| act_on_set(&field, translate, black_box(&x))));
}

fn norms(c: &mut Criterion) {
    let mut g = c.benchmark_group("op_norm");
    g.sample_size(10);
    for p in [101u64, 1009] {
        let field = PrimeField::new(p).unwrap();
        let maps = vec![AffineMap::new(&field, 2, 0).unwrap(), AffineMap::new(&field, 1, 1).unwrap()];
        let s = GeneratorSet::new(field, maps).unwrap();
        let m = averaged_operator(&s);
        g.bench_with_input(BenchmarkId::from_parameter(p), &m, |b, m| {
            b.iter(|| op_norm(black_box(m), NormOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn kron(c: &mut Criterion) {
    let mut g = c.benchmark_group("kron_matvec");
    for n in [8usize, 12, 16] {
        let factors: Vec<Vec<f64>> = (0..n).map(|i| seeded_vector(4, i as u64)).collect();
        let v = seeded_vector(1 << n, 99);
        g.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter(|| kron_matvec(&factors, 2, black_box(v)).unwrap())
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    for p in [13u64, 19, 23] {
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| min_invariant_set(p, &[2, 3], "1/2".parse().unwrap(), None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, construction, set_actions, norms, kron, oracle);
criterion_main!(benches);
