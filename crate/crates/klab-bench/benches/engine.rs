use criterion::{black_box, criterion_group, criterion_main, Criterion};
use klab_bench::{long3, moduli, wstar4};
use klab_core::ksets::{count_global, count_local, fast, EnumOptions, LatticeSpec, LocalSpec};
use klab_core::ksums::kloosterman_sum;
use klab_core::weyl::WeylElement;

fn bench_counts(c: &mut Criterion) {
    let opts = EnumOptions::default();
    c.bench_function("count unramified n3 wl (12,12)", |b| {
        let spec = LatticeSpec::new(3, 1);
        let cv = moduli(&[12, 12]);
        b.iter(|| count_global(&spec, &long3(), black_box(&cv), &opts).unwrap())
    });
    c.bench_function("count ramified n4 wstar (16,16,16)", |b| {
        let spec = LatticeSpec::new(4, 2);
        let cv = moduli(&[16, 16, 16]);
        b.iter(|| count_global(&spec, &wstar4(), black_box(&cv), &opts).unwrap())
    });
    c.bench_function("local count p2 e1 wstar alpha4", |b| {
        let local = LocalSpec::new(2, 1);
        let cv = moduli(&[16, 16, 16]);
        b.iter(|| count_local(&local, 4, &wstar4(), black_box(&cv), &opts).unwrap())
    });
    c.bench_function("stratified fast count alpha8", |b| {
        let local = LocalSpec::new(2, 1);
        b.iter(|| fast::fast_count_wstar(&local, 4, black_box(8), 1, 3, &opts).unwrap())
    });
}

fn bench_sums(c: &mut Criterion) {
    let opts = EnumOptions::default();
    c.bench_function("classical-equivalent sum n2 c=50", |b| {
        let spec = LatticeSpec::new(2, 1);
        let cv = moduli(&[50]);
        b.iter(|| kloosterman_sum(&spec, &WeylElement::long_element(2), &[1], &[1], &[1, 1], black_box(&cv), &opts).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_counts, bench_sums
}
criterion_main!(benches);
