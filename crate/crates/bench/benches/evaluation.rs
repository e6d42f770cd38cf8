//! LCS / ROUGE-L benchmarks at both granularities.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scriptprobe::evaluation::{lcs_length, rouge_l, Granularity};
use scriptprobe::SubEvent;

fn event_sequence(n: usize, seed: u64) -> Vec<SubEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<SubEvent> = (0..n)
        .map(|i| SubEvent::new(format!("perform routine step number {i:03} carefully")).unwrap())
        .collect();
    events.shuffle(&mut rng);
    events
}

fn bench_lcs(c: &mut Criterion) {
    let mut group = c.benchmark_group("lcs_length");
    for n in [10usize, 40, 160] {
        let a = event_sequence(n, 1);
        let b = event_sequence(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &(a, b), |bch, (a, b)| {
            bch.iter(|| lcs_length(a, b, |x, y| x == y));
        });
    }
    group.finish();
}

fn bench_rouge(c: &mut Criterion) {
    let reference = event_sequence(40, 3);
    let candidate = event_sequence(40, 4);
    c.bench_function("rouge_l/event/40", |b| {
        b.iter(|| rouge_l(&candidate, &reference, Granularity::Event).unwrap());
    });
    c.bench_function("rouge_l/token/40", |b| {
        b.iter(|| rouge_l(&candidate, &reference, Granularity::Token).unwrap());
    });
}

criterion_group!(benches, bench_lcs, bench_rouge);
criterion_main!(benches);
