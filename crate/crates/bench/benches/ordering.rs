//! Tournament aggregation and relation-matrix construction benchmarks.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use scriptprobe::corpus::synth::{synthetic_corpus, SynthConfig};
use scriptprobe::induction::{build_relation_matrix, order_events, RelationMatrix};
use scriptprobe::prompting::PromptSet;
use scriptprobe::scorer::MockBackend;
use scriptprobe::tasks::Prober;
use scriptprobe::SubEvent;

fn random_matrix(n: usize, seed: u64) -> RelationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events: Vec<SubEvent> = (0..n)
        .map(|i| SubEvent::new(format!("event number {i:03}")).unwrap())
        .collect();
    RelationMatrix::from_fn(events, |_, _| Ok(rng.gen_range(-1.0f64..1.0))).unwrap()
}

fn bench_order_events(c: &mut Criterion) {
    let mut group = c.benchmark_group("order_events");
    for n in [8usize, 32, 128] {
        let matrix = random_matrix(n, 42);
        group.bench_with_input(BenchmarkId::from_parameter(n), &matrix, |b, m| {
            b.iter(|| order_events(m, None));
        });
    }
    group.finish();
}

fn bench_relation_matrix(c: &mut Criterion) {
    let corpus = synthetic_corpus(&SynthConfig {
        n_scenarios: 4,
        min_events: 8,
        max_events: 8,
        seed: 3,
    });
    let prober = Prober::new(
        Arc::new(MockBackend::consistent_with(&corpus, 0)),
        PromptSet::default(),
    );
    let events: Vec<SubEvent> = corpus.scenarios()[0].scripts[0].events().to_vec();
    c.bench_function("build_relation_matrix/8", |b| {
        b.iter(|| build_relation_matrix(&prober, &events).unwrap());
    });
}

criterion_group!(benches, bench_order_events, bench_relation_matrix);
criterion_main!(benches);
