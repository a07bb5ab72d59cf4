use criterion::{criterion_group, criterion_main, Criterion};
use hybrid_forecast::replay::replay_slots;
use hybrid_forecast::scoring::{ScoreReport, StandardizeLevel};
use hybrid_forecast::simulator::{default_slots, simulate, SimConfig};
use hybrid_forecast::{Exec, Source};

fn bench(c: &mut Criterion) {
    let cfg = SimConfig { n_ifps: 30, n_forecasters: 60, ..SimConfig::default() };
    let log = simulate(&cfg, Exec::Parallel).unwrap().log;
    let slots = default_slots();
    let sources: Vec<Source> = log.sources().into_iter().cloned().collect();

    let mut g = c.benchmark_group("replay");
    g.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_function(name, |b| b.iter(|| replay_slots(&log, &slots, exec).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("score_report");
    g.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_function(name, |b| {
            b.iter(|| ScoreReport::build(&log, &sources, None, StandardizeLevel::IfpDay, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
