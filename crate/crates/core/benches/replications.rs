use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use matchlab::experiments::run_experiment;
use matchlab::{Execution, ExperimentConfig};

fn configs() -> Vec<(&'static str, ExperimentConfig)> {
    let parse = |text: &str| ExperimentConfig::parse(text, None).unwrap();
    vec![
        ("uniform_m10", parse("n = 1000\nm = 10\nmode = mono, poly\nreps = 32\n")),
        ("access_m25", parse("n = 1000\nm = 25\nkappa = uniform(1..25)\nreps = 32\n")),
        (
            "correlated",
            parse("suite = correlated\npreferences = rum\nn = 1000\nm = 10\nbeta = 0, 20\ngamma = 0, 20\nnoise = gaussian(0,0.5)\nreps = 8\n"),
        ),
    ]
}

fn replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    for (name, config) in configs() {
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, name), &config, |b, cfg| {
                b.iter(|| run_experiment(cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
