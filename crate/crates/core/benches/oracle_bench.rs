//! Throughput of the Monte Carlo oracle, parallel versus sequential.
//!
//! With the default `parallel` feature the suite times the batch loop on
//! the default rayon pool and again pinned to a single-thread pool; the
//! two share every instruction outside of scheduling, so their ratio is
//! the parallel speedup. Compiled with `--no-default-features` the suite
//! times the plain sequential fold instead (the code path the feature flag
//! actually removes). A closed-form pipeline point is included as a
//! yardstick for what the sampler is being compared against.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};

use turbulink::oracle::{mc_channel_estimate, McConfig};
use turbulink::pipeline::{channel_spec, derive_channel, run_point, LinkConfig};

/// The acceptance-style weak-turbulence configuration: clear weather,
/// 10 km, 0.6 m aperture, medium adaptive optics.
fn weak_mc(n_samples: u64) -> McConfig {
    let config = LinkConfig::default();
    let channel = derive_channel(&config).expect("default channel derives");
    McConfig {
        n_samples,
        seed: 42,
        channel: channel_spec(&channel, config.channel.kappa),
    }
}

fn bench_oracle(c: &mut Criterion) {
    let mc = weak_mc(65_536);
    let mut group = c.benchmark_group("mc_channel_estimate_64k");
    group.sample_size(10);
    group.measurement_time(Duration::from_secs(15));

    #[cfg(feature = "parallel")]
    {
        group.bench_function("parallel_default_pool", |b| {
            b.iter(|| mc_channel_estimate(black_box(&mc)).unwrap())
        });
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        group.bench_function("parallel_one_thread", |b| {
            b.iter(|| single.install(|| mc_channel_estimate(black_box(&mc)).unwrap()))
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(|| mc_channel_estimate(black_box(&mc)).unwrap())
    });

    group.finish();
}

fn bench_closed_form(c: &mut Criterion) {
    let config = LinkConfig::default();
    let mut group = c.benchmark_group("closed_form_point");
    group.sample_size(10);
    group.bench_function("run_point_default", |b| {
        b.iter(|| run_point(black_box(&config)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_oracle, bench_closed_form);
criterion_main!(benches);
