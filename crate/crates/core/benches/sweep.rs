use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use paragate::circuit::ToyParams;
use paragate::config::*;
use paragate::reports::{sweep, Execution, Mode};

fn toy_sweep() -> RunConfig {
    RunConfig {
        circuit: None,
        toy: Some(ToyParams::reference(4.5, 0.1)),
        drive: DriveConfig { omega_d: DriveFrequency::Static, ..DriveConfig::default() },
        numerics: NumericsConfig { dims: vec![4, 4, 4], tol: 1e-7, ..NumericsConfig::default() },
        sweep: Some(SweepConfig {
            axis: AxisName::OmegaC,
            start: Some(4.2),
            stop: Some(5.3),
            count: Some(8),
            values: None,
            second: None,
            sweet_spot_tol: 1e-3,
        }),
        spectroscopy: SpectroscopyConfig::default(),
        output: OutputConfig::default(),
    }
}

fn bench_sweep(c: &mut Criterion) {
    let cfg = toy_sweep();
    let mut g = c.benchmark_group("toy_sweep_8_points");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| sweep(black_box(&cfg), Mode::Both, Execution::Sequential).unwrap()));
    g.bench_function("parallel", |b| {
        b.iter(|| sweep(black_box(&cfg), Mode::Both, Execution::Parallel { threads: None }).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
