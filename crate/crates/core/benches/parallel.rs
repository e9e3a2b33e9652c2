use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use m1sim::analytic::saddle_series;
use m1sim::exec::Exec;
use m1sim::hilbert::Boundary;
use m1sim::kinkdyn::{prepare_scan, PrepTarget, SweepProtocol};
use m1sim::operators::Staggering;
use m1sim::spectra::sector_energies;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn sectors(c: &mut Criterion) {
    let mut g = c.benchmark_group("sector_spectra_L16");
    g.sample_size(10);
    let st = Staggering::new(16, 0.7, 0).unwrap();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| sector_energies(16, Boundary::Open, &st, e).unwrap())
        });
    }
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut g = c.benchmark_group("kink_sweeps_l2");
    g.sample_size(10);
    let jobs: Vec<(SweepProtocol, PrepTarget)> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&lam| {
            let mut p = SweepProtocol::new(2, lam, 20.0);
            p.dt = Some(0.02);
            (p, PrepTarget::Kink(1))
        })
        .collect();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| prepare_scan(&jobs, e).unwrap())
        });
    }
    g.finish();
}

fn saddles(c: &mut Criterion) {
    let mut g = c.benchmark_group("saddle_series_l101");
    let times: Vec<f64> = (1..4000).map(|i| i as f64 * 0.1).collect();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| saddle_series(101, 1.0, &times, 2, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sectors, sweeps, saddles);
criterion_main!(benches);
