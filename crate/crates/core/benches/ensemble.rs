use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cryptosim::agent::Mode;
use cryptosim::calib::{grid_search, real_report, AssetSeries, HyperGrid, OhlcvRow};
use cryptosim::par::Execution;
use cryptosim::sim::{self, MarketConfig};
use cryptosim::stats::Calendar;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut m = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        m.push(("parallel", Execution::Parallel));
    }
    m
}

fn ensemble(c: &mut Criterion) {
    let cfg = MarketConfig { agent_count: 100, horizon: 200, ..MarketConfig::default() };
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for size in [4, 8] {
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, size), &size, |b, &size| {
                b.iter(|| sim::run_ensemble(black_box(&cfg), size, Mode::Learning, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn synthetic_asset(symbol: &str, days: usize) -> AssetSeries {
    let start = chrono::NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let mut close: f64 = 10.0;
    let rows = (0..days)
        .map(|d| {
            close *= 1.0 + 0.02 * ((d as f64 * 0.7).sin());
            OhlcvRow {
                date: start + chrono::Days::new(d as u64),
                open: close,
                high: close,
                low: close,
                close,
                volume: 100.0 + (d % 17) as f64,
            }
        })
        .collect();
    AssetSeries { symbol: symbol.into(), rows, continuous: true }
}

fn grid(c: &mut Criterion) {
    let base = MarketConfig { horizon: 120, ..MarketConfig::smoke() };
    let target = real_report(&[synthetic_asset("A", 200), synthetic_asset("B", 200)], Calendar::default()).unwrap();
    let grid = HyperGrid { agent_counts: vec![50, 100], ..HyperGrid::smoke() };
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(name, |b| b.iter(|| grid_search(&grid, &base, black_box(&target), 1, grid.len(), exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, ensemble, grid);
criterion_main!(benches);
