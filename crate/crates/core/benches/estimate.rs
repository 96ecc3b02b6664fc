use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ruinsim_core::engine::estimate;
use ruinsim_core::tuning::select_variance_params;
use ruinsim_core::{IncrementModel, Mode, Overrides};

fn shards_vs_sequential(c: &mut Criterion) {
    let model = IncrementModel::mg1_pareto(2.5, 4.0 / 3.0).unwrap();
    let params = select_variance_params(&model, Mode::StrongEfficiency, &Overrides::default()).unwrap();
    let wide = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    let mut g = c.benchmark_group("estimate_mg1_b1000_n2048");
    g.sample_size(10);
    for shards in [1, wide] {
        let label = if shards == 1 { "sequential" } else { "parallel" };
        g.bench_with_input(BenchmarkId::new(label, shards), &shards, |bch, &s| {
            bch.iter(|| estimate(&model, &params, 1e3, 2048, 7, s).unwrap().mean)
        });
    }
    g.finish();
}

criterion_group!(benches, shards_vs_sequential);
criterion_main!(benches);
