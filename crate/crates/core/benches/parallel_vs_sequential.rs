//! Same workloads on the default rayon pool and on a one-thread pool. Built
//! with `--no-default-features` both arms run the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dtmod::harness::{run_campaign, CampaignSpec, ClaimId};
use dtmod::moduli::{evaluate_modulus, ModulusQuery, Variant};
use dtmod::{FunctionExpr, JacobiWeight};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    let n = default.current_num_threads();
    vec![(format!("default-{n}-threads"), default), ("single-thread".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())]
}

fn modulus(c: &mut Criterion) {
    let f = FunctionExpr::abs_pow(0.0, 3.5);
    let w = JacobiWeight::new(0.5, 0.5, 2.0).unwrap();
    let q = ModulusQuery::new(Variant::WeightedDt, 2, 1, 0.2).p(2.0).weight(w);
    let mut g = c.benchmark_group("weighted_dt_modulus");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| b.iter(|| pool.install(|| evaluate_modulus(&q, &f).unwrap())));
    }
    g.finish();
}

fn campaign(c: &mut Criterion) {
    let mut spec = CampaignSpec::new(ClaimId::Thm16).seed(7);
    spec.cases = 24;
    let mut g = c.benchmark_group("equivalence_campaign");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| b.iter(|| pool.install(|| run_campaign(&spec).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, modulus, campaign);
criterion_main!(benches);
