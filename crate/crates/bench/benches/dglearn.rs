use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dglearn::equivalence::{check_equivalent, enumerate_equivalence_class, DEFAULT_BUDGET};
use dglearn::graph::{find_mscs, simple_cycles};
use dglearn::scoring::{fit_kl, fit_mle, FitOptions, Scorer};
use dglearn::search::{neighbors, search, Algorithm, SearchConfig};
use dglearn::sem::{random_dg, sample_data, sample_parameters, spectral_radius, Dataset, ParamSampling, Parameterization};
use dglearn::DirectedGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn g(p: usize, e: &[(usize, usize)]) -> DirectedGraph {
    DirectedGraph::from_edges(p, e).unwrap()
}

/// 4-cycle with one extra parent entering it.
fn four_cycle() -> DirectedGraph {
    g(5, &[(1, 2), (2, 3), (3, 4), (4, 1), (0, 2)])
}

fn params(truth: &DirectedGraph, seed: u64) -> Parameterization {
    sample_parameters(truth, &ParamSampling::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn dataset(truth: &DirectedGraph, n: usize, seed: u64) -> Dataset {
    sample_data(&params(truth, seed), n, &mut ChaCha8Rng::seed_from_u64(seed + 1)).unwrap()
}

fn graphs(c: &mut Criterion) {
    let big = random_dg(30, 4, 30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    c.bench_function("mscs_p30", |b| b.iter(|| find_mscs(black_box(&big))));
    c.bench_function("simple_cycles_p30", |b| b.iter(|| simple_cycles(black_box(&big))));
}

fn equivalence(c: &mut Criterion) {
    let truth = four_cycle();
    let xi = truth.support();
    c.bench_function("enumerate_class_4cycle", |b| {
        b.iter(|| enumerate_equivalence_class(black_box(&xi), DEFAULT_BUDGET).unwrap())
    });
    let reversed = g(5, &[(2, 1), (3, 2), (4, 3), (1, 4), (0, 2)]);
    c.bench_function("check_equivalent_4cycle", |b| {
        b.iter(|| check_equivalent(black_box(&truth), black_box(&reversed), DEFAULT_BUDGET).unwrap())
    });
}

fn fitting(c: &mut Criterion) {
    let truth = four_cycle();
    let data = dataset(&truth, 10_000, 2);
    c.bench_function("fit_mle_4cycle", |b| {
        b.iter(|| fit_mle(black_box(&data), &truth, &FitOptions::default()).unwrap())
    });
    let pr = params(&truth, 3);
    let sigma = pr.covariance().unwrap();
    c.bench_function("fit_kl_population_4cycle", |b| {
        b.iter(|| fit_kl(&truth, black_box(&sigma), &FitOptions::population()).unwrap())
    });
    c.bench_function("spectral_radius_p5", |b| b.iter(|| spectral_radius(black_box(pr.b()))));
}

fn searching(c: &mut Criterion) {
    let truth = four_cycle();
    let data = dataset(&truth, 10_000, 5);
    let empty = DirectedGraph::empty(5);
    c.bench_function("score_neighborhood_cold_p5", |b| {
        b.iter(|| {
            let scorer = Scorer::new(&data, FitOptions::default());
            for mv in neighbors(&empty, 4) {
                scorer.score_value(&mv.apply(&empty).unwrap()).unwrap();
            }
        })
    });
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    let hill = SearchConfig { algorithm: Algorithm::HillClimb, ..SearchConfig::default() };
    group.bench_function("hill_climb_p5", |b| b.iter(|| search(black_box(&data), &empty, &hill).unwrap()));
    let tabu = SearchConfig::default();
    group.bench_function("tabu_p5", |b| b.iter(|| search(black_box(&data), &empty, &tabu).unwrap()));
    group.finish();
}

criterion_group!(benches, graphs, equivalence, fitting, searching);
criterion_main!(benches);
