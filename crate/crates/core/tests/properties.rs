//! Randomized invariants checked against brute-force or closed-form oracles.

use std::collections::BTreeSet;

use dglearn::equivalence::{
    apply_support_rotation, check_equivalent, classify_rotation, enumerate_equivalence_class, RotationEffect, Verdict,
};
use dglearn::evaluation::shd_to_class;
use dglearn::graph::{find_mscs, graph_of_support, shd, simple_cycles, support_of_graph};
use dglearn::scoring::{fit_kl, fit_mle, fit_mle_warm, nll, FitOptions};
use dglearn::sem::{
    apply_givens, kl_gaussian, precision_factor, precision_of, random_dg, sample_data, sample_parameters, zeroing_angle,
    ParamSampling,
};
use dglearn::{DirectedGraph, SupportMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Graph on `p` vertices from an edge bitmask over ordered pairs.
fn from_mask(p: usize, mask: u64) -> DirectedGraph {
    let mut edges = Vec::new();
    let mut bit = 0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                if mask >> bit & 1 == 1 {
                    edges.push((i, j));
                }
                bit += 1;
            }
        }
    }
    DirectedGraph::from_edges(p, &edges).unwrap()
}

fn graph(max_p: usize) -> impl Strategy<Value = DirectedGraph> {
    (1..=max_p).prop_flat_map(|p| any::<u64>().prop_map(move |m| from_mask(p, m)))
}

fn graph_p(p: usize) -> impl Strategy<Value = DirectedGraph> {
    any::<u64>().prop_map(move |m| from_mask(p, m))
}

fn reach(g: &DirectedGraph) -> Vec<Vec<bool>> {
    (0..g.p()).map(|v| g.reachable_from(v)).collect()
}

/// All simple cycles by extending paths from their smallest vertex.
fn brute_cycles(g: &DirectedGraph) -> BTreeSet<Vec<usize>> {
    fn extend(g: &DirectedGraph, path: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
        let (start, last) = (path[0], *path.last().unwrap());
        for next in 0..g.p() {
            if !g.has_edge(last, next) {
                continue;
            }
            if next == start {
                out.insert(path.clone());
            } else if next > start && !path.contains(&next) {
                path.push(next);
                extend(g, path, out);
                path.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    for s in 0..g.p() {
        extend(g, &mut vec![s], &mut out);
    }
    out
}

fn support(p: usize, mask: u64) -> SupportMatrix {
    support_of_graph(&from_mask(p, mask))
}

/// Every `(i, j, k)` with `j != k`.
fn triples(p: usize) -> Vec<(usize, usize, usize)> {
    (0..p).flat_map(|i| (0..p).flat_map(move |j| (0..p).filter(move |&k| k != j).map(move |k| (i, j, k)))).collect()
}

fn columns(xi: &SupportMatrix) -> Vec<Vec<bool>> {
    let mut cols: Vec<Vec<bool>> = (0..xi.p()).map(|j| (0..xi.p()).map(|i| xi.get(i, j)).collect()).collect();
    cols.sort();
    cols
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn graph_support_round_trip(g in graph(8)) {
        let xi = support_of_graph(&g);
        prop_assert_eq!(graph_of_support(&xi).unwrap(), g.clone());
        let json = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(serde_json::from_str::<DirectedGraph>(&json).unwrap(), g);
    }

    #[test]
    fn mscs_matches_pairwise_reachability(g in graph(6)) {
        let r = reach(&g);
        let part = find_mscs(&g);
        let idx = part.block_index(g.p());
        for u in 0..g.p() {
            for v in 0..g.p() {
                let together = u == v || (r[u][v] && r[v][u]);
                prop_assert_eq!(idx[u] == idx[v], together);
            }
        }
        // blocks come in an order compatible with every edge
        for (u, v) in g.edges() {
            prop_assert!(idx[u] <= idx[v]);
        }
    }

    #[test]
    fn shd_is_a_metric(a in graph_p(4), b in graph_p(4), c in graph_p(4)) {
        let d = |x: &DirectedGraph, y: &DirectedGraph| shd(x, y).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
    }

    #[test]
    fn cycles_match_exhaustive_paths(g in graph(5)) {
        let got: BTreeSet<Vec<usize>> = simple_cycles(&g).iter().map(|c| c.vertices().to_vec()).collect();
        prop_assert_eq!(got, brute_cycles(&g));
    }

    #[test]
    fn rotated_factor_support_is_predicted(
        p in 2usize..=6,
        mask in any::<u64>(),
        keep in any::<u64>(),
        values in proptest::collection::vec(0.1f64..2.0, 36),
        ijk in (0usize..6, 0usize..6, 1usize..6),
    ) {
        let xi = support(p, mask);
        let mut q = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                // structural nonzeros, a few of them numerically zero
                if xi.get(a, b) && (keep >> (a * p + b)) & 7 != 0 {
                    q[(a, b)] = if (a + b) % 2 == 0 { values[a * p + b] } else { -values[a * p + b] };
                }
            }
        }
        let (i, j) = (ijk.0 % p, ijk.1 % p);
        let k = (j + 1 + ijk.2 % (p - 1)) % p;
        let theta = if q[(i, j)] == 0.0 && q[(i, k)] == 0.0 && xi.get(i, j) && !xi.get(i, k) {
            std::f64::consts::FRAC_PI_2
        } else {
            zeroing_angle(&q, i, j, k)
        };
        let rotated = apply_givens(&q, j, k, theta).unwrap();
        let predicted = apply_support_rotation(&xi, i, j, k).unwrap();
        for a in 0..p {
            for b in 0..p {
                prop_assert!(rotated[(a, b)].abs() < 1e-12 || predicted.get(a, b));
            }
        }
    }

    #[test]
    fn reversible_acute_moves_have_inverses(p in 3usize..=5, mask in any::<u64>()) {
        let xi = support(p, mask);
        for (i, j, k) in triples(p) {
            if classify_rotation(&xi, i, j, k).unwrap() != RotationEffect::ReversibleAcute {
                continue;
            }
            let next = apply_support_rotation(&xi, i, j, k).unwrap();
            let l = (0..p).find(|&l| l != i && xi.get(l, j) != xi.get(l, k)).unwrap();
            let back = [(j, k), (k, j)].into_iter().any(|(a, b)| {
                classify_rotation(&next, l, a, b).unwrap() == RotationEffect::ReversibleAcute
                    && apply_support_rotation(&next, l, a, b).unwrap() == xi
            });
            prop_assert!(back, "A({}, {}, {}) on {:?}", i, j, k, xi);
        }
    }

    #[test]
    fn column_swap_is_an_involution(p in 2usize..=5, mask in any::<u64>()) {
        let xi = support(p, mask);
        for (i, j, k) in triples(p) {
            if classify_rotation(&xi, i, j, k).unwrap() != RotationEffect::ColumnSwap {
                continue;
            }
            let next = apply_support_rotation(&xi, i, j, k).unwrap();
            prop_assert_eq!(classify_rotation(&next, i, k, j).unwrap(), RotationEffect::ColumnSwap);
            prop_assert_eq!(apply_support_rotation(&next, i, k, j).unwrap(), xi.clone());
        }
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric(a in graph_p(4), b in graph_p(4)) {
        prop_assert_eq!(check_equivalent(&a, &a, 100_000).unwrap().verdict, Verdict::Equivalent);
        let ab = check_equivalent(&a, &b, 100_000).unwrap().verdict;
        let ba = check_equivalent(&b, &a, 100_000).unwrap().verdict;
        prop_assert_eq!(ab, ba);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn precision_is_spd_and_givens_preserves_gram(seed in any::<u64>(), p in 2usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dg(p, 4, p, &mut rng).unwrap();
        let pr = sample_parameters(&g, &ParamSampling::default(), &mut rng).unwrap();
        let theta = precision_of(&pr).unwrap().theta;
        prop_assert!(theta.clone().cholesky().is_some());
        let q = precision_factor(&pr);
        let rotated = apply_givens(&q, 0, p - 1, 0.3 + seed as f64 % 2.0).unwrap();
        let diff = (&rotated * rotated.transpose() - &q * q.transpose()).amax();
        prop_assert!(diff < 1e-10 * theta.amax().max(1.0));
    }

    #[test]
    fn kl_has_second_order_contact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dg(4, 4, 4, &mut rng).unwrap();
        let sigma = sample_parameters(&g, &ParamSampling::default(), &mut rng).unwrap().covariance().unwrap();
        let e = DMatrix::from_fn(4, 4, |a, b| ((a * 7 + b * 7 + (a * b) % 5) % 9) as f64 / 9.0 - 0.4);
        let e = &e + e.transpose();
        let kl = |eps: f64| kl_gaussian(&sigma, &(&sigma + &e * eps)).unwrap();
        let ratio = kl(1e-3) / kl(5e-4);
        prop_assert!((ratio - 4.0).abs() < 0.05, "ratio {}", ratio);
    }

    #[test]
    fn supergraph_fits_at_least_as_well(seed in any::<u64>(), extra in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 4;
        let truth = random_dg(p, 4, p, &mut rng).unwrap();
        let pr = sample_parameters(&truth, &ParamSampling::default(), &mut rng).unwrap();
        let data = sample_data(&pr, 500, &mut rng).unwrap();
        let sub = from_mask(p, extra & seed);
        let mut edges = sub.edges();
        edges.extend(from_mask(p, extra).edges());
        edges.sort();
        edges.dedup();
        let sup = DirectedGraph::from_edges(p, &edges).unwrap();
        let opts = FitOptions::default();
        let Ok(small) = fit_mle(&data, &sub, &opts) else { return Ok(()) };
        let big = fit_mle_warm(&data, &sup, &opts, &small).unwrap();
        let (ns, nb) = (nll(&data, &small).unwrap(), nll(&data, &big).unwrap());
        prop_assert!(nb <= ns + 1e-6 * ns.abs(), "{} > {}", nb, ns);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn class_membership_is_an_equivalence(g in graph_p(4), pick in any::<usize>()) {
        let class = enumerate_equivalence_class(&support_of_graph(&g), 100_000).unwrap();
        prop_assume!(class.exhausted);
        let members = class.graphs();
        let other = &members[pick % members.len()];
        for m in &members {
            prop_assert_eq!(check_equivalent(m, &g, 100_000).unwrap().verdict, Verdict::Equivalent);
            prop_assert_eq!(check_equivalent(m, other, 100_000).unwrap().verdict, Verdict::Equivalent);
            prop_assert_eq!(shd_to_class(m, &class).unwrap().shd, 0);
        }
    }


    #[test]
    fn equivalent_graphs_share_distributions(mask in any::<u64>(), pick in any::<usize>(), seed in any::<u64>()) {
        let g1 = from_mask(3, mask);
        let class = enumerate_equivalence_class(&support_of_graph(&g1), 100_000).unwrap();
        let members = class.graphs();
        let g2 = &members[pick % members.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = FitOptions { restarts: 20, ..FitOptions::population() };
        for _ in 0..10 {
            let sigma = sample_parameters(&g1, &ParamSampling::default(), &mut rng).unwrap().covariance().unwrap();
            let (_, kl) = fit_kl(g2, &sigma, &opts).unwrap();
            prop_assert!(kl < 1e-6, "{} fit to {}: {}", g2, g1, kl);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { max_global_rejects: 100_000, ..ProptestConfig::with_cases(100) })]

    #[test]
    fn well_separated_columns_only_permute(p in 3usize..=5, mask in any::<u64>()) {
        let xi = support(p, mask);
        let separated = (0..p).all(|j| (j + 1..p).all(|k| xi.column_distance(j, k) >= 2));
        prop_assume!(separated);
        let class = enumerate_equivalence_class(&xi, 100_000).unwrap();
        for m in &class.members {
            prop_assert_eq!(columns(m), columns(&xi));
        }
    }
}

#[test]
fn sample_covariance_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let g = random_dg(5, 4, 5, &mut rng).unwrap();
        let pr = sample_parameters(&g, &ParamSampling::default(), &mut rng).unwrap();
        let sigma = pr.covariance().unwrap();
        for n in [1_000usize, 10_000] {
            let data = sample_data(&pr, n, &mut rng).unwrap();
            // entries standardized by their population scale
            let s = data.covariance();
            let err = (0..5)
                .flat_map(|a| (0..5).map(move |b| (a, b)))
                .map(|(a, b)| (s[(a, b)] - sigma[(a, b)]).abs() / (sigma[(a, a)] * sigma[(b, b)]).sqrt())
                .fold(0.0, f64::max);
            assert!(err < 5.0 / (n as f64).sqrt(), "n = {n}: error {err}");
        }
    }
}
