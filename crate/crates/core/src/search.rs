//! Local structure search: hill climbing and tabu search over directed graphs
//! with edge addition, deletion, reversal and the two virtual-edge moves.
//!
//! Candidates are scored in parallel through a shared [`Scorer`], whose block
//! cache makes rescoring after a local move cost only the changed blocks.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivalence::{is_reducible, Reducibility};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::scoring::{FitOptions, ScoredModel, Scorer};
use crate::sem::Dataset;

/// A structural edit. The derived order (kind, then payload) is the
/// tie-breaking order of the search.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    Add { from: usize, to: usize },
    Delete { from: usize, to: usize },
    Reverse { from: usize, to: usize },
    /// Triangle `{i, j, k}` plus a path `k = path[0], ..., path[m] = j`
    /// closing a cycle through `j -> k`.
    VirtualCase1 { i: usize, j: usize, k: usize, path: Vec<usize> },
    /// Triangles `{i, j, k}` and `{l, j, k}` around the edge `j -> k`.
    VirtualCase2 { i: usize, j: usize, k: usize, l: usize },
}

impl Move {
    pub fn is_virtual(&self) -> bool {
        matches!(self, Move::VirtualCase1 { .. } | Move::VirtualCase2 { .. })
    }

    pub fn apply(&self, g: &DirectedGraph) -> Result<DirectedGraph> {
        let p = g.p();
        let check = |v: usize| if v < p { Ok(()) } else { Err(Error::IndexOutOfRange { index: v, p }) };
        match *self {
            Move::Add { from, to } => {
                check(from)?;
                check(to)?;
                if from == to || g.has_edge(from, to) {
                    return Err(Error::PreconditionViolated(format!("cannot add X{}->X{}", from + 1, to + 1)));
                }
                let mut h = g.clone();
                h.set(from, to, true);
                Ok(h)
            }
            Move::Delete { from, to } => {
                check(from)?;
                check(to)?;
                if !g.has_edge(from, to) {
                    return Err(Error::PreconditionViolated(format!("no edge X{}->X{}", from + 1, to + 1)));
                }
                let mut h = g.clone();
                h.set(from, to, false);
                Ok(h)
            }
            Move::Reverse { from, to } => {
                check(from)?;
                check(to)?;
                if !g.has_edge(from, to) || g.has_edge(to, from) {
                    return Err(Error::PreconditionViolated(format!("cannot reverse X{}->X{}", from + 1, to + 1)));
                }
                let mut h = g.clone();
                h.set(from, to, false);
                h.set(to, from, true);
                Ok(h)
            }
            Move::VirtualCase1 { i, j, k, ref path } => apply_virtual_case1(g, i, j, k, path),
            Move::VirtualCase2 { i, j, k, l } => apply_virtual_case2(g, i, j, k, l),
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Add { from, to } => write!(f, "add X{}->X{}", from + 1, to + 1),
            Move::Delete { from, to } => write!(f, "delete X{}->X{}", from + 1, to + 1),
            Move::Reverse { from, to } => write!(f, "reverse X{}->X{}", from + 1, to + 1),
            Move::VirtualCase1 { i, j, k, path } => {
                let path: Vec<String> = path.iter().map(|v| format!("X{}", v + 1)).collect();
                write!(f, "virtual1 i=X{} j=X{} k=X{} path={}", i + 1, j + 1, k + 1, path.join("-"))
            }
            Move::VirtualCase2 { i, j, k, l } => {
                write!(f, "virtual2 i=X{} j=X{} k=X{} l=X{}", i + 1, j + 1, k + 1, l + 1)
            }
        }
    }
}

fn distinct(vs: &[usize]) -> bool {
    vs.iter().enumerate().all(|(a, x)| vs[..a].iter().all(|y| y != x))
}

fn orient(h: &mut DirectedGraph, from: usize, to: usize) {
    h.set(to, from, false);
    h.set(from, to, true);
}

fn unlink(h: &mut DirectedGraph, a: usize, b: usize) {
    h.set(a, b, false);
    h.set(b, a, false);
}

/// Orients `path` (from `k` to `j`) and `j -> k` into a directed cycle,
/// deletes the edge(s) between `i` and `j`, and orients `i -> k`.
///
/// A path of length one (`[k, j]`) yields the 2-cycle `j <-> k`.
pub fn apply_virtual_case1(g: &DirectedGraph, i: usize, j: usize, k: usize, path: &[usize]) -> Result<DirectedGraph> {
    let p = g.p();
    let fail = |why: &str| Err(Error::PreconditionViolated(format!("virtual case 1: {why}")));
    if [i, j, k].iter().chain(path).any(|&v| v >= p) {
        return fail("vertex out of range");
    }
    if !distinct(&[i, j, k]) {
        return fail("triangle vertices must be distinct");
    }
    if !(g.adjacent(i, j) && g.adjacent(i, k) && g.adjacent(j, k)) {
        return fail("no triangle over i, j, k");
    }
    if path.len() < 2 || path[0] != k || path[path.len() - 1] != j || !distinct(path) || path.contains(&i) {
        return fail("path must run from k to j without repeating vertices or visiting i");
    }
    if path.windows(2).any(|w| !g.adjacent(w[0], w[1])) {
        return fail("path uses a missing edge");
    }
    let mut h = g.clone();
    if path.len() == 2 {
        h.set(j, k, true);
        h.set(k, j, true);
    } else {
        for w in path.windows(2) {
            orient(&mut h, w[0], w[1]);
        }
        orient(&mut h, j, k);
    }
    unlink(&mut h, i, j);
    orient(&mut h, i, k);
    Ok(h)
}

/// Deletes the edges between `i` and `j` and between `l` and `k`, adds
/// `k -> j` (making `j <-> k`), and orients `i -> k` and `l -> j`.
pub fn apply_virtual_case2(g: &DirectedGraph, i: usize, j: usize, k: usize, l: usize) -> Result<DirectedGraph> {
    let p = g.p();
    let fail = |why: &str| Err(Error::PreconditionViolated(format!("virtual case 2: {why}")));
    if [i, j, k, l].iter().any(|&v| v >= p) {
        return fail("vertex out of range");
    }
    if !distinct(&[i, j, k, l]) {
        return fail("vertices must be distinct");
    }
    if !g.has_edge(j, k) || g.has_edge(k, j) {
        return fail("requires j -> k without k -> j");
    }
    if !(g.adjacent(i, j) && g.adjacent(i, k) && g.adjacent(l, j) && g.adjacent(l, k)) {
        return fail("missing triangle over {i, j, k} or {l, j, k}");
    }
    let mut h = g.clone();
    unlink(&mut h, i, j);
    unlink(&mut h, l, k);
    h.set(k, j, true);
    orient(&mut h, i, k);
    orient(&mut h, l, j);
    Ok(h)
}

/// Simple undirected paths from `k` to `j` avoiding `i`, with 1 to `max_edges` edges.
fn skeleton_paths(g: &DirectedGraph, i: usize, j: usize, k: usize, max_edges: usize) -> Vec<Vec<usize>> {
    fn go(g: &DirectedGraph, path: &mut Vec<usize>, i: usize, j: usize, max_edges: usize, out: &mut Vec<Vec<usize>>) {
        let cur = *path.last().expect("nonempty path");
        if cur == j {
            out.push(path.clone());
            return;
        }
        if path.len() > max_edges {
            return;
        }
        for w in 0..g.p() {
            if w != i && g.adjacent(cur, w) && !path.contains(&w) {
                path.push(w);
                go(g, path, i, j, max_edges, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, &mut vec![k], i, j, max_edges, &mut out);
    out
}

/// All moves applicable to `g`, in a deterministic order.
///
/// Reversal of an edge inside a 2-cycle is omitted (deletion covers it).
/// Virtual moves are included when `virtual_path_len > 0`; it bounds the
/// number of edges of the Case 1 path.
pub fn neighbors(g: &DirectedGraph, virtual_path_len: usize) -> Vec<Move> {
    let p = g.p();
    let mut moves = Vec::new();
    for from in 0..p {
        for to in 0..p {
            if from != to && !g.has_edge(from, to) {
                moves.push(Move::Add { from, to });
            }
        }
    }
    for (from, to) in g.edges() {
        moves.push(Move::Delete { from, to });
    }
    for (from, to) in g.edges() {
        if !g.has_edge(to, from) {
            moves.push(Move::Reverse { from, to });
        }
    }
    if virtual_path_len > 0 {
        for j in 0..p {
            for k in 0..p {
                if j == k || !g.adjacent(j, k) {
                    continue;
                }
                for i in 0..p {
                    if i == j || i == k || !g.adjacent(i, j) || !g.adjacent(i, k) {
                        continue;
                    }
                    for path in skeleton_paths(g, i, j, k, virtual_path_len) {
                        moves.push(Move::VirtualCase1 { i, j, k, path });
                    }
                }
            }
        }
        for (j, k) in g.edges() {
            if g.has_edge(k, j) {
                continue;
            }
            let tri: Vec<usize> = (0..p).filter(|&v| v != j && v != k && g.adjacent(v, j) && g.adjacent(v, k)).collect();
            for &i in &tri {
                for &l in &tri {
                    if i != l {
                        moves.push(Move::VirtualCase2 { i, j, k, l });
                    }
                }
            }
        }
    }
    moves.sort();
    moves
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    HillClimb,
    Tabu,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    /// Number of most recently visited structures that may not be revisited.
    pub tabu_length: usize,
    /// Consecutive iterations without a new best before tabu search stops.
    pub patience: usize,
    /// Independent searches; later ones start from seeded perturbations of the init.
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Per-edge penalty; `½ log n` when absent.
    pub lambda: Option<f64>,
    pub use_virtual: bool,
    /// Longest Case 1 path, in edges.
    pub max_virtual_path: usize,
    /// Virtual moves are admissible only if the NLL rises by at most this times `n`.
    pub virtual_tolerance: f64,
    /// Apply an equivalent reduction to the result when one exists.
    pub reduce_output: bool,
    pub reduction_budget: usize,
    pub fit: FitOptions,
    /// Worker threads for candidate scoring; the global pool when absent.
    pub threads: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            algorithm: Algorithm::Tabu,
            tabu_length: 5,
            patience: 5,
            restarts: 1,
            seed: 0,
            max_iterations: 1000,
            lambda: None,
            use_virtual: true,
            max_virtual_path: 4,
            virtual_tolerance: 1e-3,
            reduce_output: true,
            reduction_budget: 50_000,
            fit: FitOptions::default(),
            threads: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.lambda.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::InvalidConfig("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of a search with its trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub model: ScoredModel,
    /// Score after each accepted move of the winning restart, starting with the init.
    pub trajectory: Vec<f64>,
    pub accepted_moves: Vec<Move>,
    pub iterations: usize,
}

/// Hill climbing from `init`.
pub fn hill_climb(data: &Dataset, init: &DirectedGraph, cfg: &SearchConfig) -> Result<ScoredModel> {
    let cfg = SearchConfig { algorithm: Algorithm::HillClimb, ..cfg.clone() };
    Ok(search(data, init, &cfg)?.model)
}

/// Tabu search from `init`.
pub fn tabu_search(data: &Dataset, init: &DirectedGraph, cfg: &SearchConfig) -> Result<ScoredModel> {
    let cfg = SearchConfig { algorithm: Algorithm::Tabu, ..cfg.clone() };
    Ok(search(data, init, &cfg)?.model)
}

/// Runs `cfg.algorithm` with a fresh scorer.
pub fn search(data: &Dataset, init: &DirectedGraph, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    if init.p() != data.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), got: init.p() });
    }
    let mut scorer = Scorer::new(data, FitOptions { seed: cfg.seed, ..cfg.fit.clone() });
    if let Some(l) = cfg.lambda {
        scorer = scorer.with_lambda(l);
    }
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            pool.install(|| search_with(&scorer, init, cfg))
        }
        None => search_with(&scorer, init, cfg),
    }
}

/// Runs `cfg.algorithm` against an existing scorer, reusing its cache.
pub fn search_with(scorer: &Scorer, init: &DirectedGraph, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<SearchOutcome> = None;
    for r in 0..cfg.restarts {
        let start = if r == 0 { init.clone() } else { perturb(init, &mut rng) };
        let run = match cfg.algorithm {
            Algorithm::HillClimb => climb(scorer, &start, cfg)?,
            Algorithm::Tabu => tabu(scorer, &start, cfg)?,
        };
        if best.as_ref().is_none_or(|b| run.model.score < b.model.score) {
            best = Some(run);
        }
    }
    let mut out = best.expect("at least one restart");
    if cfg.reduce_output {
        if let Reducibility::Reducible(h) = is_reducible(&out.model.graph, cfg.reduction_budget) {
            if let Ok(m) = scorer.score(&h) {
                out.model = m;
            }
        }
    }
    Ok(out)
}

/// `p` random additions or deletions.
fn perturb<R: Rng>(g: &DirectedGraph, rng: &mut R) -> DirectedGraph {
    let p = g.p();
    let mut h = g.clone();
    if p < 2 {
        return h;
    }
    for _ in 0..p {
        let a = rng.random_range(0..p);
        let b = (a + rng.random_range(1..p)) % p;
        let on = h.has_edge(a, b);
        h.set(a, b, !on);
    }
    h
}

struct Candidate {
    mv: Move,
    graph: DirectedGraph,
    score: f64,
}

/// Scores every admissible neighbor of `current` in parallel; order is preserved.
fn score_neighbors(scorer: &Scorer, current: &DirectedGraph, current_nll: f64, cfg: &SearchConfig) -> Vec<Candidate> {
    let path_len = if cfg.use_virtual { cfg.max_virtual_path.max(1) } else { 0 };
    let guard = cfg.virtual_tolerance * scorer.n();
    neighbors(current, path_len)
        .into_par_iter()
        .filter_map(|mv| {
            let graph = mv.apply(current).ok()?;
            if graph == *current {
                return None;
            }
            let nll = scorer.nll(&graph).ok()?;
            if mv.is_virtual() && nll - current_nll > guard {
                return None;
            }
            let score = nll + scorer.lambda() * graph.edge_count() as f64;
            score.is_finite().then_some(Candidate { mv, graph, score })
        })
        .collect()
}

/// Lowest score; the earliest move wins ties.
fn pick<'a>(cands: impl Iterator<Item = &'a Candidate>) -> Option<&'a Candidate> {
    cands.fold(None, |best: Option<&Candidate>, c| match best {
        Some(b) if b.score <= c.score => Some(b),
        _ => Some(c),
    })
}

fn improvement_eps(score: f64) -> f64 {
    1e-9 * score.abs().max(1.0)
}

fn climb(scorer: &Scorer, init: &DirectedGraph, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let mut current = init.clone();
    let mut nll = scorer.nll(&current)?;
    let mut score = nll + scorer.lambda() * current.edge_count() as f64;
    let mut trajectory = vec![score];
    let mut accepted = Vec::new();
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let cands = score_neighbors(scorer, &current, nll, cfg);
        let Some(best) = pick(cands.iter()) else { break };
        if best.score >= score - improvement_eps(score) {
            break;
        }
        current = best.graph.clone();
        score = best.score;
        nll = scorer.nll(&current)?;
        trajectory.push(score);
        accepted.push(best.mv.clone());
    }
    Ok(SearchOutcome { model: scorer.score(&current)?, trajectory, accepted_moves: accepted, iterations })
}

fn tabu(scorer: &Scorer, init: &DirectedGraph, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let mut current = init.clone();
    let mut nll = scorer.nll(&current)?;
    let mut score = nll + scorer.lambda() * current.edge_count() as f64;
    let (mut best_graph, mut best_score) = (current.clone(), score);
    let mut tabu_list: VecDeque<DirectedGraph> = VecDeque::new();
    let mut trajectory = vec![score];
    let mut accepted = Vec::new();
    let (mut best_trajectory_len, mut best_moves_len) = (1, 0);
    let mut stale = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations && stale < cfg.patience {
        iterations += 1;
        if cfg.tabu_length > 0 {
            if tabu_list.len() == cfg.tabu_length {
                tabu_list.pop_front();
            }
            tabu_list.push_back(current.clone());
        }
        let cands = score_neighbors(scorer, &current, nll, cfg);
        let Some(next) = pick(cands.iter().filter(|c| !tabu_list.contains(&c.graph))) else { break };
        if cfg.tabu_length == 0 && next.score >= score - improvement_eps(score) {
            // without memory a non-improving step can only cycle back
            break;
        }
        current = next.graph.clone();
        score = next.score;
        nll = scorer.nll(&current)?;
        trajectory.push(score);
        accepted.push(next.mv.clone());
        if score < best_score - improvement_eps(best_score) {
            best_graph = current.clone();
            best_score = score;
            best_trajectory_len = trajectory.len();
            best_moves_len = accepted.len();
            stale = 0;
        } else {
            stale += 1;
        }
    }
    trajectory.truncate(best_trajectory_len);
    accepted.truncate(best_moves_len);
    Ok(SearchOutcome { model: scorer.score(&best_graph)?, trajectory, accepted_moves: accepted, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    use crate::equivalence::{check_equivalent, Verdict};
    use crate::sem::{sample_data, sample_parameters, ParamSampling, Parameterization};

    fn g(p: usize, e: &[(usize, usize)]) -> DirectedGraph {
        DirectedGraph::from_edges(p, e).unwrap()
    }

    fn equivalent(a: &DirectedGraph, b: &DirectedGraph) -> bool {
        check_equivalent(a, b, 100_000).unwrap().verdict == Verdict::Equivalent
    }

    #[test]
    fn neighbor_counts() {
        let e = neighbors(&DirectedGraph::empty(3), 4);
        assert_eq!(e.len(), 6);
        assert!(e.iter().all(|m| matches!(m, Move::Add { .. })));

        let full = neighbors(&g(2, &[(0, 1), (1, 0)]), 4);
        assert_eq!(full, vec![Move::Delete { from: 0, to: 1 }, Move::Delete { from: 1, to: 0 }]);

        let one = neighbors(&g(2, &[(0, 1)]), 4);
        assert_eq!(
            one,
            vec![Move::Add { from: 1, to: 0 }, Move::Delete { from: 0, to: 1 }, Move::Reverse { from: 0, to: 1 }]
        );
    }

    #[test]
    fn neighbors_are_sorted_and_valid() {
        let gr = g(5, &[(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0), (1, 3)]);
        let ms = neighbors(&gr, 4);
        assert!(ms.windows(2).all(|w| w[0] < w[1]));
        for m in &ms {
            let h = m.apply(&gr).unwrap();
            assert!((0..5).all(|v| !h.has_edge(v, v)));
        }
    }

    /// Local optimum with an extra edge at the virtual-edge location of
    /// `X1->X3, X4->X2, X2<->X3`.
    fn two_cycle_truth() -> DirectedGraph {
        g(4, &[(0, 2), (3, 1), (1, 2), (2, 1)])
    }

    #[test]
    fn case2_move_restores_two_cycle() {
        let trapped = g(4, &[(0, 2), (0, 1), (3, 1), (3, 2), (1, 2)]);
        let ms = neighbors(&trapped, 4);
        let mv = Move::VirtualCase2 { i: 0, j: 1, k: 2, l: 3 };
        assert!(ms.contains(&mv));
        assert_eq!(mv.apply(&trapped).unwrap(), two_cycle_truth());
    }

    #[test]
    fn case1_move_closes_long_cycle() {
        // truth: X2->X3->X4->X5->X2 with X1->X3; trapped adds X1-X2 and misorients
        let truth = g(5, &[(1, 2), (2, 3), (3, 4), (4, 1), (0, 2)]);
        let trapped = g(5, &[(0, 1), (0, 2), (2, 1), (2, 3), (3, 4), (4, 1)]);
        let mv = Move::VirtualCase1 { i: 0, j: 1, k: 2, path: vec![2, 3, 4, 1] };
        assert!(neighbors(&trapped, 4).contains(&mv));
        assert_eq!(mv.apply(&trapped).unwrap(), truth);
    }

    #[test]
    fn case1_length_one_path_makes_two_cycle() {
        let tri = g(3, &[(0, 1), (0, 2), (1, 2)]);
        let h = apply_virtual_case1(&tri, 0, 1, 2, &[2, 1]).unwrap();
        assert_eq!(h, g(3, &[(0, 2), (1, 2), (2, 1)]));
    }

    #[test]
    fn virtual_preconditions() {
        let path = g(3, &[(0, 1), (1, 2)]);
        assert!(matches!(apply_virtual_case1(&path, 0, 1, 2, &[2, 1]), Err(Error::PreconditionViolated(_))));
        assert!(matches!(apply_virtual_case2(&path, 0, 1, 2, 0), Err(Error::PreconditionViolated(_))));
        let tri = g(3, &[(0, 1), (0, 2), (1, 2)]);
        assert!(apply_virtual_case1(&tri, 0, 1, 2, &[2, 0, 1]).is_err());
    }

    fn data_for(gr: &DirectedGraph, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pr = sample_parameters(gr, &ParamSampling::default(), &mut rng).unwrap();
        sample_data(&pr, n, &mut rng).unwrap()
    }

    #[test]
    fn empty_truth_gives_empty_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_data(&Parameterization::identity(3), 10_000, &mut rng).unwrap();
        let m = hill_climb(&d, &DirectedGraph::empty(3), &SearchConfig::default()).unwrap();
        assert_eq!(m.graph.edge_count(), 0);
    }

    #[test]
    fn single_edge_recovered_up_to_equivalence() {
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 1)] = 0.6;
        let pr = Parameterization::new(b, DVector::from_element(2, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = sample_data(&pr, 5000, &mut rng).unwrap();
        let m = hill_climb(&d, &DirectedGraph::empty(2), &SearchConfig::default()).unwrap();
        assert!(m.graph == g(2, &[(0, 1)]) || m.graph == g(2, &[(1, 0)]), "{}", m.graph);
    }

    #[test]
    fn hill_climb_strictly_decreases() {
        let truth = g(4, &[(0, 1), (1, 2), (2, 3), (3, 1)]);
        let d = data_for(&truth, 5000, 3);
        let cfg = SearchConfig { algorithm: Algorithm::HillClimb, ..Default::default() };
        let out = search(&d, &DirectedGraph::empty(4), &cfg).unwrap();
        assert!(out.trajectory.windows(2).all(|w| w[1] < w[0]));
        assert!(out.model.params.is_stable());
    }

    #[test]
    fn tabu_degenerates_to_hill_climb() {
        let truth = g(4, &[(0, 1), (1, 2), (2, 3), (3, 1)]);
        let d = data_for(&truth, 3000, 4);
        let hc = hill_climb(&d, &DirectedGraph::empty(4), &SearchConfig::default()).unwrap();
        let cfg = SearchConfig { tabu_length: 0, patience: 1, ..Default::default() };
        let tb = tabu_search(&d, &DirectedGraph::empty(4), &cfg).unwrap();
        assert_eq!(hc.graph, tb.graph);
        assert_eq!(hc.score, tb.score);
    }

    #[test]
    fn tabu_is_deterministic_and_not_worse() {
        let truth = g(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]);
        let d = data_for(&truth, 3000, 5);
        let cfg = SearchConfig::default();
        let a = tabu_search(&d, &DirectedGraph::empty(4), &cfg).unwrap();
        let b = tabu_search(&d, &DirectedGraph::empty(4), &cfg).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.score.to_bits(), b.score.to_bits());
        let hc = hill_climb(&d, &DirectedGraph::empty(4), &cfg).unwrap();
        assert!(a.score <= hc.score + 1e-9);
    }

    #[test]
    fn output_is_irreducible() {
        let truth = g(3, &[(0, 1), (1, 2)]);
        let d = data_for(&truth, 5000, 6);
        let init = g(3, &[(0, 1), (1, 0), (1, 2)]);
        let cfg = SearchConfig { max_iterations: 0, ..Default::default() };
        let m = search(&d, &init, &cfg).unwrap().model;
        assert!(!m.graph.has_two_cycle());
        assert!(equivalent(&m.graph, &init) || m.graph.edge_count() < init.edge_count());
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let truth = g(4, &[(0, 1), (1, 2), (2, 0), (3, 2)]);
        let d = data_for(&truth, 2000, 7);
        let one = search(&d, &DirectedGraph::empty(4), &SearchConfig { threads: Some(1), ..Default::default() }).unwrap();
        let two = search(&d, &DirectedGraph::empty(4), &SearchConfig { threads: Some(2), ..Default::default() }).unwrap();
        assert_eq!(one.model.graph, two.model.graph);
        assert_eq!(one.model.score.to_bits(), two.model.score.to_bits());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig { patience: 0, ..Default::default() }.validate().is_err());
        assert!(SearchConfig { restarts: 0, ..Default::default() }.validate().is_err());
        assert!(SearchConfig { lambda: Some(-1.0), ..Default::default() }.validate().is_err());
    }
}
