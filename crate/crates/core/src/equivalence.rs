//! Support-rotation calculus and distribution-equivalence classes.
//!
//! A support rotation `A(i, j, k)` zeros cell `(i, j)` of a support matrix with a
//! Givens rotation in the `(j, k)` plane. Its effect on the pattern depends only
//! on columns `j` and `k`; see [`classify_rotation`]. Lossless rotations
//! (reductions, reversible acute rotations and column swaps) generate the
//! equivalence class of a graph.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{simple_cycles, support_of_graph, Cycle, DirectedGraph, SupportMatrix};

/// Default node budget for class enumeration.
pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationKind {
    Reduction,
    ReversibleAcute,
    IrreversibleAcute,
    ColumnSwap,
}

/// Outcome of classifying `A(i, j, k)` on a given support matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationEffect {
    NoEffect,
    Reduction,
    ReversibleAcute,
    IrreversibleAcute,
    ColumnSwap,
}

impl RotationEffect {
    pub fn kind(self) -> Option<RotationKind> {
        match self {
            RotationEffect::NoEffect => None,
            RotationEffect::Reduction => Some(RotationKind::Reduction),
            RotationEffect::ReversibleAcute => Some(RotationKind::ReversibleAcute),
            RotationEffect::IrreversibleAcute => Some(RotationKind::IrreversibleAcute),
            RotationEffect::ColumnSwap => Some(RotationKind::ColumnSwap),
        }
    }
}

/// A support rotation `A(i, j, k)`: zero cell `(i, j)` in the `(j, k)` plane.
/// Indices are 0-based; `Display` prints them 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RotationMove {
    pub kind: RotationKind,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl fmt::Display for RotationMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A({},{},{}) [{:?}]", self.i + 1, self.j + 1, self.k + 1, self.kind)
    }
}

fn check_rotation_indices(xi: &SupportMatrix, i: usize, j: usize, k: usize) -> Result<()> {
    let p = xi.p();
    for v in [i, j, k] {
        if v >= p {
            return Err(Error::IndexOutOfRange { index: v, p });
        }
    }
    if j == k {
        return Err(Error::IndexOutOfRange { index: k, p });
    }
    Ok(())
}

/// Which of the effect classes `A(i, j, k)` falls into on `xi`.
pub fn classify_rotation(xi: &SupportMatrix, i: usize, j: usize, k: usize) -> Result<RotationEffect> {
    check_rotation_indices(xi, i, j, k)?;
    if !xi.get(i, j) {
        return Ok(RotationEffect::NoEffect);
    }
    if !xi.get(i, k) {
        return Ok(RotationEffect::ColumnSwap);
    }
    // Row i agrees (both set), so the distance counts rows other than i.
    Ok(match xi.column_distance(j, k) {
        0 => RotationEffect::Reduction,
        1 => RotationEffect::ReversibleAcute,
        _ => RotationEffect::IrreversibleAcute,
    })
}

/// Applies `A(i, j, k)` to `xi`.
pub fn apply_support_rotation(xi: &SupportMatrix, i: usize, j: usize, k: usize) -> Result<SupportMatrix> {
    let effect = classify_rotation(xi, i, j, k)?;
    let mut out = xi.clone();
    match effect {
        RotationEffect::NoEffect => {}
        RotationEffect::ColumnSwap => out.swap_columns(j, k),
        RotationEffect::Reduction | RotationEffect::ReversibleAcute | RotationEffect::IrreversibleAcute => {
            for l in xi.differing_rows(j, k) {
                out.set(l, j, true);
                out.set(l, k, true);
            }
            out.set(i, j, false);
        }
    }
    Ok(out)
}

/// Legal lossless rotations of `xi` paired with their results: reductions over
/// identical column pairs and reversible acute rotations over column pairs at
/// distance one. Moves that would zero a diagonal cell are excluded. Results
/// are deduplicated (first move wins) and returned in a deterministic order.
pub fn legal_rotations(xi: &SupportMatrix) -> Vec<(RotationMove, SupportMatrix)> {
    let p = xi.p();
    let mut out: Vec<(RotationMove, SupportMatrix)> = Vec::new();
    let mut seen: BTreeSet<SupportMatrix> = BTreeSet::new();
    let mut push = |mv: RotationMove, m: SupportMatrix, out: &mut Vec<_>| {
        if seen.insert(m.clone()) {
            out.push((mv, m));
        }
    };

    for j in 0..p {
        for k in j + 1..p {
            match xi.column_distance(j, k) {
                0 => {
                    for i in (0..p).filter(|&i| xi.get(i, j)) {
                        for (a, b) in [(j, k), (k, j)] {
                            if i != a {
                                let mut m = xi.clone();
                                m.set(i, a, false);
                                let mv = RotationMove { kind: RotationKind::Reduction, i, j: a, k: b };
                                push(mv, m, &mut out);
                            }
                        }
                    }
                }
                1 => {
                    let l = xi.differing_rows(j, k)[0];
                    for i in (0..p).filter(|&i| i != l && xi.get(i, j)) {
                        for (a, b) in [(j, k), (k, j)] {
                            if i != a {
                                let mut m = xi.clone();
                                m.set(i, a, false);
                                m.set(l, a, true);
                                m.set(l, b, true);
                                let mv = RotationMove { kind: RotationKind::ReversibleAcute, i, j: a, k: b };
                                push(mv, m, &mut out);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Set of support matrices reachable from `xi` by one legal lossless rotation.
pub fn find_rotations(xi: &SupportMatrix) -> BTreeSet<SupportMatrix> {
    legal_rotations(xi).into_iter().map(|(_, m)| m).collect()
}

/// Column permutation realizing the reversal of `cycle`: the column of each
/// member moves to its predecessor on the cycle.
pub fn reverse_cycle_support(xi: &SupportMatrix, cycle: &Cycle) -> SupportMatrix {
    let mut src: Vec<usize> = (0..xi.p()).collect();
    let c = cycle.vertices();
    let m = c.len();
    for t in 0..m {
        src[c[t]] = c[(t + 1) % m];
    }
    xi.permute_columns(&src)
}

/// Reverses a directed cycle of `g`. Edges from outside the cycle into a member
/// are retargeted to that member's predecessor on the cycle.
pub fn reverse_cycle(g: &DirectedGraph, cycle: &Cycle) -> Result<DirectedGraph> {
    if !cycle.is_cycle_of(g) {
        return Err(Error::NotACycle);
    }
    reverse_cycle_support(&support_of_graph(g), cycle).to_graph()
}

/// One step of a witness sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum WitnessStep {
    Rotation(RotationMove),
    CycleReversal { cycle: Vec<usize> },
}

impl fmt::Display for WitnessStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WitnessStep::Rotation(m) => write!(f, "{m}"),
            WitnessStep::CycleReversal { cycle } => {
                let names: Vec<String> = cycle.iter().map(|v| format!("X{}", v + 1)).collect();
                write!(f, "reverse cycle ({})", names.join(","))
            }
        }
    }
}

/// Members of a distribution-equivalence class found by enumeration.
#[derive(Clone, Debug)]
pub struct EquivalenceClass {
    pub members: Vec<SupportMatrix>,
    /// False if the node budget was hit and `members` is partial.
    pub exhausted: bool,
    parents: Vec<Option<(usize, WitnessStep)>>,
    index: HashMap<SupportMatrix, usize>,
}

impl EquivalenceClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, xi: &SupportMatrix) -> bool {
        self.index.contains_key(xi)
    }

    pub fn seed(&self) -> &SupportMatrix {
        &self.members[0]
    }

    /// Members as graphs (every member is graph-representable).
    pub fn graphs(&self) -> Vec<DirectedGraph> {
        self.members.iter().map(|m| m.to_graph().expect("class members are graph-representable")).collect()
    }

    /// The sequence of steps leading from the seed to member `idx`.
    pub fn witness(&self, mut idx: usize) -> Vec<WitnessStep> {
        let mut steps = Vec::new();
        while let Some((parent, step)) = &self.parents[idx] {
            steps.push(step.clone());
            idx = *parent;
        }
        steps.reverse();
        steps
    }

    /// First member (in discovery order) whose support is contained in `target`.
    pub fn find_subset_of(&self, target: &SupportMatrix) -> Option<usize> {
        self.members.iter().position(|m| m.is_subset_of(target))
    }

    fn insert(&mut self, m: SupportMatrix, parent: Option<(usize, WitnessStep)>) -> Option<usize> {
        if self.index.contains_key(&m) {
            return None;
        }
        let idx = self.members.len();
        self.index.insert(m.clone(), idx);
        self.members.push(m);
        self.parents.push(parent);
        Some(idx)
    }
}

fn reverse_all_cycles(xi: &SupportMatrix) -> Vec<(WitnessStep, SupportMatrix)> {
    let g = xi.to_graph().expect("enumeration only visits graph-representable matrices");
    simple_cycles(&g)
        .into_iter()
        .map(|c| {
            let m = reverse_cycle_support(xi, &c);
            (WitnessStep::CycleReversal { cycle: c.vertices().to_vec() }, m)
        })
        .collect()
}

/// Depth-first closure of `xi` under legal rotations, followed by the closure of
/// every member under single-cycle reversions. Stops with `exhausted = false`
/// once `budget` members have been collected.
pub fn enumerate_equivalence_class(xi: &SupportMatrix, budget: usize) -> Result<EquivalenceClass> {
    if let Some(i) = (0..xi.p()).find(|&i| !xi.get(i, i)) {
        return Err(Error::NotGraphRepresentable(i));
    }
    let budget = budget.max(1);
    let mut class = EquivalenceClass {
        members: Vec::new(),
        exhausted: true,
        parents: Vec::new(),
        index: HashMap::new(),
    };
    class.insert(xi.clone(), None);

    let rotations = |m: &SupportMatrix| -> Vec<(WitnessStep, SupportMatrix)> {
        legal_rotations(m).into_iter().map(|(mv, r)| (WitnessStep::Rotation(mv), r)).collect()
    };

    if !dfs(&mut class, 0, budget, &rotations) {
        class.exhausted = false;
        return Ok(class);
    }

    let rotation_members = class.len();
    for root in 0..rotation_members {
        if !dfs(&mut class, root, budget, &reverse_all_cycles) {
            class.exhausted = false;
            return Ok(class);
        }
    }
    Ok(class)
}

/// Iterative DFS from member `root`; returns false if the budget was hit.
fn dfs<F>(class: &mut EquivalenceClass, root: usize, budget: usize, expand: &F) -> bool
where
    F: Fn(&SupportMatrix) -> Vec<(WitnessStep, SupportMatrix)>,
{
    let mut stack: Vec<(usize, std::vec::IntoIter<(WitnessStep, SupportMatrix)>)> =
        vec![(root, expand(&class.members[root]).into_iter())];
    while let Some((parent, iter)) = stack.last_mut() {
        let parent = *parent;
        match iter.next() {
            None => {
                stack.pop();
            }
            Some((step, m)) => {
                if class.contains(&m) {
                    continue;
                }
                if class.len() >= budget {
                    return false;
                }
                let idx = class.insert(m, Some((parent, step))).expect("checked above");
                let children = expand(&class.members[idx]).into_iter();
                stack.push((idx, children));
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

/// Result of [`check_equivalent`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub verdict: Verdict,
    /// Sizes of the enumerated classes of `g1` and `g2` (`None` if not enumerated).
    pub class_sizes: [Option<usize>; 2],
    /// Rotation sequence mapping `g1` into a subgraph of `g2`, if found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_forward: Option<Vec<WitnessStep>>,
    /// Rotation sequence mapping `g2` into a subgraph of `g1`, if found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_backward: Option<Vec<WitnessStep>>,
}

struct Direction {
    size: usize,
    exhausted: bool,
    witness: Option<Vec<WitnessStep>>,
}

fn search_direction(from: &SupportMatrix, to: &SupportMatrix, budget: usize) -> Result<Direction> {
    let class = enumerate_equivalence_class(from, budget)?;
    let witness = class.find_subset_of(to).map(|idx| class.witness(idx));
    Ok(Direction { size: class.len(), exhausted: class.exhausted, witness })
}

/// Decides distribution equivalence: `g1 ≡ g2` iff a lossless rotation sequence
/// maps the support of each graph into the support of the other.
///
/// The graph with fewer edges is enumerated first; if its class is exhausted
/// without reaching a subset of the other, the answer is `NotEquivalent`
/// without enumerating the second class.
pub fn check_equivalent(g1: &DirectedGraph, g2: &DirectedGraph, budget: usize) -> Result<EquivalenceCheck> {
    if g1.p() != g2.p() {
        return Err(Error::DimensionMismatch { expected: g1.p(), got: g2.p() });
    }
    let xi1 = support_of_graph(g1);
    let xi2 = support_of_graph(g2);
    let g2_first = g2.edge_count() < g1.edge_count();

    let (xa, xb) = if g2_first { (&xi2, &xi1) } else { (&xi1, &xi2) };
    let first = search_direction(xa, xb, budget)?;
    let second = if first.witness.is_none() && first.exhausted {
        None
    } else {
        Some(search_direction(xb, xa, budget)?)
    };

    let verdict = match (&first, &second) {
        (f, _) if f.witness.is_none() && f.exhausted => Verdict::NotEquivalent,
        (_, Some(s)) if s.witness.is_none() && s.exhausted => Verdict::NotEquivalent,
        (f, Some(s)) if f.witness.is_some() && s.witness.is_some() => Verdict::Equivalent,
        _ => Verdict::Inconclusive,
    };

    let (d1, d2) = if g2_first { (second, Some(first)) } else { (Some(first), second) };
    Ok(EquivalenceCheck {
        verdict,
        class_sizes: [d1.as_ref().map(|d| d.size), d2.as_ref().map(|d| d.size)],
        witness_forward: d1.and_then(|d| d.witness),
        witness_backward: d2.and_then(|d| d.witness),
    })
}

/// Outcome of [`is_reducible`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reducibility {
    /// An equivalent graph with strictly fewer edges that is itself irreducible.
    Reducible(DirectedGraph),
    Irreducible,
    Inconclusive,
}

/// Searches for an equivalent graph with fewer edges.
///
/// Graphs without 2-cycles are irreducible. Otherwise the class is enumerated
/// and a member with the fewest edges is returned, preferring members that are
/// subgraphs of `g`; the result is re-checked until irreducible.
pub fn is_reducible(g: &DirectedGraph, budget: usize) -> Reducibility {
    if !g.has_two_cycle() {
        return Reducibility::Irreducible;
    }
    let class = match enumerate_equivalence_class(&support_of_graph(g), budget) {
        Ok(c) => c,
        Err(_) => return Reducibility::Inconclusive,
    };
    let min_edges = class.members.iter().map(SupportMatrix::off_diagonal_count).min().unwrap_or(0);
    if min_edges >= g.edge_count() {
        return if class.exhausted { Reducibility::Irreducible } else { Reducibility::Inconclusive };
    }
    let graphs = class.graphs();
    let smallest = |h: &&DirectedGraph| h.edge_count() == min_edges;
    let pick = graphs
        .iter()
        .filter(smallest)
        .find(|h| h.is_subgraph_of(g))
        .or_else(|| graphs.iter().find(smallest))
        .expect("minimum is attained")
        .clone();
    match is_reducible(&pick, budget) {
        Reducibility::Reducible(smaller) => Reducibility::Reducible(smaller),
        _ => Reducibility::Reducible(pick),
    }
}

fn closed_parent_set(g: &DirectedGraph, v: usize) -> BTreeSet<usize> {
    let mut s: BTreeSet<usize> = g.parents(v).into_iter().collect();
    s.insert(v);
    s
}

fn check_target(g: &DirectedGraph, j: usize, k: usize, target: (usize, usize)) -> Result<usize> {
    let p = g.p();
    for v in [j, k, target.0, target.1] {
        if v >= p {
            return Err(Error::IndexOutOfRange { index: v, p });
        }
    }
    if j == k {
        return Err(Error::IllegalTarget("j and k must differ".into()));
    }
    let (a, h) = target;
    if h != j && h != k {
        return Err(Error::IllegalTarget(format!("edge X{}->X{} does not enter X{} or X{}", a + 1, h + 1, j + 1, k + 1)));
    }
    if a == h {
        return Err(Error::IllegalTarget("diagonal entry".into()));
    }
    if !g.has_edge(a, h) {
        return Err(Error::IllegalTarget(format!("edge X{}->X{} not present", a + 1, h + 1)));
    }
    Ok(if h == j { k } else { j })
}

/// Parent exchange on parent-exchangeable `X_j`, `X_k` (`|P_j △ P_k| = 1`):
/// removes `target` and adds the missing edge from the symmetric-difference
/// vertex. Equivalent to the corresponding rotation on the support.
pub fn parent_exchange(g: &DirectedGraph, j: usize, k: usize, target: (usize, usize)) -> Result<DirectedGraph> {
    let other = check_target(g, j, k, target)?;
    let pj = closed_parent_set(g, j);
    let pk = closed_parent_set(g, k);
    if pj.symmetric_difference(&pk).count() != 1 {
        return Err(Error::NotExchangeable(j, k));
    }
    let (a, h) = target;
    let xi = support_of_graph(g);
    match classify_rotation(&xi, a, h, other)? {
        RotationEffect::ReversibleAcute | RotationEffect::ColumnSwap => {}
        e => return Err(Error::IllegalTarget(format!("rotation has effect {e:?}"))),
    }
    apply_support_rotation(&xi, a, h, other)?
        .to_graph()
        .map_err(|_| Error::IllegalTarget("result is not graph-representable".into()))
}

/// Parent reduction on parent-reducible `X_j`, `X_k` (`P_j = P_k`): removes `target`.
pub fn parent_reduction(g: &DirectedGraph, j: usize, k: usize, target: (usize, usize)) -> Result<DirectedGraph> {
    check_target(g, j, k, target)?;
    if closed_parent_set(g, j) != closed_parent_set(g, k) {
        return Err(Error::NotReducible(j, k));
    }
    let mut out = g.clone();
    out.remove_edge(target.0, target.1)?;
    Ok(out)
}
