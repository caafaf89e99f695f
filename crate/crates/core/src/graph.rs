//! Directed graphs, support matrices and structural queries.
//!
//! Vertices are 0-based everywhere in the API. Human-readable output
//! (`Display`) uses 1-based names `X1..Xp`.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A directed graph over `p` vertices without self-loops.
///
/// `has_edge(i, j)` means `X_i -> X_j`, i.e. `B[i][j]` may be nonzero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedGraph {
    p: usize,
    adj: Vec<bool>,
}

impl DirectedGraph {
    /// Empty graph on `p` vertices.
    pub fn empty(p: usize) -> Self {
        DirectedGraph { p, adj: vec![false; p * p] }
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(p);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.p + j]
    }

    /// True if there is an edge in either direction between `i` and `j`.
    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.has_edge(i, j) || self.has_edge(j, i)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        for v in [i, j] {
            if v >= self.p {
                return Err(Error::IndexOutOfRange { index: v, p: self.p });
            }
        }
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
        }
        Ok(())
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        self.adj[i * self.p + j] = true;
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        self.adj[i * self.p + j] = false;
        Ok(())
    }

    /// Unchecked setter for internal callers that already validated `i != j`.
    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, on: bool) {
        debug_assert!(i != j);
        self.adj[i * self.p + j] = on;
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = self.p;
        (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .filter(|&(i, j)| self.has_edge(i, j))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    /// Parents of `j`, ascending.
    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.p).filter(|&i| self.has_edge(i, j)).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.has_edge(i, j)).collect()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        (0..self.p).filter(|&i| self.has_edge(i, j)).count()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (0..self.p).filter(|&j| self.has_edge(i, j)).count()
    }

    /// In-degree plus out-degree.
    pub fn degree(&self, v: usize) -> usize {
        self.in_degree(v) + self.out_degree(v)
    }

    pub fn is_subgraph_of(&self, other: &DirectedGraph) -> bool {
        self.p == other.p && self.adj.iter().zip(&other.adj).all(|(&a, &b)| !a || b)
    }

    pub fn has_two_cycle(&self) -> bool {
        (0..self.p).any(|i| (i + 1..self.p).any(|j| self.has_edge(i, j) && self.has_edge(j, i)))
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// A topological order (smallest available vertex first), or `None` if cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let p = self.p;
        let mut indeg: Vec<usize> = (0..p).map(|j| self.in_degree(j)).collect();
        let mut heap: BinaryHeap<Reverse<usize>> =
            (0..p).filter(|&v| indeg[v] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse(c));
                }
            }
        }
        (order.len() == p).then_some(order)
    }

    /// Vertices reachable from `src` by directed paths of length >= 0.
    pub fn reachable_from(&self, src: usize) -> Vec<bool> {
        let mut seen = vec![false; self.p];
        let mut stack = vec![src];
        seen[src] = true;
        while let Some(v) = stack.pop() {
            for w in 0..self.p {
                if self.has_edge(v, w) && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    pub fn support(&self) -> SupportMatrix {
        support_of_graph(self)
    }
}

impl fmt::Debug for DirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DirectedGraph(p={}, {})", self.p, self)
    }
}

impl fmt::Display for DirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges = self.edges();
        if edges.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> =
            edges.iter().map(|(i, j)| format!("X{}->X{}", i + 1, j + 1)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    p: usize,
    edges: Vec<[usize; 2]>,
}

impl Serialize for DirectedGraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson { p: self.p, edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DirectedGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GraphJson::deserialize(d)?;
        if raw.p == 0 {
            return Err(serde::de::Error::custom("p must be positive"));
        }
        let mut g = DirectedGraph::empty(raw.p);
        for [i, j] in raw.edges {
            g.add_edge(i, j).map_err(serde::de::Error::custom)?;
        }
        Ok(g)
    }
}

/// Binary `{0, x}` pattern of a `p x p` matrix, stored column-major as bit words.
///
/// For a graph, column `k` holds `X_k` itself plus the parents of `X_k`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportMatrix {
    p: usize,
    words: usize,
    bits: Vec<u64>,
}

impl SupportMatrix {
    pub fn zeros(p: usize) -> Self {
        let words = p.div_ceil(64).max(1);
        SupportMatrix { p, words, bits: vec![0; words * p] }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p);
        for i in 0..p {
            m.set(i, i, true);
        }
        m
    }

    /// Parses rows written with `x`/`×` for nonzero and `0`/`.` for zero.
    /// Whitespace and commas are ignored.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let p = rows.len();
        let mut m = Self::zeros(p);
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<bool> = row
                .chars()
                .filter(|c| !c.is_whitespace() && *c != ',')
                .map(|c| match c {
                    'x' | 'X' | '×' | '1' => Ok(true),
                    '0' | '.' => Ok(false),
                    other => Err(Error::Parse(format!("bad support cell {other:?}"))),
                })
                .collect::<Result<_>>()?;
            if cells.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: cells.len() });
            }
            for (j, on) in cells.into_iter().enumerate() {
                m.set(i, j, on);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.bits[j * self.words + i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        let w = &mut self.bits[j * self.words + i / 64];
        if on {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    #[inline]
    fn column(&self, j: usize) -> &[u64] {
        &self.bits[j * self.words..(j + 1) * self.words]
    }

    /// Number of rows on which columns `j` and `k` differ.
    pub fn column_distance(&self, j: usize, k: usize) -> usize {
        self.column(j)
            .iter()
            .zip(self.column(k))
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Rows on which columns `j` and `k` differ, ascending.
    pub fn differing_rows(&self, j: usize, k: usize) -> Vec<usize> {
        (0..self.p).filter(|&l| self.get(l, j) != self.get(l, k)).collect()
    }

    pub fn swap_columns(&mut self, j: usize, k: usize) {
        if j == k {
            return;
        }
        for w in 0..self.words {
            self.bits.swap(j * self.words + w, k * self.words + w);
        }
    }

    /// Returns a matrix whose column `dst` is this matrix's column `src[dst]`.
    pub fn permute_columns(&self, src: &[usize]) -> SupportMatrix {
        let mut out = Self::zeros(self.p);
        for (dst, &s) in src.iter().enumerate() {
            out.bits[dst * self.words..(dst + 1) * self.words].copy_from_slice(self.column(s));
        }
        out
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of off-diagonal nonzero cells (edge count for graph-representable matrices).
    pub fn off_diagonal_count(&self) -> usize {
        self.count() - (0..self.p).filter(|&i| self.get(i, i)).count()
    }

    pub fn is_graph_representable(&self) -> bool {
        (0..self.p).all(|i| self.get(i, i))
    }

    /// Cell-wise inclusion `supp(self) ⊆ supp(other)`.
    pub fn is_subset_of(&self, other: &SupportMatrix) -> bool {
        self.p == other.p && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn to_graph(&self) -> Result<DirectedGraph> {
        graph_of_support(self)
    }
}

impl fmt::Display for SupportMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.p {
            let row: String = (0..self.p).map(|j| if self.get(i, j) { 'x' } else { '0' }).collect();
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{row}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SupportMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (0..self.p)
            .map(|i| (0..self.p).map(|j| if self.get(i, j) { 'x' } else { '0' }).collect())
            .collect();
        write!(f, "[{}]", rows.join(" "))
    }
}

/// `I + B_G` as a support pattern.
pub fn support_of_graph(g: &DirectedGraph) -> SupportMatrix {
    let mut m = SupportMatrix::identity(g.p());
    for (i, j) in g.edges() {
        m.set(i, j, true);
    }
    m
}

/// Inverse of [`support_of_graph`]; fails if any diagonal cell is zero.
pub fn graph_of_support(xi: &SupportMatrix) -> Result<DirectedGraph> {
    let p = xi.p();
    if let Some(i) = (0..p).find(|&i| !xi.get(i, i)) {
        return Err(Error::NotGraphRepresentable(i));
    }
    let mut g = DirectedGraph::empty(p);
    for i in 0..p {
        for j in 0..p {
            if i != j && xi.get(i, j) {
                g.set(i, j, true);
            }
        }
    }
    Ok(g)
}

/// Maximal strongly connected subgraphs in topological order of the condensation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MscsPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl MscsPartition {
    /// Index of the block containing each vertex.
    pub fn block_index(&self, p: usize) -> Vec<usize> {
        let mut idx = vec![usize::MAX; p];
        for (b, block) in self.blocks.iter().enumerate() {
            for &v in block {
                idx[v] = b;
            }
        }
        idx
    }
}

/// Tarjan's algorithm followed by a deterministic topological sort of the
/// condensation (ties broken by smallest member vertex).
pub fn find_mscs(g: &DirectedGraph) -> MscsPartition {
    let p = g.p();
    let comps = tarjan(g);

    let mut comp_of = vec![0usize; p];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = c;
        }
    }
    let nc = comps.len();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nc];
    let mut indeg = vec![0usize; nc];
    for (i, j) in g.edges() {
        let (a, b) = (comp_of[i], comp_of[j]);
        if a != b && succ[a].insert(b) {
            indeg[b] += 1;
        }
    }
    let key = |c: usize| comps[c][0];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..nc).filter(|&c| indeg[c] == 0).map(|c| Reverse((key(c), c))).collect();
    let mut blocks = Vec::with_capacity(nc);
    while let Some(Reverse((_, c))) = heap.pop() {
        blocks.push(comps[c].clone());
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                heap.push(Reverse((key(d), d)));
            }
        }
    }
    MscsPartition { blocks }
}

/// Strongly connected components, each sorted ascending.
fn tarjan(g: &DirectedGraph) -> Vec<Vec<usize>> {
    struct State<'a> {
        g: &'a DirectedGraph,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for w in 0..s.g.p() {
            if !s.g.has_edge(v, w) {
                continue;
            }
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().expect("tarjan stack underflow");
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }

    let p = g.p();
    let mut s = State {
        g,
        index: vec![None; p],
        low: vec![0; p],
        on_stack: vec![false; p],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..p {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// A simple directed cycle, stored with its smallest vertex first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cycle(Vec<usize>);

impl Cycle {
    /// Builds a cycle from a vertex sequence, rotating it into canonical form.
    /// Does not check that the edges exist.
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::NotACycle);
        }
        let mut seen = BTreeSet::new();
        if !vertices.iter().all(|v| seen.insert(*v)) {
            return Err(Error::NotACycle);
        }
        let pos = vertices.iter().enumerate().min_by_key(|(_, v)| **v).map(|(i, _)| i).unwrap();
        vertices.rotate_left(pos);
        Ok(Cycle(vertices))
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Consecutive edges `(c_t, c_{t+1})`, wrapping around.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.0.len();
        (0..m).map(move |t| (self.0[t], self.0[(t + 1) % m]))
    }

    pub fn is_cycle_of(&self, g: &DirectedGraph) -> bool {
        self.0.iter().all(|&v| v < g.p()) && self.edges().all(|(a, b)| g.has_edge(a, b))
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(|v| format!("X{}", v + 1)).collect();
        write!(f, "({})", names.join(","))
    }
}

/// All simple directed cycles of length >= 2, canonical and sorted.
pub fn simple_cycles(g: &DirectedGraph) -> Vec<Cycle> {
    simple_cycles_up_to(g, usize::MAX)
}

/// Simple cycles with at most `max_len` vertices.
pub fn simple_cycles_up_to(g: &DirectedGraph, max_len: usize) -> Vec<Cycle> {
    let p = g.p();
    let mut out = Vec::new();
    let mut path = Vec::new();
    let mut on_path = vec![false; p];
    for s in 0..p {
        // Only vertices > s that share an SCC with s (in the subgraph on >= s) can close a
        // canonical cycle starting at s.
        let reach_fwd = g.reachable_from(s);
        path.clear();
        path.push(s);
        on_path[s] = true;
        extend_cycles(g, s, s, max_len, &reach_fwd, &mut path, &mut on_path, &mut out);
        on_path[s] = false;
    }
    out.sort();
    out
}

#[allow(clippy::too_many_arguments)]
fn extend_cycles(
    g: &DirectedGraph,
    start: usize,
    v: usize,
    max_len: usize,
    reach: &[bool],
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Cycle>,
) {
    for w in 0..g.p() {
        if !g.has_edge(v, w) {
            continue;
        }
        if w == start {
            if path.len() >= 2 {
                out.push(Cycle(path.clone()));
            }
        } else if w > start && !on_path[w] && reach[w] && path.len() < max_len {
            path.push(w);
            on_path[w] = true;
            extend_cycles(g, start, w, max_len, reach, path, on_path, out);
            on_path[w] = false;
            path.pop();
        }
    }
}

/// Number of ordered pairs `(i, j)`, `i != j`, whose edge presence differs.
/// A reversed edge therefore counts 2.
pub fn shd(g1: &DirectedGraph, g2: &DirectedGraph) -> Result<usize> {
    if g1.p() != g2.p() {
        return Err(Error::DimensionMismatch { expected: g1.p(), got: g2.p() });
    }
    Ok(g1.adj.iter().zip(&g2.adj).filter(|(a, b)| a != b).count())
}

/// Unordered adjacent pairs `(min, max)`.
pub fn skeleton(g: &DirectedGraph) -> BTreeSet<(usize, usize)> {
    g.edges().into_iter().map(|(i, j)| (i.min(j), i.max(j))).collect()
}

/// Colliders `a -> c <- b` with `a < b` non-adjacent, as `(a, c, b)`.
pub fn v_structures(g: &DirectedGraph) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for c in 0..g.p() {
        let pa = g.parents(c);
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !g.adjacent(a, b) {
                    out.insert((a, c, b));
                }
            }
        }
    }
    out
}

/// Markov equivalence of DAGs: same skeleton and same v-structures.
pub fn dag_markov_equivalent(g1: &DirectedGraph, g2: &DirectedGraph) -> Result<bool> {
    if g1.p() != g2.p() {
        return Err(Error::DimensionMismatch { expected: g1.p(), got: g2.p() });
    }
    if !g1.is_acyclic() || !g2.is_acyclic() {
        return Err(Error::NotAcyclic);
    }
    Ok(skeleton(g1) == skeleton(g2) && v_structures(g1) == v_structures(g2))
}
