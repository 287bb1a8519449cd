//! Best-hypothesis selection as a maximum weighted independent set problem.
//!
//! Every leaf becomes a vertex weighted by its branch score; two vertices are
//! joined when their branches share an observation. An independent set is a
//! set of compatible tracks, and the heaviest one is the best global
//! hypothesis.
//!
//! Selection rule, shared by the exact solver and the exhaustive oracle:
//! only vertices of strictly positive weight are eligible; the weight of a set
//! is the sum of its weights taken in increasing vertex-id order; among sets
//! of maximum weight the lexicographically smallest id sequence wins.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::domain::{Execution, ObsId};
use crate::error::{Error, Result};
use crate::forest::{GlobalHypothesis, HypothesisForest, LeafHandle};
use crate::par;

/// Largest graph [`brute_force_mwis`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub leaf: Option<LeafHandle>,
    pub weight: f64,
}

/// Undirected conflict graph; vertex ids are `0..n`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConflictGraph {
    pub vertices: Vec<Vertex>,
    adj: Vec<BTreeSet<usize>>,
}

impl ConflictGraph {
    pub fn with_weights(weights: &[f64]) -> Self {
        Self {
            vertices: weights
                .iter()
                .enumerate()
                .map(|(id, &weight)| Vertex { id, leaf: None, weight })
                .collect(),
            adj: vec![BTreeSet::new(); weights.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.vertices[v].weight
    }

    /// Adds an undirected edge; self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().copied()
    }

    /// Edges as `(low, high)` pairs in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.adj.iter().enumerate() {
            out.extend(ns.range(a + 1..).map(|&b| (a, b)));
        }
        out
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &a)| set[i + 1..].iter().all(|&b| !self.has_edge(a, b)))
    }

    /// Text dump: a `vertices <n>` header, one `<id> <weight>` line per
    /// vertex, an `edges <m>` header, then one `<a> <b>` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {}", v.id, v.weight);
        }
        let edges = self.edges();
        let _ = writeln!(s, "edges {}", edges.len());
        for (a, b) in edges {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: "<graph>".into(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |name: &str| -> Result<usize> {
            let (no, l) = lines.next().ok_or_else(|| err(0, format!("missing `{name}` header")))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(name) {
                return Err(err(no, format!("expected `{name} <count>`")));
            }
            parts
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| err(no, format!("bad `{name}` count")))
        };
        let n = header("vertices")?;
        let mut weights = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut rest: Vec<(usize, &str)> = Vec::new();
        let mut lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .skip(1)
            .collect();
        lines.reverse();
        for _ in 0..n {
            let (no, l) = lines.pop().ok_or_else(|| err(0, "too few vertex lines".into()))?;
            let mut parts = l.split_whitespace();
            let id: usize = parts
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| err(no, "bad vertex id".into()))?;
            let w: f64 = parts
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| err(no, "bad vertex weight".into()))?;
            if id >= n || seen[id] {
                return Err(err(no, format!("vertex id {id} is out of range or repeated")));
            }
            seen[id] = true;
            weights[id] = w;
        }
        let mut g = Self::with_weights(&weights);
        let (no, l) = lines.pop().ok_or_else(|| err(0, "missing `edges` header".into()))?;
        let m: usize = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["edges", c] => c.parse().map_err(|_| err(no, "bad `edges` count".into()))?,
            _ => return Err(err(no, "expected `edges <count>`".into())),
        };
        while let Some(x) = lines.pop() {
            rest.push(x);
        }
        if rest.len() != m {
            return Err(err(0, format!("expected {m} edge lines, found {}", rest.len())));
        }
        for (no, l) in rest {
            let ends: Vec<usize> = l.split_whitespace().filter_map(|x| x.parse().ok()).collect();
            match ends.as_slice() {
                [a, b] if *a < n && *b < n && a != b => g.add_edge(*a, *b),
                _ => return Err(err(no, format!("bad edge `{l}`"))),
            }
        }
        Ok(g)
    }
}

/// Chosen vertices (ascending) and their total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MwisSolution {
    pub selected: Vec<usize>,
    pub weight: f64,
}

impl MwisSolution {
    fn empty() -> Self {
        Self {
            selected: Vec::new(),
            weight: 0.0,
        }
    }
}

/// Sum of weights in increasing id order.
pub fn set_weight(g: &ConflictGraph, sorted: &[usize]) -> f64 {
    sorted.iter().map(|&v| g.weight(v)).sum()
}

/// True when `(wa, a)` beats `(wb, b)` under the selection rule.
fn better(wa: f64, a: &[usize], wb: f64, b: &[usize]) -> bool {
    wa > wb || (wa == wb && a < b)
}

/// Slack on bound comparisons so that float rounding never prunes a tie.
fn slack(w: f64) -> f64 {
    1e-9 * w.abs().max(1.0)
}

/// Builds the conflict graph over all current leaves of `forest`.
pub fn build_conflict_graph(forest: &HypothesisForest, exec: Execution) -> ConflictGraph {
    let leaves = forest.leaves();
    let branches: Vec<Vec<ObsId>> = par::map(exec, &leaves, |&l| forest.branch_observations(l));
    let mut g = ConflictGraph {
        vertices: leaves
            .iter()
            .enumerate()
            .map(|(id, &l)| Vertex {
                id,
                leaf: Some(forest.handle(l)),
                weight: forest.node(l).score.log_score,
            })
            .collect(),
        adj: vec![BTreeSet::new(); leaves.len()],
    };
    let mut holders: std::collections::BTreeMap<ObsId, Vec<usize>> = std::collections::BTreeMap::new();
    for (v, obs) in branches.iter().enumerate() {
        for o in obs {
            holders.entry(*o).or_default().push(v);
        }
    }
    for vs in holders.values() {
        for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Fixed-width bitset over the vertices of one component.
#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn first(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    fn minus(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }

    fn and_assign(&mut self, other: &Bits) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a &= b);
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + b)
            })
        })
    }
}

/// Branch-and-bound over one connected component. Local vertex `i` is the
/// `i`-th heaviest; `ids` maps back to graph ids.
struct ComponentSearch<'a> {
    g: &'a ConflictGraph,
    ids: Vec<usize>,
    weights: Vec<f64>,
    adj: Vec<Bits>,
    best_ids: Vec<usize>,
    best_weight: f64,
    chosen: Vec<usize>,
}

impl<'a> ComponentSearch<'a> {
    fn new(g: &'a ConflictGraph, mut members: Vec<usize>) -> Self {
        members.sort_by(|&a, &b| g.weight(b).total_cmp(&g.weight(a)).then(a.cmp(&b)));
        let n = members.len();
        let local: std::collections::HashMap<usize, usize> = members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let adj = members
            .iter()
            .map(|&v| {
                let mut b = Bits::new(n);
                for u in g.neighbors(v) {
                    if let Some(&j) = local.get(&u) {
                        b.set(j);
                    }
                }
                b
            })
            .collect();
        let weights = members.iter().map(|&v| g.weight(v)).collect();
        Self {
            g,
            ids: members,
            weights,
            adj,
            best_ids: Vec::new(),
            best_weight: 0.0,
            chosen: Vec::new(),
        }
    }

    fn solve(mut self) -> MwisSolution {
        let n = self.ids.len();
        let mut all = Bits::new(n);
        (0..n).for_each(|i| all.set(i));
        self.seed_greedy(&all);
        self.search(all, 0.0);
        MwisSolution {
            selected: self.best_ids,
            weight: self.best_weight,
        }
    }

    fn offer(&mut self) {
        let mut ids: Vec<usize> = self.chosen.iter().map(|&i| self.ids[i]).collect();
        ids.sort_unstable();
        let w = set_weight(self.g, &ids);
        if better(w, &ids, self.best_weight, &self.best_ids) {
            self.best_weight = w;
            self.best_ids = ids;
        }
    }

    fn seed_greedy(&mut self, all: &Bits) {
        let mut p = all.clone();
        while let Some(v) = p.first() {
            self.chosen.push(v);
            p = p.minus(&self.adj[v]);
            p.clear(v);
        }
        self.offer();
        self.chosen.clear();
    }

    /// Upper bound: cover `p` greedily by cliques and sum each clique's
    /// heaviest weight. Vertices are visited heaviest first, so the first
    /// member of every clique is its heaviest.
    fn clique_cover_bound(&self, p: &Bits) -> f64 {
        let mut cliques: Vec<Bits> = Vec::new();
        let mut bound = 0.0;
        for v in p.iter() {
            match cliques.iter_mut().find(|c| c.get(v)) {
                Some(common) => common.and_assign(&self.adj[v]),
                None => {
                    bound += self.weights[v];
                    cliques.push(self.adj[v].clone());
                }
            }
        }
        bound
    }

    fn search(&mut self, p: Bits, current: f64) {
        let Some(v) = p.first() else {
            self.offer();
            return;
        };
        let bound = self.clique_cover_bound(&p);
        if current + bound < self.best_weight - slack(self.best_weight) {
            return;
        }
        let mut without = p.clone();
        without.clear(v);
        let with = without.minus(&self.adj[v]);
        self.chosen.push(v);
        self.search(with, current + self.weights[v]);
        self.chosen.pop();
        self.search(without, current);
    }
}

/// Connected components of the eligible (positive-weight) vertices.
fn components(g: &ConflictGraph) -> Vec<Vec<usize>> {
    let n = g.len();
    let eligible: Vec<bool> = g.vertices.iter().map(|v| v.weight > 0.0).collect();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if !eligible[s] || comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut i = 0;
        while i < members.len() {
            let v = members[i];
            for u in g.neighbors(v) {
                if eligible[u] && comp[u] == usize::MAX {
                    comp[u] = id;
                    members.push(u);
                }
            }
            i += 1;
        }
        out.push(members);
    }
    out
}

/// Exact maximum weighted independent set.
pub fn solve_mwis(g: &ConflictGraph) -> MwisSolution {
    solve_mwis_with(g, Execution::Sequential)
}

/// [`solve_mwis`] with connected components solved on worker threads.
pub fn solve_mwis_with(g: &ConflictGraph, exec: Execution) -> MwisSolution {
    let comps = components(g);
    let parts = par::map(exec, &comps, |members| ComponentSearch::new(g, members.clone()).solve());
    let mut selected: Vec<usize> = parts.into_iter().flat_map(|s| s.selected).collect();
    selected.sort_unstable();
    if selected.is_empty() {
        return MwisSolution::empty();
    }
    let weight = set_weight(g, &selected);
    MwisSolution { selected, weight }
}

/// Exhaustive search over every independent set; the test oracle for
/// [`solve_mwis`].
pub fn brute_force_mwis(g: &ConflictGraph) -> Result<MwisSolution> {
    let n = g.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::GraphTooLarge(n, BRUTE_FORCE_LIMIT));
    }
    let masks: Vec<u32> = (0..n).map(|v| g.neighbors(v).fold(0u32, |m, u| m | (1 << u))).collect();
    let mut best = MwisSolution::empty();
    let mut stack: Vec<(usize, u32)> = vec![(0, 0)];
    while let Some((next, set)) = stack.pop() {
        if next == n {
            let ids: Vec<usize> = (0..n).filter(|&v| set >> v & 1 == 1).collect();
            let w = set_weight(g, &ids);
            if better(w, &ids, best.weight, &best.selected) {
                best = MwisSolution {
                    selected: ids,
                    weight: w,
                };
            }
            continue;
        }
        stack.push((next + 1, set));
        if g.weight(next) > 0.0 && masks[next] & set == 0 {
            stack.push((next + 1, set | (1 << next)));
        }
    }
    Ok(best)
}

/// Heaviest-first greedy independent set; a lower bound on the optimum.
pub fn greedy_mwis(g: &ConflictGraph) -> MwisSolution {
    let mut order: Vec<usize> = (0..g.len()).filter(|&v| g.weight(v) > 0.0).collect();
    order.sort_by(|&a, &b| g.weight(b).total_cmp(&g.weight(a)).then(a.cmp(&b)));
    let mut blocked = vec![false; g.len()];
    let mut selected = Vec::new();
    for v in order {
        if !blocked[v] {
            selected.push(v);
            blocked[v] = true;
            g.neighbors(v).for_each(|u| blocked[u] = true);
        }
    }
    selected.sort_unstable();
    let weight = set_weight(g, &selected);
    MwisSolution { selected, weight }
}

/// Selects the best set of compatible branches of `forest`.
pub fn best_global_hypothesis(forest: &HypothesisForest, exec: Execution) -> Result<GlobalHypothesis> {
    let g = build_conflict_graph(forest, exec);
    let sol = solve_mwis_with(&g, exec);
    hypothesis_from_solution(forest, &g, &sol)
}

pub fn hypothesis_from_solution(
    forest: &HypothesisForest,
    g: &ConflictGraph,
    sol: &MwisSolution,
) -> Result<GlobalHypothesis> {
    let mut h = GlobalHypothesis {
        total_score: sol.weight,
        ..GlobalHypothesis::default()
    };
    for &v in &sol.selected {
        let leaf = g.vertices[v]
            .leaf
            .ok_or_else(|| Error::Consistency(format!("vertex {v} has no leaf")))?;
        if forest.get(leaf).is_none() {
            return Err(Error::Consistency(format!("vertex {v} refers to a removed node")));
        }
        h.branches.push(leaf);
        h.tracks.push(forest.branch_observations(leaf.slot));
        h.scores.push(g.weight(v));
    }
    h.check_disjoint()?;
    Ok(h)
}
