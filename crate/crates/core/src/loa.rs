//! Layout reorganization: regroup vertices into 16-vertex windows that
//! maximize computing intensity, then relabel the graph so each group
//! becomes one row window.
//!
//! Vertices are sorted by their smallest neighbor id. Each window is seeded
//! with the first unvisited vertex and grown greedily: every step scans the
//! next `vw` unvisited vertices in sorted order and adds the one whose
//! addition gives the highest `(sum of degrees) / |union of neighbor sets|`,
//! preferring higher degree and then earlier sorted position on ties.
//!
//! [`build_windows_basic`] recomputes the union for every candidate.
//! [`build_windows_optimized`] keeps, per vertex, the count of its neighbors
//! already covered by the window (`cns`), so a candidate's score is
//! `(cur_eles + |N(v)|) / (cur_cols + |N(v)| - cns[v])`. When a vertex is
//! accepted only its newly covered columns (`resi`) are pushed through their
//! neighbor lists. Counters touched by a window are zeroed when it closes.
//!
//! The counter update walks `N(u)` for each newly covered column `u`, which
//! equals `|N(w) ∩ all_cols|` only for symmetric adjacency, so directed
//! graphs are rejected.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::matrix::{permute_symmetric, Graph, Permutation};
use crate::window::WINDOW_HEIGHT;

pub const DEFAULT_VW: usize = 128;

const NIL: usize = usize::MAX;

/// Exact non-negative ratio `num / den`, compared by cross-multiplication.
/// A zero denominator only arises for isolated vertices and is read as 0.
#[derive(Debug, Clone, Copy, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        if den == 0 {
            debug_assert_eq!(num, 0, "non-zero elements without columns");
            Self { num: 0, den: 1 }
        } else {
            Self { num, den }
        }
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

/// Vertices ordered by smallest neighbor id, ties by own id, isolated
/// vertices last.
pub fn sort_by_min_neighbor(g: &Graph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.num_vertices()).collect();
    order.sort_by_key(|&v| (g.neighbors(v).first().copied().unwrap_or(usize::MAX), v));
    order
}

/// Ordered vertex groups and the relabeling they induce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowGrouping {
    groups: Vec<Vec<usize>>,
    induced_perm: Permutation,
}

impl WindowGrouping {
    /// Checks that the groups cover `0..num_vertices` exactly once and that
    /// every group but the last is full.
    pub fn new(groups: Vec<Vec<usize>>, num_vertices: usize) -> Result<Self> {
        for (i, g) in groups.iter().enumerate() {
            let last = i + 1 == groups.len();
            if g.is_empty() || g.len() > WINDOW_HEIGHT || (!last && g.len() != WINDOW_HEIGHT) {
                return Err(Error::InvalidArgument(format!(
                    "group {i} has {} vertices; groups hold {WINDOW_HEIGHT}, only the last may be shorter",
                    g.len()
                )));
            }
        }
        let order: Vec<usize> = groups.iter().flatten().copied().collect();
        if order.len() != num_vertices {
            return Err(Error::InvalidArgument(format!(
                "grouping covers {} of {num_vertices} vertices",
                order.len()
            )));
        }
        let induced_perm = Permutation::from_order(&order)?;
        Ok(Self {
            groups,
            induced_perm,
        })
    }

    /// Consecutive ids in groups of 16.
    pub fn identity(num_vertices: usize) -> Self {
        let groups: Vec<Vec<usize>> = (0..num_vertices)
            .collect::<Vec<_>>()
            .chunks(WINDOW_HEIGHT)
            .map(<[usize]>::to_vec)
            .collect();
        Self::new(groups, num_vertices).expect("identity grouping is valid")
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Old vertex id -> new vertex id.
    pub fn induced_perm(&self) -> &Permutation {
        &self.induced_perm
    }
}

/// Window-building state, exposed read-only to observers.
#[derive(Debug)]
pub struct LoaState<'g> {
    graph: &'g Graph,
    so_list: Vec<usize>,
    visited: Vec<bool>,
    next: Vec<usize>,
    prev: Vec<usize>,
    head: usize,
    window: Vec<usize>,
    in_cols: Vec<bool>,
    all_cols: Vec<usize>,
    resi: Vec<usize>,
    cns: Vec<u32>,
    touched: Vec<usize>,
    is_touched: Vec<bool>,
    cur_eles: u64,
    cur_cols: u64,
}

impl<'g> LoaState<'g> {
    fn new(graph: &'g Graph) -> Self {
        let n = graph.num_vertices();
        let so_list = sort_by_min_neighbor(graph);
        Self {
            graph,
            so_list,
            visited: vec![false; n],
            next: (1..=n).map(|p| if p == n { NIL } else { p }).collect(),
            prev: (0..n).map(|p| if p == 0 { NIL } else { p - 1 }).collect(),
            head: if n == 0 { NIL } else { 0 },
            window: Vec::with_capacity(WINDOW_HEIGHT),
            in_cols: vec![false; n],
            all_cols: Vec::new(),
            resi: Vec::new(),
            cns: vec![0; n],
            touched: Vec::new(),
            is_touched: vec![false; n],
            cur_eles: 0,
            cur_cols: 0,
        }
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn so_list(&self) -> &[usize] {
        &self.so_list
    }

    /// Vertices in the window being built.
    pub fn window(&self) -> &[usize] {
        &self.window
    }

    /// Union of the window's neighbor sets, in insertion order.
    pub fn all_cols(&self) -> &[usize] {
        &self.all_cols
    }

    pub fn is_col(&self, u: usize) -> bool {
        self.in_cols[u]
    }

    /// Columns added by the last accepted vertex.
    pub fn resi(&self) -> &[usize] {
        &self.resi
    }

    pub fn cns(&self, v: usize) -> u32 {
        self.cns[v]
    }

    pub fn cur_eles(&self) -> u64 {
        self.cur_eles
    }

    pub fn cur_cols(&self) -> u64 {
        self.cur_cols
    }

    pub fn is_visited(&self, v: usize) -> bool {
        self.visited[v]
    }

    /// Unvisited vertices in sorted order.
    pub fn unvisited(&self) -> impl Iterator<Item = usize> + '_ {
        let mut pos = self.head;
        std::iter::from_fn(move || {
            if pos == NIL {
                return None;
            }
            let v = self.so_list[pos];
            pos = self.next[pos];
            Some(v)
        })
    }

    fn remove_pos(&mut self, pos: usize) {
        let (p, n) = (self.prev[pos], self.next[pos]);
        if p == NIL {
            self.head = n;
        } else {
            self.next[p] = n;
        }
        if n != NIL {
            self.prev[n] = p;
        }
        self.visited[self.so_list[pos]] = true;
    }

    fn accept(&mut self, pos: usize) {
        let v = self.so_list[pos];
        self.remove_pos(pos);
        self.window.push(v);
        self.resi.clear();
        for &c in self.graph.neighbors(v) {
            if !self.in_cols[c] {
                self.in_cols[c] = true;
                self.all_cols.push(c);
                self.resi.push(c);
            }
        }
        self.cur_eles += self.graph.degree(v) as u64;
        self.cur_cols = self.all_cols.len() as u64;
    }

    /// Pushes the newly covered columns through their neighbor lists.
    fn bump_counters(&mut self) {
        for &u in &self.resi {
            for &w in self.graph.neighbors(u) {
                self.cns[w] += 1;
                if !self.is_touched[w] {
                    self.is_touched[w] = true;
                    self.touched.push(w);
                }
            }
        }
    }

    fn close_window(&mut self) -> Vec<usize> {
        for &w in &self.touched {
            self.cns[w] = 0;
            self.is_touched[w] = false;
        }
        self.touched.clear();
        for &c in &self.all_cols {
            self.in_cols[c] = false;
        }
        self.all_cols.clear();
        self.resi.clear();
        self.cur_eles = 0;
        self.cur_cols = 0;
        std::mem::take(&mut self.window)
    }

    fn brute_cns(&self, v: usize) -> u32 {
        self.graph.neighbors(v).iter().filter(|&&c| self.in_cols[c]).count() as u32
    }
}

/// Score of adding `v` to the current window from the running counters.
pub fn ci_candidate(v: usize, state: &LoaState) -> Ratio {
    let deg = state.graph.degree(v) as u64;
    Ratio::new(
        state.cur_eles + deg,
        state.cur_cols + deg - state.cns[v] as u64,
    )
}

/// Score of adding `v` by forming the union of every neighbor set from
/// scratch. `mark`/`stamp` are reusable scratch.
fn ci_union(state: &LoaState, v: usize, mark: &mut [u32], stamp: &mut u32) -> Ratio {
    *stamp = stamp.wrapping_add(1);
    if *stamp == 0 {
        mark.fill(0);
        *stamp = 1;
    }
    let (mut eles, mut cols) = (0u64, 0u64);
    for &u in state.window.iter().chain(std::iter::once(&v)) {
        let nbrs = state.graph.neighbors(u);
        eles += nbrs.len() as u64;
        for &c in nbrs {
            if mark[c] != *stamp {
                mark[c] = *stamp;
                cols += 1;
            }
        }
    }
    Ratio::new(eles, cols)
}

/// Hooks into [`build_windows_optimized_observed`], for checking counters
/// and scores against brute force.
pub trait LoaObserver {
    /// Called once per expansion step, after the counters are updated and
    /// before candidates are scored.
    fn on_scan(&mut self, _state: &LoaState) {}
    fn on_candidate(&mut self, _state: &LoaState, _v: usize, _score: Ratio) {}
}

impl LoaObserver for () {}

fn check_graph(g: &Graph, vw: usize) -> Result<()> {
    if vw == 0 {
        return Err(Error::InvalidArgument("vertices window must be at least 1".into()));
    }
    if !g.is_undirected() {
        return Err(Error::Directed(
            "layout reorganization needs symmetric adjacency".into(),
        ));
    }
    Ok(())
}

/// How a driver rates candidates.
trait Scorer {
    /// Counters are maintained only for incremental scorers.
    const INCREMENTAL: bool;
    fn begin_step(&mut self, _state: &LoaState) {}
    fn score(&mut self, state: &LoaState, v: usize) -> Ratio;
}

struct UnionScorer {
    mark: Vec<u32>,
    stamp: u32,
}

impl Scorer for UnionScorer {
    const INCREMENTAL: bool = false;

    fn score(&mut self, state: &LoaState, v: usize) -> Ratio {
        ci_union(state, v, &mut self.mark, &mut self.stamp)
    }
}

struct CounterScorer<'o, O> {
    observer: &'o mut O,
}

impl<O: LoaObserver> Scorer for CounterScorer<'_, O> {
    const INCREMENTAL: bool = true;

    fn begin_step(&mut self, state: &LoaState) {
        self.observer.on_scan(state);
    }

    fn score(&mut self, state: &LoaState, v: usize) -> Ratio {
        debug_assert_eq!(state.cns[v], state.brute_cns(v), "stale counter for vertex {v}");
        let p = ci_candidate(v, state);
        self.observer.on_candidate(state, v, p);
        p
    }
}

/// Shared greedy driver.
fn build<S: Scorer>(g: &Graph, vw: usize, scorer: &mut S) -> Result<WindowGrouping> {
    check_graph(g, vw)?;
    let mut st = LoaState::new(g);
    let mut groups = Vec::new();
    while st.head != NIL {
        st.accept(st.head);
        while st.window.len() < WINDOW_HEIGHT && st.head != NIL {
            if S::INCREMENTAL {
                st.bump_counters();
            }
            scorer.begin_step(&st);
            let mut best: Option<(Ratio, usize, usize)> = None;
            let mut pos = st.head;
            let mut scanned = 0;
            while pos != NIL && scanned < vw {
                let v = st.so_list[pos];
                let p = scorer.score(&st, v);
                let deg = g.degree(v);
                let better = match best {
                    None => true,
                    Some((bp, bdeg, _)) => p > bp || (p == bp && deg > bdeg),
                };
                if better {
                    best = Some((p, deg, pos));
                }
                scanned += 1;
                pos = st.next[pos];
            }
            let (_, _, pos) = best.expect("at least one unvisited candidate");
            st.accept(pos);
        }
        groups.push(st.close_window());
    }
    WindowGrouping::new(groups, g.num_vertices())
}

/// Greedy grouping scoring every candidate by an explicit neighbor-set union.
pub fn build_windows_basic(g: &Graph, vw: usize) -> Result<WindowGrouping> {
    let mut scorer = UnionScorer {
        mark: vec![0; g.num_vertices()],
        stamp: 0,
    };
    build(g, vw, &mut scorer)
}

/// Same grouping as [`build_windows_basic`], scored from running counters.
pub fn build_windows_optimized(g: &Graph, vw: usize) -> Result<WindowGrouping> {
    build_windows_optimized_observed(g, vw, &mut ())
}

pub fn build_windows_optimized_observed<O: LoaObserver>(
    g: &Graph,
    vw: usize,
    observer: &mut O,
) -> Result<WindowGrouping> {
    build(g, vw, &mut CounterScorer { observer })
}

/// Relabels the graph so group `k` occupies rows `16k..16k+16`. Returns the
/// relabeled graph and the old -> new permutation for embeddings and labels.
pub fn reorder(g: &Graph, grouping: &WindowGrouping) -> Result<(Graph, Permutation)> {
    let perm = grouping.induced_perm().clone();
    if perm.len() != g.num_vertices() {
        return Err(Error::InvalidArgument(format!(
            "grouping covers {} vertices, graph has {}",
            perm.len(),
            g.num_vertices()
        )));
    }
    let adjacency = permute_symmetric(g.adjacency(), &perm)?;
    Ok((Graph::new(adjacency, g.is_undirected())?, perm))
}
