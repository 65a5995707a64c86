//! Simple graphs, hop distances and shortest-path combinatorics.
//!
//! Vertices are dense ids `0..n`. A directed edge `u -> v` with weight `w`
//! corresponds to the matrix entry `A[v][u] = w`, the amplitude of the
//! transition from `u` to `v`. Undirected graphs store both directions, the
//! reverse one with the conjugate weight, so their adjacency is Hermitian.

pub mod families;

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::{CMatrix, Error, Result, C64};

/// Default cap on the number of enumerated shortest paths.
pub const DEFAULT_PATH_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    directed: bool,
    /// Outgoing edges per tail, sorted by head.
    out: Vec<Vec<(usize, C64)>>,
}

impl Graph {
    pub fn new(n: usize, directed: bool) -> Self {
        Graph {
            directed,
            out: vec![Vec::new(); n],
        }
    }

    /// Builds a unit-weight graph from an edge list.
    pub fn from_edges(
        n: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = Graph::new(n, directed);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, tail: usize, head: usize) -> Result<()> {
        self.add_weighted_edge(tail, head, C64::new(1.0, 0.0))
    }

    /// Inserts `tail -> head`; for undirected graphs also `head -> tail`
    /// with the conjugate weight.
    pub fn add_weighted_edge(&mut self, tail: usize, head: usize, weight: C64) -> Result<()> {
        self.check_vertex(tail)?;
        self.check_vertex(head)?;
        if tail == head {
            return Err(Error::domain(format!("self-loop at vertex {tail}")));
        }
        if !weight.re.is_finite() || !weight.im.is_finite() {
            return Err(Error::domain(format!("non-finite weight on edge {tail}-{head}")));
        }
        if weight == C64::new(0.0, 0.0) {
            return Err(Error::domain(format!("zero weight on edge {tail}-{head}")));
        }
        if self.has_edge(tail, head) || (!self.directed && self.has_edge(head, tail)) {
            return Err(Error::domain(format!("duplicate edge {tail}-{head}")));
        }
        self.insert(tail, head, weight);
        if !self.directed {
            self.insert(head, tail, weight.conj());
        }
        Ok(())
    }

    fn insert(&mut self, tail: usize, head: usize, weight: C64) {
        let row = &mut self.out[tail];
        let pos = row.partition_point(|&(h, _)| h < head);
        row.insert(pos, (head, weight));
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "vertex {v} out of range (n = {})",
                self.n()
            )))
        }
    }

    pub fn n(&self) -> usize {
        self.out.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn has_edge(&self, tail: usize, head: usize) -> bool {
        self.weight(tail, head).is_some()
    }

    pub fn weight(&self, tail: usize, head: usize) -> Option<C64> {
        let row = self.out.get(tail)?;
        row.binary_search_by_key(&head, |&(h, _)| h)
            .ok()
            .map(|i| row[i].1)
    }

    /// Heads of the edges leaving `v`, ascending.
    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[v].iter().map(|&(h, _)| h)
    }

    /// Every stored directed edge `(tail, head, weight)`, ordered by tail then head.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(t, row)| row.iter().map(move |&(h, w)| (t, h, w)))
    }

    /// Undirected edges as `(u, v)` with `u < v`. Only meaningful for undirected graphs.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.directed_edges()
            .filter(|&(t, h, _)| t < h)
            .map(|(t, h, _)| (t, h))
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Out-degree of `v` (the ordinary degree for undirected graphs).
    pub fn degree(&self, v: usize) -> usize {
        self.out[v].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn is_unit_weight(&self) -> bool {
        self.directed_edges().all(|(_, _, w)| w == C64::new(1.0, 0.0))
    }

    /// Same vertex set with every edge reversed.
    pub fn reversed(&self) -> Graph {
        let mut r = Graph::new(self.n(), self.directed);
        for (t, h, w) in self.directed_edges() {
            r.insert(h, t, w);
        }
        r
    }

    /// Directed graph of the structurally nonzero off-diagonal entries of a
    /// square matrix: `n -> m` whenever `matrix[(m, n)] != 0`.
    pub fn from_support(matrix: &CMatrix) -> Result<Graph> {
        if !matrix.is_square() {
            return Err(Error::domain("support graph of a non-square matrix"));
        }
        let n = matrix.nrows();
        let mut g = Graph::new(n, true);
        for tail in 0..n {
            for head in 0..n {
                let w = matrix[(head, tail)];
                if head != tail && w != C64::new(0.0, 0.0) {
                    g.insert(tail, head, C64::new(1.0, 0.0));
                }
            }
        }
        Ok(g)
    }

    /// True when both graphs have the same vertex count and directed edge set
    /// (weights ignored).
    pub fn same_topology(&self, other: &Graph) -> bool {
        self.n() == other.n()
            && self
                .out
                .iter()
                .zip(&other.out)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0))
    }

    pub fn is_connected(&self) -> bool {
        if self.n() == 0 {
            return true;
        }
        let sp = bfs(self, 0);
        sp.distance.iter().all(Option::is_some)
    }
}

/// Hop distances and shortest-path counts from one source.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShortestPaths {
    pub source: usize,
    /// `None` for vertices unreachable from the source.
    pub distance: Vec<Option<usize>>,
    /// Number of distinct shortest directed paths; 0 when unreachable.
    pub count: Vec<u128>,
}

/// BFS from `source` accumulating path counts layer by layer over the
/// shortest-path DAG.
pub fn distances_and_counts(g: &Graph, source: usize) -> Result<ShortestPaths> {
    g.check_vertex(source)?;
    let mut sp = bfs(g, source);
    let n = g.n();
    let mut order: Vec<usize> = (0..n).filter(|&v| sp.distance[v].is_some()).collect();
    order.sort_by_key(|&v| sp.distance[v]);
    sp.count = vec![0; n];
    sp.count[source] = 1;
    for &u in &order {
        let du = sp.distance[u].expect("reachable");
        let cu = sp.count[u];
        for v in g.successors(u) {
            if sp.distance[v] == Some(du + 1) {
                sp.count[v] = sp.count[v].checked_add(cu).ok_or(Error::CountOverflow)?;
            }
        }
    }
    Ok(sp)
}

fn bfs(g: &Graph, source: usize) -> ShortestPaths {
    let n = g.n();
    let mut distance = vec![None; n];
    distance[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = distance[u].map(|d| d + 1);
        for v in g.successors(u) {
            if distance[v].is_none() {
                distance[v] = next;
                queue.push_back(v);
            }
        }
    }
    ShortestPaths {
        source,
        distance,
        count: Vec::new(),
    }
}

/// All hop distances; `result[u][v]` is the distance from `u` to `v`.
pub fn all_pairs_distances(g: &Graph) -> Vec<Vec<Option<usize>>> {
    (0..g.n()).map(|s| bfs(g, s).distance).collect()
}

/// The shortest directed paths between two vertices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSet {
    pub source: usize,
    pub target: usize,
    /// `None` when the target is unreachable; `paths` is then empty.
    pub distance: Option<usize>,
    /// Vertex sequences of length `distance + 1`, lexicographically ordered.
    pub paths: Vec<Vec<usize>>,
}

impl PathSet {
    pub fn count(&self) -> usize {
        self.paths.len()
    }

    pub fn is_reachable(&self) -> bool {
        self.distance.is_some()
    }
}

pub fn enumerate_shortest_paths(g: &Graph, source: usize, target: usize) -> Result<PathSet> {
    enumerate_shortest_paths_with_limit(g, source, target, DEFAULT_PATH_LIMIT)
}

/// Every shortest directed path from `source` to `target`, found by
/// backtracking from the target through the BFS DAG. Fails with
/// [`Error::PathOverflow`] when the exact count exceeds `limit`.
pub fn enumerate_shortest_paths_with_limit(
    g: &Graph,
    source: usize,
    target: usize,
    limit: usize,
) -> Result<PathSet> {
    g.check_vertex(target)?;
    let sp = distances_and_counts(g, source)?;
    let Some(distance) = sp.distance[target] else {
        return Ok(PathSet {
            source,
            target,
            distance: None,
            paths: Vec::new(),
        });
    };
    let count = sp.count[target];
    if count > limit as u128 {
        return Err(Error::PathOverflow { count, limit });
    }

    let reversed = g.reversed();
    let mut paths = Vec::with_capacity(count as usize);
    let mut stack = vec![target];
    backtrack(&reversed, &sp.distance, source, &mut stack, &mut paths);
    for p in &mut paths {
        p.reverse();
    }
    paths.sort();
    debug_assert_eq!(paths.len() as u128, count);
    Ok(PathSet {
        source,
        target,
        distance: Some(distance),
        paths,
    })
}

fn backtrack(
    reversed: &Graph,
    distance: &[Option<usize>],
    source: usize,
    stack: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let v = *stack.last().expect("non-empty");
    if v == source {
        out.push(stack.clone());
        return;
    }
    let dv = distance[v].expect("on DAG");
    for u in reversed.successors(v) {
        if dv > 0 && distance[u] == Some(dv - 1) {
            stack.push(u);
            backtrack(reversed, distance, source, stack, out);
            stack.pop();
        }
    }
}

/// Adjacency `A[head][tail] = weight` for any graph.
pub fn adjacency_matrix(g: &Graph) -> CMatrix {
    let n = g.n();
    let mut a = CMatrix::zeros(n, n);
    for (t, h, w) in g.directed_edges() {
        a[(h, t)] = w;
    }
    a
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardMatrices {
    pub adjacency: DMatrix<f64>,
    pub degree: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub max_degree: usize,
}

/// Adjacency, degree and Laplacian `L = D - A` of an undirected unit-weight graph.
pub fn standard_matrices(g: &Graph) -> Result<StandardMatrices> {
    if g.is_directed() {
        return Err(Error::domain("Laplacian requested on a directed graph"));
    }
    if !g.is_unit_weight() {
        return Err(Error::domain("Laplacian requested on a weighted graph"));
    }
    let n = g.n();
    let mut adjacency = DMatrix::zeros(n, n);
    for (t, h, _) in g.directed_edges() {
        adjacency[(h, t)] = 1.0;
    }
    let degree = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|v| g.degree(v) as f64),
    ));
    let laplacian = &degree - &adjacency;
    Ok(StandardMatrices {
        adjacency,
        degree,
        laplacian,
        max_degree: g.max_degree(),
    })
}
