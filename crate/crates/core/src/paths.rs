//! Dijkstra over stochastic and deterministic graphs.
//!
//! The stochastic search draws edge existence lazily: the first time a settled
//! vertex looks at an incident edge, that edge's Bernoulli variable is drawn and
//! remembered for the rest of the run. Only those draws are recorded in the
//! [`PathTrace`], which is what keeps the score-function gradient cheap.
//!
//! Both searches break priority ties by the smaller vertex id and only replace
//! a parent on strict improvement, so for identical edge outcomes they produce
//! identical trees.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, RngCore};

use crate::error::{invalid, Result};
use crate::graph::{EdgeId, StochasticGraph, VertexId, WeightedGraph};

const NO_EDGE: u32 = u32::MAX;
const NOT_SETTLED: usize = usize::MAX;

#[derive(Copy, Clone, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: u32,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: reverse so the smallest (dist, vertex) pops first.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Source of edge outcomes for the stochastic search.
pub trait EdgeSampler {
    /// Returns whether edge `edge`, present with probability `prob`, exists.
    fn draw(&mut self, edge: EdgeId, prob: f64) -> bool;
}

/// Draws outcomes from a random number generator.
pub struct RngSampler<'a, R: RngCore + ?Sized>(pub &'a mut R);

impl<R: RngCore + ?Sized> EdgeSampler for RngSampler<'_, R> {
    #[inline]
    fn draw(&mut self, _edge: EdgeId, prob: f64) -> bool {
        // Same comparison as `StochasticGraph::sample_edge`.
        self.0.gen::<f64>() < prob
    }
}

/// Treats every candidate edge as present.
pub struct AllPresent;

impl EdgeSampler for AllPresent {
    #[inline]
    fn draw(&mut self, _edge: EdgeId, _prob: f64) -> bool {
        true
    }
}

/// Replays a fixed outcome per edge, ignoring the probabilities.
pub struct FixedOutcomes<'a>(pub &'a [bool]);

impl EdgeSampler for FixedOutcomes<'_> {
    #[inline]
    fn draw(&mut self, edge: EdgeId, _prob: f64) -> bool {
        self.0[edge]
    }
}

/// Result of one stochastic Dijkstra run.
#[derive(Clone, Debug)]
pub struct PathTrace {
    source: VertexId,
    d_max: f64,
    dist: Vec<f64>,
    parent: Vec<u32>,
    settle_rank: Vec<usize>,
    settled_order: Vec<VertexId>,
    sampled: Vec<(EdgeId, bool)>,
    cutoff: Vec<usize>,
}

impl PathTrace {
    pub fn source(&self) -> VertexId {
        self.source
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Shortest distance to `v`, or `d_max` if `v` was not settled.
    ///
    /// Every requested target is either settled or unreachable when the search
    /// ends, so this is exact for targets.
    pub fn distance(&self, v: VertexId) -> f64 {
        if self.is_settled(v) {
            self.dist[v.index()]
        } else {
            self.d_max
        }
    }

    pub fn is_settled(&self, v: VertexId) -> bool {
        self.settle_rank[v.index()] != NOT_SETTLED
    }

    /// Edge through which `v` was reached on its shortest path.
    pub fn parent_edge(&self, v: VertexId) -> Option<EdgeId> {
        if !self.is_settled(v) {
            return None;
        }
        match self.parent[v.index()] {
            NO_EDGE => None,
            e => Some(e as EdgeId),
        }
    }

    /// Every edge drawn during the run with its outcome, in draw order.
    pub fn sampled_states(&self) -> &[(EdgeId, bool)] {
        &self.sampled
    }

    /// Outcome recorded for `e`, if it was drawn.
    pub fn state_of(&self, e: EdgeId) -> Option<bool> {
        self.sampled
            .iter()
            .find(|(id, _)| *id == e)
            .map(|&(_, b)| b)
    }

    /// Vertices in the order they were settled.
    pub fn settled_order(&self) -> &[VertexId] {
        &self.settled_order
    }

    /// Number of draws that had happened when `target`'s distance became final.
    /// Only the first `cutoff(target)` sampled edges can influence that distance.
    pub fn cutoff(&self, target: VertexId) -> usize {
        match self.cutoff[target.index()] {
            NOT_SETTLED => self.sampled.len(),
            c => c,
        }
    }
}

/// An explicit shortest path, edges ordered from the source outwards.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPath {
    pub edge_ids: Vec<EdgeId>,
    pub total: f64,
}

fn check_query(n_vertices: usize, source: VertexId, targets: &[VertexId]) -> Result<()> {
    if targets.is_empty() {
        return Err(invalid("shortest-path query needs at least one target"));
    }
    for v in std::iter::once(&source).chain(targets) {
        if v.index() >= n_vertices {
            return Err(crate::Error::InvalidVertex {
                vertex: v.index(),
                n_vertices,
            });
        }
    }
    Ok(())
}

/// Dijkstra on a stochastic graph with lazily drawn edges.
///
/// Stops once every target is settled or the frontier is empty.
pub fn stochastic_dijkstra<S: EdgeSampler + ?Sized>(
    graph: &StochasticGraph,
    source: VertexId,
    targets: &[VertexId],
    sampler: &mut S,
) -> Result<PathTrace> {
    let n = graph.n_vertices();
    check_query(n, source, targets)?;

    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![NO_EDGE; n];
    let mut settle_rank = vec![NOT_SETTLED; n];
    let mut cutoff = vec![NOT_SETTLED; n];
    // 0 = not drawn, 1 = absent, 2 = present
    let mut drawn = vec![0u8; graph.n_edges()];
    let mut sampled = Vec::new();
    let mut settled_order = Vec::new();

    let mut is_target = vec![false; n];
    let mut remaining = 0usize;
    for t in targets {
        if !is_target[t.index()] {
            is_target[t.index()] = true;
            remaining += 1;
        }
    }

    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        vertex: source.0,
    });

    while let Some(Frontier { dist: d, vertex }) = heap.pop() {
        let v = vertex as usize;
        if settle_rank[v] != NOT_SETTLED || d > dist[v] {
            continue;
        }
        settle_rank[v] = settled_order.len();
        settled_order.push(VertexId(vertex));
        if is_target[v] {
            cutoff[v] = sampled.len();
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        for &(u, e) in graph.raw_neighbors(v) {
            let u = u as usize;
            if settle_rank[u] != NOT_SETTLED {
                // Drawn when `u` was settled; cannot improve a settled vertex.
                continue;
            }
            let e = e as usize;
            let present = match drawn[e] {
                0 => {
                    let b = sampler.draw(e, graph.prob(e));
                    drawn[e] = if b { 2 } else { 1 };
                    sampled.push((e, b));
                    b
                }
                s => s == 2,
            };
            if !present {
                continue;
            }
            let nd = d + graph.weight(e);
            if nd < dist[u] {
                dist[u] = nd;
                parent[u] = e as u32;
                heap.push(Frontier {
                    dist: nd,
                    vertex: u as u32,
                });
            }
        }
    }

    Ok(PathTrace {
        source,
        d_max: graph.d_max(),
        dist,
        parent,
        settle_rank,
        settled_order,
        sampled,
        cutoff,
    })
}

/// Walks parent edges back from `target`. `None` when `target` is unreachable.
pub fn recover_path(
    graph: &StochasticGraph,
    trace: &PathTrace,
    target: VertexId,
) -> Option<ShortestPath> {
    if !trace.is_settled(target) {
        return None;
    }
    let mut edge_ids = Vec::new();
    let mut v = target;
    while let Some(e) = trace.parent_edge(v) {
        edge_ids.push(e);
        v = graph.edge(e).other(v);
    }
    debug_assert_eq!(v, trace.source());
    edge_ids.reverse();
    // Same summation order as the search, so `total` equals the trace distance.
    let total = edge_ids.iter().fold(0.0, |acc, &e| acc + graph.weight(e));
    Some(ShortestPath { edge_ids, total })
}

/// Single-source shortest-path tree of a deterministic graph.
#[derive(Clone, Debug)]
pub struct DistanceTree {
    source: VertexId,
    d_max: f64,
    dist: Vec<f64>,
    parent: Vec<u32>,
}

impl DistanceTree {
    pub fn source(&self) -> VertexId {
        self.source
    }

    /// Distance to `v`; `d_max` when unreachable or not settled before the
    /// search stopped.
    pub fn distance(&self, v: VertexId) -> f64 {
        let d = self.dist[v.index()];
        if d.is_finite() {
            d
        } else {
            self.d_max
        }
    }

    pub fn parent_edge(&self, v: VertexId) -> Option<EdgeId> {
        match self.parent[v.index()] {
            NO_EDGE => None,
            e => Some(e as EdgeId),
        }
    }

    /// Distances to every vertex, `d_max` for unreachable ones.
    pub fn distances(&self) -> Vec<f64> {
        (0..self.dist.len())
            .map(|i| self.distance(VertexId::new(i)))
            .collect()
    }
}

fn dijkstra_tree<G: WeightedGraph>(
    graph: &G,
    source: VertexId,
    targets: Option<&[VertexId]>,
) -> DistanceTree {
    let n = graph.n_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![NO_EDGE; n];
    let mut settled = vec![false; n];

    let mut is_target = vec![false; n];
    let mut remaining = match targets {
        Some(ts) => {
            let mut count = 0;
            for t in ts {
                if !is_target[t.index()] {
                    is_target[t.index()] = true;
                    count += 1;
                }
            }
            count
        }
        None => usize::MAX,
    };

    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        vertex: source.0,
    });
    while let Some(Frontier { dist: d, vertex }) = heap.pop() {
        let v = vertex as usize;
        if settled[v] || d > dist[v] {
            continue;
        }
        settled[v] = true;
        if is_target[v] {
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        graph.for_each_neighbor(VertexId(vertex), |u, e, w| {
            let u = u.index();
            if settled[u] {
                return;
            }
            let nd = d + w;
            if nd < dist[u] {
                dist[u] = nd;
                parent[u] = e as u32;
                heap.push(Frontier {
                    dist: nd,
                    vertex: u as u32,
                });
            }
        });
    }
    // Anything left unsettled after an early stop is not a final distance.
    for v in 0..n {
        if !settled[v] {
            dist[v] = f64::INFINITY;
            parent[v] = NO_EDGE;
        }
    }
    DistanceTree {
        source,
        d_max: graph.d_max(),
        dist,
        parent,
    }
}

/// Exact distances from `source` to each of `targets` (in the given order).
pub fn deterministic_dijkstra<G: WeightedGraph>(
    graph: &G,
    source: VertexId,
    targets: &[VertexId],
) -> Result<Vec<f64>> {
    check_query(graph.n_vertices(), source, targets)?;
    let tree = dijkstra_tree(graph, source, Some(targets));
    Ok(targets.iter().map(|&t| tree.distance(t)).collect())
}

/// Full shortest-path tree from `source`.
pub fn shortest_path_tree<G: WeightedGraph>(graph: &G, source: VertexId) -> Result<DistanceTree> {
    check_query(graph.n_vertices(), source, &[source])?;
    Ok(dijkstra_tree(graph, source, None))
}

/// Dense all-pairs distance matrix, one search per source.
pub fn all_pairs<G: WeightedGraph + Sync>(graph: &G) -> crate::builder::DistanceMatrix {
    use rayon::prelude::*;
    let n = graph.n_vertices();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| dijkstra_tree(graph, VertexId::new(s), None).distances())
        .collect();
    crate::builder::DistanceMatrix::from_rows(rows)
}
