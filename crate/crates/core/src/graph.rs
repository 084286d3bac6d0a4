//! The learnable graph model.
//!
//! A [`StochasticGraph`] holds a fixed set of undirected candidate edges. Every
//! edge carries two unconstrained parameters: `theta_w`, mapped to a positive
//! weight through softplus, and `theta_b`, mapped to an existence probability
//! through the logistic sigmoid. Each edge is an independent Bernoulli variable,
//! so a sampled graph is just a subset of the candidates.
//!
//! Once training is done the model is made deterministic with
//! [`StochasticGraph::finalize`], which keeps every edge whose probability is at
//! least one half.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `theta_b` is kept inside `[-THETA_B_BOUND, THETA_B_BOUND]`.
pub const THETA_B_BOUND: f64 = 15.0;

/// Existence probability assigned to every candidate edge at construction.
pub const INITIAL_EDGE_PROB: f64 = 0.9;

/// Dense vertex index.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn new(index: usize) -> Self {
        VertexId(u32::try_from(index).expect("vertex index exceeds u32"))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl From<usize> for VertexId {
    fn from(index: usize) -> Self {
        VertexId::new(index)
    }
}

/// Dense edge index into a graph's edge list.
pub type EdgeId = usize;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CandidateEdge {
    pub a: VertexId,
    pub b: VertexId,
    pub id: EdgeId,
}

impl CandidateEdge {
    /// The endpoint opposite to `v`.
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`]: returns `x` with `softplus(x) = w`.
pub fn inverse_softplus(w: f64) -> Result<f64> {
    if !w.is_finite() || w <= 0.0 {
        return Err(invalid(format!(
            "inverse softplus needs a positive finite weight, got {w}"
        )));
    }
    if w > 20.0 {
        // ln(e^w - 1) = w + ln(1 - e^-w)
        Ok(w + (-(-w).exp()).ln_1p())
    } else {
        Ok(w.exp_m1().ln())
    }
}

/// Logistic sigmoid.
///
/// Saturates to exactly `1.0` in `f64` for `x` above roughly 36.7; the model
/// never gets there because `theta_b` is clamped to `±THETA_B_BOUND`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`] for `p` in `(0, 1)`.
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!(
            "logit needs a probability in (0, 1), got {p}"
        )));
    }
    Ok((p / (1.0 - p)).ln())
}

/// Positive edge weight for a weight pre-activation.
#[inline]
pub fn edge_weight(theta_w: f64) -> f64 {
    softplus(theta_w)
}

/// Edge existence probability for a probability pre-activation.
#[inline]
pub fn edge_prob(theta_b: f64) -> f64 {
    sigmoid(theta_b)
}

/// Compressed adjacency: `offsets[v]..offsets[v + 1]` indexes `entries`.
#[derive(Clone, Debug, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    entries: Vec<(u32, u32)>,
}

impl Adjacency {
    fn build(n_vertices: usize, endpoints: impl Iterator<Item = (usize, usize)> + Clone) -> Self {
        let mut degree = vec![0usize; n_vertices];
        for (a, b) in endpoints.clone() {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n_vertices + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &degree {
            acc += d;
            offsets.push(acc);
        }
        let mut cursor = offsets[..n_vertices].to_vec();
        let mut entries = vec![(0u32, 0u32); acc];
        for (id, (a, b)) in endpoints.enumerate() {
            entries[cursor[a]] = (b as u32, id as u32);
            cursor[a] += 1;
            entries[cursor[b]] = (a as u32, id as u32);
            cursor[b] += 1;
        }
        Adjacency { offsets, entries }
    }

    #[inline]
    fn of(&self, v: usize) -> &[(u32, u32)] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Read access to a deterministic weighted graph, used by the exact
/// shortest-path routines.
pub trait WeightedGraph {
    fn n_vertices(&self) -> usize;

    /// Distance reported for unreachable vertices.
    fn d_max(&self) -> f64;

    /// Calls `f(neighbor, edge, weight)` for every edge incident to `v`, in a
    /// fixed order.
    fn for_each_neighbor<F: FnMut(VertexId, EdgeId, f64)>(&self, v: VertexId, f: F);
}

/// Construction options for [`StochasticGraph`].
#[derive(Clone, Debug)]
pub struct GraphInit {
    /// Initial existence probability of every edge.
    pub edge_prob: f64,
    /// Distance between disconnected vertices. `None` selects
    /// `2 * n_vertices * max initial weight`.
    pub d_max: Option<f64>,
}

impl Default for GraphInit {
    fn default() -> Self {
        GraphInit {
            edge_prob: INITIAL_EDGE_PROB,
            d_max: None,
        }
    }
}

/// The learnable graph: candidate edges plus weight and probability parameters.
///
/// Weights and probabilities derived from the parameters are cached and must be
/// refreshed after any parameter write; the setters here do that.
#[derive(Clone, Debug)]
pub struct StochasticGraph {
    n_vertices: usize,
    edges: Vec<CandidateEdge>,
    theta_w: Vec<f64>,
    theta_b: Vec<f64>,
    weights: Vec<f64>,
    probs: Vec<f64>,
    adjacency: Adjacency,
    d_max: f64,
}

impl StochasticGraph {
    /// Builds a graph over `n_vertices` vertices from undirected `pairs`, with
    /// `initial_weights[i]` the starting weight of `pairs[i]`.
    ///
    /// Self-loops and repeated unordered pairs are rejected.
    pub fn new(
        n_vertices: usize,
        pairs: &[(VertexId, VertexId)],
        initial_weights: &[f64],
        init: &GraphInit,
    ) -> Result<Self> {
        if pairs.len() != initial_weights.len() {
            return Err(invalid(format!(
                "{} edges but {} initial weights",
                pairs.len(),
                initial_weights.len()
            )));
        }
        if u32::try_from(n_vertices).is_err() || u32::try_from(pairs.len()).is_err() {
            return Err(invalid("graph too large for 32-bit ids"));
        }
        let theta_b0 = logit(init.edge_prob)?.clamp(-THETA_B_BOUND, THETA_B_BOUND);

        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        let mut edges = Vec::with_capacity(pairs.len());
        for (id, &(a, b)) in pairs.iter().enumerate() {
            for v in [a, b] {
                if v.index() >= n_vertices {
                    return Err(Error::InvalidVertex {
                        vertex: v.index(),
                        n_vertices,
                    });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a.index()));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::DuplicateEdge(key.0.index(), key.1.index()));
            }
            edges.push(CandidateEdge { a, b, id });
        }

        let theta_w = initial_weights
            .iter()
            .map(|&w| inverse_softplus(w))
            .collect::<Result<Vec<_>>>()?;
        let theta_b = vec![theta_b0; edges.len()];

        let max_weight = initial_weights.iter().copied().fold(0.0f64, f64::max);
        let d_max = match init.d_max {
            Some(d) if d > 0.0 && d.is_finite() => d,
            Some(d) => {
                return Err(invalid(format!(
                    "d_max must be positive and finite, got {d}"
                )))
            }
            None => default_d_max(n_vertices, max_weight),
        };

        let adjacency =
            Adjacency::build(n_vertices, edges.iter().map(|e| (e.a.index(), e.b.index())));
        let mut graph = StochasticGraph {
            n_vertices,
            edges,
            weights: vec![0.0; theta_w.len()],
            probs: vec![0.0; theta_b.len()],
            theta_w,
            theta_b,
            adjacency,
            d_max,
        };
        graph.refresh_all();
        Ok(graph)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[CandidateEdge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &CandidateEdge {
        &self.edges[e]
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn set_d_max(&mut self, d_max: f64) -> Result<()> {
        if !(d_max > 0.0 && d_max.is_finite()) {
            return Err(invalid(format!(
                "d_max must be positive and finite, got {d_max}"
            )));
        }
        self.d_max = d_max;
        Ok(())
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.index() < self.n_vertices {
            Ok(())
        } else {
            Err(Error::InvalidVertex {
                vertex: v.index(),
                n_vertices: self.n_vertices,
            })
        }
    }

    /// Incident `(neighbor, edge)` pairs of `v` in adjacency order.
    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = (VertexId, EdgeId)> + '_ {
        self.adjacency
            .of(v.index())
            .iter()
            .map(|&(u, e)| (VertexId(u), e as EdgeId))
    }

    #[inline]
    pub(crate) fn raw_neighbors(&self, v: usize) -> &[(u32, u32)] {
        self.adjacency.of(v)
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency.of(v.index()).len()
    }

    /// Edge joining `a` and `b`, if it is a candidate.
    pub fn edge_between(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        let (from, to) = if self.degree(a) <= self.degree(b) {
            (a, b)
        } else {
            (b, a)
        };
        self.adjacency
            .of(from.index())
            .iter()
            .find(|&&(u, _)| u == to.0)
            .map(|&(_, e)| e as EdgeId)
    }

    pub fn theta_w(&self) -> &[f64] {
        &self.theta_w
    }

    pub fn theta_b(&self) -> &[f64] {
        &self.theta_b
    }

    /// Current weight `softplus(theta_w[e])`.
    #[inline]
    pub fn weight(&self, e: EdgeId) -> f64 {
        self.weights[e]
    }

    /// Current existence probability `sigmoid(theta_b[e])`.
    #[inline]
    pub fn prob(&self, e: EdgeId) -> f64 {
        self.probs[e]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn set_theta_w(&mut self, e: EdgeId, value: f64) {
        self.theta_w[e] = value;
        self.weights[e] = edge_weight(value);
    }

    /// Sets `theta_b[e]`, clamped to `±THETA_B_BOUND`.
    pub fn set_theta_b(&mut self, e: EdgeId, value: f64) {
        let value = value.clamp(-THETA_B_BOUND, THETA_B_BOUND);
        self.theta_b[e] = value;
        self.probs[e] = edge_prob(value);
    }

    /// Mutable parameter vectors. Callers must follow up with
    /// [`refresh_edges`](Self::refresh_edges) or [`refresh_all`](Self::refresh_all).
    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.theta_w, &mut self.theta_b)
    }

    pub(crate) fn refresh_edges(&mut self, edges: impl IntoIterator<Item = EdgeId>) {
        for e in edges {
            self.theta_b[e] = self.theta_b[e].clamp(-THETA_B_BOUND, THETA_B_BOUND);
            self.weights[e] = edge_weight(self.theta_w[e]);
            self.probs[e] = edge_prob(self.theta_b[e]);
        }
    }

    pub(crate) fn refresh_all(&mut self) {
        self.refresh_edges(0..self.edges.len());
    }

    /// Draws the Bernoulli existence variable of edge `e`.
    #[inline]
    pub fn sample_edge<R: Rng + ?Sized>(&self, e: EdgeId, rng: &mut R) -> bool {
        rng.gen::<f64>() < self.probs[e]
    }

    /// Keeps the edges with probability at least one half, at their current weights.
    pub fn finalize(&self) -> FinalGraph {
        let edges = self
            .edges
            .iter()
            .filter(|e| self.probs[e.id] >= 0.5)
            .map(|e| FinalEdge {
                a: e.a,
                b: e.b,
                weight: self.weights[e.id] as f32,
            })
            .collect();
        FinalGraph::new(self.n_vertices, edges, self.d_max as f32)
            .expect("candidate edges are simple and positively weighted")
    }

    /// Like [`finalize`](Self::finalize), but when more than `cap` edges
    /// qualify only the `cap` most probable are kept, ties to the lower id.
    pub fn finalize_at_most(&self, cap: Option<usize>) -> FinalGraph {
        let mut keep: Vec<EdgeId> = (0..self.edges.len())
            .filter(|&e| self.probs[e] >= 0.5)
            .collect();
        if let Some(cap) = cap.filter(|&c| c < keep.len()) {
            keep.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
            keep.truncate(cap);
            keep.sort_unstable();
        }
        let edges = keep
            .into_iter()
            .map(|e| FinalEdge {
                a: self.edges[e].a,
                b: self.edges[e].b,
                weight: self.weights[e] as f32,
            })
            .collect();
        FinalGraph::new(self.n_vertices, edges, self.d_max as f32)
            .expect("candidate edges are simple and positively weighted")
    }

    /// Number of edges that [`finalize`](Self::finalize) would keep.
    pub fn retained_edges(&self) -> usize {
        self.probs.iter().filter(|&&p| p >= 0.5).count()
    }

    /// `N + 2|E|` over all candidate edges.
    pub fn param_count(&self) -> usize {
        self.n_vertices + 2 * self.edges.len()
    }

    /// Fraction of edges whose probability lies in `[eps, 1 - eps]`.
    pub fn non_saturated_fraction(&self, eps: f64) -> f64 {
        if self.probs.is_empty() {
            return 0.0;
        }
        let open = self
            .probs
            .iter()
            .filter(|&&p| p >= eps && p <= 1.0 - eps)
            .count();
        open as f64 / self.probs.len() as f64
    }

    /// Expected number of present edges, `sum_i p_i`.
    pub fn expected_edges(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// A fixed realization of the random graph: edge `e` is present iff
    /// `present[e]`.
    pub fn realize<'a>(&'a self, present: &'a [bool]) -> RealizedGraph<'a> {
        assert_eq!(
            present.len(),
            self.edges.len(),
            "one outcome per candidate edge"
        );
        RealizedGraph {
            graph: self,
            present,
        }
    }
}

/// `2 * n * max_weight`, exceeding the length of any simple path.
pub fn default_d_max(n_vertices: usize, max_weight: f64) -> f64 {
    let w = if max_weight > 0.0 && max_weight.is_finite() {
        max_weight
    } else {
        1.0
    };
    2.0 * (n_vertices.max(1) as f64) * w
}

/// A stochastic graph with every edge outcome fixed.
#[derive(Clone, Copy)]
pub struct RealizedGraph<'a> {
    graph: &'a StochasticGraph,
    present: &'a [bool],
}

impl<'a> RealizedGraph<'a> {
    pub fn graph(&self) -> &'a StochasticGraph {
        self.graph
    }

    pub fn is_present(&self, e: EdgeId) -> bool {
        self.present[e]
    }
}

impl WeightedGraph for RealizedGraph<'_> {
    fn n_vertices(&self) -> usize {
        self.graph.n_vertices
    }

    fn d_max(&self) -> f64 {
        self.graph.d_max
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(VertexId, EdgeId, f64)>(&self, v: VertexId, mut f: F) {
        for &(u, e) in self.graph.raw_neighbors(v.index()) {
            let e = e as EdgeId;
            if self.present[e] {
                f(VertexId(u), e, self.graph.weights[e]);
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalEdge {
    pub a: VertexId,
    pub b: VertexId,
    pub weight: f32,
}

/// Deterministic weighted graph produced by finalization.
///
/// Edges are kept in canonical order: `a < b`, sorted by `(a, b)`. Weights are
/// stored at 32-bit precision, matching the on-disk format; path lengths are
/// always accumulated in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalGraph {
    n_vertices: usize,
    edges: Vec<FinalEdge>,
    d_max: f32,
    offsets: Vec<usize>,
    entries: Vec<(u32, u32)>,
}

impl FinalGraph {
    pub fn new(n_vertices: usize, mut edges: Vec<FinalEdge>, d_max: f32) -> Result<Self> {
        if u32::try_from(n_vertices).is_err() {
            return Err(invalid("graph too large for 32-bit ids"));
        }
        if !(d_max > 0.0 && d_max.is_finite()) {
            return Err(invalid(format!(
                "d_max must be positive and finite, got {d_max}"
            )));
        }
        for e in edges.iter_mut() {
            for v in [e.a, e.b] {
                if v.index() >= n_vertices {
                    return Err(Error::InvalidVertex {
                        vertex: v.index(),
                        n_vertices,
                    });
                }
            }
            if e.a == e.b {
                return Err(Error::SelfLoop(e.a.index()));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(invalid(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.a, e.b, e.weight
                )));
            }
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        for w in edges.windows(2) {
            if w[0].a == w[1].a && w[0].b == w[1].b {
                return Err(Error::DuplicateEdge(w[0].a.index(), w[0].b.index()));
            }
        }
        let adj = Adjacency::build(n_vertices, edges.iter().map(|e| (e.a.index(), e.b.index())));
        Ok(FinalGraph {
            n_vertices,
            edges,
            d_max,
            offsets: adj.offsets,
            entries: adj.entries,
        })
    }

    /// A graph with no edges.
    pub fn empty(n_vertices: usize, d_max: f32) -> Result<Self> {
        FinalGraph::new(n_vertices, Vec::new(), d_max)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[FinalEdge] {
        &self.edges
    }

    pub fn d_max_f32(&self) -> f32 {
        self.d_max
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.offsets[v.index() + 1] - self.offsets[v.index()]
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.index() < self.n_vertices {
            Ok(())
        } else {
            Err(Error::InvalidVertex {
                vertex: v.index(),
                n_vertices: self.n_vertices,
            })
        }
    }

    /// `N + 2|E|`.
    pub fn param_count(&self) -> usize {
        self.n_vertices + 2 * self.edges.len()
    }

    /// Finalizing an already deterministic graph is a no-op.
    pub fn finalize(&self) -> FinalGraph {
        self.clone()
    }

    /// Edge endpoints and weights, for rebuilding a candidate set.
    pub fn edge_pairs(&self) -> (Vec<(VertexId, VertexId)>, Vec<f64>) {
        self.edges
            .iter()
            .map(|e| ((e.a, e.b), f64::from(e.weight)))
            .unzip()
    }
}

impl WeightedGraph for FinalGraph {
    fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    fn d_max(&self) -> f64 {
        f64::from(self.d_max)
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(VertexId, EdgeId, f64)>(&self, v: VertexId, mut f: F) {
        let v = v.index();
        for &(u, e) in &self.entries[self.offsets[v]..self.offsets[v + 1]] {
            f(
                VertexId(u),
                e as EdgeId,
                f64::from(self.edges[e as usize].weight),
            );
        }
    }
}

/// Stored-parameter accounting shared by both graph kinds.
pub trait ParamCount {
    fn param_count(&self) -> usize;
}

impl ParamCount for StochasticGraph {
    fn param_count(&self) -> usize {
        StochasticGraph::param_count(self)
    }
}

impl ParamCount for FinalGraph {
    fn param_count(&self) -> usize {
        FinalGraph::param_count(self)
    }
}

/// `N + 2|E|` for any graph.
pub fn param_count<G: ParamCount>(graph: &G) -> usize {
    graph.param_count()
}
