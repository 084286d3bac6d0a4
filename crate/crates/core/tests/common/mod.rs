//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use probgraph::estimators::{weight_gradients, LossValue};
use probgraph::graph::{EdgeId, GraphInit, StochasticGraph, VertexId, WeightedGraph};
use probgraph::paths::{stochastic_dijkstra, FixedOutcomes, PathTrace};
use probgraph::{AdamHyper, FinalEdge, FinalGraph};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn v(i: usize) -> VertexId {
    VertexId::new(i)
}

/// `m` distinct random pairs over `n` vertices.
pub fn random_pairs<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<(VertexId, VertexId)> {
    let mut all: Vec<(VertexId, VertexId)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (v(a), v(b))))
        .collect();
    all.shuffle(rng);
    all.truncate(m);
    all
}

/// Random weights in `[0.2, 2)`, random edge probabilities.
pub fn random_stochastic_graph<R: Rng>(
    n: usize,
    m: usize,
    d_max: f64,
    rng: &mut R,
) -> StochasticGraph {
    let pairs = random_pairs(n, m, rng);
    let weights: Vec<f64> = pairs.iter().map(|_| rng.gen_range(0.2..2.0)).collect();
    let mut g = StochasticGraph::new(
        n,
        &pairs,
        &weights,
        &GraphInit {
            d_max: Some(d_max),
            ..GraphInit::default()
        },
    )
    .expect("valid random graph");
    for e in 0..g.n_edges() {
        g.set_theta_b(e, rng.gen_range(-2.0..2.0));
    }
    g
}

pub fn random_final_graph<R: Rng>(n: usize, m: usize, rng: &mut R) -> FinalGraph {
    let edges = random_pairs(n, m, rng)
        .into_iter()
        .map(|(a, b)| FinalEdge {
            a,
            b,
            weight: rng.gen_range(0.05f32..3.0),
        })
        .collect();
    FinalGraph::new(n, edges, 1000.0).expect("valid random graph")
}

/// The stochastic graph restricted to the edges marked present, with its
/// exact f64 weights.
pub struct Masked<'a> {
    pub graph: &'a StochasticGraph,
    pub present: &'a [bool],
}

impl WeightedGraph for Masked<'_> {
    fn n_vertices(&self) -> usize {
        self.graph.n_vertices()
    }

    fn d_max(&self) -> f64 {
        self.graph.d_max()
    }

    fn for_each_neighbor<F: FnMut(VertexId, EdgeId, f64)>(&self, u: VertexId, mut f: F) {
        for (w, e) in self.graph.neighbors(u) {
            if self.present[e] {
                f(w, e, self.graph.weight(e))
            }
        }
    }
}

/// All-pairs distances by Floyd-Warshall; unreachable pairs get `d_max`.
pub fn floyd_warshall(graph: &FinalGraph) -> Vec<Vec<f64>> {
    let n = graph.n_vertices();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in graph.edges() {
        let (a, b, w) = (e.a.index(), e.b.index(), f64::from(e.weight));
        if w < d[a][b] {
            d[a][b] = w;
            d[b][a] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    let cap = graph.d_max();
    for row in &mut d {
        for x in row.iter_mut() {
            if x.is_infinite() {
                *x = cap;
            }
        }
    }
    d
}

/// Textbook dense Adam.
pub struct DenseAdam {
    pub hyper: AdamHyper,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
}

impl DenseAdam {
    pub fn new(n: usize, hyper: AdamHyper) -> Self {
        DenseAdam {
            hyper,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let h = self.hyper;
        self.t += 1;
        for i in 0..params.len() {
            self.m[i] = h.beta1 * self.m[i] + (1.0 - h.beta1) * grad[i];
            self.v[i] = h.beta2 * self.v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / (1.0 - h.beta1.powi(self.t));
            let v_hat = self.v[i] / (1.0 - h.beta2.powi(self.t));
            params[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        }
    }
}

/// Worst relative disagreement between the pathwise gradient of `loss` with
/// respect to every `theta_w` and a central finite difference, for a search
/// from `source` under fixed edge outcomes. Pairs where both sides are below
/// `floor` in magnitude count as agreeing.
pub fn worst_weight_gradient_error<L>(
    graph: &StochasticGraph,
    present: &[bool],
    source: VertexId,
    targets: &[VertexId],
    loss: L,
    h: f64,
    floor: f64,
) -> f64
where
    L: Fn(&PathTrace) -> LossValue,
{
    let run = |g: &StochasticGraph| {
        let trace = stochastic_dijkstra(g, source, targets, &mut FixedOutcomes(present))
            .expect("valid query");
        let lv = loss(&trace);
        (trace, lv)
    };
    let (trace, lv) = run(graph);
    let mut analytic = vec![0.0; graph.n_edges()];
    let mut contributions: Vec<(usize, f64)> = Vec::new();
    weight_gradients(graph, &trace, &lv, &mut contributions);
    for (e, g) in contributions {
        analytic[e] += g;
    }
    let mut worst: f64 = 0.0;
    for e in 0..graph.n_edges() {
        let theta = graph.theta_w()[e];
        let mut plus = graph.clone();
        plus.set_theta_w(e, theta + h);
        let mut minus = graph.clone();
        minus.set_theta_w(e, theta - h);
        let fd = (run(&plus).1.value - run(&minus).1.value) / (2.0 * h);
        let scale = analytic[e].abs().max(fd.abs());
        if scale < floor {
            continue;
        }
        worst = worst.max((analytic[e] - fd).abs() / scale);
    }
    worst
}
