//! Distance-preserving compression: fit graph distances to target distances
//! by squared error, plus the graph reconstruction harness.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::{edge_budget, finetune_weights, run_training, EvalReport, TrainConfig, Trained};
use crate::builder::{
    generate_erdos_renyi, CandidateSet, DistanceMatrix, ErdosRenyiInstance, VectorDataset,
};
use crate::error::{invalid, Result};
use crate::estimators::{DistanceGrad, LossValue, Query};
use crate::graph::{EdgeId, FinalGraph, StochasticGraph, VertexId, WeightedGraph};
use crate::paths::{deterministic_dijkstra, shortest_path_tree, PathTrace};

/// Datasets up to this size get their target distances precomputed.
pub(crate) const DENSE_TARGETS_MAX: usize = 2048;

/// Distances the graph should reproduce between items `0..n`.
#[derive(Copy, Clone, Debug)]
pub enum TargetDistances<'a> {
    Vectors(&'a VectorDataset),
    Matrix(&'a DistanceMatrix),
}

impl TargetDistances<'_> {
    pub fn n(&self) -> usize {
        match self {
            TargetDistances::Vectors(d) => d.n_items(),
            TargetDistances::Matrix(m) => m.n(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            TargetDistances::Vectors(d) => d.distance(i, j),
            TargetDistances::Matrix(m) => m.get(i, j),
        }
    }
}

/// Queries for one step: every ordered pair when there are at most
/// `batch_pairs` of them, otherwise `batch_sources` distinct sources with
/// `batch_pairs / batch_sources` uniform targets each (other than the source).
pub fn sample_pair_batch<R: Rng + ?Sized>(
    n: usize,
    batch_sources: usize,
    batch_pairs: usize,
    rng: &mut R,
) -> Vec<Query> {
    if n < 2 {
        return Vec::new();
    }
    if n * (n - 1) <= batch_pairs {
        return (0..n)
            .map(|s| Query {
                source: VertexId::new(s),
                targets: (0..n).filter(|&t| t != s).map(VertexId::new).collect(),
            })
            .collect();
    }
    let per_source = (batch_pairs / batch_sources).max(1);
    let sources = sample(rng, n, batch_sources.min(n)).into_vec();
    sources
        .into_iter()
        .map(|s| {
            let targets = (0..per_source)
                .map(|_| {
                    let t = rng.gen_range(0..n - 1);
                    VertexId::new(if t >= s { t + 1 } else { t })
                })
                .collect();
            Query {
                source: VertexId::new(s),
                targets,
            }
        })
        .collect()
}

/// Pairs per step produced by [`sample_pair_batch`].
pub(crate) fn pairs_per_step(n: usize, batch_sources: usize, batch_pairs: usize) -> usize {
    if n < 2 {
        0
    } else if n * (n - 1) <= batch_pairs {
        n * (n - 1)
    } else {
        batch_sources.min(n) * (batch_pairs / batch_sources).max(1)
    }
}

/// Squared distance error of one search's pairs, divided by the step's
/// `batch_size` so that summing over the step's queries gives the batch mean.
pub fn compression_loss(
    query: &Query,
    trace: &PathTrace,
    targets: &TargetDistances,
    batch_size: usize,
) -> LossValue {
    let scale = 1.0 / batch_size.max(1) as f64;
    let s = query.source.index();
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(query.targets.len());
    let mut pair_values = Vec::with_capacity(query.targets.len());
    for &t in &query.targets {
        let d = trace.distance(t);
        let diff = d - targets.get(s, t.index());
        let v = diff * diff * scale;
        value += v;
        pair_values.push(v);
        grads.push(DistanceGrad {
            source: query.source,
            target: t,
            grad: 2.0 * diff * scale,
        });
    }
    LossValue {
        value,
        per_distance_grads: grads,
        pair_values: Some(pair_values),
    }
}

/// Mean squared distance error over all ordered pairs of distinct items
/// `0..targets.n()`.
pub fn compression_mse<G: WeightedGraph + Sync>(
    graph: &G,
    targets: &TargetDistances,
) -> Result<f64> {
    let n = targets.n();
    if n < 2 {
        return Ok(0.0);
    }
    if graph.n_vertices() < n {
        return Err(invalid("graph has fewer vertices than there are items"));
    }
    let items: Vec<VertexId> = (0..n).map(VertexId::new).collect();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let d = deterministic_dijkstra(graph, VertexId::new(s), &items)?;
            Ok((0..n)
                .filter(|&t| t != s)
                .map(|t| {
                    let e = d[t] - targets.get(s, t);
                    e * e
                })
                .sum())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(total / (n * (n - 1)) as f64)
}

/// Trains a graph over `candidates` to reproduce `targets`, then finalizes it.
///
/// `targets` covers items `0..n`; candidate vertices beyond `n` (anchors)
/// only serve as intermediate path vertices.
pub fn train_compression_on(
    targets: TargetDistances,
    candidates: &CandidateSet,
    config: &TrainConfig,
) -> Result<Trained> {
    config.validate()?;
    let n = targets.n();
    if n < 2 {
        return Err(invalid("compression needs at least two items"));
    }
    if candidates.n_vertices < n {
        return Err(invalid(
            "candidate graph has fewer vertices than there are items",
        ));
    }
    let mut model = StochasticGraph::new(
        candidates.n_vertices,
        &candidates.pairs,
        &candidates.init_weights,
        &config.graph_init(),
    )?;
    let per_step = pairs_per_step(n, config.batch_sources, config.batch_pairs);
    let steps_per_epoch = (n * (n - 1)).div_ceil(per_step);
    let budget = edge_budget(config.param_budget, candidates.n_vertices, n);
    let (bs, bp) = (config.batch_sources, config.batch_pairs);
    let loss = |q: &Query, t: &PathTrace| compression_loss(q, t, &targets, per_step);

    let outcome = run_training(
        &mut model,
        config,
        steps_per_epoch,
        budget,
        false,
        |rng| sample_pair_batch(n, bs, bp, rng),
        loss,
    )?;
    let finalized = model.finalize_at_most(budget);
    let final_epoch = outcome.steps.saturating_sub(outcome.steps_per_epoch);
    let redundant =
        redundant_retained_edges(&model, &finalized, &outcome.last_on_path, final_epoch)?;
    let graph = finetune_weights(
        &finalized,
        config,
        steps_per_epoch,
        |rng| sample_pair_batch(n, bs, bp, rng),
        loss,
    )?;

    let mut report = EvalReport::new("compression", &graph, n);
    report.mse = Some(compression_mse(&graph, &targets)?);
    report.train_objective = outcome.train_objective;
    report.candidate_edges = model.n_edges();
    report.steps = outcome.steps;
    report.lambda = outcome.lambda;
    report.redundant_retained = Some(redundant);
    report.non_saturated_fraction = Some(model.non_saturated_fraction(1e-3));
    Ok(Trained {
        model,
        graph,
        report,
    })
}

/// Compresses a vector dataset over the given candidate edges.
pub fn train_compression(
    data: &VectorDataset,
    candidates: &CandidateSet,
    config: &TrainConfig,
) -> Result<Trained> {
    if data.n_items() <= DENSE_TARGETS_MAX {
        let m = DistanceMatrix::from_fn(data.n_items(), |i, j| data.distance(i, j));
        train_compression_on(TargetDistances::Matrix(&m), candidates, config)
    } else {
        train_compression_on(TargetDistances::Vectors(data), candidates, config)
    }
}

/// `graph` with one edge removed.
struct WithoutEdge<'a> {
    graph: &'a FinalGraph,
    skip: EdgeId,
}

impl WeightedGraph for WithoutEdge<'_> {
    fn n_vertices(&self) -> usize {
        self.graph.n_vertices()
    }

    fn d_max(&self) -> f64 {
        self.graph.d_max()
    }

    fn for_each_neighbor<F: FnMut(VertexId, EdgeId, f64)>(&self, v: VertexId, mut f: F) {
        self.graph.for_each_neighbor(v, |u, e, w| {
            if e != self.skip {
                f(u, e, w)
            }
        });
    }
}

/// Whether edge `e` of `graph` is the unique shortest path between its
/// endpoints; otherwise removing it changes no distance at all.
fn is_essential(graph: &FinalGraph, e: EdgeId) -> Result<bool> {
    let edge = graph.edges()[e];
    let without = WithoutEdge { graph, skip: e };
    let alt = deterministic_dijkstra(&without, edge.a, &[edge.b])?[0];
    let unreachable = alt >= without.d_max();
    Ok(unreachable || f64::from(edge.weight) < alt)
}

/// Edges of `truth` that lie on some unique shortest path.
pub fn relevant_edges(truth: &FinalGraph) -> Result<Vec<bool>> {
    (0..truth.n_edges())
        .map(|e| is_essential(truth, e))
        .collect()
}

/// Retained edges that were on no sampled shortest path since step `since`
/// and whose removal leaves every distance of `graph` unchanged.
pub fn redundant_retained_edges(
    model: &StochasticGraph,
    graph: &FinalGraph,
    last_on_path: &[Option<usize>],
    since: usize,
) -> Result<usize> {
    let mut count = 0;
    for (e, edge) in graph.edges().iter().enumerate() {
        let id = model
            .edge_between(edge.a, edge.b)
            .ok_or_else(|| invalid("finalized edge missing from the model"))?;
        let recently_used = last_on_path[id].is_some_and(|s| s >= since);
        if !recently_used && !is_essential(graph, e)? {
            count += 1;
        }
    }
    Ok(count)
}

/// Outcome of reconstructing a known graph from its distances.
#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    pub trained: Trained,
    pub max_error: f64,
    pub mean_error: f64,
    /// F1 of the learned edge set against the truth edges that lie on a unique
    /// shortest path.
    pub edge_f1: f64,
}

/// Learns a graph reproducing the distances of `instance`, starting from the
/// complete graph weighted by those distances.
pub fn reconstruct_graph(
    instance: &ErdosRenyiInstance,
    config: &TrainConfig,
) -> Result<ReconstructionReport> {
    let truth = &instance.distances;
    let n = truth.n();
    let candidates = CandidateSet::complete(n, |i, j| truth.get(i, j).max(1e-6));
    let mut trained = train_compression_on(TargetDistances::Matrix(truth), &candidates, config)?;

    let learned = shortest_path_tree_all(&trained.graph)?;
    let (mut max_error, mut sum, mut count) = (0.0f64, 0.0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let e = (learned.get(i, j) - truth.get(i, j)).abs();
            max_error = max_error.max(e);
            sum += e;
            count += 1;
        }
    }
    let mean_error = if count == 0 { 0.0 } else { sum / count as f64 };

    let relevant = relevant_edges(&instance.graph)?;
    let truth_set: std::collections::HashSet<(VertexId, VertexId)> = instance
        .graph
        .edges()
        .iter()
        .zip(&relevant)
        .filter(|(_, &r)| r)
        .map(|(e, _)| (e.a, e.b))
        .collect();
    let learned_set: std::collections::HashSet<(VertexId, VertexId)> =
        trained.graph.edges().iter().map(|e| (e.a, e.b)).collect();
    let hits = learned_set.intersection(&truth_set).count() as f64;
    let edge_f1 = if truth_set.is_empty() && learned_set.is_empty() {
        1.0
    } else {
        2.0 * hits / (truth_set.len() + learned_set.len()) as f64
    };

    trained.report.task = "reconstruction".into();
    trained.report.max_error = Some(max_error);
    trained.report.mean_error = Some(mean_error);
    trained.report.edge_f1 = Some(edge_f1);
    Ok(ReconstructionReport {
        trained,
        max_error,
        mean_error,
        edge_f1,
    })
}

/// Settings that reconstruct small random graphs reliably: mild sparsity,
/// a long full-batch schedule and a long weight-only refinement.
pub fn reconstruction_config() -> TrainConfig {
    let mut c = TrainConfig {
        lambda: 0.01,
        epochs: 2000,
        finetune_epochs: 500,
        lr_final_fraction: 0.1,
        ..TrainConfig::default()
    };
    c.hyper.lr = 3e-3;
    c
}

/// `runs` connected G(n, p) instances with `n` uniform in `n_range`, drawn
/// from one seeded stream.
pub fn reconstruction_instances(
    runs: usize,
    n_range: std::ops::RangeInclusive<usize>,
    p: f64,
    seed: u64,
) -> Result<Vec<ErdosRenyiInstance>> {
    if n_range.is_empty() {
        return Err(invalid("empty vertex-count range"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..runs)
        .map(|_| {
            let n = rng.gen_range(n_range.clone());
            generate_erdos_renyi(n, p, &mut rng)
        })
        .collect()
}

fn shortest_path_tree_all(graph: &FinalGraph) -> Result<DistanceMatrix> {
    let rows = (0..graph.n_vertices())
        .map(|s| shortest_path_tree(graph, VertexId::new(s)).map(|t| t.distances()))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceMatrix::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FinalEdge, GraphInit};
    use crate::paths::{stochastic_dijkstra, FixedOutcomes};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(i: usize) -> VertexId {
        VertexId::new(i)
    }

    #[test]
    fn single_pair_arithmetic() {
        let g = StochasticGraph::new(2, &[(v(0), v(1))], &[3.0], &GraphInit::default()).unwrap();
        let trace = stochastic_dijkstra(&g, v(0), &[v(1)], &mut FixedOutcomes(&[true])).unwrap();
        let truth = DistanceMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let q = Query {
            source: v(0),
            targets: vec![v(1)],
        };
        let lv = compression_loss(&q, &trace, &TargetDistances::Matrix(&truth), 1);
        assert!((lv.value - 4.0).abs() < 1e-9);
        assert!((lv.per_distance_grads[0].grad - 4.0).abs() < 1e-9);
    }

    #[test]
    fn exact_distances_give_zero_loss() {
        let g = StochasticGraph::new(
            3,
            &[(v(0), v(1)), (v(1), v(2))],
            &[1.0, 2.0],
            &GraphInit::default(),
        )
        .unwrap();
        let trace = stochastic_dijkstra(&g, v(0), &[v(1), v(2)], &mut FixedOutcomes(&[true, true]))
            .unwrap();
        let truth = DistanceMatrix::from_rows(vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 2.0],
            vec![3.0, 2.0, 0.0],
        ]);
        let q = Query {
            source: v(0),
            targets: vec![v(1), v(2), v(0)],
        };
        let lv = compression_loss(&q, &trace, &TargetDistances::Matrix(&truth), 3);
        assert!(lv.value.abs() < 1e-20);
        assert_eq!(lv.per_distance_grads.len(), 3);
    }

    #[test]
    fn full_batch_covers_every_ordered_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let qs = sample_pair_batch(5, 2, 20, &mut rng);
        assert_eq!(qs.len(), 5);
        assert_eq!(qs.iter().map(|q| q.targets.len()).sum::<usize>(), 20);
        assert_eq!(pairs_per_step(5, 2, 20), 20);
    }

    #[test]
    fn sampled_batch_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let qs = sample_pair_batch(100, 4, 64, &mut rng);
        assert_eq!(qs.len(), 4);
        for q in &qs {
            assert_eq!(q.targets.len(), 16);
            assert!(q.targets.iter().all(|&t| t != q.source && t.index() < 100));
        }
        let mut sources: Vec<_> = qs.iter().map(|q| q.source).collect();
        sources.dedup();
        assert_eq!(sources.len(), 4);
        assert_eq!(pairs_per_step(100, 4, 64), 64);
    }

    #[test]
    fn mse_of_exact_graph_is_zero() {
        let edges = vec![
            FinalEdge {
                a: v(0),
                b: v(1),
                weight: 1.0,
            },
            FinalEdge {
                a: v(1),
                b: v(2),
                weight: 0.5,
            },
        ];
        let g = FinalGraph::new(3, edges, 10.0).unwrap();
        let truth = DistanceMatrix::from_rows(vec![
            vec![0.0, 1.0, 1.5],
            vec![1.0, 0.0, 0.5],
            vec![1.5, 0.5, 0.0],
        ]);
        assert_eq!(
            compression_mse(&g, &TargetDistances::Matrix(&truth)).unwrap(),
            0.0
        );
    }

    #[test]
    fn shortcut_edge_is_not_relevant() {
        let edges = vec![
            FinalEdge {
                a: v(0),
                b: v(1),
                weight: 1.0,
            },
            FinalEdge {
                a: v(1),
                b: v(2),
                weight: 1.0,
            },
            FinalEdge {
                a: v(0),
                b: v(2),
                weight: 2.5,
            },
        ];
        let g = FinalGraph::new(3, edges, 10.0).unwrap();
        // canonical order: (0,1), (0,2), (1,2)
        assert_eq!(relevant_edges(&g).unwrap(), vec![true, false, true]);
    }

    #[test]
    fn tied_alternative_is_not_relevant() {
        let edges = vec![
            FinalEdge {
                a: v(0),
                b: v(1),
                weight: 1.0,
            },
            FinalEdge {
                a: v(1),
                b: v(2),
                weight: 1.0,
            },
            FinalEdge {
                a: v(0),
                b: v(2),
                weight: 2.0,
            },
        ];
        let g = FinalGraph::new(3, edges, 10.0).unwrap();
        // canonical order: (0,1), (0,2), (1,2)
        assert_eq!(relevant_edges(&g).unwrap(), vec![true, false, true]);
    }
}
