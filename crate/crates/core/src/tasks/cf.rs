//! Implicit-feedback ranking: users and items share one graph, and items are
//! recommended by ascending distance from the user.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{edge_budget, finetune_weights, run_training, EvalReport, TrainConfig, Trained};
use crate::builder::{build_cf_graph, CfVariant, InteractionMatrix};
use crate::error::{invalid, Result};
use crate::estimators::{trace_seed, DistanceGrad, LossValue, Query};
use crate::graph::{FinalGraph, StochasticGraph, VertexId, WeightedGraph};
use crate::paths::{deterministic_dijkstra, PathTrace};

/// Softmax ranking loss `-log softmax(-d)[positive]` with its gradient in the
/// distances: `(value, dL/dd_pos, dL/dd_neg)`.
pub fn cf_loss_from_distances(d_pos: f64, d_negs: &[f64]) -> (f64, f64, Vec<f64>) {
    let max = d_negs.iter().fold(-d_pos, |m, &d| m.max(-d));
    let e_pos = (-d_pos - max).exp();
    let e_negs: Vec<f64> = d_negs.iter().map(|&d| (-d - max).exp()).collect();
    let z = e_pos + e_negs.iter().sum::<f64>();
    let value = z.ln() + max + d_pos;
    let s_pos = e_pos / z;
    let grads = e_negs.iter().map(|&e| -e / z).collect();
    (value, 1.0 - s_pos, grads)
}

/// Ranking loss of one search whose first target is the positive item and the
/// rest are negatives, scaled by `scale`.
pub fn cf_loss(query: &Query, trace: &PathTrace, scale: f64) -> LossValue {
    let (&pos, negs) = query
        .targets
        .split_first()
        .expect("a ranking query has a positive target");
    let d_negs: Vec<f64> = negs.iter().map(|&t| trace.distance(t)).collect();
    let (value, g_pos, g_negs) = cf_loss_from_distances(trace.distance(pos), &d_negs);
    let mut grads = Vec::with_capacity(query.targets.len());
    grads.push(DistanceGrad {
        source: query.source,
        target: pos,
        grad: g_pos * scale,
    });
    for (&t, g) in negs.iter().zip(g_negs) {
        grads.push(DistanceGrad {
            source: query.source,
            target: t,
            grad: g * scale,
        });
    }
    LossValue {
        value: value * scale,
        per_distance_grads: grads,
        pair_values: None,
    }
}

/// Leave-one-out split: each user's last interaction is held out.
#[derive(Clone, Debug)]
pub struct CfSplit {
    pub train: InteractionMatrix,
    /// All interactions, training and held out.
    pub all: InteractionMatrix,
    pub held_out: Vec<Option<u32>>,
}

impl CfSplit {
    pub fn n_users(&self) -> usize {
        self.train.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }
}

/// Splits time-ordered `(user, item)` events. Every occurrence of the held-out
/// item is removed from the user's training set.
pub fn leave_one_out(n_users: usize, n_items: usize, events: &[(usize, usize)]) -> Result<CfSplit> {
    if events.is_empty() {
        return Err(invalid("no interactions"));
    }
    let mut held_out = vec![None; n_users];
    for &(u, i) in events {
        if u >= n_users || i >= n_items {
            return Err(invalid(format!(
                "interaction ({u}, {i}) outside {n_users} x {n_items}"
            )));
        }
        held_out[u] = Some(i as u32);
    }
    let train = events
        .iter()
        .copied()
        .filter(|&(u, i)| held_out[u] != Some(i as u32));
    Ok(CfSplit {
        train: InteractionMatrix::from_pairs(n_users, n_items, train)?,
        all: InteractionMatrix::from_pairs(n_users, n_items, events.iter().copied())?,
        held_out,
    })
}

/// Whether `held_out` ranks among the first `k` of `candidates` by ascending
/// distance from `user`, ties broken by smaller vertex id.
pub fn hit_ratio<G: WeightedGraph>(
    graph: &G,
    user: VertexId,
    held_out: VertexId,
    candidates: &[VertexId],
    k: usize,
) -> Result<bool> {
    let pos = candidates
        .iter()
        .position(|&c| c == held_out)
        .ok_or_else(|| invalid("held-out item must be among the candidates"))?;
    let d = deterministic_dijkstra(graph, user, candidates)?;
    Ok(rank_of(&d, candidates, pos) < k)
}

/// Number of candidates ranked strictly ahead of `candidates[pos]`.
fn rank_of(distances: &[f64], candidates: &[VertexId], pos: usize) -> usize {
    let (dp, vp) = (distances[pos], candidates[pos]);
    distances
        .iter()
        .zip(candidates)
        .filter(|&(&d, &v)| d < dp || (d == dp && v < vp))
        .count()
}

/// Hit ratios of a finalized graph on the held-out items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfEvaluation {
    pub hr_at_5: f64,
    pub hr_at_10: f64,
    pub users: usize,
}

/// Ranks every user's held-out item against `n_negatives` items the user never
/// interacted with, sampled per user from `seed`.
pub fn evaluate_cf(
    graph: &FinalGraph,
    split: &CfSplit,
    n_negatives: usize,
    seed: u64,
) -> Result<CfEvaluation> {
    let m = split.n_users();
    if graph.n_vertices() < m + split.n_items() {
        return Err(invalid("graph is smaller than users + items"));
    }
    let users: Vec<usize> = (0..m).filter(|&u| split.held_out[u].is_some()).collect();
    let ranks = users
        .par_iter()
        .map(|&u| -> Result<usize> {
            let held = split.held_out[u].expect("filtered") as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(trace_seed(seed, u, 0));
            let available = split.n_items() - split.all.positives(u).len();
            let want = n_negatives.min(available);
            let mut items = vec![held];
            let mut seen = std::collections::HashSet::new();
            while items.len() < want + 1 {
                let i = rng.gen_range(0..split.n_items());
                if !split.all.contains(u, i) && seen.insert(i) {
                    items.push(i);
                }
            }
            let cands: Vec<VertexId> = items.iter().map(|&i| split.train.item_vertex(i)).collect();
            let d = deterministic_dijkstra(graph, split.train.user_vertex(u), &cands)?;
            Ok(rank_of(&d, &cands, 0))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = ranks.len().max(1) as f64;
    Ok(CfEvaluation {
        hr_at_5: ranks.iter().filter(|&&r| r < 5).count() as f64 / n,
        hr_at_10: ranks.iter().filter(|&&r| r < 10).count() as f64 / n,
        users: ranks.len(),
    })
}

/// Held-out candidates per user at evaluation time (plus the held-out item).
pub const EVAL_NEGATIVES: usize = 99;

/// Trains a ranking graph of the given variant on `split.train`, finalizes it
/// and reports hit ratios on the held-out items.
pub fn train_cf(
    split: &CfSplit,
    variant: CfVariant,
    k_sim: usize,
    config: &TrainConfig,
) -> Result<Trained> {
    config.validate()?;
    let (m, n) = (split.n_users(), split.n_items());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let candidates = build_cf_graph(&split.train, variant, k_sim, &mut rng)?;
    let mut model = StochasticGraph::new(
        candidates.n_vertices,
        &candidates.pairs,
        &candidates.init_weights,
        &config.graph_init(),
    )?;

    let active: Vec<usize> = (0..m)
        .filter(|&u| !split.train.positives(u).is_empty())
        .collect();
    if active.is_empty() {
        return Err(invalid("no user has a training interaction"));
    }
    let skipped = m - active.len();
    let per_step = config.batch_users.min(active.len());
    let steps_per_epoch = active.len().div_ceil(per_step);
    let budget = edge_budget(config.param_budget, m + n, m + n);
    let n_neg = config.n_negatives;
    let train = &split.train;
    let batch = |rng: &mut ChaCha8Rng| -> Vec<Query> {
        sample(rng, active.len(), per_step)
            .into_iter()
            .map(|a| {
                let u = active[a];
                let ps = train.positives(u);
                let pos = ps[rng.gen_range(0..ps.len())] as usize;
                let mut targets = Vec::with_capacity(n_neg + 1);
                targets.push(train.item_vertex(pos));
                while targets.len() < n_neg + 1 && n > 1 {
                    let i = rng.gen_range(0..n);
                    if i != pos {
                        targets.push(train.item_vertex(i));
                    }
                }
                Query {
                    source: train.user_vertex(u),
                    targets,
                }
            })
            .collect()
    };
    let scale = 1.0 / per_step as f64;
    let loss = |q: &Query, t: &PathTrace| cf_loss(q, t, scale);

    let outcome = run_training(
        &mut model,
        config,
        steps_per_epoch,
        budget,
        false,
        batch,
        loss,
    )?;
    let graph = finetune_weights(
        &model.finalize_at_most(budget),
        config,
        steps_per_epoch,
        batch,
        loss,
    )?;

    let eval = evaluate_cf(&graph, split, EVAL_NEGATIVES, config.seed)?;
    let mut report = EvalReport::new("cf", &graph, m + n);
    report.variant = Some(variant.to_string());
    report.train_objective = outcome.train_objective;
    report.hr_at_5 = Some(eval.hr_at_5);
    report.hr_at_10 = Some(eval.hr_at_10);
    report.skipped_users = Some(skipped);
    report.candidate_edges = model.n_edges();
    report.steps = outcome.steps;
    report.lambda = outcome.lambda;
    report.non_saturated_fraction = Some(model.non_saturated_fraction(1e-3));
    Ok(Trained {
        model,
        graph,
        report,
    })
}

/// Clustered implicit-feedback generator: users and items belong to
/// clusters and users mostly interact with items of their own cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCf {
    pub n_users: usize,
    pub n_items: usize,
    pub n_clusters: usize,
    pub interactions_per_user: usize,
    /// Probability that an interaction stays inside the user's cluster.
    pub in_cluster: f64,
}

impl Default for SyntheticCf {
    fn default() -> Self {
        SyntheticCf {
            n_users: 2000,
            n_items: 500,
            n_clusters: 20,
            interactions_per_user: 10,
            in_cluster: 0.8,
        }
    }
}

/// Time-ordered `(user, item)` events; each user interacts with distinct items.
pub fn synthetic_interactions<R: Rng + ?Sized>(
    setup: &SyntheticCf,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let SyntheticCf {
        n_users,
        n_items,
        n_clusters,
        interactions_per_user,
        in_cluster,
    } = *setup;
    if n_users == 0 || n_clusters == 0 || n_items < n_clusters {
        return Err(invalid(
            "need users, clusters and at least one item per cluster",
        ));
    }
    if interactions_per_user == 0 || interactions_per_user > n_items / n_clusters {
        return Err(invalid(
            "interactions per user must be in 1..=items per cluster",
        ));
    }
    if !(0.0..=1.0).contains(&in_cluster) {
        return Err(invalid("in_cluster must be a probability"));
    }
    // Item i belongs to cluster i % n_clusters.
    let per_cluster = n_items / n_clusters;
    let mut events = Vec::with_capacity(n_users * interactions_per_user);
    for u in 0..n_users {
        let c = rng.gen_range(0..n_clusters);
        let mut chosen = std::collections::HashSet::new();
        while chosen.len() < interactions_per_user {
            let item = if rng.gen::<f64>() < in_cluster {
                c + n_clusters * rng.gen_range(0..per_cluster)
            } else {
                rng.gen_range(0..n_items)
            };
            if chosen.insert(item) {
                events.push((u, item));
            }
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FinalEdge;

    fn v(i: usize) -> VertexId {
        VertexId::new(i)
    }

    #[test]
    fn equal_distances_give_ln_two() {
        let (value, g_pos, g_neg) = cf_loss_from_distances(1.3, &[1.3]);
        assert!((value - 2f64.ln()).abs() < 1e-15);
        assert!((g_pos - 0.5).abs() < 1e-15);
        assert!((g_neg[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturated_softmax_has_vanishing_loss() {
        let (value, _, _) = cf_loss_from_distances(0.0, &[5000.0, 5000.0]);
        assert!((0.0..1e-300).contains(&value));
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let d_pos = 0.7;
        let d_negs = [0.2, 1.5, 0.9];
        let (_, g_pos, g_negs) = cf_loss_from_distances(d_pos, &d_negs);
        let h = 1e-6;
        let f = |dp: f64, dn: &[f64]| cf_loss_from_distances(dp, dn).0;
        let fd = (f(d_pos + h, &d_negs) - f(d_pos - h, &d_negs)) / (2.0 * h);
        assert!(((fd - g_pos) / g_pos).abs() < 1e-6);
        for j in 0..3 {
            let mut p = d_negs;
            p[j] += h;
            let mut q = d_negs;
            q[j] -= h;
            let fd = (f(d_pos, &p) - f(d_pos, &q)) / (2.0 * h);
            assert!(((fd - g_negs[j]) / g_negs[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn loss_decreases_as_positive_approaches() {
        let a = cf_loss_from_distances(2.0, &[1.0, 1.5]).0;
        let b = cf_loss_from_distances(1.0, &[1.0, 1.5]).0;
        assert!(b < a && b > 0.0);
    }

    #[test]
    fn last_event_is_held_out() {
        let split = leave_one_out(2, 3, &[(0, 0), (0, 2), (1, 1), (0, 1)]).unwrap();
        assert_eq!(split.held_out, vec![Some(1), Some(1)]);
        assert_eq!(split.train.positives(0), &[0, 2]);
        assert!(split.train.positives(1).is_empty());
        assert!(split.all.contains(1, 1));
        assert!(leave_one_out(1, 1, &[]).is_err());
        assert!(leave_one_out(1, 1, &[(0, 3)]).is_err());
    }

    fn star() -> FinalGraph {
        // user 0, items 1..=4 at distances 1, 2, 2, 3
        let w = [1.0, 2.0, 2.0, 3.0];
        let edges = (0..4)
            .map(|i| FinalEdge {
                a: v(0),
                b: v(i + 1),
                weight: w[i],
            })
            .collect();
        FinalGraph::new(5, edges, 100.0).unwrap()
    }

    #[test]
    fn hit_ratio_ranks_and_breaks_ties_by_id() {
        let g = star();
        let cands = [v(1), v(2), v(3), v(4)];
        assert!(hit_ratio(&g, v(0), v(1), &cands, 1).unwrap());
        assert!(hit_ratio(&g, v(2), v(2), &cands, 1).unwrap());
        assert!(!hit_ratio(&g, v(0), v(3), &cands, 2).unwrap());
        assert!(hit_ratio(&g, v(0), v(3), &cands, 3).unwrap());
        assert!(hit_ratio(&g, v(0), v(4), &cands, 4).unwrap());
        assert!(hit_ratio(&g, v(0), v(4), &[v(1)], 1).is_err());
    }

    #[test]
    fn synthetic_events_are_distinct_per_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let setup = SyntheticCf {
            n_users: 50,
            n_items: 40,
            n_clusters: 4,
            interactions_per_user: 5,
            in_cluster: 0.9,
        };
        let events = synthetic_interactions(&setup, &mut rng).unwrap();
        assert_eq!(events.len(), 250);
        let m = InteractionMatrix::from_pairs(50, 40, events.iter().copied()).unwrap();
        assert_eq!(m.n_interactions(), 250);
    }
}
