//! Gradient estimators for the regularized objective
//! `E_G[L(G)] + lambda * mean_i p_i`.
//!
//! * Weights get pathwise gradients: for a fixed sample, a distance is a sum of
//!   softplus weights along its shortest path, so `dL/dtheta_w` flows through
//!   the path with factor `sigmoid(theta_w)`.
//! * Probabilities get score-function gradients
//!   `(L - baseline) * d/dtheta_b log p(b)`, summed only over the edges the
//!   search actually drew. Edges that were never looked at cannot change the
//!   loss and are integrated out exactly.
//! * The sparsity penalty is differentiated in closed form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{sigmoid, EdgeId, StochasticGraph, VertexId};
use crate::optim::SparseVec;
use crate::paths::{stochastic_dijkstra, AllPresent, PathTrace, RngSampler};

/// Accumulated parameter gradients for one training step.
#[derive(Clone, Debug)]
pub struct SparseGradient {
    pub w_grads: SparseVec,
    pub b_grads: SparseVec,
    pub n_samples: usize,
}

impl SparseGradient {
    pub fn new(n_edges: usize) -> Self {
        SparseGradient {
            w_grads: SparseVec::new(n_edges),
            b_grads: SparseVec::new(n_edges),
            n_samples: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w_grads
            .iter()
            .chain(self.b_grads.iter())
            .all(|(_, g)| g.is_finite())
    }
}

/// `dL/dd(source, target)` for one queried pair.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DistanceGrad {
    pub source: VertexId,
    pub target: VertexId,
    pub grad: f64,
}

/// Task loss evaluated on the distances of one search.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub per_distance_grads: Vec<DistanceGrad>,
    /// Per-pair contributions aligned with `per_distance_grads`, present when
    /// the loss is a plain sum over pairs.
    pub pair_values: Option<Vec<f64>>,
}

/// Anything gradient contributions can be added into.
pub trait GradSink {
    fn add(&mut self, index: usize, value: f64);
}

impl GradSink for SparseVec {
    #[inline]
    fn add(&mut self, index: usize, value: f64) {
        SparseVec::add(self, index, value);
    }
}

/// Unmerged `(index, value)` list; repeated indices are summed by the consumer.
impl GradSink for Vec<(usize, f64)> {
    #[inline]
    fn add(&mut self, index: usize, value: f64) {
        self.push((index, value));
    }
}

/// Adds the pathwise `theta_w` gradient of `loss` for the pairs searched in
/// `trace`. Pairs left at `d_max` contribute nothing.
pub fn weight_gradients<S: GradSink + ?Sized>(
    graph: &StochasticGraph,
    trace: &PathTrace,
    loss: &LossValue,
    out: &mut S,
) {
    for dg in &loss.per_distance_grads {
        if dg.source != trace.source() || dg.grad == 0.0 || !trace.is_settled(dg.target) {
            continue;
        }
        let mut v = dg.target;
        while let Some(e) = trace.parent_edge(v) {
            out.add(e, dg.grad * sigmoid(graph.theta_w()[e]));
            v = graph.edge(e).other(v);
        }
    }
}

#[inline]
fn score(outcome: bool, theta_b: f64) -> f64 {
    // d/dtheta log sigmoid(theta) = sigmoid(-theta); d/dtheta log(1 - sigmoid(theta)) = -sigmoid(theta)
    if outcome {
        sigmoid(-theta_b)
    } else {
        -sigmoid(theta_b)
    }
}

/// Adds `(loss - baseline) * d/dtheta_b log p(b_e)` for every edge drawn in `trace`.
pub fn prob_gradients<S: GradSink + ?Sized>(
    graph: &StochasticGraph,
    trace: &PathTrace,
    loss_value: f64,
    baseline: f64,
    out: &mut S,
) {
    let centred = loss_value - baseline;
    for &(e, b) in trace.sampled_states() {
        out.add(e, centred * score(b, graph.theta_b()[e]));
    }
}

/// Score-function gradient for a loss that is a sum over targets, attributing
/// each target's term only to the draws made before its distance was final.
///
/// Needs `loss.pair_values`. Edges drawn after every target settled receive a
/// zero entry.
pub fn prob_gradients_per_target<S: GradSink + ?Sized>(
    graph: &StochasticGraph,
    trace: &PathTrace,
    loss: &LossValue,
    baseline: f64,
    out: &mut S,
) -> Result<()> {
    let values = loss
        .pair_values
        .as_ref()
        .ok_or_else(|| invalid("per-target attribution needs a separable loss"))?;
    let sampled = trace.sampled_states();
    let mut add = vec![0.0; sampled.len() + 1];
    for (dg, &value) in loss.per_distance_grads.iter().zip(values) {
        add[trace.cutoff(dg.target)] += value - baseline;
    }
    let mut running = 0.0;
    for i in (0..sampled.len()).rev() {
        running += add[i + 1];
        let (e, b) = sampled[i];
        out.add(e, running * score(b, graph.theta_b()[e]));
    }
    Ok(())
}

/// Sparsity penalty `lambda * mean_i sigmoid(theta_b_i)`; adds its exact
/// gradient to `out` when given.
pub fn regularizer(
    graph: &StochasticGraph,
    lambda: f64,
    out: Option<&mut SparseVec>,
) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let m = graph.n_edges();
    if m == 0 || lambda == 0.0 {
        return Ok(0.0);
    }
    let scale = lambda / m as f64;
    if let Some(out) = out {
        for (e, &p) in graph.probs().iter().enumerate() {
            out.add(e, scale * p * (1.0 - p));
        }
    }
    Ok(scale * graph.expected_edges())
}

/// Moving average of recent losses, used as a score-function control variate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmaBaseline {
    pub decay: f64,
    value: Option<f64>,
}

impl Default for EmaBaseline {
    fn default() -> Self {
        EmaBaseline::new(0.99)
    }
}

impl EmaBaseline {
    pub fn new(decay: f64) -> Self {
        EmaBaseline { decay, value: None }
    }

    /// Zero until the first observation.
    pub fn value(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }

    pub fn observe(&mut self, x: f64) {
        self.value = Some(match self.value {
            None => x,
            Some(v) => self.decay * v + (1.0 - self.decay) * x,
        });
    }
}

/// Which drawn edges a loss term is attributed to.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreAttribution {
    /// Every edge drawn during the search sees the whole loss of that search.
    #[default]
    WholeTrace,
    /// Each pair term only sees the draws made before its target settled.
    PerTarget,
}

/// One search: a source and the targets it must settle.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub source: VertexId,
    pub targets: Vec<VertexId>,
}

#[derive(Clone, Debug)]
pub struct EstimatorConfig {
    pub lambda: f64,
    pub n_samples: usize,
    pub attribution: ScoreAttribution,
    /// Subtract the moving-average baseline inside the score-function term.
    pub use_baseline: bool,
    /// Treat every candidate edge as present and only produce weight
    /// gradients; the penalty is skipped. Used to fine-tune a finalized graph.
    pub freeze_edges: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            lambda: 0.0,
            n_samples: 1,
            attribution: ScoreAttribution::default(),
            use_baseline: true,
            freeze_edges: false,
        }
    }
}

/// Monte-Carlo estimate of the objective and its gradient.
#[derive(Clone, Debug)]
pub struct ObjectiveEstimate {
    pub gradient: SparseGradient,
    /// Estimated `E[L] + penalty`.
    pub objective: f64,
    pub task_loss: f64,
    pub penalty: f64,
    /// Edges that lay on a sampled shortest path with a nonzero loss gradient.
    pub path_edges: Vec<EdgeId>,
}

struct TraceContribution {
    loss: f64,
    pair_mean: Option<f64>,
    w: Vec<(EdgeId, f64)>,
    b: Vec<(EdgeId, f64)>,
}

/// Seed for one `(sample, query)` search derived from the step seed.
pub fn trace_seed(step_seed: u64, sample: usize, query: usize) -> u64 {
    let mut z = step_seed
        ^ (sample as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (query as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n_samples` independent searches per query, evaluates `loss` on each,
/// and averages pathwise and score-function gradients; the penalty and its
/// gradient are added once.
///
/// Searches run in parallel but every search has its own generator seeded from
/// `(seed, sample, query)` and contributions are merged in a fixed order, so
/// the result does not depend on the thread count. The baseline is read once
/// before the searches and updated with their losses afterwards.
pub fn estimate_objective<F>(
    graph: &StochasticGraph,
    queries: &[Query],
    loss: F,
    config: &EstimatorConfig,
    seed: u64,
    baseline: &mut EmaBaseline,
) -> Result<ObjectiveEstimate>
where
    F: Fn(&Query, &PathTrace) -> LossValue + Sync,
{
    if config.n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    let base = if config.use_baseline {
        baseline.value()
    } else {
        0.0
    };
    let jobs: Vec<(usize, usize)> = (0..config.n_samples)
        .flat_map(|s| (0..queries.len()).map(move |q| (s, q)))
        .collect();

    let contributions: Vec<TraceContribution> = jobs
        .par_iter()
        .map(|&(s, qi)| -> Result<TraceContribution> {
            let q = &queries[qi];
            let trace = if config.freeze_edges {
                stochastic_dijkstra(graph, q.source, &q.targets, &mut AllPresent)?
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(trace_seed(seed, s, qi));
                stochastic_dijkstra(graph, q.source, &q.targets, &mut RngSampler(&mut rng))?
            };
            let lv = loss(q, &trace);
            let mut w = Vec::new();
            weight_gradients(graph, &trace, &lv, &mut w);
            let mut b = Vec::new();
            let pair_mean = lv.pair_values.as_ref().map(|vals| {
                if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            });
            match (config.freeze_edges, config.attribution) {
                (true, _) => {}
                (false, ScoreAttribution::WholeTrace) => {
                    prob_gradients(graph, &trace, lv.value, base, &mut b)
                }
                (false, ScoreAttribution::PerTarget) if lv.pair_values.is_some() => {
                    prob_gradients_per_target(graph, &trace, &lv, base, &mut b)?
                }
                // A loss coupling all targets depends on every draw up to the
                // last settled target, which is where the search stops anyway.
                (false, ScoreAttribution::PerTarget) => {
                    prob_gradients(graph, &trace, lv.value, base, &mut b)
                }
            }
            Ok(TraceContribution {
                loss: lv.value,
                pair_mean,
                w,
                b,
            })
        })
        .collect::<Result<_>>()?;

    let mut gradient = SparseGradient::new(graph.n_edges());
    gradient.n_samples = config.n_samples;
    let mut total_loss = 0.0;
    for c in &contributions {
        total_loss += c.loss;
        for &(e, g) in &c.w {
            gradient.w_grads.add(e, g);
        }
        for &(e, g) in &c.b {
            gradient.b_grads.add(e, g);
        }
    }
    let inv = 1.0 / config.n_samples as f64;
    gradient.w_grads.scale(inv);
    gradient.b_grads.scale(inv);
    let task_loss = total_loss * inv;
    let path_edges = gradient.w_grads.indices().to_vec();

    let penalty = if config.freeze_edges {
        0.0
    } else {
        regularizer(graph, config.lambda, Some(&mut gradient.b_grads))?
    };

    if config.use_baseline && !config.freeze_edges {
        for c in &contributions {
            match (config.attribution, c.pair_mean) {
                (ScoreAttribution::PerTarget, Some(m)) => baseline.observe(m),
                _ => baseline.observe(c.loss),
            }
        }
    }

    Ok(ObjectiveEstimate {
        gradient,
        objective: task_loss + penalty,
        task_loss,
        penalty,
        path_edges,
    })
}
