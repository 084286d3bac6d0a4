//! Task objectives, training loops and evaluation.

pub mod anchors;
pub mod baseline;
pub mod cf;
pub mod compression;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{
    estimate_objective, trace_seed, EmaBaseline, EstimatorConfig, LossValue, Query,
    ScoreAttribution,
};
use crate::graph::{FinalEdge, FinalGraph, GraphInit, StochasticGraph, THETA_B_BOUND};
use crate::optim::{default_hyperparameters, AdamHyper, SparseAdam};
use crate::paths::PathTrace;

pub use anchors::{anchor_embedding, anchor_embeddings};
pub use baseline::{
    pca_projection, train_euclidean_baseline, train_euclidean_from, EuclideanEmbedding,
};
pub use cf::{
    cf_loss, cf_loss_from_distances, evaluate_cf, hit_ratio, leave_one_out, synthetic_interactions,
    train_cf, CfSplit, SyntheticCf,
};
pub use compression::{
    compression_loss, compression_mse, reconstruct_graph, reconstruction_config,
    reconstruction_instances, redundant_retained_edges, relevant_edges, sample_pair_batch,
    train_compression, train_compression_on, ReconstructionReport, TargetDistances,
};

/// How the sparsity coefficient evolves over training.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// `lambda` from the first step.
    Constant,
    /// Linear ramp from `start * lambda` to `lambda` over the first
    /// `fraction` of the scheduled steps, then constant.
    Ramp { start: f64, fraction: f64 },
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::Ramp {
            start: 0.0,
            fraction: 1.0 / 3.0,
        }
    }
}

impl LambdaSchedule {
    /// Multiplier applied to `lambda` at `step` of `total`.
    pub fn factor(&self, step: usize, total: usize) -> f64 {
        match *self {
            LambdaSchedule::Constant => 1.0,
            LambdaSchedule::Ramp { start, fraction } => {
                let ramp = (fraction * total as f64).max(1.0);
                let t = (step as f64 / ramp).min(1.0);
                start + (1.0 - start) * t
            }
        }
    }

    fn ramp_end(&self, total: usize) -> usize {
        match *self {
            LambdaSchedule::Constant => 0,
            LambdaSchedule::Ramp { fraction, .. } => (fraction * total as f64).ceil() as usize,
        }
    }
}

/// Training options shared by every task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Sparsity coefficient.
    pub lambda: f64,
    pub lambda_schedule: LambdaSchedule,
    /// Ordered pairs per compression step.
    pub batch_pairs: usize,
    /// Sources per compression step; each source's targets share one search.
    pub batch_sources: usize,
    /// Users per ranking step.
    pub batch_users: usize,
    /// Negatives per ranking example.
    pub n_negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hyper: AdamHyper,
    /// Learning rate at the end of the scheduled steps as a fraction of
    /// `hyper.lr`; decays linearly.
    pub lr_final_fraction: f64,
    /// Distance between disconnected vertices; `None` uses the graph default.
    pub d_max: Option<f64>,
    /// Independent searches per query per step.
    pub n_samples: usize,
    pub use_baseline: bool,
    pub attribution: ScoreAttribution,
    /// Upper bound on stored numbers per instance. After the ramp, every
    /// `budget_interval` steps `lambda` is multiplied by `budget_growth` while
    /// the finalized graph would exceed it and divided by it (never below the
    /// configured value) while under. Training is extended up to twice the
    /// scheduled length until the budget is met.
    pub param_budget: Option<f64>,
    pub budget_growth: f64,
    pub budget_interval: usize,
    /// Epochs of weight-only training on the finalized graph.
    pub finetune_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.1,
            lambda_schedule: LambdaSchedule::default(),
            batch_pairs: 1024,
            batch_sources: 16,
            batch_users: 64,
            n_negatives: 16,
            epochs: 10,
            seed: 0,
            hyper: default_hyperparameters(),
            lr_final_fraction: 1.0,
            d_max: None,
            n_samples: 1,
            use_baseline: true,
            attribution: ScoreAttribution::default(),
            param_budget: None,
            budget_growth: 1.25,
            budget_interval: 20,
            finetune_epochs: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        for (name, v) in [
            ("batch_pairs", self.batch_pairs),
            ("batch_sources", self.batch_sources),
            ("batch_users", self.batch_users),
            ("n_negatives", self.n_negatives),
            ("epochs", self.epochs),
            ("n_samples", self.n_samples),
            ("budget_interval", self.budget_interval),
        ] {
            if v == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if self.batch_sources > self.batch_pairs {
            return Err(invalid("batch_sources cannot exceed batch_pairs"));
        }
        self.hyper.validate()?;
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(invalid(format!(
                "lr_final_fraction must be in (0, 1], got {}",
                self.lr_final_fraction
            )));
        }
        if let LambdaSchedule::Ramp { start, fraction } = self.lambda_schedule {
            if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&fraction) {
                return Err(invalid("lambda ramp start and fraction must lie in [0, 1]"));
            }
        }
        if let Some(d) = self.d_max {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid(format!("d_max must be positive, got {d}")));
            }
        }
        if let Some(b) = self.param_budget {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid(format!("param_budget must be positive, got {b}")));
            }
        }
        if !(self.budget_growth > 1.0 && self.budget_growth.is_finite()) {
            return Err(invalid("budget_growth must exceed 1"));
        }
        Ok(())
    }

    pub(crate) fn graph_init(&self) -> GraphInit {
        GraphInit {
            d_max: self.d_max,
            ..GraphInit::default()
        }
    }
}

/// Summary of one run, emitted as one JSON object per line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Mean training objective (sampled graphs) over the last epoch.
    pub train_objective: f64,
    /// Distance MSE over all ordered pairs of distinct items, on the finalized graph.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_at_5: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_at_10: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub redundant_retained: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped_users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub non_saturated_fraction: Option<f64>,
    pub candidate_edges: usize,
    pub retained_edges: usize,
    pub param_count: usize,
    pub n_instances: usize,
    pub params_per_instance: f64,
    pub steps: usize,
    /// Effective sparsity coefficient at the last step.
    pub lambda: f64,
}

impl EvalReport {
    pub(crate) fn new(task: &str, graph: &FinalGraph, n_instances: usize) -> Self {
        let param_count = graph.param_count();
        EvalReport {
            task: task.to_string(),
            retained_edges: graph.n_edges(),
            param_count,
            n_instances,
            params_per_instance: param_count as f64 / n_instances.max(1) as f64,
            ..Default::default()
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report fields are serializable")
    }
}

/// A trained model, its finalized graph and the evaluation of that graph.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: StochasticGraph,
    pub graph: FinalGraph,
    pub report: EvalReport,
}

/// What the training loop did.
#[derive(Clone, Debug)]
pub(crate) struct LoopOutcome {
    pub steps: usize,
    pub lambda: f64,
    pub train_objective: f64,
    /// Last step at which each edge lay on a sampled shortest path.
    pub last_on_path: Vec<Option<usize>>,
    pub steps_per_epoch: usize,
}

/// Edge count allowed by a per-instance budget of stored numbers.
pub(crate) fn edge_budget(
    budget: Option<f64>,
    n_vertices: usize,
    n_instances: usize,
) -> Option<usize> {
    budget.map(|b| {
        let total = (b * n_instances as f64).floor() as usize;
        total.saturating_sub(n_vertices) / 2
    })
}

/// Minibatch SGD with sparse Adam on both parameter groups.
///
/// `batch` draws the queries of one step; `loss` scores one search. With
/// `freeze_edges` only the weights are trained and every edge is present.
pub(crate) fn run_training<B, L>(
    graph: &mut StochasticGraph,
    config: &TrainConfig,
    steps_per_epoch: usize,
    max_edges: Option<usize>,
    freeze_edges: bool,
    mut batch: B,
    loss: L,
) -> Result<LoopOutcome>
where
    B: FnMut(&mut ChaCha8Rng) -> Vec<Query>,
    L: Fn(&Query, &PathTrace) -> LossValue + Sync,
{
    config.validate()?;
    let m = graph.n_edges();
    let steps_per_epoch = steps_per_epoch.max(1);
    let scheduled = config.epochs * steps_per_epoch;
    let limit = if max_edges.is_some() {
        2 * scheduled
    } else {
        scheduled
    };

    let mut batch_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam_w = SparseAdam::new(m, config.hyper)?;
    let mut adam_b = SparseAdam::new(m, config.hyper)?.with_bounds(-THETA_B_BOUND, THETA_B_BOUND);
    let mut baseline = EmaBaseline::default();
    let mut boost = 1.0;
    let mut last_on_path = vec![None; m];
    let mut recent = std::collections::VecDeque::with_capacity(steps_per_epoch);
    let ramp_end = config.lambda_schedule.ramp_end(scheduled);
    let mut lambda = 0.0;

    let mut step = 0;
    while step < limit {
        let retained = graph.retained_edges();
        let over_budget = max_edges.is_some_and(|cap| retained > cap);
        if step >= scheduled && !over_budget {
            break;
        }
        if let Some(cap) = max_edges {
            if step >= ramp_end && step > 0 && step % config.budget_interval == 0 {
                if retained > cap {
                    boost *= config.budget_growth;
                } else if retained < cap {
                    boost = (boost / config.budget_growth).max(1.0);
                }
            }
        }
        lambda = if freeze_edges {
            0.0
        } else {
            config.lambda * config.lambda_schedule.factor(step, scheduled) * boost
        };
        let progress = (step as f64 / scheduled.max(1) as f64).min(1.0);
        let lr = config.hyper.lr * (1.0 - (1.0 - config.lr_final_fraction) * progress);
        adam_w.set_lr(lr)?;
        adam_b.set_lr(lr)?;

        let queries = batch(&mut batch_rng);
        let est_config = EstimatorConfig {
            lambda,
            n_samples: config.n_samples,
            attribution: config.attribution,
            use_baseline: config.use_baseline,
            freeze_edges,
        };
        let step_seed = trace_seed(config.seed, step, usize::MAX);
        let est = estimate_objective(
            graph,
            &queries,
            &loss,
            &est_config,
            step_seed,
            &mut baseline,
        )?;
        if !est.objective.is_finite() {
            return Err(Error::Diverged {
                step,
                value: est.objective,
            });
        }
        let grad = &est.gradient;
        {
            let (theta_w, theta_b) = graph.params_mut();
            adam_w.step(theta_w, &grad.w_grads)?;
            if !freeze_edges {
                adam_b.step(theta_b, &grad.b_grads)?;
            }
        }
        let touched: Vec<usize> = grad
            .w_grads
            .indices()
            .iter()
            .chain(grad.b_grads.indices())
            .copied()
            .collect();
        graph.refresh_edges(touched);
        for &e in &est.path_edges {
            last_on_path[e] = Some(step);
        }
        if recent.len() == steps_per_epoch {
            recent.pop_front();
        }
        recent.push_back(est.objective);
        step += 1;
    }
    {
        let (theta_w, theta_b) = graph.params_mut();
        adam_w.flush(theta_w);
        adam_b.flush(theta_b);
    }
    graph.refresh_all();
    let train_objective = if recent.is_empty() {
        0.0
    } else {
        recent.iter().sum::<f64>() / recent.len() as f64
    };
    Ok(LoopOutcome {
        steps: step,
        lambda,
        train_objective,
        last_on_path,
        steps_per_epoch,
    })
}

/// Trains the weights of a finalized graph with every edge present and
/// returns the refined graph.
pub(crate) fn finetune_weights<B, L>(
    graph: &FinalGraph,
    config: &TrainConfig,
    steps_per_epoch: usize,
    batch: B,
    loss: L,
) -> Result<FinalGraph>
where
    B: FnMut(&mut ChaCha8Rng) -> Vec<Query>,
    L: Fn(&Query, &PathTrace) -> LossValue + Sync,
{
    if config.finetune_epochs == 0 || graph.n_edges() == 0 {
        return Ok(graph.clone());
    }
    let (pairs, weights) = graph.edge_pairs();
    let d_max = f64::from(graph.d_max_f32());
    let mut sg = StochasticGraph::new(
        graph.n_vertices(),
        &pairs,
        &weights,
        &GraphInit {
            d_max: Some(d_max),
            ..GraphInit::default()
        },
    )?;
    let ft_config = TrainConfig {
        epochs: config.finetune_epochs,
        lambda: 0.0,
        param_budget: None,
        ..config.clone()
    };
    run_training(
        &mut sg,
        &ft_config,
        steps_per_epoch,
        None,
        true,
        batch,
        loss,
    )?;
    let edges = sg
        .edges()
        .iter()
        .map(|e| FinalEdge {
            a: e.a,
            b: e.b,
            weight: sg.weight(e.id) as f32,
        })
        .collect();
    FinalGraph::new(graph.n_vertices(), edges, graph.d_max_f32())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_reaches_target_after_fraction() {
        let s = LambdaSchedule::Ramp {
            start: 0.0,
            fraction: 0.25,
        };
        assert_eq!(s.factor(0, 100), 0.0);
        assert!((s.factor(10, 100) - 0.4).abs() < 1e-12);
        assert_eq!(s.factor(25, 100), 1.0);
        assert_eq!(s.factor(99, 100), 1.0);
        assert_eq!(LambdaSchedule::Constant.factor(0, 100), 1.0);
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        assert!(TrainConfig {
            lambda: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            epochs: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            lr_final_fraction: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_sources: 2048,
            ..Default::default()
        }
        .validate()
        .is_err());
        let mut c = TrainConfig::default();
        c.hyper.lr = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn budget_in_edges() {
        assert_eq!(edge_budget(Some(8.0), 1000, 1000), Some(3500));
        assert_eq!(edge_budget(Some(0.5), 10, 10), Some(0));
        assert_eq!(edge_budget(None, 10, 10), None);
    }

    #[test]
    fn report_serializes_as_one_line() {
        let g = FinalGraph::empty(4, 1.0).unwrap();
        let mut r = EvalReport::new("unit", &g, 4);
        r.mse = Some(0.5);
        let line = r.to_json_line();
        assert!(!line.contains('\n'));
        let back: EvalReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.params_per_instance, 1.0);
    }
}
