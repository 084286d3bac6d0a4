//! Learnable sparse weighted graphs with the shortest-path metric.
//!
//! A dataset is represented as a graph whose vertices are the items. Every
//! candidate edge carries a weight and an existence probability; distances are
//! shortest-path lengths in a graph sampled from those probabilities. Both
//! parameter groups are trained by stochastic gradient descent against a task
//! loss plus a penalty on the expected number of edges, after which the graph
//! is made deterministic by keeping the edges with probability at least 1/2.
//!
//! * [`graph`]: the model and its finalized form.
//! * [`paths`]: Dijkstra with lazily sampled edges, and the deterministic variant.
//! * [`estimators`]: pathwise and score-function gradients, the sparsity penalty.
//! * [`optim`]: sparse Adam with lazy updates.
//! * [`builder`]: candidate edge sets and synthetic graphs.
//! * [`tasks`]: compression, ranking, anchor features, reconstruction, baselines.
//! * [`io`]: datasets, graph files, configuration, statistics.
//! * [`cli`]: the command-line front end.

pub mod builder;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod io;
pub mod optim;
pub mod paths;
pub mod tasks;

pub use builder::{
    add_anchor_vertices, anchor_ids, build_cf_graph, build_knn_random, generate_erdos_renyi,
    CandidateSet, CfVariant, DistanceMatrix, ErdosRenyiInstance, InteractionMatrix, Metric,
    VectorDataset,
};
pub use error::{Error, Result};
pub use estimators::{
    estimate_objective, EmaBaseline, EstimatorConfig, LossValue, Query, ScoreAttribution,
};
pub use graph::{
    edge_prob, edge_weight, param_count, CandidateEdge, EdgeId, FinalEdge, FinalGraph, GraphInit,
    StochasticGraph, VertexId, WeightedGraph,
};
pub use optim::{default_hyperparameters, AdamHyper, SparseAdam, SparseVec};
pub use paths::{
    deterministic_dijkstra, recover_path, stochastic_dijkstra, PathTrace, ShortestPath,
};
pub use tasks::{EvalReport, TrainConfig, Trained};
