//! Distances to fixed anchor vertices as feature vectors.

use rayon::prelude::*;

use crate::error::Result;
use crate::graph::{VertexId, WeightedGraph};
use crate::paths::deterministic_dijkstra;

/// `[d(v, anchors[0]), ..., d(v, anchors[K-1])]` from one search.
pub fn anchor_embedding<G: WeightedGraph>(
    graph: &G,
    v: VertexId,
    anchors: &[VertexId],
) -> Result<Vec<f64>> {
    deterministic_dijkstra(graph, v, anchors)
}

/// Anchor embeddings of many vertices, in the order given.
pub fn anchor_embeddings<G: WeightedGraph + Sync>(
    graph: &G,
    vertices: &[VertexId],
    anchors: &[VertexId],
) -> Result<Vec<Vec<f64>>> {
    vertices
        .par_iter()
        .map(|&v| anchor_embedding(graph, v, anchors))
        .collect()
}
