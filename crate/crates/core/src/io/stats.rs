//! Vertex degree statistics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::graph::{FinalGraph, VertexId};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeStats {
    /// Degree -> number of vertices with that degree.
    pub histogram: BTreeMap<usize, usize>,
    pub max: usize,
    pub mean: f64,
}

/// One histogram bin, for line-oriented output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeBin {
    pub degree: usize,
    pub vertices: usize,
}

pub fn degree_stats(graph: &FinalGraph) -> DegreeStats {
    let mut histogram = BTreeMap::new();
    let mut total = 0;
    let mut max = 0;
    for v in 0..graph.n_vertices() {
        let d = graph.degree(VertexId::new(v));
        *histogram.entry(d).or_insert(0) += 1;
        total += d;
        max = max.max(d);
    }
    let mean = if graph.n_vertices() == 0 {
        0.0
    } else {
        total as f64 / graph.n_vertices() as f64
    };
    DegreeStats {
        histogram,
        max,
        mean,
    }
}

impl DegreeStats {
    pub fn bins(&self) -> Vec<DegreeBin> {
        self.histogram
            .iter()
            .map(|(&degree, &vertices)| DegreeBin { degree, vertices })
            .collect()
    }
}
