//! Datasets, graph files, run configuration and diagnostics.

pub mod config;
pub mod graphfile;
pub mod interactions;
pub mod stats;
pub mod vectors;

pub use config::{DataFormat, RunConfig};
pub use graphfile::{
    graph_from_bytes, graph_to_bytes, inspect_bytes, load_graph, save_graph, FileSummary,
};
pub use interactions::{id_map_text, load_interactions, parse_interactions, LoadedInteractions};
pub use stats::{degree_stats, DegreeStats};
pub use vectors::{load_vectors, save_vectors, VectorFormat};
