//! Distances to a few anchor vertices as compact item features.
//!
//! Trains a small graph with appended anchors, then reads each item's
//! distances to the anchors.

use probgraph::io::{load_vectors, VectorFormat};
use probgraph::tasks::compression::train_compression;
use probgraph::tasks::{anchor_embeddings, TrainConfig};
use probgraph::{add_anchor_vertices, anchor_ids, build_knn_random, VertexId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> probgraph::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/mnist_1k.csv");
    let mut data = load_vectors(path, VectorFormat::Csv)?.head(150);
    data.normalize_mean_distance()?;
    let n = data.n_items();
    let k = 4;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let candidates =
        add_anchor_vertices(&build_knn_random(&data, 6, 2, &mut rng)?, k, 40, &mut rng)?;
    let trained = train_compression(
        &data,
        &candidates,
        &TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        },
    )?;

    let anchors = anchor_ids(n + k, k);
    let items: Vec<VertexId> = (0..n).map(VertexId::new).collect();
    let features = anchor_embeddings(&trained.graph, &items, &anchors)?;
    for (i, f) in features.iter().take(5).enumerate() {
        let shown: Vec<String> = f.iter().map(|d| format!("{d:.3}")).collect();
        println!("item {i}: [{}]", shown.join(", "));
    }
    println!(
        "graph mse {:.4} over {} edges",
        trained.report.mse.unwrap_or(f64::NAN),
        trained.graph.n_edges()
    );
    Ok(())
}
