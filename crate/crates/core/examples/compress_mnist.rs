//! Distance-preserving compression of MNIST digits at 8 stored numbers per
//! image, against an 8-dimensional Euclidean embedding.
//!
//! Usage: `cargo run --release --example compress_mnist [n_items]`
//!
//! Candidates are the 4 nearest neighbours of every image plus one hub vertex
//! linked to all images. The sparsity coefficient adapts until the finalized
//! graph fits the budget, then the surviving weights are refined.

use probgraph::io::{load_vectors, VectorFormat};
use probgraph::tasks::compression::train_compression;
use probgraph::tasks::{train_euclidean_baseline, TrainConfig};
use probgraph::{add_anchor_vertices, build_knn_random};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> probgraph::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .map_or(1000, |s| s.parse().expect("n_items"));
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/mnist_1k.csv");
    let mut data = load_vectors(path, VectorFormat::Csv)?.head(n);
    data.normalize_mean_distance()?;

    let mut base_cfg = TrainConfig {
        epochs: 30,
        lr_final_fraction: 0.1,
        ..TrainConfig::default()
    };
    base_cfg.hyper.lr = 3e-3;
    let baseline = train_euclidean_baseline(&data, 8, &base_cfg)?;
    println!(
        "euclidean  dim 8        mse {:.5}  params/item {:.2}",
        baseline.mse, 8.0
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let knn = build_knn_random(&data, 4, 0, &mut rng)?;
    let candidates = add_anchor_vertices(&knn, 1, data.n_items(), &mut rng)?;
    let config = TrainConfig {
        epochs: 2,
        lambda: 0.1,
        param_budget: Some(8.0),
        budget_growth: 1.05,
        finetune_epochs: 30,
        lr_final_fraction: 0.1,
        d_max: Some(10.0),
        ..TrainConfig::default()
    };
    let trained = train_compression(&data, &candidates, &config)?;
    let r = &trained.report;
    println!(
        "graph      {} edges   mse {:.5}  params/item {:.2}",
        r.retained_edges,
        r.mse.unwrap_or(f64::NAN),
        r.params_per_instance
    );
    Ok(())
}
