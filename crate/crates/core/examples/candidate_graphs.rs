//! The candidate edge sets training starts from.

use probgraph::builder::{binary_cosine, InteractionMatrix};
use probgraph::{build_cf_graph, build_knn_random, generate_erdos_renyi, CfVariant, VectorDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> probgraph::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // Points on a circle: k nearest neighbours plus r random partners each.
    let n = 40;
    let coords: Vec<f32> = (0..n)
        .flat_map(|i| {
            let a = i as f32 / n as f32 * std::f32::consts::TAU;
            [a.cos(), a.sin()]
        })
        .collect();
    let data = VectorDataset::new(n, 2, coords)?;
    let c = build_knn_random(&data, 3, 2, &mut rng)?;
    println!("knn+random: {} candidate edges over {} points", c.len(), n);

    // A tiny interaction log in the three layouts.
    let pairs = [(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2), (3, 3)];
    let f = InteractionMatrix::from_pairs(4, 4, pairs)?;
    println!(
        "cosine(user 0, user 2) = {:.3}",
        binary_cosine(f.positives(0), f.positives(2))
    );
    for variant in [CfVariant::Normal, CfVariant::Bipartite, CfVariant::Random] {
        let g = build_cf_graph(&f, variant, 2, &mut rng)?;
        println!("{variant:>9}: {} candidate edges", g.len());
    }

    let er = generate_erdos_renyi(12, 0.25, &mut rng)?;
    println!(
        "G(12, 0.25): {} edges after {} disconnected draws; diameter {:.3}",
        er.graph.n_edges(),
        er.rejected,
        er.distances.max()
    );
    Ok(())
}
