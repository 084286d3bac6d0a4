//! Recovers random weighted graphs from their all-pairs distances.
//!
//! Usage: `cargo run --release --example reconstruct_random_graphs [runs]`

use probgraph::tasks::compression::{
    reconstruct_graph, reconstruction_config, reconstruction_instances,
};

fn main() -> probgraph::Result<()> {
    let runs: usize = std::env::args()
        .nth(1)
        .map_or(10, |s| s.parse().expect("runs"));
    let config = reconstruction_config();
    let instances = reconstruction_instances(runs, 10..=25, 0.25, 2024)?;
    let (mut ok2, mut ok3) = (0, 0);
    for (i, inst) in instances.iter().enumerate() {
        let r = reconstruct_graph(
            inst,
            &probgraph::TrainConfig {
                seed: i as u64,
                ..config.clone()
            },
        )?;
        ok2 += usize::from(r.max_error < 1e-2);
        ok3 += usize::from(r.max_error < 1e-3);
        println!(
            "graph {i:3}: {:2} vertices, {:3} true edges, {:3} learned, max error {:.2e}, edge F1 {:.2}",
            inst.graph.n_vertices(),
            inst.graph.n_edges(),
            r.trained.graph.n_edges(),
            r.max_error,
            r.edge_f1
        );
    }
    println!("max error < 1e-2: {ok2}/{runs}, < 1e-3: {ok3}/{runs}");
    Ok(())
}
