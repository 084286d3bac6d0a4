//! Saving a graph, reading it back and accounting for what it stores.

use probgraph::io::{degree_stats, graph_to_bytes, inspect_bytes, load_graph, save_graph};
use probgraph::{FinalEdge, FinalGraph, VertexId};

fn main() -> probgraph::Result<()> {
    let v = VertexId::new;
    // a star around vertex 0 plus a ring on the leaves
    let mut edges: Vec<FinalEdge> = (1..8)
        .map(|i| FinalEdge {
            a: v(0),
            b: v(i),
            weight: 1.0,
        })
        .collect();
    edges.extend((1..8).map(|i| FinalEdge {
        a: v(i),
        b: v(i % 7 + 1),
        weight: 0.5,
    }));
    let graph = FinalGraph::new(8, edges, 32.0)?;

    let path = std::env::temp_dir().join("probgraph_example.prdg");
    save_graph(&graph, &path)?;
    let loaded = load_graph(&path)?;
    assert_eq!(loaded, graph);

    let bytes = graph_to_bytes(&graph);
    let summary = inspect_bytes(&bytes)?;
    println!(
        "{} bytes: {} index entries + {} body numbers -> N + 2|E| = {} (graph reports {})",
        bytes.len(),
        summary.index_entries,
        summary.body_numbers,
        summary.param_count(),
        graph.param_count()
    );
    let stats = degree_stats(&loaded);
    for bin in stats.bins() {
        println!("degree {:2}: {} vertices", bin.degree, bin.vertices);
    }
    std::fs::remove_file(path)?;
    Ok(())
}
