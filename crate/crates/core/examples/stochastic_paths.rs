//! Shortest paths in a graph whose edges exist with learned probabilities.
//!
//! Builds a small diamond, draws a few lazily sampled searches and checks
//! each one against plain Dijkstra on the same realized edge set.

use probgraph::graph::{GraphInit, StochasticGraph, VertexId};
use probgraph::paths::{stochastic_dijkstra, FixedOutcomes, RngSampler};
use probgraph::{deterministic_dijkstra, recover_path, FinalEdge, FinalGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> probgraph::Result<()> {
    let v = VertexId::new;
    // 0 -> 3 either through 1 (short) or through 2 (long)
    let pairs = [(v(0), v(1)), (v(1), v(3)), (v(0), v(2)), (v(2), v(3))];
    let weights = [1.0, 1.0, 2.0, 2.0];
    let mut g = StochasticGraph::new(
        4,
        &pairs,
        &weights,
        &GraphInit {
            d_max: Some(100.0),
            ..GraphInit::default()
        },
    )?;
    g.set_theta_b(1, 0.0); // edge 1-3 present half the time

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for draw in 0..6 {
        let trace = stochastic_dijkstra(&g, v(0), &[v(3)], &mut RngSampler(&mut rng))?;
        let path = recover_path(&g, &trace, v(3)).map(|p| p.edge_ids);
        // the same outcomes, fixed up front, on a deterministic graph
        let mut present = vec![true; g.n_edges()];
        for &(e, state) in trace.sampled_states() {
            present[e] = state;
        }
        let realized: Vec<FinalEdge> = g
            .edges()
            .iter()
            .filter(|e| present[e.id])
            .map(|e| FinalEdge {
                a: e.a,
                b: e.b,
                weight: g.weight(e.id) as f32,
            })
            .collect();
        let fixed = FinalGraph::new(4, realized, 100.0)?;
        let check = deterministic_dijkstra(&fixed, v(0), &[v(3)])?[0];
        let replay = stochastic_dijkstra(&g, v(0), &[v(3)], &mut FixedOutcomes(&present))?;
        println!(
            "draw {draw}: d(0,3) = {:.1} via edges {:?}; {} edges drawn; deterministic {:.1}; replay {:.1}",
            trace.distance(v(3)),
            path.unwrap_or_default(),
            trace.sampled_states().len(),
            check,
            replay.distance(v(3)),
        );
    }
    Ok(())
}
