//! Pathwise weight gradients and score-function probability gradients.
//!
//! The loss is the squared gap between a sampled distance and a target.
//! Averaging many single-sample estimates approaches the exact gradient of
//! the expected loss, which for this two-route graph can be written down.

use probgraph::estimators::{
    estimate_objective, DistanceGrad, EmaBaseline, EstimatorConfig, LossValue, Query,
};
use probgraph::graph::{edge_prob, GraphInit, StochasticGraph, VertexId};
use probgraph::paths::PathTrace;

fn main() -> probgraph::Result<()> {
    let v = VertexId::new;
    let pairs = [(v(0), v(1)), (v(0), v(2)), (v(2), v(1))];
    let init = GraphInit {
        d_max: Some(10.0),
        edge_prob: 0.5,
    };
    let g = StochasticGraph::new(3, &pairs, &[3.0, 1.0, 1.0], &init)?;
    let target = 1.5;
    let loss = |q: &Query, t: &PathTrace| {
        let d = t.distance(q.targets[0]);
        LossValue {
            value: (d - target) * (d - target),
            per_distance_grads: vec![DistanceGrad {
                source: q.source,
                target: q.targets[0],
                grad: 2.0 * (d - target),
            }],
            pair_values: Some(vec![(d - target) * (d - target)]),
        }
    };
    let queries = [Query {
        source: v(0),
        targets: vec![v(1)],
    }];
    let config = EstimatorConfig {
        use_baseline: false,
        ..EstimatorConfig::default()
    };

    let samples = 100_000;
    let mut mean = [0.0; 3];
    let mut baseline = EmaBaseline::default();
    for s in 0..samples {
        let est = estimate_objective(&g, &queries, loss, &config, s, &mut baseline)?;
        for (e, x) in est.gradient.b_grads.iter() {
            mean[e] += x / samples as f64;
        }
    }

    // Exact: enumerate the 8 edge outcomes.
    let p: Vec<f64> = g.theta_b().iter().map(|&t| edge_prob(t)).collect();
    let mut exact = [0.0; 3];
    for mask in 0..8u32 {
        let on = |e: usize| mask >> e & 1 == 1;
        let d = match (on(0), on(1) && on(2)) {
            (true, true) => 2.0,
            (true, false) => 3.0,
            (false, true) => 2.0,
            (false, false) => 10.0,
        };
        let prob: f64 = (0..3)
            .map(|e| if on(e) { p[e] } else { 1.0 - p[e] })
            .product();
        let l = (d - target) * (d - target);
        for (e, slot) in exact.iter_mut().enumerate() {
            // d log P / d theta_b = (1 - p) when present, -p when absent
            let score = if on(e) { 1.0 - p[e] } else { -p[e] };
            *slot += prob * l * score;
        }
    }
    for e in 0..3 {
        println!(
            "edge {e}: Monte-Carlo {:+.4}  exact {:+.4}",
            mean[e], exact[e]
        );
    }
    Ok(())
}
