//! The Monte-Carlo gradient averages to the exact gradient of the expected
//! objective, computed by enumerating every edge configuration.

mod common;

use common::{random_stochastic_graph, v, Masked};
use probgraph::estimators::{
    estimate_objective, EmaBaseline, EstimatorConfig, LossValue, Query, ScoreAttribution,
};
use probgraph::graph::{edge_prob, StochasticGraph};
use probgraph::paths::PathTrace;
use probgraph::tasks::{compression_loss, TargetDistances};
use probgraph::{deterministic_dijkstra, DistanceMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exact `d/d theta_b` of `E[L] + lambda * mean(p)` for a loss that depends on
/// distances from `source` to `targets`.
fn exact_prob_gradient(
    g: &StochasticGraph,
    source: usize,
    targets: &[usize],
    lambda: f64,
    loss_of: &dyn Fn(&[f64]) -> f64,
) -> Vec<f64> {
    let m = g.n_edges();
    let p: Vec<f64> = g.theta_b().iter().map(|&t| edge_prob(t)).collect();
    let tv: Vec<_> = targets.iter().map(|&t| v(t)).collect();
    let mut grad = vec![0.0; m];
    for mask in 0..1u32 << m {
        let present: Vec<bool> = (0..m).map(|e| mask >> e & 1 == 1).collect();
        let prob: f64 = (0..m)
            .map(|e| if present[e] { p[e] } else { 1.0 - p[e] })
            .product();
        let d = deterministic_dijkstra(
            &Masked {
                graph: g,
                present: &present,
            },
            v(source),
            &tv,
        )
        .unwrap();
        let l = loss_of(&d);
        for e in 0..m {
            grad[e] += prob * l * if present[e] { 1.0 - p[e] } else { -p[e] };
        }
    }
    for e in 0..m {
        grad[e] += lambda / m as f64 * p[e] * (1.0 - p[e]);
    }
    grad
}

/// Mean and standard error of the sampled `theta_b` gradient.
fn sampled_prob_gradient<F>(
    g: &StochasticGraph,
    q: &Query,
    loss: F,
    config: &EstimatorConfig,
    n: u64,
) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&Query, &PathTrace) -> LossValue + Sync + Copy,
{
    let m = g.n_edges();
    let (mut sum, mut sq) = (vec![0.0; m], vec![0.0; m]);
    let mut baseline = EmaBaseline::default();
    for s in 0..n {
        let est =
            estimate_objective(g, std::slice::from_ref(q), loss, config, s, &mut baseline).unwrap();
        let dense = est.gradient.b_grads.to_dense();
        for e in 0..m {
            sum[e] += dense[e];
            sq[e] += dense[e] * dense[e];
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let se = sq
        .iter()
        .zip(&mean)
        .map(|(s, mu)| ((s / nf - mu * mu).max(0.0) / nf).sqrt())
        .collect();
    (mean, se)
}

fn check(attribution: ScoreAttribution, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let g = random_stochastic_graph(n, 8, 6.0, &mut rng);
    let truth = DistanceMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            1.0 + (i + j) as f64 * 0.1
        }
    });
    let targets = [2usize, 4, 5];
    let q = Query {
        source: v(0),
        targets: targets.iter().map(|&t| v(t)).collect(),
    };
    let td = TargetDistances::Matrix(&truth);
    let loss = |q: &Query, t: &PathTrace| compression_loss(q, t, &td, 3);
    let lambda = 0.5;
    let config = EstimatorConfig {
        lambda,
        use_baseline: false,
        attribution,
        ..EstimatorConfig::default()
    };
    let (mean, se) = sampled_prob_gradient(&g, &q, loss, &config, 100_000);
    let exact = exact_prob_gradient(&g, 0, &targets, lambda, &|d: &[f64]| {
        d.iter()
            .zip(&targets)
            .map(|(x, &t)| (x - truth.get(0, t)).powi(2) / 3.0)
            .sum()
    });
    for e in 0..g.n_edges() {
        assert!(
            (mean[e] - exact[e]).abs() <= 4.0 * se[e] + 1e-12,
            "edge {e}: sampled {} +- {} vs exact {}",
            mean[e],
            se[e],
            exact[e]
        );
    }
}

#[test]
fn whole_trace_estimate_is_unbiased() {
    check(ScoreAttribution::WholeTrace, 21);
}

#[test]
fn per_target_estimate_is_unbiased() {
    check(ScoreAttribution::PerTarget, 22);
}

#[test]
fn weight_gradient_is_unbiased() {
    // d/d theta_w of E[L], by enumeration with a central difference per configuration.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 5;
    let g = random_stochastic_graph(n, 7, 6.0, &mut rng);
    let truth = DistanceMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 0.8 });
    let targets = [1usize, 3, 4];
    let tv: Vec<_> = targets.iter().map(|&t| v(t)).collect();
    let q = Query {
        source: v(0),
        targets: tv.clone(),
    };
    let td = TargetDistances::Matrix(&truth);
    let loss = |q: &Query, t: &PathTrace| compression_loss(q, t, &td, 3);
    let expected_loss = |g: &StochasticGraph| -> f64 {
        let m = g.n_edges();
        let p: Vec<f64> = g.theta_b().iter().map(|&t| edge_prob(t)).collect();
        (0..1u32 << m)
            .map(|mask| {
                let present: Vec<bool> = (0..m).map(|e| mask >> e & 1 == 1).collect();
                let prob: f64 = (0..m)
                    .map(|e| if present[e] { p[e] } else { 1.0 - p[e] })
                    .product();
                let d = deterministic_dijkstra(
                    &Masked {
                        graph: g,
                        present: &present,
                    },
                    v(0),
                    &tv,
                )
                .unwrap();
                prob * d
                    .iter()
                    .zip(&targets)
                    .map(|(x, &t)| (x - truth.get(0, t)).powi(2) / 3.0)
                    .sum::<f64>()
            })
            .sum()
    };
    let config = EstimatorConfig {
        use_baseline: false,
        ..EstimatorConfig::default()
    };
    let samples = 100_000u64;
    let m = g.n_edges();
    let (mut sum, mut sq) = (vec![0.0; m], vec![0.0; m]);
    let mut baseline = EmaBaseline::default();
    for s in 0..samples {
        let est = estimate_objective(
            &g,
            std::slice::from_ref(&q),
            loss,
            &config,
            s,
            &mut baseline,
        )
        .unwrap();
        for (e, x) in est.gradient.w_grads.to_dense().into_iter().enumerate() {
            sum[e] += x;
            sq[e] += x * x;
        }
    }
    let h = 1e-6;
    for e in 0..m {
        let mean = sum[e] / samples as f64;
        let se = ((sq[e] / samples as f64 - mean * mean).max(0.0) / samples as f64).sqrt();
        let theta = g.theta_w()[e];
        let (mut plus, mut minus) = (g.clone(), g.clone());
        plus.set_theta_w(e, theta + h);
        minus.set_theta_w(e, theta - h);
        let exact = (expected_loss(&plus) - expected_loss(&minus)) / (2.0 * h);
        assert!(
            (mean - exact).abs() <= 4.0 * se + 1e-6,
            "edge {e}: {mean} +- {se} vs {exact}"
        );
    }
}
