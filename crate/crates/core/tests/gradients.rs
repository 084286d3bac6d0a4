//! Pathwise weight gradients against central finite differences, and the
//! sparsity penalty against its closed form.

mod common;

use common::{random_stochastic_graph, v, worst_weight_gradient_error};
use probgraph::estimators::{regularizer, Query};
use probgraph::tasks::{cf_loss, cf_loss_from_distances, compression_loss, TargetDistances};
use probgraph::{DistanceMatrix, SparseVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn compression_loss_weight_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let n = rng.gen_range(5..=15);
        let g = random_stochastic_graph(n, 3 * n, 40.0, &mut rng);
        let present: Vec<bool> = (0..g.n_edges()).map(|_| rng.gen_bool(0.8)).collect();
        let truth = DistanceMatrix::from_fn(n, |i, j| {
            if i == j {
                0.0
            } else {
                0.5 + ((i * 7 + j * 3) % 5) as f64 * 0.4
            }
        });
        let targets: Vec<_> = (1..n).map(v).collect();
        let q = Query {
            source: v(0),
            targets: targets.clone(),
        };
        let td = TargetDistances::Matrix(&truth);
        let err = worst_weight_gradient_error(
            &g,
            &present,
            v(0),
            &targets,
            |t| compression_loss(&q, t, &td, 8),
            1e-6,
            1e-9,
        );
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn ranking_loss_weight_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let n = rng.gen_range(6..=15);
        let g = random_stochastic_graph(n, 3 * n, 15.0, &mut rng);
        let present: Vec<bool> = (0..g.n_edges()).map(|_| rng.gen_bool(0.8)).collect();
        let targets: Vec<_> = (1..n.min(7)).map(v).collect();
        let q = Query {
            source: v(0),
            targets: targets.clone(),
        };
        let err = worst_weight_gradient_error(
            &g,
            &present,
            v(0),
            &targets,
            |t| cf_loss(&q, t, 0.25),
            1e-6,
            1e-9,
        );
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn ranking_loss_distance_gradients_match_finite_differences() {
    let d_pos = 0.7;
    let d_negs = [0.4, 1.9, 3.0, 0.7];
    let (_, g_pos, g_negs) = cf_loss_from_distances(d_pos, &d_negs);
    let h = 1e-6;
    let f = |p: f64, n: &[f64]| cf_loss_from_distances(p, n).0;
    let fd_pos = (f(d_pos + h, &d_negs) - f(d_pos - h, &d_negs)) / (2.0 * h);
    assert!((g_pos - fd_pos).abs() / fd_pos.abs() < 1e-6);
    for i in 0..d_negs.len() {
        let mut up = d_negs;
        up[i] += h;
        let mut down = d_negs;
        down[i] -= h;
        let fd = (f(d_pos, &up) - f(d_pos, &down)) / (2.0 * h);
        assert!((g_negs[i] - fd).abs() / fd.abs() < 1e-6, "negative {i}");
    }
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = random_stochastic_graph(8, 12, 10.0, &mut rng);
    let lambda = 0.7;
    let mut grad = SparseVec::new(g.n_edges());
    regularizer(&g, lambda, Some(&mut grad)).unwrap();
    let h = 1e-6;
    for e in 0..g.n_edges() {
        let theta = g.theta_b()[e];
        let mut plus = g.clone();
        plus.set_theta_b(e, theta + h);
        let mut minus = g.clone();
        minus.set_theta_b(e, theta - h);
        let fd = (regularizer(&plus, lambda, None).unwrap()
            - regularizer(&minus, lambda, None).unwrap())
            / (2.0 * h);
        let analytic = grad.get(e).unwrap_or(0.0);
        assert!(
            (analytic - fd).abs() <= 1e-7 * fd.abs().max(1e-3),
            "edge {e}: {analytic} vs {fd}"
        );
    }
}
