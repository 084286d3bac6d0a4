//! Sparse Adam with lazy replay against textbook dense Adam.

mod common;

use common::DenseAdam;
use probgraph::{AdamHyper, SparseAdam, SparseVec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run_both(n: usize, steps: usize, density: f64, hyper: AdamHyper, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (mut sparse_p, mut dense_p) = (init.clone(), init);
    let mut sparse = SparseAdam::new(n, hyper).unwrap();
    let mut dense = DenseAdam::new(n, hyper);
    for _ in 0..steps {
        let mut g = SparseVec::new(n);
        for i in 0..n {
            if rng.gen_bool(density) {
                g.add(i, rng.gen_range(-3.0..3.0));
            }
        }
        sparse.step(&mut sparse_p, &g).unwrap();
        dense.step(&mut dense_p, &g.to_dense());
    }
    sparse.flush(&mut sparse_p);
    sparse_p
        .iter()
        .zip(&dense_p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn lazy_replay_matches_dense_adam() {
    let diff = run_both(1000, 100, 0.05, AdamHyper::default(), 41);
    assert!(diff <= 1e-12, "max difference {diff}");
}

#[test]
fn dense_gradients_take_the_same_path() {
    let diff = run_both(
        50,
        200,
        1.0,
        AdamHyper {
            lr: 0.1,
            ..AdamHyper::default()
        },
        42,
    );
    assert!(diff <= 1e-12, "max difference {diff}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn agrees_with_dense_for_any_sparsity(seed in any::<u64>(), density in 0.0f64..1.0, steps in 1usize..60) {
        prop_assert!(run_both(40, steps, density, AdamHyper::default(), seed) <= 1e-12);
    }

    #[test]
    fn single_step_is_bounded_by_the_learning_rate(g in -1e6f64..1e6, lr in 1e-4f64..1.0) {
        let hyper = AdamHyper { lr, ..AdamHyper::default() };
        let mut adam = SparseAdam::new(1, hyper).unwrap();
        let mut p = vec![0.0];
        let mut grad = SparseVec::new(1);
        grad.add(0, g);
        adam.step(&mut p, &grad).unwrap();
        prop_assert!(p[0].abs() <= lr * (1.0 + 1e-9));
        prop_assert!(p[0] * g <= 0.0);
    }
}
