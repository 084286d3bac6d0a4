//! Structural invariants of candidate edge sets.

use probgraph::builder::{
    build_cf_graph, build_knn_random, CfVariant, InteractionMatrix, VectorDataset,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

fn random_data(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> VectorDataset {
    VectorDataset::new(n, dim, (0..n * dim).map(|_| rng.gen::<f32>()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_random_is_simple_and_covers_neighbours(seed in any::<u64>(), n in 3usize..40, k in 1usize..6, r in 0usize..6) {
        prop_assume!(k < n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_data(n, 3, &mut rng);
        let c = build_knn_random(&data, k, r, &mut rng).unwrap();
        let mut seen = HashSet::new();
        for (&(a, b), &w) in c.pairs.iter().zip(&c.init_weights) {
            prop_assert!(a != b);
            prop_assert!(seen.insert((a.index().min(b.index()), a.index().max(b.index()))));
            prop_assert!((w - data.distance(a.index(), b.index())).abs() < 1e-9);
        }
        prop_assert!(c.len() <= n * (k + r));
        // every vertex has at least k incident candidates
        let mut deg = vec![0usize; n];
        for &(a, b) in &c.pairs {
            deg[a.index()] += 1;
            deg[b.index()] += 1;
        }
        prop_assert!(deg.iter().all(|&d| d >= k));
    }

    #[test]
    fn bipartite_candidates_only_join_users_to_items(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (users, items) = (15, 25);
        let pairs: Vec<(usize, usize)> =
            (0..120).map(|_| (rng.gen_range(0..users), rng.gen_range(0..items))).collect();
        let m = InteractionMatrix::from_pairs(users, items, pairs).unwrap();
        let c = build_cf_graph(&m, CfVariant::Bipartite, 4, &mut rng).unwrap();
        for &(a, b) in &c.pairs {
            prop_assert!((a.index() < users) != (b.index() < users));
        }
    }
}
