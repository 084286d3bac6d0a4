//! Sparse Adam touches only the parameters with gradients, yet ends in the
//! same place as dense Adam fed explicit zeros.

use probgraph::{default_hyperparameters, SparseAdam, SparseVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> probgraph::Result<()> {
    let n = 1000;
    let hyper = default_hyperparameters();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sparse = vec![0.5; n];
    let mut dense = vec![0.5; n];
    let mut opt = SparseAdam::new(n, hyper)?;
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);

    for t in 1..=100 {
        let mut g = SparseVec::new(n);
        for _ in 0..20 {
            g.add(rng.gen_range(0..n), rng.gen_range(-1.0..1.0));
        }
        opt.step(&mut sparse, &g)?;
        let full = g.to_dense();
        for i in 0..n {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * full[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * full[i] * full[i];
            let mh = m[i] / (1.0 - hyper.beta1.powi(t));
            let vh = v[i] / (1.0 - hyper.beta2.powi(t));
            dense[i] -= hyper.lr * mh / (vh.sqrt() + hyper.eps);
        }
    }
    opt.flush(&mut sparse);
    let gap = sparse
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |sparse - dense| after 100 steps: {gap:.3e}");
    Ok(())
}
