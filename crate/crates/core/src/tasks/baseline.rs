//! Euclidean embedding trained on the same squared distance error, as a
//! parameter-matched comparator for compression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::compression::{pairs_per_step, sample_pair_batch, TargetDistances, DENSE_TARGETS_MAX};
use super::TrainConfig;
use crate::builder::{DistanceMatrix, VectorDataset};
use crate::error::{invalid, Error, Result};
use crate::optim::{SparseAdam, SparseVec};

/// `n x dim` coordinates, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanEmbedding {
    pub dim: usize,
    pub coords: Vec<f64>,
    /// Distance MSE over all ordered pairs of distinct items.
    pub mse: f64,
    pub steps: usize,
}

impl EuclideanEmbedding {
    pub fn n_items(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Stored numbers: `n * dim`.
    pub fn param_count(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclid(self.row(i), self.row(j))
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn embedding_mse(targets: &TargetDistances, coords: &[f64], dim: usize) -> f64 {
    let n = targets.n();
    if n < 2 {
        return 0.0;
    }
    let row = |i: usize| &coords[i * dim..(i + 1) * dim];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let e = euclid(row(i), row(j)) - targets.get(i, j);
                total += e * e;
            }
        }
    }
    total / (n * (n - 1)) as f64
}

/// Projection of the centred data onto its top `dim` principal directions,
/// found by subspace iteration.
pub fn pca_projection(data: &VectorDataset, dim: usize, seed: u64) -> Result<Vec<f64>> {
    let (n, d) = (data.n_items(), data.dim());
    if dim == 0 || dim > d {
        return Err(invalid(format!(
            "projection dimension must be in 1..={d}, got {dim}"
        )));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(data.row(i)) {
            *m += f64::from(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
    let x: Vec<f64> = (0..n)
        .flat_map(|i| {
            data.row(i)
                .iter()
                .zip(&mean)
                .map(|(&v, m)| f64::from(v) - m)
                .collect::<Vec<_>>()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // q is d x dim, column-major.
    let mut q: Vec<f64> = (0..d * dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    orthonormalize(&mut q, d, dim);
    let mut xq = vec![0.0; n * dim];
    for _ in 0..100 {
        project(&x, &q, n, d, dim, &mut xq);
        q.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let xi = &x[i * d..(i + 1) * d];
            for c in 0..dim {
                let s = xq[i * dim + c];
                for (qv, &xv) in q[c * d..(c + 1) * d].iter_mut().zip(xi) {
                    *qv += xv * s;
                }
            }
        }
        orthonormalize(&mut q, d, dim);
    }
    project(&x, &q, n, d, dim, &mut xq);
    Ok(xq)
}

fn project(x: &[f64], q: &[f64], n: usize, d: usize, dim: usize, out: &mut [f64]) {
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        for c in 0..dim {
            out[i * dim + c] = xi
                .iter()
                .zip(&q[c * d..(c + 1) * d])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

/// Modified Gram-Schmidt on the `k` columns of a column-major `d x k` matrix.
fn orthonormalize(q: &mut [f64], d: usize, k: usize) {
    for c in 0..k {
        for p in 0..c {
            let dot: f64 = (0..d).map(|r| q[c * d + r] * q[p * d + r]).sum();
            for r in 0..d {
                q[c * d + r] -= dot * q[p * d + r];
            }
        }
        let norm = (0..d)
            .map(|r| q[c * d + r] * q[c * d + r])
            .sum::<f64>()
            .sqrt();
        if norm > 1e-300 {
            q[c * d..(c + 1) * d].iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// Trains a `dim`-dimensional embedding of `data`, initialized by PCA.
pub fn train_euclidean_baseline(
    data: &VectorDataset,
    dim: usize,
    config: &TrainConfig,
) -> Result<EuclideanEmbedding> {
    let init = pca_projection(data, dim, config.seed)?;
    if data.n_items() <= DENSE_TARGETS_MAX {
        let m = DistanceMatrix::from_fn(data.n_items(), |i, j| data.distance(i, j));
        train_euclidean_from(TargetDistances::Matrix(&m), init, dim, config)
    } else {
        train_euclidean_from(TargetDistances::Vectors(data), init, dim, config)
    }
}

/// Trains an embedding from the given starting coordinates with Adam on the
/// squared distance error, using the same pair batches as compression.
pub fn train_euclidean_from(
    targets: TargetDistances,
    init: Vec<f64>,
    dim: usize,
    config: &TrainConfig,
) -> Result<EuclideanEmbedding> {
    config.validate()?;
    let n = targets.n();
    if dim == 0 || init.len() != n * dim {
        return Err(invalid(format!(
            "expected {} starting coordinates, got {}",
            n * dim,
            init.len()
        )));
    }
    let mut coords = init;
    let per_step = pairs_per_step(n, config.batch_sources, config.batch_pairs);
    let steps = if n < 2 {
        0
    } else {
        config.epochs * (n * (n - 1)).div_ceil(per_step)
    };
    let mut adam = SparseAdam::new(coords.len(), config.hyper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 1.0 / per_step.max(1) as f64;

    for step in 0..steps {
        let progress = step as f64 / steps as f64;
        adam.set_lr(config.hyper.lr * (1.0 - (1.0 - config.lr_final_fraction) * progress))?;
        let mut grad = SparseVec::new(coords.len());
        let mut loss = 0.0;
        for q in sample_pair_batch(n, config.batch_sources, config.batch_pairs, &mut rng) {
            let s = q.source.index();
            for t in q.targets {
                let t = t.index();
                let d = euclid(
                    &coords[s * dim..(s + 1) * dim],
                    &coords[t * dim..(t + 1) * dim],
                );
                let diff = d - targets.get(s, t);
                loss += diff * diff * scale;
                if d > 0.0 {
                    let g = 2.0 * diff * scale / d;
                    for c in 0..dim {
                        let delta = g * (coords[s * dim + c] - coords[t * dim + c]);
                        grad.add(s * dim + c, delta);
                        grad.add(t * dim + c, -delta);
                    }
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { step, value: loss });
        }
        adam.step(&mut coords, &grad)?;
    }
    adam.flush(&mut coords);
    let mse = embedding_mse(&targets, &coords, dim);
    Ok(EuclideanEmbedding {
        dim,
        coords,
        mse,
        steps,
    })
}
