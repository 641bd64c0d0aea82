//! Seeded generators for the synthetic test tensors.

use crate::error::Result;
use crate::kruskal::{reconstruct, KruskalTensor};
use crate::matrix::Matrix;
use crate::orthogonalize::{orthogonalize, to_kruskal};
use crate::tensor::{norm, DenseTensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// i.i.d. standard normal entries.
pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(dims, |_| rng.sample(StandardNormal))
}

/// Kruskal tensor with i.i.d. standard normal factor entries, no weights.
pub fn random_kruskal(dims: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> KruskalTensor {
    let factors = dims
        .iter()
        .map(|&d| Matrix::from_fn(d, rank, |_, _| rng.sample(StandardNormal)))
        .collect();
    KruskalTensor::new(factors, None).expect("consistent shapes")
}

/// Exact low-rank tensor: reconstruction of a random Kruskal tensor.
pub fn lowrank(dims: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> DenseTensor {
    reconstruct(&random_kruskal(dims, rank, rng))
}

/// Hilbert-type tensor: with 1-based indices, `1/(i_1 + ... + i_N - N + 1)`.
pub fn hilbert(dims: &[usize]) -> DenseTensor {
    DenseTensor::from_fn(dims, |idx| {
        let s: usize = idx.iter().sum();
        1.0 / (s as f64 + 1.0)
    })
}

/// Planted orthogonal low-rank signal plus scaled dense noise:
/// `B_1 + rho B_2` with `rho = noise_level ||B_1|| / ||B_2||`.
pub fn orth_noise(
    dims: &[usize],
    rank: usize,
    noise_level: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DenseTensor> {
    let raw = random_kruskal(dims, rank, rng);
    let mut list = orthogonalize(&raw)?;
    let weights: Vec<f64> = (0..rank).map(|_| rng.sample(StandardNormal)).collect();
    list.sigma = Some(weights);
    let b1 = reconstruct(&to_kruskal(&list));
    let b2 = random_tensor(dims, rng);
    let rho = noise_level * norm(&b1) / norm(&b2);
    b1.add(&b2.scale(rho))
}
