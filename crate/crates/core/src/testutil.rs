use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::SymmetricMatrix;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G Gᵀ / p + 0.1 I` with Gaussian `G`; comfortably positive definite.
pub(crate) fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    let g = DMatrix::<f64>::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let m = &g * g.transpose() / p as f64 + DMatrix::identity(p, p) * 0.1;
    SymmetricMatrix::new(m).unwrap()
}
