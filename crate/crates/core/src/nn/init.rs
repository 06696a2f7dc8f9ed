use rand::Rng;
use rand_distr::StandardNormal;

use super::scalar::Scalar;

/// He-normal samples: zero mean, standard deviation `sqrt(2 / fan_in)`.
pub fn init_weights<T: Scalar, R: Rng + ?Sized>(count: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..count)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            T::of(z * std)
        })
        .collect()
}

pub fn init_bias<T: Scalar>(count: usize) -> Vec<T> {
    vec![T::zero(); count]
}
