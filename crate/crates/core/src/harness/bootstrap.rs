//! Bootstrap standard errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const MIN_RESAMPLES: usize = 100;

/// Standard deviation of `statistic` over `resamples` same-size draws with
/// replacement. Resample `b` draws from stream `b` of a generator seeded
/// with `seed`, so the result does not depend on scheduling.
pub fn bootstrap_se<T, F>(samples: &[T], statistic: F, resamples: usize, seed: u64) -> Result<f64>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    if resamples < MIN_RESAMPLES {
        return Err(Error::invalid(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            required: 2,
        });
    }
    let n = samples.len();
    let stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let draw: Vec<T> = (0..n).map(|_| samples[rng.random_range(0..n)].clone()).collect();
            statistic(&draw)
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / resamples as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_statistic_has_zero_error() {
        let xs = vec![0.3; 50];
        assert!(bootstrap_se(&xs, mean, 200, 1).unwrap() < 1e-12);
    }

    #[test]
    fn seeded_and_checked() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let a = bootstrap_se(&xs, mean, 300, 5).unwrap();
        assert_eq!(a, bootstrap_se(&xs, mean, 300, 5).unwrap());
        assert_ne!(a, bootstrap_se(&xs, mean, 300, 6).unwrap());
        assert!(bootstrap_se(&xs, mean, 99, 5).is_err());
        assert!(bootstrap_se(&xs[..1], mean, 300, 5).is_err());
    }
}
