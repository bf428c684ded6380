//! Batch-means error estimation for correlated Markov chain output.

use crate::error::{Error, Result};
use crate::quad::NeumaierSum;

/// Default number of batches used for standard errors.
pub const DEFAULT_BATCHES: usize = 32;

/// Mean and batch-means standard error of a (possibly autocorrelated) series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    pub stderr: f64,
    /// Integrated autocorrelation time estimate `m * var(batch) / var(sample)`.
    pub iat: f64,
    pub n: usize,
    pub batches: usize,
}

impl BatchMeans {
    pub fn ess(&self) -> f64 {
        if self.iat > 0.0 {
            self.n as f64 / self.iat
        } else {
            self.n as f64
        }
    }
}

/// Batch-means estimate with `batches` equal batches. The mean uses every
/// sample; the trailing `n mod batches` samples are left out of the
/// variance estimate.
pub fn batch_means(values: &[f64], batches: usize) -> Result<BatchMeans> {
    let n = values.len();
    if batches < 2 || n < batches {
        return Err(Error::NotEnoughSamples {
            needed: batches.max(2),
            found: n,
        });
    }
    let mut total = NeumaierSum::new();
    for &v in values {
        total.add(v);
    }
    let mean = total.value() / n as f64;
    let m = n / batches;
    let mut batch_avgs = Vec::with_capacity(batches);
    for b in 0..batches {
        let mut s = NeumaierSum::new();
        for &v in &values[b * m..(b + 1) * m] {
            s.add(v);
        }
        batch_avgs.push(s.value() / m as f64);
    }
    let grand = batch_avgs.iter().sum::<f64>() / batches as f64;
    let var_batch = batch_avgs.iter().map(|a| (a - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let stderr = (var_batch / batches as f64).sqrt();
    let var_sample = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let iat = if var_sample > 0.0 {
        (m as f64 * var_batch / var_sample).max(f64::MIN_POSITIVE)
    } else {
        1.0
    };
    Ok(BatchMeans {
        mean,
        stderr,
        iat,
        n,
        batches,
    })
}

/// Covariance of two series with a batch-means standard error, computed
/// from the centred products `(a_i - mean a)(b_i - mean b)`.
pub fn covariance(a: &[f64], b: &[f64], batches: usize) -> Result<BatchMeans> {
    assert_eq!(a.len(), b.len(), "covariance series must be paired");
    let ma = batch_means(a, batches)?.mean;
    let mb = batch_means(b, batches)?.mean;
    let products: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    batch_means(&products, batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_series_has_zero_error() {
        let bm = batch_means(&[2.5; 64], 32).unwrap();
        assert_eq!(bm.mean, 2.5);
        assert_eq!(bm.stderr, 0.0);
    }

    #[test]
    fn iid_stderr_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..64_000).map(|_| rng.random::<f64>()).collect();
        let bm = batch_means(&xs, 32).unwrap();
        let naive = (1.0 / 12.0f64 / xs.len() as f64).sqrt();
        assert!((bm.stderr / naive - 1.0).abs() < 0.5, "{} vs {}", bm.stderr, naive);
        assert!((bm.iat - 1.0).abs() < 0.6);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(batch_means(&[1.0; 10], 32).is_err());
    }

    #[test]
    fn autocorrelated_series_has_larger_iat() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..64_000)
            .map(|_| {
                x = 0.9 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let bm = batch_means(&xs, 32).unwrap();
        // AR(1) with phi = 0.9 has tau = (1 + phi) / (1 - phi) = 19.
        assert!(bm.iat > 10.0 && bm.iat < 30.0, "iat {}", bm.iat);
    }
}
