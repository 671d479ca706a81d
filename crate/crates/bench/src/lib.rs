//! Seeded benchmark instances.

use l0break_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Regression with `p` columns (constant plus Gaussian regressors) whose
/// coefficients jump every `regime_len` observations.
pub fn piecewise_regression(n: usize, p: usize, regime_len: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let mut y = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 && t % regime_len == 0 {
            beta = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        }
        let row: Vec<f64> = std::iter::once(1.0)
            .chain((1..p).map(|_| rng.sample(StandardNormal)))
            .collect();
        let noise: f64 = rng.sample(StandardNormal);
        y.push(row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() + 0.5 * noise);
        rows.push(row);
    }
    Dataset::from_rows(y, &rows).expect("finite instance")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = piecewise_regression(50, 2, 10, 1);
        assert_eq!((a.len(), a.dim()), (50, 2));
        assert_eq!(a, piecewise_regression(50, 2, 10, 1));
    }
}
