#![allow(dead_code)]

use rand::Rng;

/// Random sample set: continuous values, or small integers so that ties and
/// flat CDF stretches are frequent.
pub fn random_samples<R: Rng>(rng: &mut R, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if ties {
                rng.random_range(-3..4) as f64
            } else {
                rng.random_range(-50.0..50.0)
            }
        })
        .collect()
}

fn count_le(samples: &[f64], z: f64) -> usize {
    samples.iter().filter(|&&s| s <= z).count()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Brute-force quantiles on the grid `alpha = k / 20`, scanning every sample
/// as a threshold and comparing CDF levels in exact integer arithmetic.
pub struct GridOracle;

impl GridOracle {
    /// `min { z : P(Z ≤ z) ≥ 1 − k/20 }`
    pub fn var(samples: &[f64], k: usize) -> f64 {
        let n = samples.len();
        samples
            .iter()
            .copied()
            .filter(|&z| 20 * count_le(samples, z) >= (20 - k) * n)
            .fold(f64::INFINITY, f64::min)
    }

    /// `min { z : P(Z ≤ z) > 1 − k/20 }`
    pub fn var_plus(samples: &[f64], k: usize) -> f64 {
        let n = samples.len();
        samples
            .iter()
            .copied()
            .filter(|&z| 20 * count_le(samples, z) > (20 - k) * n)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cvar(samples: &[f64], k: usize) -> f64 {
        let threshold = Self::var(samples, k);
        mean(samples.iter().copied().filter(|&z| z >= threshold))
    }

    /// Mean of the returns at or below `var_plus(returns, 1 − k/20)`.
    pub fn ccvar(samples: &[f64], k: usize) -> f64 {
        let threshold = Self::var_plus(samples, 20 - k);
        mean(samples.iter().copied().filter(|&z| z <= threshold))
    }
}
