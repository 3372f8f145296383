//! How far the mean of a sample sits from its medoid.

use rand::Rng;
use rayon::prelude::*;

use super::distance::euclidean;
use crate::error::{Error, Result};

fn one_gap(n: usize, d: usize, seed: u64, sample: u64) -> f64 {
    let mut rng = crate::seed::rng(seed, &[0x6d6d, n as u64, d as u64, sample]);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let mean: Vec<f64> = (0..d).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
    let mut best = (0, f64::INFINITY);
    for (m, pm) in pts.iter().enumerate() {
        let s: f64 = pts.iter().map(|p| euclidean(p, pm)).sum();
        if s < best.1 {
            best = (m, s);
        }
    }
    euclidean(&mean, &pts[best.0])
}

/// Average distance between the mean and the medoid of `n` uniform points
/// in `[0,1]^d`, over `samples` draws.
pub fn mean_medoid_gap(n: usize, d: usize, samples: usize, seed: u64) -> Result<f64> {
    if n < 2 || d == 0 || samples == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 2, d >= 1, samples >= 1; got n={n}, d={d}, samples={samples}")));
    }
    let gaps: Vec<f64> = (0..samples as u64).into_par_iter().map(|s| one_gap(n, d, seed, s)).collect();
    Ok(gaps.iter().sum::<f64>() / samples as f64)
}
