use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{certify_dimension, psd_fill, CertifyOptions, CoherenceBoundMatrix, DiagonalData, Estimate, SubspaceVisibility};
use crate::apparatus::derive_seed;
use crate::error::{Error, Result};

/// Measured quantities resampled by [`monte_carlo`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloInputs {
    pub diagonal: DiagonalData,
    pub visibilities: Vec<SubspaceVisibility>,
    pub options: CertifyOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
    pub seed: u64,
}

const MAX_REJECTIONS: usize = 10_000;

/// Normal draw truncated to `[lo, hi]` by rejection.
fn truncated_normal(e: Estimate, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    if e.sigma <= 0.0 {
        return e.value.clamp(lo, hi);
    }
    for _ in 0..MAX_REJECTIONS {
        let z: f64 = rng.sample(StandardNormal);
        let x = e.value + e.sigma * z;
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    e.value.clamp(lo, hi)
}

fn sample_k_star(inputs: &MonteCarloInputs, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resample = |v: &[Estimate], rng: &mut ChaCha8Rng| -> Vec<Estimate> {
        v.iter().map(|&e| Estimate::new(truncated_normal(e, 0.0, f64::INFINITY, rng), e.sigma)).collect()
    };
    let diagonal = DiagonalData {
        p_corr: resample(&inputs.diagonal.p_corr, &mut rng),
        p_bucket: inputs.diagonal.p_bucket.clone(),
    };
    let visibilities: Vec<SubspaceVisibility> = inputs
        .visibilities
        .iter()
        .map(|v| SubspaceVisibility {
            visibility: Estimate::new(truncated_normal(v.visibility, 0.0, 1.0, &mut rng), v.visibility.sigma),
            ..*v
        })
        .collect();
    let matrix = CoherenceBoundMatrix::from_visibilities(&diagonal, &visibilities)?;
    let (filled, _) = psd_fill(&matrix)?;
    Ok(certify_dimension(&filled, &inputs.options).k_star)
}

/// Mean and sample standard deviation of `k*` over `n_samples` resamplings
/// of every measured visibility and diagonal probability. Samples use
/// independent seeds derived from `seed`, so results do not depend on
/// thread count.
pub fn monte_carlo(inputs: &MonteCarloInputs, n_samples: usize, seed: u64) -> Result<MonteCarloStats> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter("monte carlo needs at least 2 samples".into()));
    }
    #[cfg(feature = "parallel")]
    let ks: Vec<usize> = {
        use rayon::prelude::*;
        (0..n_samples as u64)
            .into_par_iter()
            .map(|k| sample_k_star(inputs, derive_seed(seed, k)))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let ks: Vec<usize> =
        (0..n_samples as u64).map(|k| sample_k_star(inputs, derive_seed(seed, k))).collect::<Result<_>>()?;

    let n = ks.len() as f64;
    let mean = ks.iter().map(|&k| k as f64).sum::<f64>() / n;
    let var = ks.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarloStats { mean, std: var.sqrt(), n_samples, seed })
}
