use serde::{Deserialize, Serialize};

use super::{CoherenceBoundMatrix, MonteCarloStats};

/// Which `d'` modes are compared with the `d'`-dimensional target state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// The first `d'` modes in spectral order.
    #[default]
    Prefix,
    /// The best contiguous window of `d'` modes.
    Window,
    /// Modes added one at a time, each maximizing the fidelity so far.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub ordering: Ordering,
    /// Measured coherences enter as `value - n·σ`.
    pub conservative_sigma: f64,
    /// Largest `d'` to evaluate; `None` means all modes.
    pub d_max: Option<usize>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { ordering: Ordering::Prefix, conservative_sigma: 0.0, d_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationResult {
    /// Evaluated subspace sizes `d' = 2..=d_max`.
    pub dims: Vec<usize>,
    pub fidelity: Vec<f64>,
    /// Certified Schmidt number per `d'`.
    pub certified: Vec<usize>,
    /// Largest threshold `k/d'` exceeded per `d'` (0 when none).
    pub threshold: Vec<f64>,
    /// Modes used for each `d'` (0-based).
    #[serde(skip)]
    pub modes: Vec<Vec<usize>>,
    pub k_star: usize,
    /// Smallest `d'` reaching `k_star`.
    pub best_dim: usize,
    pub monte_carlo: Option<MonteCarloStats>,
}

/// Worst-case fidelity of the state filtered onto `modes` with the maximally
/// entangled state on those modes:
/// `F = Σ_{j,k} |ρ_jj,kk| / (d' · Σ_j ρ_jj,jj)`,
/// with unknown coherences counted as zero.
pub fn fidelity_of_modes(matrix: &CoherenceBoundMatrix, modes: &[usize]) -> f64 {
    let trace: f64 = modes.iter().map(|&j| matrix.diag(j).value).sum();
    if !(trace > 0.0) {
        return 0.0;
    }
    let mut total = 0.0;
    for &j in modes {
        for &k in modes {
            total += matrix.magnitude(j, k);
        }
    }
    (total / (modes.len() as f64 * trace)).clamp(0.0, 1.0)
}

/// Fidelity over the first `d'` modes.
pub fn fidelity_lower_bound(matrix: &CoherenceBoundMatrix, d_prime: usize) -> f64 {
    let modes: Vec<usize> = (0..d_prime.min(matrix.d())).collect();
    fidelity_of_modes(matrix, &modes)
}

/// Largest `k + 1` with `F > k/d'`, or 1 if no `k >= 1` qualifies.
pub fn certified_for_fidelity(fidelity: f64, d_prime: usize) -> usize {
    let x = fidelity * d_prime as f64;
    // F·d' within rounding of an integer n does not exceed n
    let k = (x - 1e-9).ceil();
    if k <= 1.0 {
        1
    } else {
        (k as usize).min(d_prime)
    }
}

fn best_window(matrix: &CoherenceBoundMatrix, size: usize) -> (Vec<usize>, f64) {
    (0..=matrix.d() - size)
        .map(|start| {
            let modes: Vec<usize> = (start..start + size).collect();
            let f = fidelity_of_modes(matrix, &modes);
            (modes, f)
        })
        .fold((Vec::new(), f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

fn greedy_sets(matrix: &CoherenceBoundMatrix, d_max: usize) -> Vec<(Vec<usize>, f64)> {
    let d = matrix.d();
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut used = vec![false; d];
    while chosen.len() < d_max {
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..d).filter(|&c| !used[c]) {
            chosen.push(cand);
            let f = if chosen.len() >= 2 { fidelity_of_modes(matrix, &chosen) } else { matrix.diag(cand).value };
            chosen.pop();
            if best.is_none_or(|(_, bf)| f > bf) {
                best = Some((cand, f));
            }
        }
        let Some((cand, _)) = best else { break };
        used[cand] = true;
        chosen.push(cand);
        if chosen.len() >= 2 {
            let mut sorted = chosen.clone();
            sorted.sort_unstable();
            let f = fidelity_of_modes(matrix, &sorted);
            out.push((sorted, f));
        }
    }
    out
}

/// Fidelity and certified Schmidt number for every `d'` from 2 up to
/// `d_max`. The matrix should already be filled.
pub fn certify_dimension(matrix: &CoherenceBoundMatrix, options: &CertifyOptions) -> CertificationResult {
    let matrix = matrix.conservative(options.conservative_sigma);
    let d_max = options.d_max.unwrap_or(matrix.d()).min(matrix.d());
    let sets: Vec<(Vec<usize>, f64)> = match options.ordering {
        Ordering::Prefix => (2..=d_max)
            .map(|n| {
                let modes: Vec<usize> = (0..n).collect();
                let f = fidelity_of_modes(&matrix, &modes);
                (modes, f)
            })
            .collect(),
        Ordering::Window => (2..=d_max).map(|n| best_window(&matrix, n)).collect(),
        Ordering::Greedy => greedy_sets(&matrix, d_max),
    };

    let mut result = CertificationResult {
        dims: Vec::with_capacity(sets.len()),
        fidelity: Vec::with_capacity(sets.len()),
        certified: Vec::with_capacity(sets.len()),
        threshold: Vec::with_capacity(sets.len()),
        modes: Vec::with_capacity(sets.len()),
        k_star: 1,
        best_dim: d_max.min(1),
        monte_carlo: None,
    };
    for (modes, f) in sets {
        let n = modes.len();
        let k = certified_for_fidelity(f, n);
        result.dims.push(n);
        result.fidelity.push(f);
        result.certified.push(k);
        result.threshold.push((k - 1) as f64 / n as f64);
        result.modes.push(modes);
        if k > result.k_star {
            result.k_star = k;
            result.best_dim = n;
        }
    }
    result
}
