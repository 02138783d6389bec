//! Certification of entanglement dimensionality from computational-basis
//! probabilities and a handful of two-mode coherences.
//!
//! The correlated block `⟨j,j|ρ|k,k⟩` of the density matrix is partly
//! measured: the diagonal from narrowband filter settings, a few
//! off-diagonals from two-mode interference visibilities. Every other
//! off-diagonal is lower-bounded by requiring all 3×3 principal submatrices
//! to stay positive semidefinite. The bounded block then gives a worst-case
//! fidelity with the maximally entangled state, which certifies a Schmidt
//! number through the `k/d` fidelity thresholds.

mod diagonal;
mod dispersion;
mod fidelity;
mod fill;
mod montecarlo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use diagonal::{diagonal_from_records, CountRecord};
pub use dispersion::{dispersion_calibrate, fringe_phase, DispersionFit, PairScan};
pub use fidelity::{
    certified_for_fidelity, certify_dimension, fidelity_lower_bound, fidelity_of_modes, CertificationResult,
    CertifyOptions, Ordering,
};
pub use fill::{psd_fill, FillStats};
pub use montecarlo::{monte_carlo, MonteCarloInputs, MonteCarloStats};

/// A value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Probabilities of `|j,j⟩` and of the bucket `Σ_{k≠j} |j,k⟩`, 0-based `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalData {
    pub p_corr: Vec<Estimate>,
    pub p_bucket: Vec<Estimate>,
}

impl DiagonalData {
    /// Uniform `1/d` correlated probabilities and empty buckets.
    pub fn uniform(d: usize) -> Self {
        Self {
            p_corr: vec![Estimate::exact(1.0 / d as f64); d],
            p_bucket: vec![Estimate::exact(0.0); d],
        }
    }

    pub fn d(&self) -> usize {
        self.p_corr.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_corr.len() != self.p_bucket.len() {
            return Err(Error::InvalidParameter("p_corr and p_bucket differ in length".into()));
        }
        if self.p_corr.iter().chain(&self.p_bucket).any(|e| !(e.value >= 0.0) || !(e.sigma >= 0.0)) {
            return Err(Error::InvalidParameter("diagonal probabilities must be >= 0".into()));
        }
        let total: f64 = self.p_corr.iter().map(|e| e.value).sum();
        let sigma = self.p_corr.iter().map(|e| e.sigma * e.sigma).sum::<f64>().sqrt();
        if total > 1.0 + 3.0 * sigma + 1e-9 {
            return Err(Error::InvalidParameter(format!("correlated probabilities sum to {total} > 1")));
        }
        Ok(())
    }

    /// Upper limit on each uncorrelated element `⟨j,k|ρ|j,k⟩` from its bucket.
    pub fn uncorrelated_upper_limit(&self) -> Vec<f64> {
        let d = self.d();
        self.p_bucket
            .iter()
            .map(|e| if d > 1 { (e.value + e.sigma) / (d - 1) as f64 } else { 0.0 })
            .collect()
    }
}

/// Visibility of the two-mode interference between `j` and `j + i` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceVisibility {
    pub j: usize,
    pub i: usize,
    pub visibility: Estimate,
}

/// `|⟨jj|ρ|kk⟩| = V·(p_jj + p_kk)/2` with first-order error propagation.
pub fn coherence_from_visibility(p_jj: Estimate, p_kk: Estimate, visibility: Estimate) -> Result<Estimate> {
    if !(p_jj.value > 0.0) || !(p_kk.value > 0.0) {
        return Err(Error::InvalidParameter("diagonal probabilities must be positive".into()));
    }
    if !(0.0..=1.0).contains(&visibility.value) {
        return Err(Error::InvalidParameter(format!("visibility {} outside [0, 1]", visibility.value)));
    }
    let half_sum = 0.5 * (p_jj.value + p_kk.value);
    let value = visibility.value * half_sum;
    let sigma = ((half_sum * visibility.sigma).powi(2)
        + (0.5 * visibility.value * p_jj.sigma).powi(2)
        + (0.5 * visibility.value * p_kk.sigma).powi(2))
    .sqrt();
    Ok(Estimate { value, sigma })
}

/// One off-diagonal element of the correlated block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum Entry {
    Measured { value: f64, sigma: f64 },
    LowerBounded { value: f64 },
    Unknown,
}

impl Entry {
    /// Magnitude used in bounds and fidelities; unknown entries count as zero.
    pub fn magnitude(&self) -> f64 {
        match *self {
            Entry::Measured { value, .. } | Entry::LowerBounded { value } => value,
            Entry::Unknown => 0.0,
        }
    }

    pub fn is_measured(&self) -> bool {
        matches!(self, Entry::Measured { .. })
    }
}

/// Magnitudes of `⟨j,j|ρ|k,k⟩` over `d` modes, symmetric by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceBoundMatrix {
    d: usize,
    diag: Vec<Estimate>,
    off: Vec<Entry>,
}

impl CoherenceBoundMatrix {
    pub fn new(diag: Vec<Estimate>) -> Result<Self> {
        if diag.iter().any(|e| !(e.value >= 0.0)) {
            return Err(Error::InvalidParameter("diagonal entries must be >= 0".into()));
        }
        let d = diag.len();
        Ok(Self { d, diag, off: vec![Entry::Unknown; d * d] })
    }

    /// Diagonal from `data.p_corr`, coherences from the visibilities.
    pub fn from_visibilities(data: &DiagonalData, visibilities: &[SubspaceVisibility]) -> Result<Self> {
        let mut m = Self::new(data.p_corr.clone())?;
        for v in visibilities {
            let k = v.j + v.i;
            if k >= m.d || v.i == 0 {
                return Err(Error::ModeOutOfRange { index: k, d: m.d });
            }
            let c = coherence_from_visibility(m.diag[v.j], m.diag[k], v.visibility)?;
            m.set(v.j, k, Entry::Measured { value: c.value, sigma: c.sigma });
        }
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn diag(&self, j: usize) -> Estimate {
        self.diag[j]
    }

    pub fn diagonal(&self) -> &[Estimate] {
        &self.diag
    }

    /// Off-diagonal entry; panics on `j == k`.
    pub fn get(&self, j: usize, k: usize) -> Entry {
        assert_ne!(j, k, "diagonal is stored separately");
        self.off[j * self.d + k]
    }

    pub fn set(&mut self, j: usize, k: usize, e: Entry) {
        assert_ne!(j, k, "diagonal is stored separately");
        self.off[j * self.d + k] = e;
        self.off[k * self.d + j] = e;
    }

    /// `p_jj` on the diagonal, entry magnitude elsewhere.
    pub fn magnitude(&self, j: usize, k: usize) -> f64 {
        if j == k {
            self.diag[j].value
        } else {
            self.off[j * self.d + k].magnitude()
        }
    }

    pub fn measured_count(&self) -> usize {
        self.off.iter().filter(|e| e.is_measured()).count() / 2
    }

    /// Measured magnitudes lowered by `n_sigma` standard deviations, floored at 0.
    pub fn conservative(&self, n_sigma: f64) -> Self {
        let mut out = self.clone();
        if n_sigma != 0.0 {
            for e in &mut out.off {
                if let Entry::Measured { value, sigma } = *e {
                    *e = Entry::Measured { value: (value - n_sigma * sigma).max(0.0), sigma };
                }
            }
        }
        out
    }

    /// Restriction to `modes`, in the given order.
    pub fn restrict(&self, modes: &[usize]) -> Self {
        let diag = modes.iter().map(|&j| self.diag[j]).collect();
        let n = modes.len();
        let mut off = vec![Entry::Unknown; n * n];
        for (a, &j) in modes.iter().enumerate() {
            for (b, &k) in modes.iter().enumerate() {
                if a != b {
                    off[a * n + b] = self.off[j * self.d + k];
                }
            }
        }
        Self { d: n, diag, off }
    }
}
