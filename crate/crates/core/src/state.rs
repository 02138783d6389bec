//! Discretized frequency-bin two-photon states.
//!
//! A pair state is written as a sum over correlated bin pairs `|j⟩_s|j⟩_i`,
//! each carrying a complex amplitude. Mode labels are 0-based throughout the
//! library; the 1-based labels used in data files are converted at the I/O
//! boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-9;

/// The discretized frequency space shared by signal and idler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    /// Number of modes per photon.
    pub d: usize,
    /// Spacing between mode centers, GHz.
    pub fsr_ghz: f64,
    /// Bin bandwidth, GHz.
    pub bin_bandwidth_ghz: f64,
    /// Degeneracy frequency, THz.
    pub center_thz: f64,
}

impl BinGrid {
    pub fn new(d: usize, fsr_ghz: f64, bin_bandwidth_ghz: f64, center_thz: f64) -> Result<Self> {
        let grid = Self { d, fsr_ghz, bin_bandwidth_ghz, center_thz };
        grid.validate()?;
        Ok(grid)
    }

    /// 25 GHz bins at 25 GHz spacing around 1548 nm.
    pub fn with_modes(d: usize) -> Result<Self> {
        Self::new(d, 25.0, 25.0, 193.669)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("grid needs d >= 2, got {}", self.d)));
        }
        if !(self.fsr_ghz > 0.0) || !(self.bin_bandwidth_ghz > 0.0) {
            return Err(Error::InvalidParameter("fsr and bandwidth must be positive".into()));
        }
        if self.bin_bandwidth_ghz > self.fsr_ghz {
            return Err(Error::InvalidParameter(format!(
                "bin bandwidth {} GHz exceeds fsr {} GHz",
                self.bin_bandwidth_ghz, self.fsr_ghz
            )));
        }
        Ok(())
    }

    /// Signal frequency of mode `j` in THz; the idler sits mirrored about the center.
    pub fn signal_frequency_thz(&self, j: usize) -> f64 {
        self.center_thz + j as f64 * self.fsr_ghz * 1e-3
    }
}

/// Pure two-photon state `Σ α_j |j⟩|j⟩` over a set of grid modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiphotonState {
    pub grid: BinGrid,
    /// Grid labels of the modes carried by this state, in order.
    modes: Vec<usize>,
    amplitudes: Vec<Complex64>,
    /// Accumulated quadratic phase coefficient, radians per label².
    pub dispersion_coeff: f64,
}

impl BiphotonState {
    /// Builds a state from explicit amplitudes on modes `0..amplitudes.len()`.
    /// The amplitudes are normalized.
    pub fn from_amplitudes(grid: BinGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if amplitudes.len() != grid.d {
            return Err(Error::InvalidParameter(format!(
                "expected {} amplitudes, got {}",
                grid.d,
                amplitudes.len()
            )));
        }
        let modes = (0..grid.d).collect();
        Self::normalized(grid, modes, amplitudes, 0.0)
    }

    fn normalized(
        grid: BinGrid,
        modes: Vec<usize>,
        mut amplitudes: Vec<Complex64>,
        dispersion_coeff: f64,
    ) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("state has zero norm".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self { grid, modes, amplitudes, dispersion_coeff })
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `(label, α)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.modes.iter().copied().zip(self.amplitudes.iter().copied())
    }

    /// Amplitude on grid mode `label`, zero if the mode is not carried.
    pub fn amplitude_of(&self, label: usize) -> Complex64 {
        self.modes
            .iter()
            .position(|&m| m == label)
            .map_or(Complex64::new(0.0, 0.0), |k| self.amplitudes[k])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORM_TOL
    }

    /// Multiplies every pair amplitude by `exp(i·c2·j²)` where `j` is the grid label.
    pub fn apply_dispersion(&self, c2: f64) -> Result<Self> {
        if !c2.is_finite() {
            return Err(Error::InvalidParameter("dispersion coefficient must be finite".into()));
        }
        let amplitudes = self
            .iter()
            .map(|(j, a)| a * Complex64::from_polar(1.0, c2 * (j * j) as f64))
            .collect();
        Ok(Self {
            grid: self.grid,
            modes: self.modes.clone(),
            amplitudes,
            dispersion_coeff: self.dispersion_coeff + c2,
        })
    }

    /// Restricts the state to the given grid labels and renormalizes.
    /// Phases already accumulated on each mode are kept.
    pub fn subspace(&self, labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter("subspace needs at least one mode".into()));
        }
        let mut seen = vec![false; self.grid.d];
        for &l in labels {
            if l >= self.grid.d {
                return Err(Error::ModeOutOfRange { index: l, d: self.grid.d });
            }
            if std::mem::replace(&mut seen[l], true) {
                return Err(Error::InvalidParameter(format!("mode {l} listed twice")));
            }
        }
        let amplitudes = labels.iter().map(|&l| self.amplitude_of(l)).collect();
        Self::normalized(self.grid, labels.to_vec(), amplitudes, self.dispersion_coeff)
    }

    /// Drops modes whose amplitude is exactly zero.
    pub fn support(&self) -> Self {
        let (modes, amplitudes) = self.iter().filter(|(_, a)| a.norm_sqr() > 0.0).unzip();
        Self { grid: self.grid, modes, amplitudes, dispersion_coeff: self.dispersion_coeff }
    }
}

/// `α_j = 1/√d` on every mode, no dispersion.
pub fn make_maximally_entangled(grid: BinGrid) -> Result<BiphotonState> {
    grid.validate()?;
    let a = Complex64::new(1.0 / (grid.d as f64).sqrt(), 0.0);
    BiphotonState::from_amplitudes(grid, vec![a; grid.d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(d: usize) -> BinGrid {
        BinGrid::with_modes(d).unwrap()
    }

    #[test]
    fn grid_rejects_overlapping_bins() {
        assert!(BinGrid::new(10, 25.0, 30.0, 193.0).is_err());
        assert!(BinGrid::new(1, 25.0, 25.0, 193.0).is_err());
    }

    #[test]
    fn maximally_entangled_is_uniform() {
        let s = make_maximally_entangled(grid(2)).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        let s = make_maximally_entangled(grid(102)).unwrap();
        assert!(s.amplitudes().iter().all(|a| (a.norm_sqr() - 1.0 / 102.0).abs() < 1e-15));
        assert!(make_maximally_entangled(grid(3)).unwrap().is_normalized());
    }

    #[test]
    fn zero_dispersion_is_identity() {
        let s = make_maximally_entangled(grid(5)).unwrap();
        assert_eq!(s.apply_dispersion(0.0).unwrap().amplitudes(), s.amplitudes());
    }

    #[test]
    fn dispersion_relative_phase_between_pair() {
        let s = make_maximally_entangled(grid(20)).unwrap().apply_dispersion(0.01).unwrap();
        let (j, i) = (7usize, 3usize);
        let rel = (s.amplitude_of(j + i) / s.amplitude_of(j)).arg();
        let expected = 0.01 * (2 * j * i + i * i) as f64;
        assert!((rel - expected).abs() < 1e-12);
    }

    #[test]
    fn pi_dispersion_flips_two_mode_phase() {
        let s = make_maximally_entangled(grid(2)).unwrap().apply_dispersion(std::f64::consts::PI).unwrap();
        let rel = s.amplitude_of(1) / s.amplitude_of(0);
        assert!((rel.re + 1.0).abs() < 1e-12 && rel.im.abs() < 1e-12);
    }

    #[test]
    fn subspace_cases() {
        let s = make_maximally_entangled(grid(102)).unwrap();
        let all: Vec<usize> = (0..102).collect();
        let same = s.subspace(&all).unwrap();
        assert_eq!(same.modes(), s.modes());
        for (x, y) in same.amplitudes().iter().zip(s.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }

        let sub = s.subspace(&[5, 6, 7]).unwrap();
        assert_eq!(sub.modes(), &[5, 6, 7]);
        assert!(sub.amplitudes().iter().all(|a| (a.norm_sqr() - 1.0 / 3.0).abs() < 1e-12));

        let s = BiphotonState::from_amplitudes(
            grid(3),
            vec![Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.0)],
        )
        .unwrap();
        let sub = s.subspace(&[0, 1]).unwrap();
        assert!((sub.amplitudes()[0].re - 0.8).abs() < 1e-15);
        assert!((sub.amplitudes()[1].re - 0.6).abs() < 1e-15);
        assert_eq!(s.support().modes(), &[0, 1]);
    }

    #[test]
    fn subspace_errors() {
        let s = make_maximally_entangled(grid(4)).unwrap();
        assert!(s.subspace(&[]).is_err());
        assert!(matches!(s.subspace(&[1, 4]), Err(Error::ModeOutOfRange { index: 4, d: 4 })));
        assert!(s.subspace(&[1, 1]).is_err());
    }

    #[test]
    fn subspace_keeps_dispersion_phase() {
        let s = make_maximally_entangled(grid(10)).unwrap().apply_dispersion(0.05).unwrap();
        let sub = s.subspace(&[3, 8]).unwrap();
        let rel = (sub.amplitudes()[1] / sub.amplitudes()[0]).arg();
        assert!((rel - 0.05 * (64.0 - 9.0)).abs() < 1e-12);
    }

    fn arb_state() -> impl Strategy<Value = BiphotonState> {
        (2usize..12).prop_flat_map(|d| {
            prop::collection::vec((0.01f64..1.0, -3.2f64..3.2), d).prop_map(move |v| {
                let amps = v.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect();
                BiphotonState::from_amplitudes(BinGrid::with_modes(d).unwrap(), amps).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn operations_preserve_norm(s in arb_state(), c2 in -1.0f64..1.0) {
            prop_assert!(s.is_normalized());
            prop_assert!(s.apply_dispersion(c2).unwrap().is_normalized());
            let half: Vec<usize> = (0..s.dim()).step_by(2).collect();
            prop_assert!(s.subspace(&half).unwrap().is_normalized());
        }

        #[test]
        fn dispersion_composes_additively(s in arb_state(), a in -0.5f64..0.5, b in -0.5f64..0.5) {
            let two = s.apply_dispersion(a).unwrap().apply_dispersion(b).unwrap();
            let one = s.apply_dispersion(a + b).unwrap();
            for (x, y) in two.amplitudes().iter().zip(one.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }

        #[test]
        fn subspace_is_idempotent(s in arb_state()) {
            let labels: Vec<usize> = (0..s.dim()).rev().step_by(2).collect();
            let once = s.subspace(&labels).unwrap();
            let twice = once.subspace(&labels).unwrap();
            for (x, y) in once.amplitudes().iter().zip(twice.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-15);
            }
        }
    }
}
