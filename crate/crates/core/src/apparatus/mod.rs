//! The measurement chain: pulse shaper, electro-optic modulator, DEMUX
//! filters and coincidence detection.
//!
//! Both photons pass through the same shaper and modulator. A photon in mode
//! `j` leaves the modulator in mode `j + n` with amplitude `w_n`, so the pair
//! amplitude for landing in output modes `(m_s, m_i)` is
//! `Σ_j α_j t_s(j) w_{m_s-j} t_i(j) w_{m_i-j}`.

pub mod bessel;
mod counts;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::BiphotonState;

pub use bessel::{bessel_j, bessel_weights, min_truncation};
pub use counts::{
    derive_seed, expected_counts, noiseless_counts, simulate_counts, DetectorModel, ExpectedCounts,
    MeasurementRecord, SettingDescriptor, SettingKind,
};

/// Per-mode complex transmission of the pulse shaper for each photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaperMask {
    signal: Vec<Complex64>,
    idler: Vec<Complex64>,
}

impl ShaperMask {
    pub fn new(signal: Vec<Complex64>, idler: Vec<Complex64>) -> Result<Self> {
        if signal.len() != idler.len() {
            return Err(Error::InvalidParameter("signal and idler masks differ in length".into()));
        }
        if signal.iter().chain(&idler).any(|t| t.norm() > 1.0 + 1e-12 || !t.norm().is_finite()) {
            return Err(Error::InvalidParameter("mask transmission exceeds unity".into()));
        }
        Ok(Self { signal, idler })
    }

    pub fn identity(d: usize) -> Self {
        let one = vec![Complex64::new(1.0, 0.0); d];
        Self { signal: one.clone(), idler: one }
    }

    /// Passes only the listed modes, with unit transmission.
    pub fn select(d: usize, labels: &[usize]) -> Result<Self> {
        let mut t = vec![Complex64::new(0.0, 0.0); d];
        for &l in labels {
            if l >= d {
                return Err(Error::ModeOutOfRange { index: l, d });
            }
            t[l] = Complex64::new(1.0, 0.0);
        }
        Ok(Self { signal: t.clone(), idler: t })
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }

    pub fn signal(&self, j: usize) -> Complex64 {
        self.signal.get(j).copied().unwrap_or_default()
    }

    pub fn idler(&self, j: usize) -> Complex64 {
        self.idler.get(j).copied().unwrap_or_default()
    }

    /// Multiplies mode `j` of each photon by `exp(i·j·θ)`.
    pub fn with_phase_ramp(mut self, theta_s: f64, theta_i: f64) -> Self {
        for (j, t) in self.signal.iter_mut().enumerate() {
            *t *= Complex64::from_polar(1.0, j as f64 * theta_s);
        }
        for (j, t) in self.idler.iter_mut().enumerate() {
            *t *= Complex64::from_polar(1.0, j as f64 * theta_i);
        }
        self
    }

    /// Adds an extra phase to mode `j` of both photons.
    pub fn add_phase(&mut self, j: usize, phase_s: f64, phase_i: f64) {
        if j < self.len() {
            self.signal[j] *= Complex64::from_polar(1.0, phase_s);
            self.idler[j] *= Complex64::from_polar(1.0, phase_i);
        }
    }

    /// Scales the transmission of mode `j` on both photons. `factor` must lie in [0, 1].
    pub fn attenuate(&mut self, j: usize, factor: f64) {
        debug_assert!((0.0..=1.0 + 1e-12).contains(&factor));
        if j < self.len() {
            self.signal[j] *= factor;
            self.idler[j] *= factor;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomSettings {
    pub modulation_index: f64,
    pub rf_phase: f64,
    pub truncation_order: usize,
}

impl EomSettings {
    pub fn new(modulation_index: f64, rf_phase: f64, truncation_order: usize) -> Result<Self> {
        let s = Self { modulation_index, rf_phase, truncation_order };
        s.validate()?;
        Ok(s)
    }

    /// Modulator driven at `beta` with the minimum admissible truncation.
    pub fn driven(modulation_index: f64) -> Result<Self> {
        Self::new(modulation_index, 0.0, min_truncation(modulation_index))
    }

    pub fn off() -> Self {
        Self { modulation_index: 0.0, rf_phase: 0.0, truncation_order: min_truncation(0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.modulation_index >= 0.0) || !self.modulation_index.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "modulation index must be >= 0, got {}",
                self.modulation_index
            )));
        }
        let min = min_truncation(self.modulation_index);
        if self.truncation_order < min {
            return Err(Error::InvalidParameter(format!(
                "truncation order {} below minimum {min}",
                self.truncation_order
            )));
        }
        Ok(())
    }

    pub fn sidebands(&self) -> Result<Sidebands> {
        let weights = bessel_weights(self.modulation_index, self.truncation_order, self.rf_phase)?;
        Ok(Sidebands { order: self.truncation_order as i64, weights })
    }
}

/// Sideband amplitudes `w_n`, zero outside the truncation window.
#[derive(Debug, Clone)]
pub struct Sidebands {
    order: i64,
    weights: Vec<Complex64>,
}

impl Sidebands {
    pub fn get(&self, n: i64) -> Complex64 {
        if n.abs() > self.order {
            Complex64::default()
        } else {
            self.weights[(n + self.order) as usize]
        }
    }

    pub fn order(&self) -> i64 {
        self.order
    }
}

/// Attenuation per sideband making every listed sideband contribute with the
/// weight of the weakest one.
pub fn equalize_contributions(eom: &EomSettings, sidebands: &[i64]) -> Result<Vec<f64>> {
    eom.validate()?;
    let mags: Vec<f64> = sidebands
        .iter()
        .map(|&n| bessel_j(n, eom.modulation_index).abs())
        .collect();
    for (&n, &m) in sidebands.iter().zip(&mags) {
        if m < 1e-12 {
            return Err(Error::ZeroSideband { order: n, beta: eom.modulation_index });
        }
    }
    let floor = mags.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(mags.iter().map(|m| floor / m).collect())
}

/// Modulation index in (0, 10] maximizing the weakest of the listed sidebands.
pub fn best_modulation_index(sidebands: &[i64]) -> f64 {
    let weakest = |beta: f64| {
        let j = bessel::bessel_j_upto(
            sidebands.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0),
            beta,
        );
        sidebands.iter().map(|n| j[n.unsigned_abs() as usize].abs()).fold(f64::INFINITY, f64::min)
    };
    if sidebands.iter().all(|&n| n == 0) {
        return 0.0;
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 1..=1000 {
        let beta = k as f64 * 1e-2;
        let v = weakest(beta);
        if v > best.1 {
            best = (beta, v);
        }
    }
    // golden-section refinement around the grid optimum
    let (mut lo, mut hi) = (best.0 - 1e-2, best.0 + 1e-2);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if weakest(a) > weakest(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// DEMUX / broadband filter in front of one detector, in output-mode labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Filter {
    /// Single-bin filter centered on one mode.
    Narrow(i64),
    /// Broadband filter passing every grid mode except one.
    Bucket { excluded: i64, d: usize },
}

impl Filter {
    /// Power transmission of output mode `m`; `crosstalk` is the leakage of a
    /// blocked neighbouring bin.
    pub fn transmission(&self, m: i64, crosstalk: f64) -> f64 {
        match *self {
            Filter::Narrow(c) if m == c => 1.0,
            Filter::Narrow(c) if (m - c).abs() == 1 => crosstalk,
            Filter::Narrow(_) => 0.0,
            Filter::Bucket { excluded, .. } if m == excluded => crosstalk,
            Filter::Bucket { d, .. } if (0..d as i64).contains(&m) => 1.0,
            Filter::Bucket { .. } => 0.0,
        }
    }

    fn passband(&self, crosstalk: f64) -> Vec<i64> {
        match *self {
            Filter::Narrow(c) if crosstalk > 0.0 => vec![c - 1, c, c + 1],
            Filter::Narrow(c) => vec![c],
            Filter::Bucket { excluded, d } => {
                (0..d as i64).filter(|&m| crosstalk > 0.0 || m != excluded).collect()
            }
        }
    }
}

/// One complete measurement configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApparatusSettings {
    pub mask: ShaperMask,
    pub eom: EomSettings,
    pub filter_s: Filter,
    pub filter_i: Filter,
    /// Fraction of an adjacent bin's power leaking through a DEMUX filter.
    pub crosstalk: f64,
}

/// Probabilities per generated pair: both photons detected (before detector
/// efficiency), and each photon reaching its detector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionProbabilities {
    pub coincidence: f64,
    pub signal: f64,
    pub idler: f64,
}

/// Pair amplitude for landing in output modes `detect = (m_s, m_i)`.
pub fn output_mode_amplitude(
    state: &BiphotonState,
    mask: &ShaperMask,
    eom: &EomSettings,
    detect: (i64, i64),
) -> Result<Complex64> {
    let w = eom.sidebands()?;
    Ok(amplitude_with(state, mask, &w, detect))
}

fn amplitude_with(state: &BiphotonState, mask: &ShaperMask, w: &Sidebands, (ms, mi): (i64, i64)) -> Complex64 {
    state
        .iter()
        .map(|(j, a)| {
            let jj = j as i64;
            a * mask.signal(j) * w.get(ms - jj) * mask.idler(j) * w.get(mi - jj)
        })
        .sum()
}

pub fn detection_probabilities(
    state: &BiphotonState,
    settings: &ApparatusSettings,
) -> Result<DetectionProbabilities> {
    let w = settings.eom.sidebands()?;
    let x = settings.crosstalk;
    let out_s = settings.filter_s.passband(x);
    let out_i = settings.filter_i.passband(x);

    let mut coincidence = 0.0;
    for &ms in &out_s {
        let ts = settings.filter_s.transmission(ms, x);
        for &mi in &out_i {
            let ti = settings.filter_i.transmission(mi, x);
            if ts * ti > 0.0 {
                coincidence += ts * ti * amplitude_with(state, &settings.mask, &w, (ms, mi)).norm_sqr();
            }
        }
    }

    // marginals: distinct pair modes are orthogonal on the partner photon
    let marginal = |filter: &Filter, out: &[i64], t: &dyn Fn(usize) -> Complex64| -> f64 {
        state
            .iter()
            .map(|(j, a)| {
                let p = (a * t(j)).norm_sqr();
                if p == 0.0 {
                    return 0.0;
                }
                p * out
                    .iter()
                    .map(|&m| filter.transmission(m, x) * w.get(m - j as i64).norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    };
    let signal = marginal(&settings.filter_s, &out_s, &|j| settings.mask.signal(j));
    let idler = marginal(&settings.filter_i, &out_i, &|j| settings.mask.idler(j));
    Ok(DetectionProbabilities { coincidence, signal, idler })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_maximally_entangled, BinGrid};
    use std::f64::consts::PI;

    fn uniform(d: usize) -> BiphotonState {
        make_maximally_entangled(BinGrid::with_modes(d).unwrap()).unwrap()
    }

    #[test]
    fn no_modulation_no_mixing() {
        let s = uniform(5).apply_dispersion(0.3).unwrap();
        let mask = ShaperMask::identity(5);
        for j in 0..5 {
            let a = output_mode_amplitude(&s, &mask, &EomSettings::off(), (j, j)).unwrap();
            assert!((a - s.amplitude_of(j as usize)).norm() < 1e-15);
        }
        let a = output_mode_amplitude(&s, &mask, &EomSettings::off(), (1, 2)).unwrap();
        assert_eq!(a.norm(), 0.0);
    }

    /// Two modes mixed into detected mode (1,1) with equal contributions:
    /// P(θ) = |c|²·|1 + e^{2iθ}|² = 2|c|²(1 + cos 2θ).
    #[test]
    fn two_mode_fringe_is_cosine() {
        let s = uniform(2);
        let eom = EomSettings::driven(1.2).unwrap();
        let att = equalize_contributions(&eom, &[1, 0]).unwrap();
        let jmin = bessel_j(0, 1.2).abs().min(bessel_j(1, 1.2).abs());
        let c = 0.5f64.sqrt() * jmin * jmin;
        for k in 0..50 {
            let theta = k as f64 * PI / 50.0;
            let mut mask = ShaperMask::identity(2).with_phase_ramp(theta, theta);
            mask.attenuate(0, att[0]);
            mask.attenuate(1, att[1]);
            let p = output_mode_amplitude(&s, &mask, &eom, (1, 1)).unwrap().norm_sqr();
            let expected = 2.0 * c * c * (1.0 + (2.0 * theta).cos());
            assert!((p - expected).abs() < 1e-14, "theta {theta}: {p} vs {expected}");
        }
    }

    #[test]
    fn seven_mode_fringe_matches_brute_force_sum() {
        let s = uniform(7);
        let sidebands: Vec<i64> = (0..7).map(|j| 3 - j).collect();
        let beta = best_modulation_index(&sidebands);
        let eom = EomSettings::driven(beta).unwrap();
        let att = equalize_contributions(&eom, &sidebands).unwrap();
        let jmin = sidebands.iter().map(|&n| bessel_j(n, beta).abs()).fold(1.0, f64::min);
        let mut pmax: f64 = 0.0;
        let mut pmin = f64::INFINITY;
        for k in 0..700 {
            let theta = k as f64 * PI / 700.0;
            let mut mask = ShaperMask::identity(7).with_phase_ramp(theta, theta);
            for (j, a) in att.iter().enumerate() {
                mask.attenuate(j, *a);
            }
            let p = output_mode_amplitude(&s, &mask, &eom, (3, 3)).unwrap().norm_sqr();
            let brute: f64 = (0..7)
                .map(|j| Complex64::from_polar(1.0, 2.0 * j as f64 * theta))
                .sum::<Complex64>()
                .norm_sqr()
                * jmin.powi(4)
                / 7.0;
            assert!((p - brute).abs() < 1e-13);
            pmax = pmax.max(p);
            pmin = pmin.min(p);
        }
        assert!(pmin < 1e-20);
        assert!(((pmax - pmin) / (pmax + pmin) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equalization_cases() {
        assert_eq!(equalize_contributions(&EomSettings::off(), &[0]).unwrap(), vec![1.0]);

        let eom = EomSettings::driven(1.0).unwrap();
        let att = equalize_contributions(&eom, &[-1, 0, 1]).unwrap();
        let j0 = bessel_j(0, 1.0).abs();
        let j1 = bessel_j(1, 1.0).abs();
        let floor = j0.min(j1);
        for (&n, a) in [-1i64, 0, 1].iter().zip(&att) {
            assert!((a * bessel_j(n, 1.0).abs() - floor).abs() < 1e-15);
        }
        assert_eq!(att[0], att[2]);

        let err = equalize_contributions(&EomSettings::off(), &[0, 1]).unwrap_err();
        assert!(matches!(err, Error::ZeroSideband { order: 1, .. }));
    }

    #[test]
    fn scattering_preserves_norm() {
        let s = uniform(6).apply_dispersion(0.07).unwrap();
        let eom = EomSettings::new(2.3, 0.4, 30).unwrap();
        let mask = ShaperMask::identity(6);
        let w = eom.sidebands().unwrap();
        let mut total = 0.0;
        for ms in -30..36 {
            for mi in -30..36 {
                total += amplitude_with(&s, &mask, &w, (ms, mi)).norm_sqr();
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn bucket_filter_sees_only_crosstalk_of_correlated_mode() {
        let s = uniform(10);
        let settings = ApparatusSettings {
            mask: ShaperMask::identity(10),
            eom: EomSettings::off(),
            filter_s: Filter::Narrow(4),
            filter_i: Filter::Bucket { excluded: 4, d: 10 },
            crosstalk: 0.0,
        };
        let p = detection_probabilities(&s, &settings).unwrap();
        assert_eq!(p.coincidence, 0.0);
        assert!((p.signal - 0.1).abs() < 1e-15);
        assert!((p.idler - 0.9).abs() < 1e-14);

        let leaky = ApparatusSettings { crosstalk: 0.01, ..settings };
        // the notch leaks pair (4,4); the narrow filter leaks pairs (3,3) and (5,5)
        let p = detection_probabilities(&s, &leaky).unwrap();
        assert!((p.coincidence - 0.003).abs() < 1e-15);
    }

    #[test]
    fn mask_rejects_gain() {
        let over = vec![Complex64::new(1.1, 0.0)];
        assert!(ShaperMask::new(over.clone(), over).is_err());
    }

    #[test]
    fn truncation_invariant_enforced() {
        assert!(EomSettings::new(3.0, 0.0, 22).is_err());
        assert!(EomSettings::new(3.0, 0.0, 23).is_ok());
    }

    #[test]
    fn best_beta_for_adjacent_pair_is_first_crossing() {
        let b = best_modulation_index(&[0, -1]);
        assert!((b - 1.4347).abs() < 1e-3, "{b}");
    }
}
