//! End-to-end synthetic data: the `2d` computational-basis settings, a
//! dispersion calibration, and repeated samples at the fringe extrema of
//! every neighbor pair.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::apparatus::{
    best_modulation_index, derive_seed, detection_probabilities, expected_counts, simulate_counts, ApparatusSettings,
    DetectionProbabilities, DetectorModel, SettingDescriptor, SettingKind,
};
use crate::certify::{dispersion_calibrate, CountRecord, DispersionFit, PairScan};
use crate::error::{Error, Result};
use crate::protocol::{bucket_setting, corr_setting, pair_setting, phase_grid, OpticsConfig};
use crate::state::BiphotonState;

pub const DEFAULT_NEIGHBORS: [usize; 3] = [1, 2, 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub optics: OpticsConfig,
    pub detector: DetectorModel,
    /// Pair separations measured.
    pub neighbors: Vec<usize>,
    pub samples_per_extremum: usize,
    /// Calibration scans per separation, spread over the available `j`.
    pub calibration_scans: usize,
    pub calibration_points: usize,
    /// Expectation values without crosstalk, accidentals or sampling.
    pub noiseless: bool,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            optics: OpticsConfig { crosstalk: crate::belltest::DEFAULT_CROSSTALK, ..Default::default() },
            detector: DetectorModel::default(),
            neighbors: DEFAULT_NEIGHBORS.to_vec(),
            samples_per_extremum: 60,
            calibration_scans: 5,
            calibration_points: 24,
            noiseless: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    pub d: usize,
    pub measurements: Vec<CountRecord>,
    pub calibration: Vec<PairScan>,
    pub dispersion: DispersionFit,
}

impl SimulatedDataset {
    pub fn count(&self, kind: SettingKind) -> usize {
        self.measurements.iter().filter(|r| r.kind == kind).count()
    }

    /// Distinct `(kind, j, i)` fringe-extremum settings.
    pub fn fringe_groups(&self) -> usize {
        let mut keys: Vec<_> = self
            .measurements
            .iter()
            .filter(|r| matches!(r.kind, SettingKind::FringeMax | SettingKind::FringeMin))
            .map(|r| (r.kind, r.j, r.i))
            .collect();
        keys.sort();
        keys.dedup();
        keys.len()
    }
}

/// Number of fringe-extremum settings for `d` modes and the given separations.
pub fn fringe_setting_count(d: usize, neighbors: &[usize]) -> usize {
    neighbors.iter().map(|&i| 2 * d.saturating_sub(i)).sum()
}

struct Sampler<'a> {
    cfg: &'a SimulationConfig,
    detector: DetectorModel,
}

impl Sampler<'_> {
    fn counts(&self, prob: &DetectionProbabilities, settings: &ApparatusSettings, kind: SettingKind, j: usize, i: usize, seed: u64) -> Result<u64> {
        if self.cfg.noiseless {
            return Ok(expected_counts(prob, &self.detector).coincidences.round() as u64);
        }
        let descriptor = SettingDescriptor {
            kind,
            j,
            i,
            theta: None,
            modulation_index: settings.eom.modulation_index,
            rf_phase: settings.eom.rf_phase,
            detect: (0, 0),
        };
        Ok(simulate_counts(prob, &self.detector, descriptor, seed)?.coincidences)
    }

    fn scan_counts(&self, prob: &DetectionProbabilities, seed: u64) -> Result<f64> {
        if self.cfg.noiseless {
            Ok(expected_counts(prob, &self.detector).coincidences)
        } else {
            let descriptor = SettingDescriptor {
                kind: SettingKind::Scan,
                j: 0,
                i: 0,
                theta: None,
                modulation_index: 0.0,
                rf_phase: 0.0,
                detect: (0, 0),
            };
            Ok(simulate_counts(prob, &self.detector, descriptor, seed)?.coincidences as f64)
        }
    }
}

fn pair_optics(base: &OpticsConfig, i: usize) -> OpticsConfig {
    let c = (i / 2) as i64;
    let beta = base.modulation_index.unwrap_or_else(|| best_modulation_index(&[c, c - i as i64]));
    OpticsConfig { modulation_index: Some(beta), ..*base }
}

fn spread(n: usize, count: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let count = count.clamp(1, n);
    let mut js: Vec<usize> =
        (0..count).map(|k| if count == 1 { 0 } else { k * (n - 1) / (count - 1) }).collect();
    js.dedup();
    js
}

/// Simulates the full certification dataset for `state`.
pub fn simulate_dataset(state: &BiphotonState, cfg: &SimulationConfig) -> Result<SimulatedDataset> {
    let d = state.grid.d;
    if cfg.samples_per_extremum == 0 || cfg.calibration_points < 3 {
        return Err(Error::InvalidParameter("need >= 1 sample per extremum and >= 3 calibration points".into()));
    }
    if cfg.neighbors.iter().any(|&i| i == 0) {
        return Err(Error::InvalidParameter("neighbor separations must be >= 1".into()));
    }
    cfg.detector.validate()?;
    let (optics, detector) = if cfg.noiseless {
        (OpticsConfig { crosstalk: 0.0, ..cfg.optics }, cfg.detector.without_noise())
    } else {
        (cfg.optics, cfg.detector)
    };
    let sampler = Sampler { cfg, detector };
    let t = detector.integration_time;
    let mut measurements = Vec::with_capacity(2 * d + fringe_setting_count(d, &cfg.neighbors) * cfg.samples_per_extremum);

    let diag_seed = derive_seed(cfg.seed, 0);
    for (kind, build) in [
        (SettingKind::Corr, corr_setting as fn(usize, usize, &OpticsConfig) -> Result<ApparatusSettings>),
        (SettingKind::Bucket, bucket_setting),
    ] {
        for j in 0..d {
            let settings = build(d, j, &optics)?;
            let prob = detection_probabilities(state, &settings)?;
            let seed = derive_seed(diag_seed, (kind as u64) * d as u64 + j as u64);
            let counts = sampler.counts(&prob, &settings, kind, j, 0, seed)?;
            measurements.push(CountRecord { kind, j, i: 0, counts, time_s: t });
        }
    }

    let cal_seed = derive_seed(cfg.seed, 1);
    let mut calibration = Vec::new();
    for &i in &cfg.neighbors {
        let pair_opt = pair_optics(&optics, i);
        for j in spread(d.saturating_sub(i), cfg.calibration_scans) {
            let psi = phase_grid(cfg.calibration_points);
            let mut counts = Vec::with_capacity(psi.len());
            for (k, &p) in psi.iter().enumerate() {
                let settings = pair_setting(state, j, i, p / (2.0 * i as f64), &pair_opt)?;
                let prob = detection_probabilities(state, &settings)?;
                let seed = derive_seed(cal_seed, ((i * d + j) * cfg.calibration_points + k) as u64);
                counts.push(sampler.scan_counts(&prob, seed)?);
            }
            calibration.push(PairScan { j, i, psi, counts });
        }
    }
    let dispersion = dispersion_calibrate(&calibration)?;

    let fringe_seed = derive_seed(cfg.seed, 2);
    for &i in &cfg.neighbors {
        let pair_opt = pair_optics(&optics, i);
        let offset = dispersion.offsets.get(&i).copied().unwrap_or(0.0);
        for j in 0..d.saturating_sub(i) {
            let phi = dispersion.c2 * (2 * j * i + i * i) as f64 + offset;
            let theta_max = -phi / (2.0 * i as f64);
            let theta_min = theta_max + PI / (2.0 * i as f64);
            for (kind, theta) in [(SettingKind::FringeMax, theta_max), (SettingKind::FringeMin, theta_min)] {
                let settings = pair_setting(state, j, i, theta, &pair_opt)?;
                let prob = detection_probabilities(state, &settings)?;
                let group = derive_seed(fringe_seed, ((i * d + j) * 2 + (kind == SettingKind::FringeMin) as usize) as u64);
                for s in 0..cfg.samples_per_extremum {
                    let counts = sampler.counts(&prob, &settings, kind, j, i, derive_seed(group, s as u64))?;
                    measurements.push(CountRecord { kind, j, i, counts, time_s: t });
                }
            }
        }
    }
    Ok(SimulatedDataset { d, measurements, calibration, dispersion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_maximally_entangled, BinGrid};

    #[test]
    fn setting_counts_follow_formula() {
        assert_eq!(fringe_setting_count(102, &DEFAULT_NEIGHBORS), 6 * (102 - 3));
        assert_eq!(fringe_setting_count(7, &DEFAULT_NEIGHBORS), 6 * 4);
    }

    #[test]
    fn spread_is_distinct_and_in_range() {
        assert_eq!(spread(10, 5), vec![0, 2, 4, 6, 9]);
        assert_eq!(spread(1, 5), vec![0]);
        assert!(spread(0, 5).is_empty());
    }

    #[test]
    fn small_noiseless_dataset() {
        let state = make_maximally_entangled(BinGrid::with_modes(8).unwrap()).unwrap();
        let cfg = SimulationConfig { noiseless: true, samples_per_extremum: 2, ..Default::default() };
        let data = simulate_dataset(&state, &cfg).unwrap();
        assert_eq!(data.count(SettingKind::Corr), 8);
        assert_eq!(data.count(SettingKind::Bucket), 8);
        assert_eq!(data.fringe_groups(), 6 * 5);
        assert!(data.measurements.iter().filter(|r| r.kind == SettingKind::FringeMin).all(|r| r.counts == 0));
        assert!(data.measurements.iter().filter(|r| r.kind == SettingKind::Bucket).all(|r| r.counts == 0));
    }
}
