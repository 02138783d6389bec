use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::DetectionProbabilities;
use crate::error::{Error, Result};

/// Source brightness, detection and noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Pairs per second entering the analyzer.
    pub pair_rate: f64,
    /// Detection probability per photon.
    pub system_efficiency: f64,
    /// Coincidence window, seconds.
    pub coincidence_window: f64,
    /// Extra singles per second on each detector.
    pub singles_background: f64,
    /// Integration time per record, seconds.
    pub integration_time: f64,
}

impl Default for DetectorModel {
    /// Calibrated so the correlated-to-uncorrelated coincidence ratio over a
    /// 102-mode comb is about 1.4e3 (see `tests/noise_calibration.rs`).
    fn default() -> Self {
        Self {
            pair_rate: 5.0e7,
            system_efficiency: 0.1,
            coincidence_window: 1.0e-9,
            singles_background: 0.0,
            integration_time: 1.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pair_rate", self.pair_rate),
            ("system_efficiency", self.system_efficiency),
            ("coincidence_window", self.coincidence_window),
            ("singles_background", self.singles_background),
            ("integration_time", self.integration_time),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0")));
            }
        }
        if self.system_efficiency > 1.0 {
            return Err(Error::InvalidParameter("system_efficiency must be <= 1".into()));
        }
        Ok(())
    }

    /// Same source and efficiency, no accidentals or background.
    pub fn without_noise(&self) -> Self {
        Self { coincidence_window: 0.0, singles_background: 0.0, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingKind {
    /// Narrow filters on `(j, j)`.
    Corr,
    /// Narrow filter on `j`, broadband filter on every other idler mode.
    Bucket,
    /// Two-mode subspace `{j, j+i}` at the fringe maximum.
    FringeMax,
    /// Two-mode subspace `{j, j+i}` at the fringe minimum.
    FringeMin,
    /// One point of a phase scan.
    Scan,
}

impl SettingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SettingKind::Corr => "corr",
            SettingKind::Bucket => "bucket",
            SettingKind::FringeMax => "fringe_max",
            SettingKind::FringeMin => "fringe_min",
            SettingKind::Scan => "scan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "corr" => SettingKind::Corr,
            "bucket" => SettingKind::Bucket,
            "fringe_max" => SettingKind::FringeMax,
            "fringe_min" => SettingKind::FringeMin,
            "scan" => SettingKind::Scan,
            _ => return None,
        })
    }
}

/// Identifies a measurement setting. Mode labels are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingDescriptor {
    pub kind: SettingKind,
    pub j: usize,
    /// Mode separation for subspace settings, 0 otherwise.
    pub i: usize,
    pub theta: Option<f64>,
    pub modulation_index: f64,
    pub rf_phase: f64,
    pub detect: (i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub setting: SettingDescriptor,
    pub coincidences: u64,
    pub singles_s: u64,
    pub singles_i: u64,
    pub accidentals_estimate: f64,
    pub integration_time: f64,
}

/// Mean counts for one record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub coincidences: f64,
    pub singles_s: f64,
    pub singles_i: f64,
    pub accidentals: f64,
}

pub fn expected_counts(prob: &DetectionProbabilities, det: &DetectorModel) -> ExpectedCounts {
    let eta = det.system_efficiency;
    let rate_s = det.pair_rate * eta * prob.signal + det.singles_background;
    let rate_i = det.pair_rate * eta * prob.idler + det.singles_background;
    let t = det.integration_time;
    let accidentals = rate_s * rate_i * det.coincidence_window * t;
    ExpectedCounts {
        coincidences: det.pair_rate * eta * eta * prob.coincidence * t + accidentals,
        singles_s: rate_s * t,
        singles_i: rate_i * t,
        accidentals,
    }
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means
    Poisson::new(mean).map_or(0, |p| p.sample(rng) as u64)
}

pub fn simulate_counts(
    prob: &DetectionProbabilities,
    det: &DetectorModel,
    setting: SettingDescriptor,
    seed: u64,
) -> Result<MeasurementRecord> {
    if !(0.0..=1.0 + 1e-12).contains(&prob.coincidence) {
        return Err(Error::InvalidParameter(format!(
            "coincidence probability {} outside [0, 1]",
            prob.coincidence
        )));
    }
    det.validate()?;
    let mean = expected_counts(prob, det);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(MeasurementRecord {
        setting,
        coincidences: poisson(mean.coincidences, &mut rng),
        singles_s: poisson(mean.singles_s, &mut rng),
        singles_i: poisson(mean.singles_i, &mut rng),
        accidentals_estimate: mean.accidentals,
        integration_time: det.integration_time,
    })
}

/// Record holding the rounded expectation values.
pub fn noiseless_counts(
    prob: &DetectionProbabilities,
    det: &DetectorModel,
    setting: SettingDescriptor,
) -> MeasurementRecord {
    let mean = expected_counts(prob, det);
    MeasurementRecord {
        setting,
        coincidences: mean.coincidences.round() as u64,
        singles_s: mean.singles_s.round() as u64,
        singles_i: mean.singles_i.round() as u64,
        accidentals_estimate: mean.accidentals,
        integration_time: det.integration_time,
    }
}

/// Independent per-item seed derived from a master seed (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descriptor() -> SettingDescriptor {
        SettingDescriptor {
            kind: SettingKind::Corr,
            j: 0,
            i: 0,
            theta: None,
            modulation_index: 0.0,
            rf_phase: 0.0,
            detect: (0, 0),
        }
    }

    #[test]
    fn zero_probability_without_background_gives_zero() {
        let det = DetectorModel { singles_background: 0.0, ..Default::default() };
        let prob = DetectionProbabilities { coincidence: 0.0, signal: 0.0, idler: 0.0 };
        let rec = simulate_counts(&prob, &det, descriptor(), 7).unwrap();
        assert_eq!(rec.coincidences, 0);
        assert_eq!(rec.singles_s, 0);
    }

    #[test]
    fn reproducible_by_seed() {
        let det = DetectorModel::default();
        let prob = DetectionProbabilities { coincidence: 0.01, signal: 0.01, idler: 0.01 };
        let a = simulate_counts(&prob, &det, descriptor(), 42).unwrap();
        let b = simulate_counts(&prob, &det, descriptor(), 42).unwrap();
        let c = simulate_counts(&prob, &det, descriptor(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.coincidences, c.coincidences);
    }

    #[test]
    fn sample_mean_matches_analytic_rate() {
        let det = DetectorModel { integration_time: 0.01, ..Default::default() };
        let prob = DetectionProbabilities { coincidence: 1.0 / 102.0, signal: 1.0 / 102.0, idler: 1.0 / 102.0 };
        let mean = expected_counts(&prob, &det);
        let n = 1000;
        let total: u64 = (0..n)
            .map(|k| simulate_counts(&prob, &det, descriptor(), derive_seed(9, k)).unwrap().coincidences)
            .sum();
        let sample_mean = total as f64 / n as f64;
        let sigma_of_mean = (mean.coincidences / n as f64).sqrt();
        assert!((sample_mean - mean.coincidences).abs() < 3.0 * sigma_of_mean);
    }

    #[test]
    fn invalid_probability_rejected() {
        let prob = DetectionProbabilities { coincidence: 1.5, signal: 1.0, idler: 1.0 };
        assert!(simulate_counts(&prob, &DetectorModel::default(), descriptor(), 0).is_err());
    }

    #[test]
    fn seeds_differ_by_index() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
