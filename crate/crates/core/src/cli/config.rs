use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::apparatus::{DetectorModel, EomSettings};
use crate::belltest::{ScanConfig, BELL_INTEGRATION_TIME, DEFAULT_CROSSTALK};
use crate::certify::{CertifyOptions, Ordering};
use crate::error::{Error, Result};
use crate::protocol::OpticsConfig;
use crate::simulate::{SimulationConfig, DEFAULT_NEIGHBORS};
use crate::state::{make_maximally_entangled, BiphotonState, BinGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub fsr_ghz: f64,
    pub bin_bandwidth_ghz: f64,
    pub center_thz: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { d: 102, fsr_ghz: 25.0, bin_bandwidth_ghz: 25.0, center_thz: 193.669 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Per-mode amplitude magnitudes; empty means uniform.
    pub amplitudes: Vec<f64>,
    /// Quadratic spectral phase per mode², radians.
    pub dispersion_c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApparatusSection {
    pub modulation_index: Option<f64>,
    pub extra_truncation: usize,
    pub rf_phase: f64,
    pub crosstalk: f64,
    pub pair_rate: f64,
    pub system_efficiency: f64,
    pub coincidence_window: f64,
    pub singles_background: f64,
    pub integration_time: f64,
}

impl Default for ApparatusSection {
    fn default() -> Self {
        let det = DetectorModel::default();
        Self {
            modulation_index: None,
            extra_truncation: 0,
            rf_phase: 0.0,
            crosstalk: DEFAULT_CROSSTALK,
            pair_rate: det.pair_rate,
            system_efficiency: det.system_efficiency,
            coincidence_window: det.coincidence_window,
            singles_background: det.singles_background,
            integration_time: det.integration_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Bell-scan points per period (rounded up to a multiple of d).
    pub points_per_period: usize,
    /// Integration time per Bell-scan point, seconds.
    pub bell_integration_time: f64,
    /// Detected mode of the Bell scans, 1-based.
    pub center: usize,
    pub samples_per_extremum: usize,
    pub calibration_scans: usize,
    pub calibration_points: usize,
    pub noiseless: bool,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            points_per_period: 100,
            bell_integration_time: BELL_INTEGRATION_TIME,
            center: 6,
            samples_per_extremum: 60,
            calibration_scans: 5,
            calibration_points: 24,
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificationSection {
    pub neighbors: Vec<usize>,
    pub mc_samples: usize,
    pub seed: Option<u64>,
    pub d_max: Option<usize>,
    pub conservative_sigma: f64,
    pub ordering: Ordering,
}

impl Default for CertificationSection {
    fn default() -> Self {
        Self {
            neighbors: DEFAULT_NEIGHBORS.to_vec(),
            mc_samples: 0,
            seed: None,
            d_max: None,
            conservative_sigma: 0.0,
            ordering: Ordering::Prefix,
        }
    }
}

/// Run configuration, read from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub source: SourceSection,
    pub apparatus: ApparatusSection,
    pub scan: ScanSection,
    pub certification: CertificationSection,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().map_err(config_err)?;
        self.detector().validate().map_err(config_err)?;
        if !(0.0..=1.0).contains(&self.apparatus.crosstalk) {
            return Err(Error::Config("crosstalk must be in [0, 1]".into()));
        }
        if let Some(beta) = self.apparatus.modulation_index {
            EomSettings::driven(beta).map_err(config_err)?;
        }
        if !self.source.amplitudes.is_empty() && self.source.amplitudes.len() != self.grid.d {
            return Err(Error::Config(format!(
                "{} amplitudes given for {} modes",
                self.source.amplitudes.len(),
                self.grid.d
            )));
        }
        if !self.source.dispersion_c2.is_finite() {
            return Err(Error::Config("dispersion_c2 must be finite".into()));
        }
        if !(self.scan.bell_integration_time > 0.0) {
            return Err(Error::Config("bell_integration_time must be > 0".into()));
        }
        if self.scan.center == 0 {
            return Err(Error::Config("scan center is 1-based".into()));
        }
        if self.certification.neighbors.is_empty() || self.certification.neighbors.contains(&0) {
            return Err(Error::Config("neighbors must be a non-empty list of separations >= 1".into()));
        }
        if !(self.certification.conservative_sigma >= 0.0) {
            return Err(Error::Config("conservative_sigma must be >= 0".into()));
        }
        if self.scan.samples_per_extremum == 0 || self.scan.calibration_points < 3 {
            return Err(Error::Config("need samples_per_extremum >= 1 and calibration_points >= 3".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<BinGrid> {
        let g = &self.grid;
        BinGrid::new(g.d, g.fsr_ghz, g.bin_bandwidth_ghz, g.center_thz)
    }

    pub fn state(&self) -> Result<BiphotonState> {
        let grid = self.grid()?;
        let state = if self.source.amplitudes.is_empty() {
            make_maximally_entangled(grid)?
        } else {
            let amps = self.source.amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect();
            BiphotonState::from_amplitudes(grid, amps)?
        };
        state.apply_dispersion(self.source.dispersion_c2)
    }

    pub fn detector(&self) -> DetectorModel {
        let a = &self.apparatus;
        DetectorModel {
            pair_rate: a.pair_rate,
            system_efficiency: a.system_efficiency,
            coincidence_window: a.coincidence_window,
            singles_background: a.singles_background,
            integration_time: a.integration_time,
        }
    }

    pub fn optics(&self) -> OpticsConfig {
        let a = &self.apparatus;
        OpticsConfig {
            crosstalk: a.crosstalk,
            rf_phase: a.rf_phase,
            modulation_index: a.modulation_index,
            extra_truncation: a.extra_truncation,
        }
    }

    /// Seed from the config, then `FREQCERT_SEED`, then 1.
    pub fn seed(&self) -> Result<u64> {
        if let Some(s) = self.certification.seed {
            return Ok(s);
        }
        match std::env::var("FREQCERT_SEED") {
            Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("FREQCERT_SEED='{v}' is not an integer"))),
            Err(_) => Ok(1),
        }
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        Ok(SimulationConfig {
            optics: self.optics(),
            detector: self.detector(),
            neighbors: self.certification.neighbors.clone(),
            samples_per_extremum: self.scan.samples_per_extremum,
            calibration_scans: self.scan.calibration_scans,
            calibration_points: self.scan.calibration_points,
            noiseless: self.scan.noiseless,
            seed: self.seed()?,
        })
    }

    pub fn bell_scan(&self, d: usize) -> Result<ScanConfig> {
        Ok(ScanConfig {
            d,
            center: self.scan.center - 1,
            points_per_period: self.scan.points_per_period,
            optics: self.optics(),
            detector: DetectorModel { integration_time: self.scan.bell_integration_time, ..self.detector() },
            noise: !self.scan.noiseless,
            seed: self.seed()?,
            compensate_dispersion: true,
        })
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            ordering: self.certification.ordering,
            conservative_sigma: self.certification.conservative_sigma,
            d_max: self.certification.d_max,
        }
    }
}
