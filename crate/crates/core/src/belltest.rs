//! Phase-scan interference of d-mode superpositions and the visibility
//! thresholds for violating local realism in d dimensions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::apparatus::{
    derive_seed, detection_probabilities, expected_counts, simulate_counts, DetectorModel,
    SettingDescriptor, SettingKind,
};
use crate::error::{Error, Result};
use crate::protocol::{centered_modes, superposition_setting, OpticsConfig};
use crate::state::BiphotonState;

/// Minimal visibility needed to violate local realism, per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellThresholdTable(BTreeMap<usize, f64>);

impl Default for BellThresholdTable {
    fn default() -> Self {
        Self(BTreeMap::from([(2, 0.707), (3, 0.775), (5, 0.846), (7, 0.883)]))
    }
}

impl BellThresholdTable {
    pub fn threshold(&self, d: usize) -> Result<f64> {
        self.0.get(&d).copied().ok_or(Error::UnsupportedDimension(d))
    }

    pub fn dimensions(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violates,
    Inconclusive,
}

pub fn bell_check(visibility: f64, d: usize, table: &BellThresholdTable) -> Result<Verdict> {
    let t = table.threshold(d)?;
    Ok(if visibility > t { Verdict::Violates } else { Verdict::Inconclusive })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub theta: f64,
    pub coincidences: f64,
    pub singles_s: f64,
    pub singles_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub d: usize,
    pub center: usize,
    /// Whether the points are expectation values rather than sampled counts.
    pub noiseless: bool,
    pub points: Vec<FringePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub d: usize,
    /// Detected output mode (0-based); the superposed modes sit around it.
    pub center: usize,
    pub points_per_period: usize,
    pub optics: OpticsConfig,
    pub detector: DetectorModel,
    pub noise: bool,
    pub seed: u64,
    /// Cancel the source's spectral phase with the shaper.
    pub compensate_dispersion: bool,
}

impl ScanConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            center: 5,
            points_per_period: 100,
            optics: OpticsConfig { crosstalk: DEFAULT_CROSSTALK, ..Default::default() },
            detector: DetectorModel { integration_time: BELL_INTEGRATION_TIME, ..Default::default() },
            noise: true,
            seed: 1,
            compensate_dispersion: true,
        }
    }
}

/// Integration time per phase point of a Bell scan, seconds.
pub const BELL_INTEGRATION_TIME: f64 = 10.0;

/// Leakage of an adjacent bin through a DEMUX filter, calibrated together
/// with [`DetectorModel::default`].
pub const DEFAULT_CROSSTALK: f64 = 0.0075;

/// Number of grid points per period, rounded up to a multiple of `d` so the
/// grid contains every zero of a uniform d-mode fringe.
pub fn scan_points(points_per_period: usize, d: usize) -> usize {
    points_per_period.max(d).div_ceil(d) * d
}

/// Scans `θ_s = θ_i = θ` over one fringe period `[0, π)` and records
/// coincidences at the center mode pair.
pub fn phase_scan(state: &BiphotonState, cfg: &ScanConfig) -> Result<FringeScan> {
    if cfg.d < 2 {
        return Err(Error::InvalidParameter("superposition needs d >= 2".into()));
    }
    let modes = centered_modes(cfg.d, cfg.center)?;
    if modes.last().is_some_and(|&m| m >= state.grid.d) {
        return Err(Error::ModeOutOfRange { index: *modes.last().unwrap(), d: state.grid.d });
    }
    let n = scan_points(cfg.points_per_period, cfg.d);
    let (optics, detector) = if cfg.noise {
        (cfg.optics, cfg.detector)
    } else {
        (OpticsConfig { crosstalk: 0.0, ..cfg.optics }, cfg.detector.without_noise())
    };
    let mut points = Vec::with_capacity(n);
    for k in 0..n {
        let theta = PI * k as f64 / n as f64;
        let settings = superposition_setting(state, &modes, cfg.center, theta, &optics, cfg.compensate_dispersion)?;
        let prob = detection_probabilities(state, &settings)?;
        let point = if cfg.noise {
            let descriptor = SettingDescriptor {
                kind: SettingKind::Scan,
                j: modes[0],
                i: cfg.d - 1,
                theta: Some(theta),
                modulation_index: settings.eom.modulation_index,
                rf_phase: settings.eom.rf_phase,
                detect: (cfg.center as i64, cfg.center as i64),
            };
            let rec = simulate_counts(&prob, &detector, descriptor, derive_seed(cfg.seed, k as u64))?;
            FringePoint {
                theta,
                coincidences: rec.coincidences as f64,
                singles_s: rec.singles_s as f64,
                singles_i: rec.singles_i as f64,
            }
        } else {
            let mean = expected_counts(&prob, &detector);
            FringePoint { theta, coincidences: mean.coincidences, singles_s: mean.singles_s, singles_i: mean.singles_i }
        };
        points.push(point);
    }
    Ok(FringeScan { d: cfg.d, center: cfg.center, noiseless: !cfg.noise, points })
}

/// Raw-count visibility `(C_max - C_min) / (C_max + C_min)` over the sampled
/// grid and its Poisson standard error.
pub fn visibility(scan: &FringeScan) -> Result<(f64, f64)> {
    let counts = scan.points.iter().map(|p| p.coincidences);
    let max = counts.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = counts.fold(f64::INFINITY, f64::min);
    let sigma = if scan.noiseless { 0.0 } else { visibility_sigma(max, min) };
    Ok((visibility_from_extrema(max, min)?, sigma))
}

pub fn visibility_from_extrema(max: f64, min: f64) -> Result<f64> {
    if !(max + min > 0.0) {
        return Err(Error::ZeroCounts);
    }
    Ok(((max - min) / (max + min)).clamp(0.0, 1.0))
}

/// First-order propagation of Poisson errors on both extrema.
pub fn visibility_sigma(max: f64, min: f64) -> f64 {
    let s = max + min;
    if s <= 0.0 {
        return 0.0;
    }
    2.0 * (min * min * max + max * max * min).sqrt() / (s * s)
}

/// CSV with columns `theta_rad, coincidences, singles_s, singles_i, normalized`,
/// where `normalized` divides by the scan maximum.
pub fn write_fringe_csv<W: Write>(scan: &FringeScan, out: W) -> Result<()> {
    let max = scan.points.iter().map(|p| p.coincidences).fold(0.0, f64::max);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta_rad", "coincidences", "singles_s", "singles_i", "normalized"])?;
    for p in &scan.points {
        let norm = if max > 0.0 { p.coincidences / max } else { 0.0 };
        w.write_record([
            format!("{:.9}", p.theta),
            fmt_count(p.coincidences),
            fmt_count(p.singles_s),
            fmt_count(p.singles_i),
            format!("{norm:.9}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_count(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.6}")
    }
}
