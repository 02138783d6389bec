//! Measurement settings used by the experiment: computational-basis
//! settings (correlated and bucket), two-mode subspace interference and
//! d-mode superpositions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::apparatus::{
    best_modulation_index, equalize_contributions, ApparatusSettings, EomSettings, Filter, ShaperMask,
};
use crate::error::{Error, Result};
use crate::state::BiphotonState;

/// Optical parameters shared by every setting of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsConfig {
    pub crosstalk: f64,
    pub rf_phase: f64,
    /// Overrides the automatically chosen modulation index when set.
    pub modulation_index: Option<f64>,
    /// Extra truncation orders above the minimum.
    pub extra_truncation: usize,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self { crosstalk: 0.0, rf_phase: 0.0, modulation_index: None, extra_truncation: 0 }
    }
}

impl OpticsConfig {
    fn eom_for(&self, sidebands: &[i64]) -> Result<EomSettings> {
        let beta = self.modulation_index.unwrap_or_else(|| best_modulation_index(sidebands));
        EomSettings::new(beta, self.rf_phase, crate::apparatus::min_truncation(beta) + self.extra_truncation)
    }
}

fn check_mode(j: usize, d: usize) -> Result<()> {
    if j >= d {
        return Err(Error::ModeOutOfRange { index: j, d });
    }
    Ok(())
}

/// Narrow filters on `(j, j)`, modulator off.
pub fn corr_setting(d: usize, j: usize, optics: &OpticsConfig) -> Result<ApparatusSettings> {
    check_mode(j, d)?;
    Ok(ApparatusSettings {
        mask: ShaperMask::identity(d),
        eom: EomSettings::off(),
        filter_s: Filter::Narrow(j as i64),
        filter_i: Filter::Narrow(j as i64),
        crosstalk: optics.crosstalk,
    })
}

/// Narrow filter on signal mode `j`, one broadband filter over all idler modes `k != j`.
pub fn bucket_setting(d: usize, j: usize, optics: &OpticsConfig) -> Result<ApparatusSettings> {
    check_mode(j, d)?;
    Ok(ApparatusSettings {
        mask: ShaperMask::identity(d),
        eom: EomSettings::off(),
        filter_s: Filter::Narrow(j as i64),
        filter_i: Filter::Bucket { excluded: j as i64, d },
        crosstalk: optics.crosstalk,
    })
}

/// Superposition of `modes` detected in output mode `center` on both photons.
///
/// The shaper passes only `modes`, equalizes their sideband weights, cancels
/// the state's own spectral phase when `compensate` is given, and applies
/// `exp(i·j·θ)` to mode `j` of each photon.
pub fn superposition_setting(
    state: &BiphotonState,
    modes: &[usize],
    center: usize,
    theta: f64,
    optics: &OpticsConfig,
    compensate: bool,
) -> Result<ApparatusSettings> {
    let d = state.grid.d;
    check_mode(center, d)?;
    let sidebands: Vec<i64> = modes.iter().map(|&j| center as i64 - j as i64).collect();
    let eom = optics.eom_for(&sidebands)?;
    let att = equalize_contributions(&eom, &sidebands)?;
    let mut mask = ShaperMask::select(d, modes)?.with_phase_ramp(theta, theta);
    for (&j, &a) in modes.iter().zip(&att) {
        mask.attenuate(j, a);
        if compensate {
            let phase = -state.amplitude_of(j).arg() / 2.0;
            mask.add_phase(j, phase, phase);
        }
    }
    Ok(ApparatusSettings {
        mask,
        eom,
        filter_s: Filter::Narrow(center as i64),
        filter_i: Filter::Narrow(center as i64),
        crosstalk: optics.crosstalk,
    })
}

/// Output mode where the pair `{j, j+i}` is made to interfere.
pub fn pair_center(j: usize, i: usize) -> usize {
    j + i / 2
}

/// Two-mode subspace `{j, j+i}` with shaper phase ramp `θ`. The relative
/// phase between the two terms is `2iθ` plus the fringe phase of the pair.
pub fn pair_setting(
    state: &BiphotonState,
    j: usize,
    i: usize,
    theta: f64,
    optics: &OpticsConfig,
) -> Result<ApparatusSettings> {
    if i == 0 {
        return Err(Error::InvalidParameter("pair separation must be >= 1".into()));
    }
    check_mode(j + i, state.grid.d)?;
    superposition_setting(state, &[j, j + i], pair_center(j, i), theta, optics, false)
}

/// Ramp value `θ` placing the pair `{j, j+i}` at summed-phase `ψ = 2iθ`.
pub fn theta_for_pair_phase(i: usize, psi: f64) -> f64 {
    psi / (2.0 * i as f64)
}

/// Modes of a `d`-dimensional superposition centered on `center`.
pub fn centered_modes(d: usize, center: usize) -> Result<Vec<usize>> {
    let lo = center
        .checked_sub((d - 1) / 2)
        .ok_or_else(|| Error::InvalidParameter(format!("{d} modes do not fit below mode {center}")))?;
    Ok((lo..lo + d).collect())
}

/// Uniform grid of `n` summed-phase values covering one period.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}
