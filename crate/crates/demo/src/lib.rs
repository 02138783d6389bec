//! WebAssembly bindings for the browser page in `www/`.

use freqcert::apparatus::{bessel_weights, min_truncation};
use freqcert::belltest::{phase_scan, visibility, BellThresholdTable, ScanConfig};
use freqcert::certify::{
    certify_dimension, psd_fill, CertifyOptions, CoherenceBoundMatrix, DiagonalData, Estimate, SubspaceVisibility,
};
use freqcert::state::{make_maximally_entangled, BinGrid};
use wasm_bindgen::prelude::*;

/// A Bell fringe over one period, normalized to its maximum.
#[wasm_bindgen]
pub struct Fringe {
    theta: Vec<f64>,
    normalized: Vec<f64>,
    visibility: f64,
    threshold: f64,
}

#[wasm_bindgen]
impl Fringe {
    #[wasm_bindgen(getter)]
    pub fn theta(&self) -> Vec<f64> {
        self.theta.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn normalized(&self) -> Vec<f64> {
        self.normalized.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    #[wasm_bindgen(getter)]
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn violates(&self) -> bool {
        self.visibility > self.threshold
    }
}

#[wasm_bindgen]
pub struct Certification {
    certified: Vec<u32>,
    fidelity: Vec<f64>,
    k_star: u32,
    best_dim: u32,
}

#[wasm_bindgen]
impl Certification {
    /// Certified Schmidt number for `d' = 2, 3, ...`.
    #[wasm_bindgen(getter)]
    pub fn certified(&self) -> Vec<u32> {
        self.certified.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fidelity(&self) -> Vec<f64> {
        self.fidelity.clone()
    }

    #[wasm_bindgen(getter, js_name = kStar)]
    pub fn k_star(&self) -> u32 {
        self.k_star
    }

    #[wasm_bindgen(getter, js_name = bestDim)]
    pub fn best_dim(&self) -> u32 {
        self.best_dim
    }
}

pub fn bell_fringe_native(d: usize, noisy: bool, seed: u64) -> freqcert::Result<Fringe> {
    let state = make_maximally_entangled(BinGrid::with_modes(16)?)?;
    let cfg = ScanConfig { noise: noisy, seed, ..ScanConfig::new(d) };
    let scan = phase_scan(&state, &cfg)?;
    let (v, _) = visibility(&scan)?;
    let peak = scan.points.iter().map(|p| p.coincidences).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    Ok(Fringe {
        theta: scan.points.iter().map(|p| p.theta).collect(),
        normalized: scan.points.iter().map(|p| p.coincidences / peak).collect(),
        visibility: v,
        threshold: BellThresholdTable::default().threshold(d)?,
    })
}

/// Uniform populations with one visibility per measured separation.
pub fn certify_uniform_native(d: usize, separations: &[usize], visibilities: &[f64]) -> freqcert::Result<Certification> {
    if separations.len() != visibilities.len() {
        return Err(freqcert::Error::InvalidParameter("one visibility per separation".into()));
    }
    let measured: Vec<SubspaceVisibility> = separations
        .iter()
        .zip(visibilities)
        .flat_map(|(&i, &v)| {
            (0..d.saturating_sub(i)).map(move |j| SubspaceVisibility { j, i, visibility: Estimate::exact(v) })
        })
        .collect();
    let matrix = CoherenceBoundMatrix::from_visibilities(&DiagonalData::uniform(d), &measured)?;
    let (filled, _) = psd_fill(&matrix)?;
    let r = certify_dimension(&filled, &CertifyOptions::default());
    Ok(Certification {
        certified: r.certified.iter().map(|&k| k as u32).collect(),
        fidelity: r.fidelity,
        k_star: r.k_star as u32,
        best_dim: r.best_dim as u32,
    })
}

/// Sideband powers `|J_n(β)|²` for `n = -order..=order`.
pub fn sideband_powers_native(beta: f64) -> freqcert::Result<Vec<f64>> {
    Ok(bessel_weights(beta, min_truncation(beta), 0.0)?.iter().map(|w| w.norm_sqr()).collect())
}

fn js(e: freqcert::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = bellFringe)]
pub fn bell_fringe(d: usize, noisy: bool, seed: u32) -> Result<Fringe, JsError> {
    bell_fringe_native(d, noisy, seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = certifyUniform)]
pub fn certify_uniform(d: usize, separations: Vec<usize>, visibilities: Vec<f64>) -> Result<Certification, JsError> {
    certify_uniform_native(d, &separations, &visibilities).map_err(js)
}

#[wasm_bindgen(js_name = sidebandPowers)]
pub fn sideband_powers(beta: f64) -> Result<Vec<f64>, JsError> {
    sideband_powers_native(beta).map_err(js)
}
