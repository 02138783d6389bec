#![allow(dead_code)]

use freqcert::certify::{
    certify_dimension, psd_fill, CertificationResult, CertifyOptions, CoherenceBoundMatrix, DiagonalData, Estimate,
    MonteCarloInputs, SubspaceVisibility,
};

/// Average visibilities and their uncertainties for pair separations 1, 2 and 6.
pub const PAIR_VISIBILITIES: [(usize, f64, f64); 3] = [(1, 0.9685, 0.0007), (2, 0.9794, 0.0005), (6, 0.968, 0.001)];

/// Uniform diagonal `1/d` and constant visibilities per separation.
pub fn uniform_inputs(d: usize, neighbors: &[usize], sigma_scale: f64) -> MonteCarloInputs {
    let visibilities = PAIR_VISIBILITIES
        .iter()
        .filter(|(i, _, _)| neighbors.contains(i))
        .flat_map(|&(i, v, s)| {
            (0..d.saturating_sub(i)).map(move |j| SubspaceVisibility {
                j,
                i,
                visibility: Estimate::new(v, s * sigma_scale),
            })
        })
        .collect();
    MonteCarloInputs { diagonal: DiagonalData::uniform(d), visibilities, options: CertifyOptions::default() }
}

pub fn filled(inputs: &MonteCarloInputs) -> CoherenceBoundMatrix {
    let m = CoherenceBoundMatrix::from_visibilities(&inputs.diagonal, &inputs.visibilities).unwrap();
    psd_fill(&m).unwrap().0
}

pub fn certify(inputs: &MonteCarloInputs) -> CertificationResult {
    certify_dimension(&filled(inputs), &inputs.options)
}
