use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full phase scan of the pair `{j, j+i}` (0-based `j`); `psi` is the summed
/// shaper phase `2iθ` of each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScan {
    pub j: usize,
    pub i: usize,
    pub psi: Vec<f64>,
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    /// Quadratic spectral phase per mode², radians.
    pub c2: f64,
    pub c2_sigma: f64,
    /// RMS of the phase residuals, radians.
    pub residual_rms: f64,
    /// Fitted constant offset for each separation `i`.
    pub offsets: BTreeMap<usize, f64>,
    /// Fringe phase of each scan, unwrapped within its separation.
    pub phases: Vec<(usize, usize, f64)>,
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(d.abs() > 1e-12 * scale.powi(3)) {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

/// Phase `Φ` of the fringe `a + r·cos(ψ + Φ)` by linear least squares on
/// `a + b·cos ψ + c·sin ψ`. Result in `(-π, π]`.
pub fn fringe_phase(scan: &PairScan) -> Result<f64> {
    if scan.psi.len() != scan.counts.len() {
        return Err(Error::InvalidParameter("psi and counts differ in length".into()));
    }
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (&psi, &y) in scan.psi.iter().zip(&scan.counts) {
        let row = [1.0, psi.cos(), psi.sin()];
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * y;
        }
    }
    let [_, b, c] = solve3(ata, atb)
        .ok_or_else(|| Error::DegenerateFit(format!("phase scan j={} i={} does not span a period", scan.j, scan.i)))?;
    if b == 0.0 && c == 0.0 {
        return Err(Error::DegenerateFit(format!("flat fringe at j={} i={}", scan.j, scan.i)));
    }
    Ok((-c).atan2(b))
}

fn wrap(x: f64) -> f64 {
    x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor()
}

/// Fits `Φ(j; i) = c2·(2ji + i²) + offset_i` to the fringe phases of scans at
/// several `j`, with one free offset per separation.
pub fn dispersion_calibrate(scans: &[PairScan]) -> Result<DispersionFit> {
    let distinct: BTreeSet<usize> = scans.iter().map(|s| s.j).collect();
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(format!("need scans at >= 3 distinct j, got {}", distinct.len())));
    }
    let mut by_i: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for s in scans {
        by_i.entry(s.i).or_default().push((s.j, fringe_phase(s)?));
    }
    // unwrap along j within each separation
    for points in by_i.values_mut() {
        points.sort_by_key(|p| p.0);
        for k in 1..points.len() {
            let prev = points[k - 1].1;
            points[k].1 = prev + wrap(points[k].1 - prev);
        }
    }

    let x_of = |j: usize, i: usize| (2 * j * i + i * i) as f64;
    let (mut sxy, mut sxx, mut dof) = (0.0, 0.0, 0usize);
    let mut means = BTreeMap::new();
    for (&i, points) in &by_i {
        let n = points.len() as f64;
        let xm = points.iter().map(|&(j, _)| x_of(j, i)).sum::<f64>() / n;
        let ym = points.iter().map(|p| p.1).sum::<f64>() / n;
        for &(j, y) in points {
            sxy += (x_of(j, i) - xm) * (y - ym);
            sxx += (x_of(j, i) - xm).powi(2);
        }
        dof += points.len() - 1;
        means.insert(i, (xm, ym));
    }
    if !(sxx > 0.0) || dof < 2 {
        return Err(Error::DegenerateFit("no separation has scans at two different j".into()));
    }
    let c2 = sxy / sxx;
    let offsets: BTreeMap<usize, f64> = means.iter().map(|(&i, &(xm, ym))| (i, ym - c2 * xm)).collect();
    let mut ss = 0.0;
    let mut phases = Vec::new();
    for (&i, points) in &by_i {
        for &(j, y) in points {
            ss += (y - c2 * x_of(j, i) - offsets[&i]).powi(2);
            phases.push((j, i, y));
        }
    }
    let n_params = 1 + by_i.len();
    let n_points = phases.len();
    let residual_rms = (ss / n_points as f64).sqrt();
    let c2_sigma = if n_points > n_params { (ss / (n_points - n_params) as f64 / sxx).sqrt() } else { 0.0 };
    Ok(DispersionFit { c2, c2_sigma, residual_rms, offsets, phases })
}
