use serde::{Deserialize, Serialize};

use super::{CoherenceBoundMatrix, Entry};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillStats {
    pub sweeps: usize,
    pub bounded: usize,
}

/// Lower bound on `|x|` for the 3×3 PSD matrix
///
/// ```text
/// [ p_a   u    x  ]
/// [ u*   p_b   v  ]
/// [ x*   v*   p_c ]
/// ```
///
/// given `|u|, |v|`: `x` must lie in a disc of center `u·v/p_b` and radius
/// `sqrt((p_a - |u|²/p_b)(p_c - |v|²/p_b))`. Increasing in `|u|` and `|v|`,
/// so lower bounds may be substituted for them. Capped at `sqrt(p_a·p_c)`,
/// which no coherence can exceed; without the cap rounding errors compound
/// around cycles of bounded entries.
#[inline]
pub(crate) fn subdeterminant_bound(p_a: f64, p_b: f64, p_c: f64, u: f64, v: f64) -> f64 {
    let ra = (p_a - u * u / p_b).max(0.0);
    let rc = (p_c - v * v / p_b).max(0.0);
    (u * v / p_b - (ra * rc).sqrt()).clamp(0.0, (p_a * p_c).sqrt())
}

/// Lower-bounds every non-measured off-diagonal magnitude through all 3×3
/// principal submatrices, iterating sweeps in order of increasing mode
/// distance until no bound grows. Measured entries are left untouched.
pub fn psd_fill(matrix: &CoherenceBoundMatrix) -> Result<(CoherenceBoundMatrix, FillStats)> {
    let d = matrix.d();
    let p: Vec<f64> = matrix.diagonal().iter().map(|e| e.value).collect();
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Numerical("diagonal must be finite and non-negative".into()));
    }
    let mut mag = vec![0.0; d * d];
    let mut free = vec![false; d * d];
    for a in 0..d {
        mag[a * d + a] = p[a];
        for c in 0..d {
            if a != c {
                let e = matrix.get(a, c);
                mag[a * d + c] = e.magnitude();
                free[a * d + c] = !e.is_measured();
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (1..d)
        .flat_map(|dist| (0..d - dist).map(move |a| (a, a + dist)))
        .filter(|&(a, c)| free[a * d + c])
        .collect();

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut grew = false;
        for &(a, c) in &pairs {
            let current = mag[a * d + c];
            let mut best = current;
            let (row_a, row_c) = (&mag[a * d..(a + 1) * d], &mag[c * d..(c + 1) * d]);
            for b in 0..d {
                if b == a || b == c || p[b] <= 0.0 {
                    continue;
                }
                let (u, v) = (row_a[b], row_c[b]);
                if u == 0.0 || v == 0.0 {
                    continue;
                }
                let bound = subdeterminant_bound(p[a], p[b], p[c], u, v);
                if bound > best {
                    best = bound;
                }
            }
            if best > current {
                if best - current > 1e-15 * best.max(f64::MIN_POSITIVE) {
                    grew = true;
                }
                mag[a * d + c] = best;
                mag[c * d + a] = best;
            }
        }
        if !grew {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::Numerical(format!("psd_fill did not converge in {MAX_SWEEPS} sweeps")));
        }
    }

    let mut out = matrix.clone();
    let mut bounded = 0;
    for &(a, c) in &pairs {
        let v = mag[a * d + c];
        if v > 0.0 {
            bounded += 1;
            out.set(a, c, Entry::LowerBounded { value: v });
        } else if matches!(matrix.get(a, c), Entry::LowerBounded { .. }) {
            out.set(a, c, Entry::LowerBounded { value: 0.0 });
        }
    }
    Ok((out, FillStats { sweeps, bounded }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::Estimate;

    fn chain3(p: f64, m01: f64, m12: f64) -> CoherenceBoundMatrix {
        let mut m = CoherenceBoundMatrix::new(vec![Estimate::exact(p); 3]).unwrap();
        m.set(0, 1, Entry::Measured { value: m01, sigma: 0.0 });
        m.set(1, 2, Entry::Measured { value: m12, sigma: 0.0 });
        m
    }

    #[test]
    fn rank_one_chain_forces_full_coherence() {
        let third = 1.0 / 3.0;
        let (f, _) = psd_fill(&chain3(third, third, third)).unwrap();
        assert!((f.magnitude(0, 2) - third).abs() < 1e-15);
    }

    #[test]
    fn zero_chain_gives_zero() {
        let (f, _) = psd_fill(&chain3(1.0 / 3.0, 0.0, 0.0)).unwrap();
        assert_eq!(f.magnitude(0, 2), 0.0);
        assert_eq!(f.get(0, 2), Entry::Unknown);
    }

    #[test]
    fn measured_entries_not_overwritten() {
        let mut m = chain3(1.0 / 3.0, 0.3, 0.3);
        m.set(0, 2, Entry::Measured { value: 0.01, sigma: 0.0 });
        let (f, stats) = psd_fill(&m).unwrap();
        assert_eq!(f.get(0, 2), Entry::Measured { value: 0.01, sigma: 0.0 });
        assert_eq!(stats.bounded, 0);
    }

    #[test]
    fn zero_intermediary_is_skipped() {
        let mut m = CoherenceBoundMatrix::new(vec![
            Estimate::exact(0.5),
            Estimate::exact(0.0),
            Estimate::exact(0.5),
        ])
        .unwrap();
        m.set(0, 1, Entry::Measured { value: 0.0, sigma: 0.0 });
        m.set(1, 2, Entry::Measured { value: 0.0, sigma: 0.0 });
        let (f, _) = psd_fill(&m).unwrap();
        assert_eq!(f.magnitude(0, 2), 0.0);
    }

    #[test]
    fn bound_matches_angle_addition_for_uniform_diagonal() {
        // with p_a = p_b = p_c = 1 the bound is cos(acos u + acos v)
        for &(u, v) in &[(0.9f64, 0.95f64), (0.99, 0.5), (0.7, 0.7)] {
            let expected = (u.acos() + v.acos()).cos().max(0.0);
            assert!((subdeterminant_bound(1.0, 1.0, 1.0, u, v) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_one_cycle_stays_finite() {
        // rounding leaves |u|² a hair above p_a·p_b
        let p = [0.1, 0.25, 0.3, 0.35];
        let mut m = CoherenceBoundMatrix::new(p.iter().map(|&v| Estimate::exact(v)).collect()).unwrap();
        for a in 0..3 {
            m.set(a, 3, Entry::Measured { value: (p[a] * p[3]).sqrt() * (1.0 + 1e-15), sigma: 0.0 });
        }
        let (f, _) = psd_fill(&m).unwrap();
        for a in 0..3 {
            for c in a + 1..3 {
                assert!(f.magnitude(a, c) <= (p[a] * p[c]).sqrt());
            }
        }
    }

    #[test]
    fn second_pass_is_a_fixpoint() {
        let mut m = CoherenceBoundMatrix::new(vec![Estimate::exact(1.0 / 40.0); 40]).unwrap();
        for j in 0..39 {
            m.set(j, j + 1, Entry::Measured { value: 0.97 / 40.0, sigma: 0.0 });
        }
        for j in 0..34 {
            m.set(j, j + 6, Entry::Measured { value: 0.96 / 40.0, sigma: 0.0 });
        }
        let (once, _) = psd_fill(&m).unwrap();
        let (twice, stats) = psd_fill(&once).unwrap();
        assert_eq!(stats.sweeps, 1);
        for a in 0..40 {
            for c in 0..40 {
                assert!((once.magnitude(a, c) - twice.magnitude(a, c)).abs() <= 1e-12);
            }
        }
    }
}
