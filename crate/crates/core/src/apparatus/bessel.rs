//! Integer-order Bessel functions of the first kind and the sideband weights
//! of a sinusoidally driven phase modulator.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest truncation order accepted for a modulation index.
pub fn min_truncation(beta: f64) -> usize {
    beta.max(0.0).ceil() as usize + 20
}

/// `J_0(x) ..= J_nmax(x)` by Miller's downward recurrence, normalized with
/// `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_upto(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    // start well above both nmax and the turning point
    let start = {
        let m = nmax.max(ax.ceil() as usize) + 30 + (ax.sqrt() * 6.0) as usize;
        m + (m & 1)
    };
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / ax) * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        let n = k - 1;
        if n <= nmax {
            out[n] = cur;
        }
        if n % 2 == 0 && n > 0 {
            even_sum += cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            even_sum *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = cur + 2.0 * even_sum;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for any integer order.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_upto(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Sideband amplitudes `w_n = J_n(β)·exp(i·n·φ_rf)` for `n = -order..=order`,
/// stored at index `n + order`.
pub fn bessel_weights(beta: f64, order: usize, rf_phase: f64) -> Result<Vec<Complex64>> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("modulation index must be >= 0, got {beta}")));
    }
    let j = bessel_j_upto(order, beta);
    let n_max = order as i64;
    Ok((-n_max..=n_max)
        .map(|n| {
            let m = n.unsigned_abs() as usize;
            let mag = if n < 0 && m % 2 == 1 { -j[m] } else { j[m] };
            Complex64::from_polar(1.0, n as f64 * rf_phase) * mag
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // power series, independent of the recurrence
    fn series(n: u32, x: f64) -> f64 {
        let half = x / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..200 {
            term *= -half * half / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    }

    // Bessel's integral, trapezoid rule on a periodic integrand
    fn integral(n: i64, x: f64) -> f64 {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        (0..m).map(|k| (n as f64 * k as f64 * h - x * (k as f64 * h).sin()).cos()).sum::<f64>() / m as f64
    }

    #[test]
    fn matches_series_and_integral() {
        for &x in &[0.1, 0.5, 1.0, 1.4347, 2.0, 3.7, 5.0, 8.0, 10.0] {
            let vals = bessel_j_upto(25, x);
            for n in 0..=25u32 {
                let s = series(n, x);
                assert!((vals[n as usize] - s).abs() < 1e-12, "J_{n}({x}) {} vs {s}", vals[n as usize]);
                assert!((vals[n as usize] - integral(n as i64, x)).abs() < 1e-12);
            }
        }
        assert!((bessel_j(-3, 2.0) + series(3, 2.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_modulation() {
        let w = bessel_weights(0.0, 20, 0.3).unwrap();
        assert_eq!(w.len(), 41);
        assert_eq!(w[20], Complex64::new(1.0, 0.0));
        assert!(w.iter().enumerate().all(|(k, v)| k == 20 || v.norm() == 0.0));
    }

    #[test]
    fn first_crossing_of_j0_and_j1() {
        // bisection on the series oracle
        let f = |x: f64| series(0, x) - series(1, x);
        let (mut lo, mut hi) = (1.0, 2.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let crossing = 0.5 * (lo + hi);
        assert!((crossing - 1.4347).abs() < 1e-4);
        let w = bessel_weights(crossing, min_truncation(crossing), 0.0).unwrap();
        let c = min_truncation(crossing);
        assert!((w[c].norm() - w[c + 1].norm()).abs() < 1e-12);
    }

    #[test]
    fn unitarity() {
        for &beta in &[0.5, 1.0, 2.0, 5.0, 7.5, 10.0] {
            let w = bessel_weights(beta, min_truncation(beta), 1.1).unwrap();
            let total: f64 = w.iter().map(|v| v.norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-12, "beta {beta}: {total}");
        }
    }

    #[test]
    fn negative_beta_rejected() {
        assert!(bessel_weights(-0.1, 20, 0.0).is_err());
    }

    #[test]
    fn rf_phase_convention() {
        let w = bessel_weights(1.0, 21, 0.4).unwrap();
        let arg = (w[21 + 2] / w[21 + 2].norm()).arg();
        assert!((arg - 0.8).abs() < 1e-12);
    }
}
