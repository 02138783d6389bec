//! Lower bounds from `psd_fill` against randomly generated density matrices.

use freqcert::certify::{psd_fill, CoherenceBoundMatrix, Entry, Estimate};
use nalgebra::{Complex, DMatrix, SymmetricEigen};
use proptest::prelude::*;

type C = Complex<f64>;

/// `G G† / Tr` from a column-major `n × r` factor.
fn density_from_factor(n: usize, r: usize, re: &[f64], im: &[f64]) -> DMatrix<C> {
    let g = DMatrix::from_fn(n, r, |i, k| C::new(re[i * r + k], im[i * r + k]));
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho / C::new(tr, 0.0)
}

fn min_eigenvalue(rho: &DMatrix<C>) -> f64 {
    SymmetricEigen::new(rho.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Correlated block `<jj|rho|kk>` of a `d² × d²` state.
fn correlated_block(full: &DMatrix<C>, d: usize) -> DMatrix<C> {
    DMatrix::from_fn(d, d, |j, k| full[(j * d + j, k * d + k)])
}

/// Reveals the magnitudes selected by `mask` (row-major over `j < k`) as
/// measured, optionally shrunk by `shrink` in `[0, 1]`.
fn partial_matrix(block: &DMatrix<C>, mask: &[bool], shrink: f64) -> CoherenceBoundMatrix {
    let n = block.nrows();
    let diag = (0..n).map(|j| Estimate::exact(block[(j, j)].re.max(0.0))).collect();
    let mut m = CoherenceBoundMatrix::new(diag).unwrap();
    let mut idx = 0;
    for j in 0..n {
        for k in j + 1..n {
            if mask[idx % mask.len()] {
                m.set(j, k, Entry::Measured { value: block[(j, k)].norm() * shrink, sigma: 0.0 });
            }
            idx += 1;
        }
    }
    m
}

fn violations(block: &DMatrix<C>, filled: &CoherenceBoundMatrix) -> Vec<(usize, usize, f64, f64)> {
    let n = block.nrows();
    let mut out = Vec::new();
    for a in 0..n {
        for c in a + 1..n {
            let truth = block[(a, c)].norm();
            let bound = filled.magnitude(a, c);
            if bound > truth + 1e-12 * (1.0 + truth) {
                out.push((a, c, bound, truth));
            }
        }
    }
    out
}

fn factor_strategy(max_n: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<bool>, f64)> {
    (3..=max_n, 1..=max_n).prop_flat_map(|(n, r)| {
        let r = r.min(n);
        (
            Just(n),
            Just(r),
            prop::collection::vec(-1.0..1.0f64, n * r),
            prop::collection::vec(-1.0..1.0f64, n * r),
            prop::collection::vec(prop::bool::weighted(0.5), n * (n - 1) / 2),
            prop_oneof![Just(1.0), 0.0..1.0f64],
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn fill_never_exceeds_true_coherence((n, r, re, im, mask, shrink) in factor_strategy(8)) {
        let rho = density_from_factor(n, r, &re, &im);
        // oracle: the instance really is a density matrix
        prop_assert!(min_eigenvalue(&rho) > -1e-12);
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let (filled, _) = psd_fill(&partial_matrix(&rho, &mask, shrink)).unwrap();
        let bad = violations(&rho, &filled);
        prop_assert!(bad.is_empty(), "violations {:?}", bad);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn fill_sound_on_correlated_block_of_full_state(
        (d, r) in (3usize..=4, 1usize..=6),
        seed_re in prop::collection::vec(-1.0..1.0f64, 16 * 6),
        seed_im in prop::collection::vec(-1.0..1.0f64, 16 * 6),
        mask in prop::collection::vec(any::<bool>(), 6),
    ) {
        let n = d * d;
        let full = density_from_factor(n, r, &seed_re[..n * r], &seed_im[..n * r]);
        prop_assert!(min_eigenvalue(&full) > -1e-12);
        let block = correlated_block(&full, d);
        let (filled, _) = psd_fill(&partial_matrix(&block, &mask, 1.0)).unwrap();
        prop_assert!(violations(&block, &filled).is_empty());
    }
}

/// Rank-one states with a measured chain pin the remaining coherences, so
/// the bounds are tight rather than trivially zero.
#[test]
fn bounds_are_tight_for_pure_states_with_a_measured_chain() {
    let amps = [0.5, 0.3, 0.6, 0.4, 0.35];
    let phases = [0.0, 1.1, -0.4, 2.0, 0.7];
    let n = amps.len();
    let psi = DMatrix::from_fn(n, 1, |j, _| C::from_polar(amps[j], phases[j]));
    let rho = &psi * psi.adjoint();
    let rho = rho.clone() / C::new(rho.trace().re, 0.0);
    let mut mask = vec![false; n * (n - 1) / 2];
    let mut idx = 0;
    for j in 0..n {
        for k in j + 1..n {
            mask[idx] = k == j + 1;
            idx += 1;
        }
    }
    let (filled, _) = psd_fill(&partial_matrix(&rho, &mask, 1.0)).unwrap();
    for a in 0..n {
        for c in a + 1..n {
            assert!((filled.magnitude(a, c) - rho[(a, c)].norm()).abs() < 1e-12, "({a},{c})");
        }
    }
}
