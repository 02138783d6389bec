use freqcert_demo::{bell_fringe_native, certify_uniform_native, sideband_powers_native};

#[test]
fn noiseless_fringe_has_unit_visibility() {
    let f = bell_fringe_native(3, false, 1).unwrap();
    assert!((f.visibility() - 1.0).abs() < 1e-9);
    assert!(f.violates());
    assert_eq!(f.theta().len(), f.normalized().len());
}

#[test]
fn uniform_certification_matches_library() {
    let c = certify_uniform_native(11, &[1, 2, 6], &[0.9685, 0.9794, 0.968]).unwrap();
    assert_eq!(c.k_star(), 11);
    assert_eq!(c.certified().len(), 10);
    assert!(certify_uniform_native(11, &[1, 2], &[0.9]).is_err());
}

#[test]
fn sideband_powers_sum_to_one() {
    let p = sideband_powers_native(2.4).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(sideband_powers_native(-1.0).is_err());
}
