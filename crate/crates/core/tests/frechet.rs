mod common;

use editbench_core::backends::{fid_between_sets, frechet_distance, gaussian_fit};
use proptest::prelude::*;

#[test]
fn suite() {
    common::check_frechet(11).unwrap();
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let mut r = common::rng(1);
    let (m2, c2) = (common::random_vector(&mut r, 2), common::random_psd(&mut r, 2));
    let (m3, c3) = (common::random_vector(&mut r, 3), common::random_psd(&mut r, 3));
    assert!(frechet_distance(&m2, &c2, &m3, &c3).is_err());
}

#[test]
fn sets_need_more_samples_than_dimensions() {
    let few: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64, 1.0, 2.0, 3.0]).collect();
    assert!(fid_between_sets(&few, &few).is_err());
}

#[test]
fn gaussian_fit_uses_unbiased_covariance() {
    let xs = vec![vec![0.0], vec![2.0]];
    let (mu, cov) = gaussian_fit(&xs).unwrap();
    assert_eq!(mu[0], 1.0);
    assert_eq!(cov[(0, 0)], 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn translation_adds_squared_shift(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let mut r = common::rng(seed);
        let d = 3;
        let (mu, cov) = (common::random_vector(&mut r, d), common::random_psd(&mut r, d));
        let moved = mu.add_scalar(shift);
        let v = frechet_distance(&mu, &cov, &moved, &cov).unwrap();
        prop_assert!((v - d as f64 * shift * shift).abs() < 1e-6 * (1.0 + v));
    }
}
