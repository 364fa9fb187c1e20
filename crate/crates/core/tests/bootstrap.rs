mod common;

use editbench_core::harness::bootstrap_se;

#[test]
fn normal_fixture_matches_analytic_se() {
    common::check_bootstrap(19).unwrap();
}

#[test]
fn seed_changes_the_estimate() {
    let xs: Vec<f64> = (0..50).map(|i| (i * 7 % 13) as f64).collect();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let a = bootstrap_se(&xs, mean, 200, 1).unwrap();
    let b = bootstrap_se(&xs, mean, 200, 2).unwrap();
    assert_ne!(a, b);
}

#[test]
fn too_few_resamples_are_rejected() {
    let xs = [1.0, 2.0, 3.0];
    assert!(bootstrap_se(&xs, |s| s[0], 10, 0).is_err());
}

#[test]
fn estimate_does_not_depend_on_thread_count() {
    let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| bootstrap_se(&xs, mean, 500, 3).unwrap())
    };
    assert_eq!(run(1).to_bits(), run(4).to_bits());
}
