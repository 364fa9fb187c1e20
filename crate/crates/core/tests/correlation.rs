mod common;

use editbench_core::alignment::{average_ranks, kendall, pearson, spearman};
use editbench_core::validation::oracle_ranks;
use proptest::prelude::*;

#[test]
fn kernels_match_oracles() {
    common::check_correlations(17).unwrap();
}

#[test]
fn constant_input_is_undefined() {
    let x = [1.0, 1.0, 1.0];
    let y = [1.0, 2.0, 3.0];
    assert!(pearson(&x, &y).is_err());
    assert!(spearman(&x, &y).is_err());
    assert!(kendall(&x, &y).is_err());
}

#[test]
fn tau_b_with_ties() {
    // Two concordant pairs, no discordant, one tie in x.
    let v = kendall(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((v - 2.0 / 6f64.sqrt()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn ranks_match_oracle(xs in prop::collection::vec(0u8..6, 1..30)) {
        let x: Vec<f64> = xs.iter().map(|v| *v as f64).collect();
        prop_assert_eq!(average_ranks(&x), oracle_ranks(&x));
    }

    #[test]
    fn correlations_are_bounded_and_symmetric(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..25)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        for f in [pearson, spearman, kendall] {
            if let (Ok(a), Ok(b)) = (f(&x, &y), f(&y, &x)) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
