mod common;

#[test]
fn two_runs_render_identical_reports() {
    let a = common::MockFixture::new(common::MOCK_SEED);
    let b = common::MockFixture::new(common::MOCK_SEED);
    common::check_determinism(&a, &b).unwrap();
}

#[test]
fn mean_se_format_is_checked() {
    assert!(common::check_mean_se_format("faithful  0.9283 ± 0.0123").is_ok());
    assert!(common::check_mean_se_format("faithful  0.93 ± 0.0123").is_err());
}
