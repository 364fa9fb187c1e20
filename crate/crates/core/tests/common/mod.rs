//! Checks shared by the per-suite integration tests and the acceptance
//! runner. Each returns a one-line summary on success and the first
//! violation on failure.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use editbench_core::alignment::{
    fit_weights, kendall, pearson, simplex_grid, spearman, FitOptions, FitProblem, GroupTerms,
    TermPart,
};
use editbench_core::backends::{frechet_distance, ImageRef};
use editbench_core::filter::best_match;
use editbench_core::harness::bootstrap_se;
use editbench_core::metrics::{
    iq_score, l2_similarity, position_consistency, size_consistency, size_fidelity, SizeThresholds,
};
use editbench_core::model::corpus::load_corpus;
use editbench_core::model::io::load_records;
use editbench_core::model::{
    keys, Criterion, EditParams, EditQuery, EditType, ImageRecord, MetricVector, SampleResult,
    SizeDirection,
};
use editbench_core::pipeline::{self, RunContext};
use editbench_core::query::{
    background_pool, build_stats, check_feasible, rank_backgrounds, GenerationInputs, OptionSets,
};
use editbench_core::validation::{
    self, check_golden, mock_config, oracle_frechet_diagonal, oracle_grid_argmax, oracle_kendall,
    oracle_pearson, oracle_spearman, ref_iq, ref_position_consistency, ref_size_consistency,
    ref_size_fidelity, DenseQuestion, GoldenCheck, GoldenFixture, MockRun,
};
use editbench_core::workflows::{criteria_for, object_flag, TARGET_FLAG};
use editbench_core::Raster;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

pub const MOCK_SEED: u64 = 7;
pub const RECOLOR_OC_MIN: f64 = 0.995;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- formulas

pub const FORMULA_TOL: f64 = 1e-12;
pub const GRID_POINTS: usize = 1000;

/// Score formulas against the reference implementations on a dense grid.
pub fn check_formulas() -> Check {
    let start = Instant::now();
    ensure!(iq_score(0.0).map_err(e)? == 1.0, "iq_score(0) != 1");
    let iq25 = iq_score(25.0).map_err(e)?;
    ensure!(
        (iq25 - (1.0 - 1f64.tanh())).abs() <= FORMULA_TOL,
        "iq_score(25) = {iq25}"
    );
    let th = SizeThresholds::default();
    let (h, w) = (48.0, 64.0);
    let a0 = 300.0;
    let mut worst = 0.0f64;
    for i in 0..GRID_POINTS {
        let t = i as f64 / (GRID_POINTS - 1) as f64;
        // rho sweeps 0..3.5, crossing every breakpoint.
        let ae = (3.5 * t).powi(2) * a0;
        for dir in [SizeDirection::Larger, SizeDirection::Smaller] {
            let got = size_fidelity(a0, ae, dir, th).map_err(e)?;
            worst = worst.max((got - ref_size_fidelity(a0, ae, dir, th.r1, th.r2)).abs());
        }
        let got = size_consistency(a0, ae, h, w).map_err(e)?;
        worst = worst.max((got - ref_size_consistency(a0, ae, h, w)).abs());
        let fid = 200.0 * t;
        worst = worst.max((iq_score(fid).map_err(e)? - ref_iq(fid)).abs());
        // Displacements up to 1.2 diagonals in a rotating direction.
        let diag = (h * h + w * w).sqrt();
        let angle = 0.37 * i as f64;
        let d = 1.2 * diag * t;
        let c0 = (20.0, 30.0);
        let ce = (c0.0 + d * angle.cos(), c0.1 + d * angle.sin());
        let got = position_consistency(c0, ce, a0, h, w).map_err(e)?;
        worst = worst.max((got - ref_position_consistency(c0, ce, h, w)).abs());
    }
    let elapsed = start.elapsed();
    ensure!(worst <= FORMULA_TOL, "max error {worst:e} over the grid");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{GRID_POINTS} grid points, max error {worst:.1e}, {elapsed:.2?}"))
}

// ---------------------------------------------------------------- frechet

pub fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d + 2, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() / (d + 2) as f64
}

pub fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0))
}

pub fn check_frechet(seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst_identical = 0.0f64;
    for _ in 0..20 {
        let d = r.random_range(1..=8);
        let (mu, cov) = (random_vector(&mut r, d), random_psd(&mut r, d));
        worst_identical = worst_identical.max(frechet_distance(&mu, &cov, &mu, &cov).map_err(e)?);
    }
    ensure!(worst_identical <= 1e-10, "identical Gaussians gave {worst_identical:e}");

    let mut worst_diag = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..=8);
        let mu1: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
        let mu2: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
        let v1: Vec<f64> = (0..d).map(|_| r.random_range(0.0..4.0)).collect();
        let v2: Vec<f64> = (0..d).map(|_| r.random_range(0.0..4.0)).collect();
        let got = frechet_distance(
            &DVector::from_column_slice(&mu1),
            &DMatrix::from_diagonal(&DVector::from_column_slice(&v1)),
            &DVector::from_column_slice(&mu2),
            &DMatrix::from_diagonal(&DVector::from_column_slice(&v2)),
        )
        .map_err(e)?;
        worst_diag = worst_diag.max((got - oracle_frechet_diagonal(&mu1, &v1, &mu2, &v2)).abs());
    }
    ensure!(worst_diag <= 1e-8, "diagonal closed form off by {worst_diag:e}");

    let mut worst_asym = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..=8);
        let (m1, c1) = (random_vector(&mut r, d), random_psd(&mut r, d));
        let (m2, c2) = (random_vector(&mut r, d), random_psd(&mut r, d));
        let ab = frechet_distance(&m1, &c1, &m2, &c2).map_err(e)?;
        let ba = frechet_distance(&m2, &c2, &m1, &c1).map_err(e)?;
        ensure!(ab >= 0.0 && ba >= 0.0, "negative distance {ab} / {ba}");
        worst_asym = worst_asym.max((ab - ba).abs() / ab.abs().max(1.0));
    }
    ensure!(worst_asym <= 1e-8, "asymmetry {worst_asym:e}");
    Ok(format!(
        "identical {worst_identical:.1e}, diagonal {worst_diag:.1e}, asymmetry {worst_asym:.1e}"
    ))
}

// ---------------------------------------------------------------- correlation

pub const CORRELATION_TOL: f64 = 1e-12;

/// Random paired samples; odd fixtures draw from a handful of values so
/// ties are common.
pub fn correlation_fixture(r: &mut ChaCha8Rng, i: usize) -> (Vec<f64>, Vec<f64>) {
    let n = r.random_range(3..=40);
    let draw = |r: &mut ChaCha8Rng| -> f64 {
        if i % 2 == 1 {
            r.random_range(0..4) as f64
        } else {
            r.random_range(-5.0..5.0)
        }
    };
    let x: Vec<f64> = (0..n).map(|_| draw(r)).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.5 * v + draw(r)).collect();
    (x, y)
}

fn compare_kernel(
    name: &str,
    got: editbench_core::Result<f64>,
    want: Option<f64>,
    worst: &mut f64,
) -> Result<(), String> {
    match (got, want) {
        (Ok(g), Some(w)) => {
            *worst = worst.max((g - w).abs());
            Ok(())
        }
        (Err(_), None) => Ok(()),
        (g, w) => Err(format!("{name}: kernel {g:?}, oracle {w:?}")),
    }
}

pub fn check_correlations(seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut tied = 0;
    for i in 0..200 {
        let (x, y) = correlation_fixture(&mut r, i);
        let distinct: BTreeSet<u64> = x.iter().map(|v| v.to_bits()).collect();
        if distinct.len() < x.len() {
            tied += 1;
        }
        compare_kernel("pearson", pearson(&x, &y), oracle_pearson(&x, &y), &mut worst)?;
        compare_kernel("spearman", spearman(&x, &y), oracle_spearman(&x, &y), &mut worst)?;
        compare_kernel("kendall", kendall(&x, &y), oracle_kendall(&x, &y), &mut worst)?;
    }
    ensure!(worst <= CORRELATION_TOL, "max error {worst:e}");
    ensure!(tied >= 50, "only {tied} fixtures had ties");
    Ok(format!("200 fixtures ({tied} with ties), max error {worst:.1e}"))
}

// ---------------------------------------------------------------- bootstrap

pub fn check_bootstrap(seed: u64) -> Check {
    let mut r = rng(seed);
    let xs: Vec<f64> = (0..400).map(|_| StandardNormal.sample(&mut r)).collect();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let se = bootstrap_se(&xs, mean, 1000, seed).map_err(e)?;
    let again = bootstrap_se(&xs, mean, 1000, seed).map_err(e)?;
    let analytic = 1.0 / 400f64.sqrt();
    let rel = (se - analytic).abs() / analytic;
    ensure!(se.to_bits() == again.to_bits(), "not deterministic: {se} vs {again}");
    ensure!(rel <= 0.25, "se {se:.5} is {:.1}% off {analytic}", 100.0 * rel);
    Ok(format!("se {se:.5} vs analytic {analytic:.5} ({:.1}% off)", 100.0 * rel))
}

// ---------------------------------------------------------------- alignment

pub fn dense_terms(values: &[f64]) -> GroupTerms {
    GroupTerms {
        offset: 0.0,
        parts: vec![TermPart {
            coef: 1.0,
            terms: values.iter().copied().enumerate().collect(),
        }],
    }
}

pub fn dense_problem(questions: &[DenseQuestion], dim: usize) -> FitProblem {
    let pairs = questions
        .iter()
        .map(|q| {
            (
                q.model_a.clone(),
                dense_terms(&q.values_a),
                q.model_b.clone(),
                dense_terms(&q.values_b),
                q.a_wins,
            )
        })
        .collect();
    FitProblem::from_pairs(Criterion::OF, dim, pairs).expect("valid dense instance")
}

/// Random questions over `models` models; half the instances quantize the
/// values so that ties between candidates are common.
pub fn random_dense(r: &mut ChaCha8Rng, dim: usize, models: usize, questions: usize, coarse: bool) -> Vec<DenseQuestion> {
    let value = |r: &mut ChaCha8Rng| -> f64 {
        if coarse {
            r.random_range(0..3) as f64 / 2.0
        } else {
            r.random_range(0.0..1.0)
        }
    };
    let mut out = Vec::with_capacity(questions);
    // Every model shows up at least once.
    for k in 0..questions {
        let a = if k < models { k } else { r.random_range(0..models) };
        let mut b = r.random_range(0..models - 1);
        if b >= a {
            b += 1;
        }
        out.push(DenseQuestion {
            model_a: format!("m{a}"),
            values_a: (0..dim).map(|_| value(r)).collect(),
            model_b: format!("m{b}"),
            values_b: (0..dim).map(|_| value(r)).collect(),
            a_wins: r.random_bool(0.5),
        });
    }
    out
}

pub fn opts(step: f64) -> FitOptions {
    FitOptions {
        step,
        coarse_to_fine: false,
        ..FitOptions::default()
    }
}

/// fit_weights against the brute-force oracle on 50 random instances.
pub fn check_fit_vs_oracle(seed: u64) -> Result<(usize, usize), String> {
    let mut r = rng(seed);
    let mut exact = 0;
    let mut tied = 0;
    for i in 0..50 {
        let dim = r.random_range(1..=3);
        let step = [1.0, 0.5, 0.25][r.random_range(0..3)];
        let models = r.random_range(3..=6);
        let n = r.random_range(models..=30);
        let qs = random_dense(&mut r, dim, models, n, i % 2 == 1);
        let got = fit_weights(&dense_problem(&qs, dim), &opts(step)).map_err(e)?;
        let want = oracle_grid_argmax(&qs, dim, step);
        ensure!(
            got.degenerate == want.degenerate,
            "instance {i}: degenerate {} vs oracle {}",
            got.degenerate,
            want.degenerate
        );
        let same_w = got.weights.len() == want.weights.len()
            && got.weights.iter().zip(&want.weights).all(|(a, b)| (a - b).abs() <= 1e-12);
        let same_r = match (got.correlation, want.correlation) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        ensure!(
            same_r,
            "instance {i}: correlation {:?} vs oracle {:?}",
            got.correlation,
            want.correlation
        );
        if same_w {
            exact += 1;
        } else {
            // Only acceptable when the oracle's own choice scores the same.
            let theirs = dense_problem(&qs, dim).correlation(&want.weights);
            let ours = dense_problem(&qs, dim).correlation(&got.weights);
            ensure!(
                matches!((theirs, ours), (Some(a), Some(b)) if (a - b).abs() <= 1e-12),
                "instance {i}: weights {:?} vs oracle {:?}",
                got.weights,
                want.weights
            );
            tied += 1;
        }
    }
    Ok((exact, tied))
}

/// Humans follow component 0 exactly; the other components are noise.
pub fn tracking_instance(seed: u64, dim: usize) -> Vec<DenseQuestion> {
    let mut r = rng(seed);
    let models = 6;
    let quality: Vec<f64> = (0..models).map(|m| 0.15 * m as f64).collect();
    let mut out = Vec::new();
    for k in 0..240 {
        let a = k % models;
        let b = (a + 1 + r.random_range(0..models - 1)) % models;
        let mut side = |m: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..dim).map(|_| r.random_range(0.0..1.0)).collect();
            v[0] = (quality[m] + r.random_range(0.0..0.3)).min(1.0);
            v
        };
        let (va, mut vb) = (side(a), side(b));
        if va[0] == vb[0] {
            vb[0] = (vb[0] - 1e-3).max(0.0);
        }
        out.push(DenseQuestion {
            model_a: format!("m{a}"),
            model_b: format!("m{b}"),
            a_wins: va[0] > vb[0],
            values_a: va,
            values_b: vb,
        });
    }
    out
}

pub fn check_tracking(seed: u64) -> Check {
    let qs = tracking_instance(seed, 3);
    let fit = fit_weights(&dense_problem(&qs, 3), &opts(0.05)).map_err(e)?;
    let r = fit.correlation.ok_or("fitted correlation undefined")?;
    let u = fit.uniform_correlation.ok_or("uniform correlation undefined")?;
    ensure!(r >= 0.99, "fitted pearson {r}");
    ensure!(u < r, "uniform {u} not below fitted {r}");
    Ok(format!("fitted {r:.4} at {:?}, uniform {u:.4}", fit.weights))
}

/// C(n, k) by the multiplicative formula.
pub fn choose(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

pub fn check_grid_counts() -> Check {
    let mut checked = 0;
    for d in 1..=5usize {
        for step in [1.0, 0.5, 0.25, 0.2, 0.1, 0.05, 0.02, 0.01] {
            let grid = simplex_grid(d, step).map_err(e)?;
            let n = (1.0 / step).round() as u64;
            let want = choose(n + d as u64 - 1, d as u64 - 1);
            ensure!(grid.count() == want, "({d}, {step}): count {} vs {want}", grid.count());
            let walked = grid.compositions().count() as u128;
            ensure!(walked == want, "({d}, {step}): enumerated {walked} vs {want}");
            checked += 1;
        }
    }
    let big = simplex_grid(5, 0.01).map_err(e)?.count();
    ensure!(big == 4_598_126, "(5, 0.01) count {big}");
    Ok(format!("{checked} (d, step) pairs, (5, 0.01) = {big}"))
}

/// The full 5-dimensional search at step 0.01 on a dense instance.
pub fn timed_full_search(seed: u64) -> Result<(Duration, u64), String> {
    let mut r = rng(seed);
    let qs = random_dense(&mut r, 5, 9, 400, false);
    let start = Instant::now();
    let fit = fit_weights(&dense_problem(&qs, 5), &opts(0.01)).map_err(e)?;
    Ok((start.elapsed(), fit.candidates))
}

pub fn check_alignment(seed: u64) -> Check {
    let (exact, tied) = check_fit_vs_oracle(seed)?;
    let tracking = check_tracking(seed)?;
    let grid = check_grid_counts()?;
    let (elapsed, candidates) = timed_full_search(seed)?;
    ensure!(candidates >= 4_598_126, "full search visited {candidates} candidates");
    ensure!(elapsed < Duration::from_secs(600), "full search took {elapsed:?}");
    Ok(format!(
        "oracle {exact} exact + {tied} tied of 50; tracking {tracking}; {grid}; 5-dim/0.01 in {elapsed:.1?}"
    ))
}

// ---------------------------------------------------------------- mock runs

pub struct MockFixture {
    pub dir: tempfile::TempDir,
    pub run: MockRun,
    pub seed: u64,
}

impl MockFixture {
    pub fn new(seed: u64) -> MockFixture {
        let dir = tempfile::tempdir().expect("tempdir");
        let run = validation::run_mock_pipeline(dir.path(), seed).expect("mock pipeline");
        MockFixture { dir, run, seed }
    }

    pub fn ctx(&self) -> RunContext {
        RunContext::new(mock_config(self.seed), self.run.run_dir.clone())
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.path().join("corpus")
    }

    pub fn samples(&self) -> Vec<SampleResult> {
        load_records(&self.ctx().path(pipeline::SAMPLES)).expect("samples")
    }

    pub fn queries(&self) -> Vec<EditQuery> {
        load_records(&self.ctx().path(pipeline::CAPTIONED)).expect("queries")
    }
}

pub fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden/mock_metrics.json")
}

/// Metric vectors keyed by `<model>/<query>`, as stored in the golden file.
pub fn metric_table(samples: &[SampleResult]) -> BTreeMap<String, MetricVector> {
    samples
        .iter()
        .map(|s| (format!("{}/{}", s.model_id, s.query_id), s.metrics.clone()))
        .collect()
}

fn evaluate_with_jobs(fx: &MockFixture, jobs: usize) -> Result<String, String> {
    let ctx = fx.ctx();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(e)?;
    let weights = ctx.config.weights().map_err(e)?;
    let (samples, failures) = pool
        .install(|| pipeline::evaluate_samples(&ctx, &fx.queries(), &fx.run.edited_dir, &weights))
        .map_err(e)?;
    ensure!(failures.is_empty(), "{} evaluation failures", failures.len());
    serde_json::to_string_pretty(&metric_table(&samples)).map_err(e)
}

struct Conventions {
    hits: BTreeMap<&'static str, usize>,
}

impl Conventions {
    fn hit(&mut self, name: &'static str) {
        *self.hits.entry(name).or_default() += 1;
    }
}

fn close(a: Option<f64>, b: f64, what: &str, id: &str) -> Result<(), String> {
    let a = a.ok_or_else(|| format!("{id}: {what} missing"))?;
    ensure!((a - b).abs() <= 1e-12, "{id}: {what} = {a}, expected {b}");
    Ok(())
}

/// Criteria sets, detection-failure conventions and golden metric vectors.
pub fn check_workflows(fx: &MockFixture, golden: &Path) -> Check {
    let ctx = fx.ctx();
    let samples = fx.samples();
    let queries: BTreeMap<String, EditQuery> =
        fx.queries().into_iter().map(|q| (q.query_id.clone(), q)).collect();
    let images: BTreeMap<String, ImageRecord> =
        load_records::<ImageRecord>(&ctx.path(pipeline::PREPARED_IMAGES))
            .map_err(e)?
            .into_iter()
            .map(|r| (r.image_id.clone(), r))
            .collect();
    let backends = ctx
        .backends(&[ctx.path(pipeline::PREPARED_SIDECARS), fx.run.edited_dir.clone()])
        .map_err(e)?;
    let prepared = ctx.path(pipeline::PREPARED_DIR);
    let mut conv = Conventions { hits: BTreeMap::new() };
    let mut recolors = 0;

    for s in &samples {
        let id = format!("{}/{}", s.model_id, s.query_id);
        let want: BTreeSet<Criterion> = criteria_for(s.edit_type).iter().copied().collect();
        let got: BTreeSet<Criterion> = s.scores.present().into_iter().collect();
        ensure!(got == want, "{id}: criteria {got:?}, expected {want:?}");

        let q = &queries[&s.query_id];
        let image = &images[&s.image_id];
        let original = Raster::load_png(&prepared.join(&image.source_path)).map_err(e)?;
        let edited =
            Raster::load_png(&pipeline::edited_path(&fx.run.edited_dir, &s.model_id, &s.query_id)).map_err(e)?;
        let m0 = || -> Result<_, String> {
            let obj = image
                .object(q.target_object_id.as_deref().ok_or("no target")?)
                .ok_or("target missing")?;
            let found = backends
                .segmenter
                .detect_all(ImageRef { key: &image.image_id, raster: &original }, &obj.class_name)
                .map_err(e)?;
            Ok(best_match(&obj.bbox, &found).ok_or("no original detection")?.mask.clone())
        };
        let masked_l2 = |m| -> Result<f64, String> {
            l2_similarity(&original.blank(m).map_err(e)?, &edited.blank(m).map_err(e)?).map_err(e)
        };
        let failed = s.metrics.detection_failed(TARGET_FLAG);
        match s.edit_type {
            EditType::Addition if failed => {
                close(s.scores.of, 0.0, "OF", &id)?;
                let full = l2_similarity(&original, &edited).map_err(e)?;
                close(s.metrics.get(keys::BC_L2), full, "bc.l2 on full images", &id)?;
                conv.hit("addition OF=0, full-image BC");
            }
            EditType::Removal if failed => {
                close(s.scores.of, 1.0, "OF", &id)?;
                close(s.metrics.get(keys::BC_L2), masked_l2(&m0()?)?, "bc.l2 outside m0", &id)?;
                conv.hit("removal OF=1, BC outside original mask");
            }
            EditType::Replacement | EditType::Resizing | EditType::AttributeChange if failed => {
                close(s.scores.of, 0.0, "OF", &id)?;
                close(s.scores.oc, 0.0, "OC", &id)?;
                close(s.metrics.get(keys::BC_L2), masked_l2(&m0()?)?, "bc.l2 outside m0", &id)?;
                conv.hit("object edit OF=OC=0, BC outside original mask");
            }
            EditType::BackgroundChange => {
                let n = image.editable_objects().count();
                let lost = image
                    .editable_objects()
                    .filter(|o| s.metrics.detection_failed(&object_flag(&o.object_id)))
                    .count();
                if lost > 0 {
                    let cap = (n - lost) as f64 / n as f64 + 1e-12;
                    for k in [keys::OC_LPIPS, keys::OC_DINO, keys::OC_L2, keys::OC_POS, keys::OC_SIZE] {
                        let v = s.metrics.get(k).ok_or(format!("{id}: {k} missing"))?;
                        ensure!(v <= cap, "{id}: {k} = {v} exceeds {cap} with {lost}/{n} undetected");
                    }
                    conv.hit("background OC counts undetected objects as 0");
                }
            }
            EditType::AttributeChange if s.model_id == "faithful" => {
                let oc = s.scores.oc.ok_or(format!("{id}: OC missing"))?;
                // 8-bit PNG storage leaves a residue at antialiased crop borders.
                ensure!(oc >= RECOLOR_OC_MIN, "{id}: exact recolor gave OC {oc}");
                recolors += 1;
            }
            _ => {}
        }
    }
    for name in [
        "addition OF=0, full-image BC",
        "removal OF=1, BC outside original mask",
        "object edit OF=OC=0, BC outside original mask",
        "background OC counts undetected objects as 0",
    ] {
        ensure!(conv.hits.get(name).copied().unwrap_or(0) > 0, "convention never exercised: {name}");
    }
    ensure!(recolors > 0, "no faithful recolor samples");

    let one = evaluate_with_jobs(fx, 1)?;
    let four = evaluate_with_jobs(fx, 4)?;
    ensure!(one == four, "metric vectors differ between 1 and 4 jobs");
    let stored = serde_json::to_string_pretty(&metric_table(&samples)).map_err(e)?;
    ensure!(one == stored, "re-evaluation differs from the stored samples");
    let fixture = GoldenFixture {
        fixture_id: "mock_metrics".into(),
        inputs: serde_json::json!({
            "corpus": "mock",
            "images": validation::MOCK_IMAGES,
            "seed": fx.seed,
            "editors": validation::MockEditor::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        }),
        expected: serde_json::from_str(&one).map_err(e)?,
        provenance: "pipeline::evaluate_samples with oracle segmentation, checked by the conventions above".into(),
    };
    let golden_state = match check_golden(golden, &fixture).map_err(e)? {
        GoldenCheck::Matches => "golden matches",
        GoldenCheck::Blessed => "golden blessed",
        GoldenCheck::Missing => return Err(format!("golden file {} missing", golden.display())),
        GoldenCheck::Differs { line, expected, actual } => {
            return Err(format!("golden differs at line {line}: {expected} vs {actual}"))
        }
    };
    let hits: usize = conv.hits.values().sum();
    Ok(format!(
        "{} samples, {hits} failure-convention hits, {recolors} recolors, 1 vs 4 jobs identical, {golden_state}",
        samples.len()
    ))
}

// ---------------------------------------------------------------- queries

pub fn check_queries(fx: &MockFixture) -> Check {
    let ctx = fx.ctx();
    let lexicon = ctx.config.lexicon().map_err(e)?;
    let raw = load_corpus(&fx.corpus(), &lexicon).map_err(e)?;
    let stats = build_stats(&raw.records, &lexicon);
    let backends = ctx.backends(&[ctx.path(pipeline::PREPARED_SIDECARS)]).map_err(e)?;
    let options = OptionSets::default();
    let inputs = GenerationInputs {
        stats: &stats,
        lexicon: &lexicon,
        options: &options,
        embedder: backends.embedder.as_ref(),
        config: &ctx.config.queries,
        seed: ctx.config.seed,
    };
    let prepared: BTreeMap<String, (ImageRecord, Raster)> = ctx
        .prepared()
        .map_err(e)?
        .into_iter()
        .map(|(r, img)| (r.image_id.clone(), (r, img)))
        .collect();
    let candidates: Vec<EditQuery> = load_records(&ctx.path(pipeline::CANDIDATES)).map_err(e)?;
    ensure!(!candidates.is_empty(), "no candidates");

    let mut violations = Vec::new();
    for q in &candidates {
        let (image, raster) = &prepared[&q.image_id];
        if let Err(rule) = check_feasible(q, image, raster, &inputs) {
            violations.push(format!("{}: {rule}", q.query_id));
        }
    }
    ensure!(violations.is_empty(), "{} violations, first {}", violations.len(), violations[0]);

    // Classes annotated more than once in the raw corpus.
    let mut duplicated = BTreeSet::new();
    for r in &raw.records {
        let mut seen = BTreeMap::<&str, usize>::new();
        for o in &r.objects {
            *seen.entry(&o.class_name).or_default() += 1;
        }
        duplicated.extend(seen.into_iter().filter(|(_, n)| *n > 1).map(|(c, _)| (r.image_id.clone(), c.to_string())));
    }
    ensure!(!duplicated.is_empty(), "mock corpus has no duplicate-class image");
    for q in &candidates {
        if !q.edit_type().is_object_centric() {
            continue;
        }
        let class = q.object_class.clone().unwrap_or_default();
        ensure!(
            !duplicated.contains(&(q.image_id.clone(), class.clone())),
            "{} targets duplicated class {class}",
            q.query_id
        );
    }

    let mut backgrounds = 0;
    for q in &candidates {
        let EditParams::BackgroundChange { background } = &q.params else {
            continue;
        };
        let (_, raster) = &prepared[&q.image_id];
        let ranked = rank_backgrounds(raster, backends.embedder.as_ref(), &options).map_err(e)?;
        let top: Vec<&str> = ranked[ranked.len() - ranked.len() / 2..].iter().map(|(b, _)| b.as_str()).collect();
        ensure!(!top.contains(&background.as_str()), "{}: {background} is in the top half", q.query_id);
        ensure!(background_pool(&ranked).contains(background), "{}: {background} outside the pool", q.query_id);
        backgrounds += 1;
    }
    ensure!(backgrounds > 0, "no background candidates");
    Ok(format!(
        "{} candidates re-checked, {} duplicate-class pairs excluded, {backgrounds} background targets in the lower half",
        candidates.len(),
        duplicated.len()
    ))
}

// ---------------------------------------------------------------- determinism

/// Every "±" in the text table sits between two 4-decimal numbers.
pub fn check_mean_se_format(text: &str) -> Result<usize, String> {
    let four = |s: &str| {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        !int.is_empty()
            && int.trim_start_matches('-').chars().all(|c| c.is_ascii_digit())
            && frac.len() == 4
            && frac.chars().all(|c| c.is_ascii_digit())
    };
    let mut count = 0;
    for line in text.lines() {
        let words: Vec<&str> = line.split_whitespace().collect();
        for (i, w) in words.iter().enumerate() {
            if *w == "±" {
                ensure!(i > 0 && i + 1 < words.len(), "dangling ± in `{line}`");
                let (a, b) = (words[i - 1], words[i + 1].trim_end_matches(','));
                ensure!(four(a) && four(b), "`{a} ± {b}` is not 4-decimal");
                count += 1;
            }
        }
    }
    ensure!(count > 0, "no mean ± se cells");
    Ok(count)
}

pub fn check_determinism(a: &MockFixture, b: &MockFixture) -> Check {
    for rel in [pipeline::REPORT_JSON, pipeline::REPORT_TEXT, pipeline::REPORT_CSV, pipeline::SAMPLES] {
        let x = std::fs::read(a.ctx().path(rel)).map_err(e)?;
        let y = std::fs::read(b.ctx().path(rel)).map_err(e)?;
        ensure!(x == y, "{rel} differs between runs");
    }
    let text = std::fs::read_to_string(a.ctx().path(pipeline::REPORT_TEXT)).map_err(e)?;
    let cells = check_mean_se_format(&text)?;
    Ok(format!("report json/txt/csv byte-identical across two runs, {cells} mean ± se cells"))
}
