//! Oracles, the synthetic corpus, scripted editors and simulated votes the
//! test suites are built on.

pub mod corpus;
pub mod editors;
pub mod golden;
pub mod oracles;
pub mod votes;

use std::path::{Path, PathBuf};

pub use corpus::{build_mock_corpus, MockCorpus, MOCK_IMAGES};
pub use editors::{run_mock_editor, MockEditor};
pub use golden::{check_golden, GoldenCheck, GoldenFixture};
pub use oracles::*;
pub use votes::{hidden_weights, mock_votes, VoteOptions};

use crate::alignment::FitOptions;
use crate::config::RunConfig;
use crate::error::Result;
use crate::harness::BenchmarkReport;
use crate::model::io::{load_records, save_records};
use crate::model::{EditQuery, EditType, SampleResult};
use crate::pipeline::{self, RunContext};
use crate::query::BalanceConfig;

/// Run configuration sized for the mock corpus: small prepared images, a
/// capped query pool and a coarse weight grid.
pub fn mock_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        prepared_side: 128,
        balance: BalanceConfig {
            per_type: EditType::ALL.into_iter().map(|t| (t, 6)).collect(),
            per_stratum: None,
        },
        ..RunConfig::default()
    };
    cfg.fit = FitOptions {
        step: 0.05,
        ..FitOptions::default()
    };
    cfg.aggregate.bootstrap_resamples = 200;
    cfg
}

/// Runs every mock editor over the balanced queries of a run directory.
pub fn run_mock_editors(ctx: &RunContext, queries: &[EditQuery], edited_dir: &Path) -> Result<()> {
    for e in MockEditor::ALL {
        run_mock_editor(
            e,
            e.as_str(),
            queries,
            &ctx.path(pipeline::PREPARED_DIR),
            edited_dir,
            ctx.config.seed,
        )?;
    }
    Ok(())
}

/// Paths of a finished mock run.
#[derive(Debug, Clone)]
pub struct MockRun {
    pub run_dir: PathBuf,
    pub edited_dir: PathBuf,
    pub report: BenchmarkReport,
}

/// The whole chain on the mock corpus under `root`: corpus, filter,
/// queries, captions, mock edits, evaluation, simulated votes, weight fit
/// and report.
pub fn run_mock_pipeline(root: &Path, seed: u64) -> Result<MockRun> {
    let corpus = root.join("corpus");
    build_mock_corpus(seed, &corpus)?;
    let ctx = RunContext::new(mock_config(seed), root.join("run"));
    pipeline::filter_step(&ctx, &corpus)?;
    pipeline::gen_queries_step(&ctx, Some(&corpus))?;
    pipeline::gen_captions_step(&ctx, &ctx.path(pipeline::QUERIES))?;
    let queries: Vec<EditQuery> = load_records(&ctx.path(pipeline::CAPTIONED))?;
    let edited_dir = root.join("edited");
    run_mock_editors(&ctx, &queries, &edited_dir)?;
    let weights = ctx.config.weights()?;
    pipeline::evaluate_step(&ctx, &ctx.path(pipeline::CAPTIONED), &edited_dir, &weights)?;
    let samples: Vec<SampleResult> = load_records(&ctx.path(pipeline::SAMPLES))?;
    let votes = mock_votes(
        &samples,
        &hidden_weights(),
        &VoteOptions {
            seed,
            ..VoteOptions::default()
        },
    )?;
    let votes_path = root.join("votes.jsonl");
    save_records(&votes, &votes_path)?;
    let (fitted, _) = pipeline::fit_weights_step(
        &ctx,
        &votes_path,
        &ctx.path(pipeline::SAMPLES),
        None,
        &ctx.config.fit,
    )?;
    let report = pipeline::report_step(&ctx, &ctx.path(pipeline::SAMPLES), &fitted)?;
    Ok(MockRun {
        run_dir: ctx.run_dir,
        edited_dir,
        report,
    })
}
