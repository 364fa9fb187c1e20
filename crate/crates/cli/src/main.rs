//! Command-line driver for the benchmark pipeline. Every step reads and
//! writes inside one run directory and records itself in its manifest.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use editbench_core::config::RunConfig;
use editbench_core::harness::render_text;
use editbench_core::model::io::{load_records, save_records};
use editbench_core::model::{Criterion, EditQuery, SampleResult, WeightConfig};
use editbench_core::pipeline::{self, RunContext, SweepInput};
use editbench_core::validation::{self, hidden_weights, mock_votes, MockEditor, VoteOptions};
use log::info;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "editbench", version, about = "Evaluate text-guided image editing models")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from the configuration sized for the mock corpus.
    #[arg(long, global = true, conflicts_with = "config")]
    mock: bool,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus, filter objects and write prepared images.
    Filter {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Generate candidate queries and balance them.
    GenQueries {
        /// Corpus for relation statistics; defaults to the one filtered.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Add instructions and caption pairs to the balanced queries.
    GenCaptions {
        #[arg(long)]
        queries: Option<PathBuf>,
    },
    /// Score every model's edited images.
    Evaluate {
        /// Directory of `<model>/<query_id>.png`.
        #[arg(long)]
        edited: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Fit metric weights to human votes.
    FitWeights {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Fit one criterion only (OF, BF, OC, BC, Total).
        #[arg(long)]
        criterion: Option<String>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Aggregate samples into the benchmark tables.
    Report {
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Evaluate one edited directory per setting of a model parameter.
    Sweep {
        #[arg(long)]
        parameter: String,
        /// `label=value=edited_dir`, repeated once per setting.
        #[arg(long = "setting", required = true)]
        settings: Vec<String>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Write the synthetic validation corpus.
    MockCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce edited images with the scripted mock editors.
    MockEdit {
        #[arg(long)]
        edited: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Editors to run; all of them when omitted.
        #[arg(long = "editor")]
        editors: Vec<String>,
    },
    /// Simulate annotator votes over evaluated samples.
    MockVotes {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        samples: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_config(global: &Global) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None if global.mock => validation::mock_config(0),
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn weights_or_config(ctx: &RunContext, path: &Option<PathBuf>) -> Result<WeightConfig> {
    Ok(match path {
        Some(p) => WeightConfig::load(p)?,
        None => ctx.config.weights()?,
    })
}

/// Captioned queries when captions were generated, else the balanced set.
fn default_queries(ctx: &RunContext) -> PathBuf {
    let captioned = ctx.path(pipeline::CAPTIONED);
    if captioned.is_file() {
        captioned
    } else {
        ctx.path(pipeline::QUERIES)
    }
}

fn parse_setting(s: &str) -> Result<SweepInput> {
    let mut parts = s.splitn(3, '=');
    let (Some(label), Some(value), Some(dir)) = (parts.next(), parts.next(), parts.next()) else {
        bail!("setting `{s}` is not label=value=edited_dir");
    };
    Ok(SweepInput {
        label: label.to_string(),
        value: value.parse().with_context(|| format!("setting `{s}`: bad value"))?,
        edited_dir: PathBuf::from(dir),
    })
}

fn run(cli: Cli) -> Result<()> {
    let ctx = RunContext::new(load_config(&cli.global)?, &cli.global.run_dir);
    match cli.command {
        Command::Filter { corpus } => print_json(&pipeline::filter_step(&ctx, &corpus)?),
        Command::GenQueries { corpus } => {
            print_json(&pipeline::gen_queries_step(&ctx, corpus.as_deref())?)
        }
        Command::GenCaptions { queries } => {
            let q = queries.unwrap_or_else(|| ctx.path(pipeline::QUERIES));
            print_json(&pipeline::gen_captions_step(&ctx, &q)?)
        }
        Command::Evaluate {
            edited,
            queries,
            weights,
        } => {
            let q = queries.unwrap_or_else(|| default_queries(&ctx));
            let w = weights_or_config(&ctx, &weights)?;
            print_json(&pipeline::evaluate_step(&ctx, &q, &edited, &w)?)
        }
        Command::FitWeights {
            votes,
            samples,
            criterion,
            step,
        } => {
            let criterion = criterion
                .map(|c| Criterion::parse(&c).ok_or_else(|| anyhow!("unknown criterion `{c}`")))
                .transpose()?;
            let mut options = ctx.config.fit.clone();
            if let Some(s) = step {
                options.step = s;
            }
            let s = samples.unwrap_or_else(|| ctx.path(pipeline::SAMPLES));
            let (weights, report) = pipeline::fit_weights_step(&ctx, &votes, &s, criterion, &options)?;
            for g in &report.groups {
                info!("{:?}", g);
            }
            print_json(&weights)
        }
        Command::Report { samples, weights } => {
            let s = samples.unwrap_or_else(|| ctx.path(pipeline::SAMPLES));
            let fitted = ctx.path(pipeline::FITTED_WEIGHTS);
            let w = match weights {
                Some(p) => WeightConfig::load(&p)?,
                None if fitted.is_file() => WeightConfig::load(&fitted)?,
                None => ctx.config.weights()?,
            };
            let report = pipeline::report_step(&ctx, &s, &w)?;
            print!("{}", render_text(&report));
            Ok(())
        }
        Command::Sweep {
            parameter,
            settings,
            queries,
            weights,
        } => {
            let inputs = settings.iter().map(|s| parse_setting(s)).collect::<Result<Vec<_>>>()?;
            let q = queries.unwrap_or_else(|| default_queries(&ctx));
            let w = weights_or_config(&ctx, &weights)?;
            print_json(&pipeline::sweep_step(&ctx, &q, &parameter, &inputs, &w)?)
        }
        Command::MockCorpus { out } => {
            print_json(&validation::build_mock_corpus(ctx.config.seed, &out)?)
        }
        Command::MockEdit {
            edited,
            queries,
            editors,
        } => {
            let q = queries.unwrap_or_else(|| default_queries(&ctx));
            let qs: Vec<EditQuery> = load_records(&q)?;
            let chosen = if editors.is_empty() {
                MockEditor::ALL.to_vec()
            } else {
                editors
                    .iter()
                    .map(|e| MockEditor::parse(e).ok_or_else(|| anyhow!("unknown mock editor `{e}`")))
                    .collect::<Result<_>>()?
            };
            for e in chosen {
                let n = validation::run_mock_editor(
                    e,
                    e.as_str(),
                    &qs,
                    &ctx.path(pipeline::PREPARED_DIR),
                    &edited,
                    ctx.config.seed,
                )?;
                println!("{}: {n} edited images", e.as_str());
            }
            Ok(())
        }
        Command::MockVotes { out, samples } => {
            let s = samples.unwrap_or_else(|| ctx.path(pipeline::SAMPLES));
            let samples: Vec<SampleResult> = load_records(&s)?;
            let options = VoteOptions {
                seed: ctx.config.seed,
                ..VoteOptions::default()
            };
            let votes = mock_votes(&samples, &hidden_weights(), &options)?;
            save_records(&votes, &out)?;
            println!("{} questions written to {}", votes.len(), out.display());
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let jobs = cli.global.jobs;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build();
    let result = match pool {
        Ok(p) => p.install(|| run(cli)),
        Err(e) => Err(e.into()),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
