//! Pipeline steps over a run directory. Each step reads the previous steps'
//! files, writes its own, and records itself in `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{fit_all, fit_criterion, FitOptions, FitProblem, FitStatus, GroupFit};
use crate::backends::mock::{Sidecar, SidecarDetection, SIDECAR_FILE};
use crate::backends::{BackendIds, BackendSet};
use crate::caption::{describe_with_base, instantiate_instruction, base_caption, StageOutput, TemplateSet};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::filter::{filter_images, trim_and_resize, FilterReport};
use crate::harness::{aggregate, attach_iq, lines_svg, render_csv, render_text, scatter_svg, sweep, BenchmarkReport, RunMetadata, SweepReport, SweepSetting};
use crate::model::io::{load_records, read_json, save_jsonl_rows, save_records, write_json};
use crate::model::{load_corpus, Criterion, EditQuery, FeaturePair, ImageRecord, PreferenceRecord, SampleResult, WeightConfig};
use crate::query::{balance_pool, build_stats, generate_queries, GenerationInputs, OptionSets};
use crate::raster::{Mask, Raster};
use crate::util::json_hash;
use crate::workflows::{evaluate_sample, rescore, EvaluationContext};

pub const MANIFEST: &str = "manifest.json";
pub const PREPARED_DIR: &str = "prepared";
pub const PREPARED_IMAGES: &str = "prepared/images.jsonl";
pub const PREPARED_SIDECARS: &str = "prepared/sidecars";
pub const FILTER_REPORT: &str = "prepared/filter_report.jsonl";
pub const LOAD_ERRORS: &str = "prepared/load_errors.jsonl";
pub const CANDIDATES: &str = "queries/candidates.jsonl";
pub const QUERIES: &str = "queries/queries.jsonl";
pub const BALANCE_REPORT: &str = "queries/balance_report.json";
pub const CAPTIONED: &str = "queries/captioned.jsonl";
pub const CAPTION_REPORT: &str = "queries/caption_report.json";
pub const SAMPLES: &str = "eval/samples.jsonl";
pub const EVAL_FAILURES: &str = "eval/failures.jsonl";
pub const FITTED_WEIGHTS: &str = "weights/fitted.json";
pub const FIT_REPORT: &str = "weights/fit_report.json";
pub const REPORT_JSON: &str = "report/report.json";
pub const REPORT_TEXT: &str = "report/report.txt";
pub const REPORT_CSV: &str = "report/report.csv";
pub const SWEEP_JSON: &str = "sweep/sweep.json";

/// Side-car directory inside a corpus directory.
pub const CORPUS_SIDECARS: &str = "sidecars";

#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: RunConfig,
    pub run_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backends: Option<BackendIds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    pub steps: BTreeMap<String, StepRecord>,
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    write_json(value, path)
}

fn save_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    save_jsonl_rows(rows, path)
}

impl RunContext {
    pub fn new(config: RunConfig, run_dir: impl Into<PathBuf>) -> Self {
        RunContext {
            config,
            run_dir: run_dir.into(),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.run_dir.join(rel)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let p = self.path(MANIFEST);
        if p.is_file() {
            read_json(&p)
        } else {
            Ok(Manifest::default())
        }
    }

    fn record_step(
        &self,
        step: &str,
        backends: Option<&BackendSet>,
        inputs: &[(&str, String)],
        outputs: &[&str],
        counts: &[(&str, usize)],
    ) -> Result<()> {
        let mut m = self.manifest()?;
        let hash = self.config.hash();
        m.config_hash = hash.clone();
        m.seed = self.config.seed;
        if let Some(b) = backends {
            m.backends = Some(b.ids());
        }
        if step == "filter" {
            m.corpus = inputs.iter().find(|(k, _)| *k == "corpus").map(|(_, v)| v.clone());
        }
        m.steps.insert(
            step.to_string(),
            StepRecord {
                config_hash: hash,
                inputs: inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
                outputs: outputs.iter().map(|s| s.to_string()).collect(),
                counts: counts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            },
        );
        write_json_file(&m, &self.path(MANIFEST))
    }

    /// Backends with side-car mocks pointed at `roots`.
    pub fn backends(&self, roots: &[PathBuf]) -> Result<BackendSet> {
        self.config
            .backends
            .with_sidecar_roots(roots)
            .build(&self.run_dir)
    }

    pub fn prepared(&self) -> Result<Vec<(ImageRecord, Raster)>> {
        let records: Vec<ImageRecord> = load_records(&self.path(PREPARED_IMAGES))?;
        let dir = self.path(PREPARED_DIR);
        records
            .into_par_iter()
            .map(|r| {
                let img = Raster::load_png(&dir.join(&r.source_path))?;
                Ok((r, img))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub images: usize,
    pub load_errors: usize,
    pub prepared: usize,
    pub kept_objects: usize,
    pub rejected_objects: usize,
}

fn sidecar_mask_name(i: usize) -> String {
    format!("mask_{i:03}.png")
}

/// Rewrites an image's side-car into prepared coordinates.
fn transform_sidecar(
    src_dir: &Path,
    dst_dir: &Path,
    transform: &crate::filter::CropTransform,
) -> Result<()> {
    let file = src_dir.join(SIDECAR_FILE);
    if !file.is_file() {
        return Ok(());
    }
    let sidecar: Sidecar = read_json(&file)?;
    std::fs::create_dir_all(dst_dir).map_err(|e| Error::io(dst_dir, e))?;
    let mut out = Sidecar::new();
    let mut n = 0;
    for (class, dets) in &sidecar {
        for d in dets {
            let mask = transform.apply_mask(&Mask::load_png(&src_dir.join(&d.mask))?);
            if mask.is_empty() {
                continue;
            }
            let name = sidecar_mask_name(n);
            n += 1;
            mask.save_png(&dst_dir.join(&name))?;
            out.entry(class.clone()).or_default().push(SidecarDetection {
                mask: name,
                confidence: d.confidence,
            });
        }
    }
    write_json(&out, &dst_dir.join(SIDECAR_FILE))
}

/// Filters a corpus and writes the prepared (trimmed, resized) images of
/// every image that kept at least one object.
pub fn filter_step(ctx: &RunContext, corpus: &Path) -> Result<FilterSummary> {
    let cfg = &ctx.config;
    let lexicon = cfg.lexicon()?;
    let load = load_corpus(corpus, &lexicon)?;
    for e in &load.errors {
        warn!("{}: {}", e.file.display(), e.message);
    }
    save_rows(&load.errors, &ctx.path(LOAD_ERRORS))?;
    let sidecars = corpus.join(CORPUS_SIDECARS);
    let backends = ctx.backends(std::slice::from_ref(&sidecars))?;
    let images: Vec<(ImageRecord, Raster)> = load
        .records
        .par_iter()
        .map(|r| Ok((r.clone(), Raster::load_png(&corpus.join(&r.source_path))?)))
        .collect::<Result<_>>()?;
    let reports = filter_images(
        &images,
        &lexicon,
        backends.segmenter.as_ref(),
        backends.vqa.as_ref(),
        &cfg.filter,
    )?;
    save_records(&reports, &ctx.path(FILTER_REPORT))?;

    let prepared_dir = ctx.path(PREPARED_DIR);
    let prepared: Vec<Option<ImageRecord>> = images
        .par_iter()
        .zip(&reports)
        .map(|((record, raster), report)| {
            if report.kept_objects.is_empty() {
                return Ok(None);
            }
            let p = match trim_and_resize(record, raster, &report.kept_objects, cfg.prepared_side) {
                Ok(p) => p,
                Err(e) => {
                    warn!("image {} not prepared: {e}", record.image_id);
                    return Ok(None);
                }
            };
            let rel = format!("images/{}.png", record.image_id);
            let path = prepared_dir.join(&rel);
            ensure_parent(&path)?;
            p.raster.save_png(&path)?;
            transform_sidecar(
                &sidecars.join(&record.image_id),
                &ctx.path(PREPARED_SIDECARS).join(&record.image_id),
                &p.transform,
            )?;
            Ok(Some(ImageRecord {
                source_path: rel,
                ..p.record
            }))
        })
        .collect::<Result<_>>()?;
    let prepared: Vec<ImageRecord> = prepared.into_iter().flatten().collect();
    save_records(&prepared, &ctx.path(PREPARED_IMAGES))?;

    let summary = FilterSummary {
        images: images.len(),
        load_errors: load.errors.len(),
        prepared: prepared.len(),
        kept_objects: reports.iter().map(|r: &FilterReport| r.kept_objects.len()).sum(),
        rejected_objects: reports.iter().map(|r| r.rejections.len()).sum(),
    };
    ctx.record_step(
        "filter",
        Some(&backends),
        &[("corpus", corpus.display().to_string())],
        &[FILTER_REPORT, PREPARED_IMAGES, PREPARED_SIDECARS, LOAD_ERRORS],
        &[
            ("images", summary.images),
            ("prepared", summary.prepared),
            ("kept_objects", summary.kept_objects),
            ("rejected_objects", summary.rejected_objects),
        ],
    )?;
    info!("filter: {summary:?}");
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySummary {
    pub candidates: usize,
    pub selected: usize,
    pub shortfalls: usize,
}

/// Generates the candidate pool over the prepared images and balances it.
/// Relation statistics come from `corpus` when given (falling back to the
/// corpus recorded by the filter step, then to the prepared records).
pub fn gen_queries_step(ctx: &RunContext, corpus: Option<&Path>) -> Result<QuerySummary> {
    let cfg = &ctx.config;
    let lexicon = cfg.lexicon()?;
    let prepared = ctx.prepared()?;
    let recorded = ctx.manifest()?.corpus.map(PathBuf::from);
    let corpus = corpus.map(Path::to_path_buf).or(recorded).filter(|p| p.is_dir());
    let stats = match &corpus {
        Some(dir) => build_stats(&load_corpus(dir, &lexicon)?.records, &lexicon),
        None => {
            let records: Vec<ImageRecord> = prepared.iter().map(|(r, _)| r.clone()).collect();
            build_stats(&records, &lexicon)
        }
    };
    let backends = ctx.backends(&[ctx.path(PREPARED_SIDECARS)])?;
    let options = OptionSets::default();
    let inputs = GenerationInputs {
        stats: &stats,
        lexicon: &lexicon,
        options: &options,
        embedder: backends.embedder.as_ref(),
        config: &cfg.queries,
        seed: cfg.seed,
    };
    let candidates = generate_queries(&prepared, &inputs)?;
    save_records(&candidates, &ctx.path(CANDIDATES))?;
    let (selected, report) = balance_pool(&candidates, &cfg.balance, cfg.seed)?;
    save_records(&selected, &ctx.path(QUERIES))?;
    write_json_file(&report, &ctx.path(BALANCE_REPORT))?;
    let summary = QuerySummary {
        candidates: candidates.len(),
        selected: selected.len(),
        shortfalls: report.shortfalls.len(),
    };
    ctx.record_step(
        "gen-queries",
        Some(&backends),
        &[(
            "corpus",
            corpus.map(|p| p.display().to_string()).unwrap_or_default(),
        )],
        &[CANDIDATES, QUERIES, BALANCE_REPORT],
        &[("candidates", summary.candidates), ("selected", summary.selected)],
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionSummary {
    pub queries: usize,
    pub described: usize,
    pub retries: usize,
    pub needs_manual_fix: usize,
}

/// Adds instructions to every query and caption pairs to every query that
/// supports them. Images share one base caption.
pub fn gen_captions_step(ctx: &RunContext, queries_path: &Path) -> Result<CaptionSummary> {
    let cfg = &ctx.config;
    let mut queries: Vec<EditQuery> = load_records(queries_path)?;
    let images: BTreeMap<String, ImageRecord> = load_records::<ImageRecord>(&ctx.path(PREPARED_IMAGES))?
        .into_iter()
        .map(|r| (r.image_id.clone(), r))
        .collect();
    let templates = match &cfg.templates {
        Some(dir) => TemplateSet::with_overrides(dir)?,
        None => TemplateSet::builtin(),
    };
    let llm = cfg.llm.build(&ctx.run_dir)?;
    let mut bases: BTreeMap<String, StageOutput> = BTreeMap::new();
    let mut summary = CaptionSummary {
        queries: queries.len(),
        ..Default::default()
    };
    for q in &mut queries {
        q.captions.instruction = Some(instantiate_instruction(q, &templates)?);
        if q.instruction_only() {
            continue;
        }
        let image = images.get(&q.image_id).ok_or_else(|| {
            Error::invalid(format!("query {}: unknown image {}", q.query_id, q.image_id))
        })?;
        if !bases.contains_key(&q.image_id) {
            let base = base_caption(image, llm.as_ref(), &templates)?;
            bases.insert(q.image_id.clone(), base);
        }
        let outcome = describe_with_base(q, &bases[&q.image_id], llm.as_ref(), &templates)?;
        summary.described += 1;
        summary.retries += outcome.retries;
        if outcome.needs_manual_fix {
            summary.needs_manual_fix += 1;
        }
        q.captions.description = Some(outcome.pair);
        q.captions.needs_manual_fix = outcome.needs_manual_fix;
    }
    save_records(&queries, &ctx.path(CAPTIONED))?;
    write_json_file(&summary, &ctx.path(CAPTION_REPORT))?;
    ctx.record_step(
        "gen-captions",
        None,
        &[("queries", queries_path.display().to_string()), ("llm", llm.id())],
        &[CAPTIONED, CAPTION_REPORT],
        &[("described", summary.described), ("needs_manual_fix", summary.needs_manual_fix)],
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub model_id: String,
    pub query_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub models: Vec<String>,
    pub samples: usize,
    pub failures: usize,
}

/// Edited image of a model for a query.
pub fn edited_path(edited_dir: &Path, model_id: &str, query_id: &str) -> PathBuf {
    edited_dir.join(model_id).join(format!("{query_id}.png"))
}

/// Model directories of an edited-image tree, sorted.
pub fn list_models(edited_dir: &Path) -> Result<Vec<String>> {
    let mut models = Vec::new();
    for entry in std::fs::read_dir(edited_dir).map_err(|e| Error::io(edited_dir, e))? {
        let entry = entry.map_err(|e| Error::io(edited_dir, e))?;
        if entry.path().is_dir() {
            models.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    models.sort();
    Ok(models)
}

enum Outcome {
    Sample(Box<SampleResult>),
    Failure(EvalFailure),
}

/// Scores every model's edited output for every query. Missing outputs and
/// backend errors are recorded as failures; evaluation goes on.
pub fn evaluate_samples(
    ctx: &RunContext,
    queries: &[EditQuery],
    edited_dir: &Path,
    weights: &WeightConfig,
) -> Result<(Vec<SampleResult>, Vec<EvalFailure>)> {
    let models = list_models(edited_dir)?;
    let needed: BTreeSet<&str> = queries.iter().map(|q| q.image_id.as_str()).collect();
    let prepared: BTreeMap<String, (ImageRecord, Raster)> = ctx
        .prepared()?
        .into_iter()
        .filter(|(r, _)| needed.contains(r.image_id.as_str()))
        .map(|(r, img)| (r.image_id.clone(), (r, img)))
        .collect();
    let backends = ctx.backends(&[ctx.path(PREPARED_SIDECARS), edited_dir.to_path_buf()])?;
    let jobs: Vec<(&String, &EditQuery)> = models
        .iter()
        .flat_map(|m| queries.iter().map(move |q| (m, q)))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|(model, q)| {
            let fail = |reason: String| {
                Outcome::Failure(EvalFailure {
                    model_id: model.to_string(),
                    query_id: q.query_id.clone(),
                    reason,
                })
            };
            let Some((image, original)) = prepared.get(&q.image_id) else {
                return fail(format!("image {} was not prepared", q.image_id));
            };
            let path = edited_path(edited_dir, model, &q.query_id);
            if !path.is_file() {
                return fail("missing edited image".into());
            }
            let result = (|| -> Result<SampleResult> {
                let edited = Raster::load_png(&path)?;
                let key = format!("{model}/{}", q.query_id);
                let ctx = EvaluationContext {
                    query: q,
                    image,
                    original,
                    edited: &edited,
                    edited_key: &key,
                    backends: &backends,
                    weights,
                    config: &ctx.config.workflow,
                };
                let (metrics, scores) = evaluate_sample(&ctx)?;
                let features = FeaturePair {
                    input: backends.features.features(original)?,
                    output: backends.features.features(&edited)?,
                };
                Ok(SampleResult {
                    query_id: q.query_id.clone(),
                    model_id: model.to_string(),
                    image_id: q.image_id.clone(),
                    edit_type: q.edit_type(),
                    target_class: q.edited_class().map(str::to_string),
                    metrics,
                    scores,
                    features: Some(features),
                })
            })();
            match result {
                Ok(s) => Outcome::Sample(Box::new(s)),
                Err(e) => {
                    warn!("{model}/{}: {e}", q.query_id);
                    fail(e.to_string())
                }
            }
        })
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Sample(s) => samples.push(*s),
            Outcome::Failure(f) => failures.push(f),
        }
    }
    Ok((samples, failures))
}

pub fn evaluate_step(
    ctx: &RunContext,
    queries_path: &Path,
    edited_dir: &Path,
    weights: &WeightConfig,
) -> Result<EvalSummary> {
    let queries: Vec<EditQuery> = load_records(queries_path)?;
    let (samples, failures) = evaluate_samples(ctx, &queries, edited_dir, weights)?;
    save_records(&samples, &ctx.path(SAMPLES))?;
    save_rows(&failures, &ctx.path(EVAL_FAILURES))?;
    let summary = EvalSummary {
        models: list_models(edited_dir)?,
        samples: samples.len(),
        failures: failures.len(),
    };
    let backends = ctx.backends(&[ctx.path(PREPARED_SIDECARS), edited_dir.to_path_buf()])?;
    ctx.record_step(
        "evaluate",
        Some(&backends),
        &[
            ("queries", queries_path.display().to_string()),
            ("edited", edited_dir.display().to_string()),
            ("weights", json_hash(weights)),
        ],
        &[SAMPLES, EVAL_FAILURES],
        &[("samples", summary.samples), ("failures", summary.failures)],
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub options: FitOptions,
    pub groups: Vec<GroupFit>,
}

fn plot_group_fit(
    ctx: &RunContext,
    fit: &GroupFit,
    records: &[PreferenceRecord],
    samples: &[SampleResult],
    weights: &WeightConfig,
    include_iq: bool,
) -> Result<()> {
    let g = fit.group;
    let problem = FitProblem::build(g, records, samples, weights, include_iq)?;
    let metric = problem.metric_rates(&weights.group(g).to_vec(g));
    let human = problem.human_rates();
    let (models, u, v) = human.paired(&metric);
    let points: Vec<(String, f64, f64)> = models
        .into_iter()
        .zip(u.into_iter().zip(v))
        .map(|(m, (x, y))| (m, x, y))
        .collect();
    let svg = scatter_svg(
        &format!("{} weights ({})", g, problem.criterion.title()),
        "human winning rate",
        "metric winning rate",
        &points,
    );
    write_text(&ctx.path(&format!("weights/plots/{g}.svg")), &svg)
}

/// Fits weight groups to votes. `criterion` limits the fit to that
/// criterion's groups; otherwise every group is fitted.
pub fn fit_weights_step(
    ctx: &RunContext,
    votes_path: &Path,
    samples_path: &Path,
    criterion: Option<Criterion>,
    options: &FitOptions,
) -> Result<(WeightConfig, FitReport)> {
    let records: Vec<PreferenceRecord> = load_records(votes_path)?;
    let mut samples: Vec<SampleResult> = load_records(samples_path)?;
    let mut weights = ctx.config.weights()?;
    attach_iq(&mut samples, &weights, options.include_iq)?;
    let groups = match criterion {
        Some(c) => fit_criterion(c, &records, &samples, &mut weights, options)?,
        None => fit_all(&records, &samples, &mut weights, options)?,
    };
    let mut rescored = samples.clone();
    for s in &mut rescored {
        rescore(s, &weights)?;
    }
    for fit in groups.iter().filter(|f| f.status != FitStatus::Skipped { reason: String::new() }) {
        if matches!(fit.status, FitStatus::Skipped { .. }) {
            continue;
        }
        plot_group_fit(ctx, fit, &records, &rescored, &weights, options.include_iq)?;
    }
    let report = FitReport {
        options: options.clone(),
        groups,
    };
    write_json_file(&weights, &ctx.path(FITTED_WEIGHTS))?;
    write_json_file(&report, &ctx.path(FIT_REPORT))?;
    ctx.record_step(
        "fit-weights",
        None,
        &[
            ("votes", votes_path.display().to_string()),
            ("samples", samples_path.display().to_string()),
        ],
        &[FITTED_WEIGHTS, FIT_REPORT],
        &[("groups", report.groups.len()), ("votes", records.len())],
    )?;
    Ok((weights, report))
}

fn metadata(ctx: &RunContext, weights: &WeightConfig) -> Result<RunMetadata> {
    Ok(RunMetadata {
        config_hash: ctx.config.hash(),
        weights_hash: json_hash(weights),
        seed: ctx.config.seed,
        bootstrap_resamples: ctx.config.aggregate.bootstrap_resamples,
        backends: ctx.manifest()?.backends,
    })
}

fn aggregate_options(ctx: &RunContext) -> crate::harness::AggregateOptions {
    crate::harness::AggregateOptions {
        seed: ctx.config.seed,
        ..ctx.config.aggregate.clone()
    }
}

/// Re-scores samples under `weights` and writes the report as JSON, text
/// tables and CSV.
pub fn report_step(ctx: &RunContext, samples_path: &Path, weights: &WeightConfig) -> Result<BenchmarkReport> {
    let mut samples: Vec<SampleResult> = load_records(samples_path)?;
    for s in &mut samples {
        rescore(s, weights)?;
    }
    let lexicon = ctx.config.lexicon()?;
    let report = aggregate(&samples, weights, &lexicon, &aggregate_options(ctx), metadata(ctx, weights)?)?;
    write_json_file(&report, &ctx.path(REPORT_JSON))?;
    write_text(&ctx.path(REPORT_TEXT), &render_text(&report))?;
    write_text(&ctx.path(REPORT_CSV), &render_csv(&report))?;
    ctx.record_step(
        "report",
        None,
        &[
            ("samples", samples_path.display().to_string()),
            ("weights", json_hash(weights)),
        ],
        &[REPORT_JSON, REPORT_TEXT, REPORT_CSV],
        &[("models", report.models.len())],
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepInput {
    pub label: String,
    pub value: f64,
    pub edited_dir: PathBuf,
}

/// Evaluates each setting's edited images and reports the criterion series
/// across the parameter.
pub fn sweep_step(
    ctx: &RunContext,
    queries_path: &Path,
    parameter: &str,
    inputs: &[SweepInput],
    weights: &WeightConfig,
) -> Result<SweepReport> {
    let queries: Vec<EditQuery> = load_records(queries_path)?;
    let mut settings = Vec::with_capacity(inputs.len());
    for s in inputs {
        if !s.edited_dir.is_dir() {
            return Err(Error::invalid(format!(
                "sweep setting {}: no directory {}",
                s.label,
                s.edited_dir.display()
            )));
        }
        let (samples, failures) = evaluate_samples(ctx, &queries, &s.edited_dir, weights)?;
        save_records(&samples, &ctx.path(&format!("sweep/{}/samples.jsonl", s.label)))?;
        save_rows(&failures, &ctx.path(&format!("sweep/{}/failures.jsonl", s.label)))?;
        settings.push(SweepSetting {
            label: s.label.clone(),
            value: s.value,
            samples,
        });
    }
    let lexicon = ctx.config.lexicon()?;
    let report = sweep(
        parameter,
        settings,
        weights,
        &lexicon,
        &aggregate_options(ctx),
        &metadata(ctx, weights)?,
    )?;
    write_json_file(&report, &ctx.path(SWEEP_JSON))?;
    for c in crate::harness::sweep::SWEEP_CRITERIA {
        let series: Vec<(String, Vec<(f64, f64)>)> = report
            .series
            .iter()
            .filter(|s| s.criterion == c)
            .map(|s| (s.model_id.clone(), s.points.clone()))
            .collect();
        if series.is_empty() {
            continue;
        }
        let svg = lines_svg(&format!("{} vs {parameter}", c.title()), parameter, c.title(), &series);
        write_text(&ctx.path(&format!("sweep/{}.svg", c.as_str())), &svg)?;
    }
    ctx.record_step(
        "sweep",
        None,
        &[("queries", queries_path.display().to_string()), ("parameter", parameter.to_string())],
        &[SWEEP_JSON],
        &[("settings", inputs.len())],
    )?;
    Ok(report)
}
