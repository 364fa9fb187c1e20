//! Weight fitting by exhaustive simplex grid search.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::pearson_raw;
use super::grid::simplex_grid;
use super::terms::{group_criterion, group_terms, groups_for, GroupTerms};
use super::votes::{majority_vote, WinningRates};
use crate::error::{Error, Result};
use crate::model::{Criterion, GroupId, PreferenceRecord, SampleResult, Vote, WeightConfig, WeightGroup};
use crate::workflows::rescore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub step: f64,
    /// Search `coarse_step` first, then the fine grid around the coarse best.
    pub coarse_to_fine: bool,
    pub coarse_step: f64,
    /// Add the per-model IQ to every question's total score.
    pub include_iq: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            step: 0.01,
            coarse_to_fine: false,
            coarse_step: 0.05,
            include_iq: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub model_a: usize,
    pub model_b: usize,
    /// Indices into [`FitProblem::samples`].
    pub sample_a: usize,
    pub sample_b: usize,
}

/// Everything a grid search needs, with per-sample scores precomputed as
/// functions of the candidate weights.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub criterion: Criterion,
    pub dim: usize,
    pub models: Vec<String>,
    pub samples: Vec<GroupTerms>,
    pub questions: Vec<Question>,
    /// Human winning rate per model, aligned with `models`.
    pub human: Vec<f64>,
    /// Questions skipped because a side had no evaluated sample.
    pub dropped: usize,
}

impl FitProblem {
    /// Direct construction from per-question scores; `human_a_wins[i]` is the
    /// majority outcome of question `i`.
    pub fn from_pairs(
        criterion: Criterion,
        dim: usize,
        pairs: Vec<(String, GroupTerms, String, GroupTerms, bool)>,
    ) -> Result<FitProblem> {
        let models: Vec<String> = pairs
            .iter()
            .flat_map(|(a, _, b, _, _)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pos: HashMap<&str, usize> = models.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
        let mut wins = vec![0.0; models.len()];
        let mut seen = vec![0.0; models.len()];
        let mut samples = Vec::with_capacity(2 * pairs.len());
        let mut questions = Vec::with_capacity(pairs.len());
        for (a, ta, b, tb, a_wins) in &pairs {
            let (ma, mb) = (pos[a.as_str()], pos[b.as_str()]);
            if ma == mb {
                return Err(Error::invalid(format!("question compares model {a} with itself")));
            }
            seen[ma] += 1.0;
            seen[mb] += 1.0;
            wins[if *a_wins { ma } else { mb }] += 1.0;
            samples.push(ta.clone());
            samples.push(tb.clone());
            questions.push(Question {
                model_a: ma,
                model_b: mb,
                sample_a: samples.len() - 2,
                sample_b: samples.len() - 1,
            });
        }
        let human = wins.iter().zip(&seen).map(|(w, n)| w / n).collect();
        Ok(FitProblem {
            criterion,
            dim,
            models,
            samples,
            questions,
            human,
            dropped: 0,
        })
    }

    /// Questions of the group's criterion whose samples depend on the group.
    pub fn build(
        group: GroupId,
        records: &[PreferenceRecord],
        samples: &[SampleResult],
        weights: &WeightConfig,
        include_iq: bool,
    ) -> Result<FitProblem> {
        let criterion = group_criterion(group);
        let index: HashMap<(&str, &str), &SampleResult> = samples
            .iter()
            .map(|s| ((s.query_id.as_str(), s.model_id.as_str()), s))
            .collect();
        let mut pairs = Vec::new();
        let mut dropped = 0;
        for r in records.iter().filter(|r| r.criterion == criterion) {
            r.validate()?;
            let a = index.get(&(r.query_id.as_str(), r.sample_a.model_id.as_str()));
            let b = index.get(&(r.query_id.as_str(), r.sample_b.model_id.as_str()));
            let (Some(a), Some(b)) = (a, b) else {
                warn!("question {}: missing evaluated sample, dropped", r.question_id);
                dropped += 1;
                continue;
            };
            let (Some(ta), Some(tb)) = (
                group_terms(a, group, weights, include_iq)?,
                group_terms(b, group, weights, include_iq)?,
            ) else {
                continue;
            };
            pairs.push((
                r.sample_a.model_id.clone(),
                ta,
                r.sample_b.model_id.clone(),
                tb,
                majority_vote(r)? == Vote::A,
            ));
        }
        let mut p = FitProblem::from_pairs(criterion, group.keys().len(), pairs)?;
        p.dropped = dropped;
        Ok(p)
    }

    pub fn human_rates(&self) -> WinningRates {
        WinningRates {
            criterion: self.criterion,
            rates: self.models.iter().cloned().zip(self.human.iter().copied()).collect(),
        }
    }
}

/// Reusable buffers for scoring one candidate.
struct Scratch {
    scores: Vec<f64>,
    wins: Vec<f64>,
    seen: Vec<f64>,
    rates: Vec<f64>,
}

impl FitProblem {
    fn scratch(&self) -> Scratch {
        Scratch {
            scores: vec![0.0; self.samples.len()],
            wins: vec![0.0; self.models.len()],
            seen: vec![0.0; self.models.len()],
            rates: vec![0.0; self.models.len()],
        }
    }

    fn rates_into(&self, w: &[f64], s: &mut Scratch) {
        for (o, t) in s.scores.iter_mut().zip(&self.samples) {
            *o = t.score(w);
        }
        s.wins.iter_mut().for_each(|x| *x = 0.0);
        s.seen.iter_mut().for_each(|x| *x = 0.0);
        for q in &self.questions {
            let (a, b) = (s.scores[q.sample_a], s.scores[q.sample_b]);
            let credit = super::votes::metric_credit(a, b);
            s.wins[q.model_a] += credit;
            s.wins[q.model_b] += 1.0 - credit;
            s.seen[q.model_a] += 1.0;
            s.seen[q.model_b] += 1.0;
        }
        for ((r, w), n) in s.rates.iter_mut().zip(&s.wins).zip(&s.seen) {
            *r = w / n;
        }
    }

    fn correlation_with(&self, w: &[f64], s: &mut Scratch) -> Option<f64> {
        self.rates_into(w, s);
        pearson_raw(&s.rates, &self.human)
    }

    /// Metric winning rates `v` under one candidate weight vector.
    pub fn metric_rates(&self, w: &[f64]) -> WinningRates {
        let mut s = self.scratch();
        self.rates_into(w, &mut s);
        WinningRates {
            criterion: self.criterion,
            rates: self.models.iter().cloned().zip(s.rates).collect(),
        }
    }

    /// Pearson correlation of `u` and `v` under `w`, `None` when undefined.
    pub fn correlation(&self, w: &[f64]) -> Option<f64> {
        self.correlation_with(w, &mut self.scratch())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub weights: Vec<f64>,
    pub correlation: Option<f64>,
    pub uniform_correlation: Option<f64>,
    /// No candidate gave a defined correlation; `weights` is uniform.
    pub degenerate: bool,
    pub candidates: u64,
}

/// Running best: higher correlation, then lexicographically smaller vector.
fn better(a: &(f64, Vec<u32>), b: &(f64, Vec<u32>)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

fn pick(a: Option<(f64, Vec<u32>)>, b: Option<(f64, Vec<u32>)>) -> Option<(f64, Vec<u32>)> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if better(&y, &x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Best `(correlation, composition)` so far.
type Best = Option<(f64, Vec<u32>)>;

/// Exhaustive search over one grid, optionally restricted to a box around
/// `center` (in weight units).
fn search(
    problem: &FitProblem,
    step: f64,
    center: Option<(&[f64], f64)>,
) -> Result<(Best, u64, u32)> {
    let grid = simplex_grid(problem.dim, step)?;
    let prefix_len = 2.min(problem.dim - 1);
    let prefixes = grid.prefixes(prefix_len);
    let steps = grid.steps;
    let (best, count) = prefixes
        .par_iter()
        .map(|prefix| {
            let mut s = problem.scratch();
            let mut w = vec![0.0; problem.dim];
            let mut best: Option<(f64, Vec<u32>)> = None;
            let mut count = 0u64;
            for c in grid.compositions_with_prefix(prefix) {
                for (x, k) in w.iter_mut().zip(&c) {
                    *x = *k as f64 / steps as f64;
                }
                if let Some((mid, radius)) = center {
                    if w.iter().zip(mid).any(|(a, b)| (a - b).abs() > radius + 1e-12) {
                        continue;
                    }
                }
                count += 1;
                if let Some(r) = problem.correlation_with(&w, &mut s) {
                    let cand = (r, c);
                    if best.as_ref().is_none_or(|b| better(&cand, b)) {
                        best = Some(cand);
                    }
                }
            }
            (best, count)
        })
        .reduce(|| (None, 0), |(a, n), (b, m)| (pick(a, b), n + m));
    Ok((best, count, steps))
}

/// Weights maximizing the Pearson correlation between human and metric
/// winning rates.
pub fn fit_weights(problem: &FitProblem, options: &FitOptions) -> Result<FitResult> {
    if problem.questions.is_empty() {
        return Err(Error::invalid(format!("no {} questions to fit on", problem.criterion)));
    }
    if problem.models.len() < 3 {
        return Err(Error::TooFewSamples {
            got: problem.models.len(),
            required: 3,
        });
    }
    let dim = problem.dim;
    let uniform = vec![1.0 / dim as f64; dim];
    let uniform_correlation = problem.correlation(&uniform);
    if dim == 1 {
        return Ok(FitResult {
            weights: vec![1.0],
            correlation: uniform_correlation,
            uniform_correlation,
            degenerate: uniform_correlation.is_none(),
            candidates: 1,
        });
    }

    let (best, candidates, steps) = if options.coarse_to_fine {
        let (coarse, n1, coarse_steps) = search(problem, options.coarse_step, None)?;
        match coarse {
            Some((_, c)) => {
                let mid: Vec<f64> = c.iter().map(|k| *k as f64 / coarse_steps as f64).collect();
                let (fine, n2, s) = search(problem, options.step, Some((&mid[..], options.coarse_step)))?;
                (fine, n1 + n2, s)
            }
            None => (None, n1, coarse_steps),
        }
    } else {
        search(problem, options.step, None)?
    };

    let mut result = FitResult {
        weights: uniform.clone(),
        correlation: None,
        uniform_correlation,
        degenerate: true,
        candidates: candidates + 1,
    };
    if let Some((r, c)) = best {
        result.weights = c.iter().map(|k| *k as f64 / steps as f64).collect();
        result.correlation = Some(r);
        result.degenerate = false;
    }
    if let Some(u) = uniform_correlation {
        if result.correlation.is_none_or(|r| u > r) {
            result.weights = uniform;
            result.correlation = Some(u);
            result.degenerate = false;
        }
    }
    if result.degenerate {
        warn!(
            "{} fit is degenerate (no candidate has a defined correlation), using uniform weights",
            problem.criterion
        );
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    Degenerate,
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub group: GroupId,
    pub status: FitStatus,
    /// Weights in effect after the fit, keyed by the group's keys.
    pub weights: BTreeMap<String, f64>,
    pub correlation: Option<f64>,
    pub uniform_correlation: Option<f64>,
    pub questions: usize,
    pub models: usize,
    pub dropped: usize,
    pub candidates: u64,
}

/// Sums can drift by an ulp; push the residual into the largest weight.
fn normalized_group(group: GroupId, w: &[f64]) -> Result<WeightGroup> {
    let mut v = w.to_vec();
    let sum: f64 = v.iter().sum();
    if let Some(i) = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a))) {
        v[i] += 1.0 - sum;
    }
    WeightGroup::new(group, &v)
}

/// Fits one group in place; other groups stay as they are.
pub fn fit_group(
    group: GroupId,
    records: &[PreferenceRecord],
    samples: &[SampleResult],
    weights: &mut WeightConfig,
    options: &FitOptions,
) -> Result<GroupFit> {
    let problem = FitProblem::build(group, records, samples, weights, options.include_iq)?;
    let mut fit = GroupFit {
        group,
        status: FitStatus::Fitted,
        weights: BTreeMap::new(),
        correlation: None,
        uniform_correlation: None,
        questions: problem.questions.len(),
        models: problem.models.len(),
        dropped: problem.dropped,
        candidates: 0,
    };
    let keep = |fit: &mut GroupFit, weights: &WeightConfig| {
        fit.weights = group
            .keys()
            .iter()
            .map(|k| (k.to_string(), weights.group(group).get(k).unwrap_or(0.0)))
            .collect();
    };
    if problem.questions.is_empty() || problem.models.len() < 3 {
        let reason = format!(
            "{} questions over {} models",
            problem.questions.len(),
            problem.models.len()
        );
        warn!("group {group} not fitted: {reason}");
        fit.status = FitStatus::Skipped { reason };
        keep(&mut fit, weights);
        return Ok(fit);
    }
    let r = fit_weights(&problem, options)?;
    info!(
        "group {group}: r = {:?} (uniform {:?}) over {} questions",
        r.correlation, r.uniform_correlation, fit.questions
    );
    weights.set_group(group, normalized_group(group, &r.weights)?)?;
    fit.status = if r.degenerate {
        FitStatus::Degenerate
    } else {
        FitStatus::Fitted
    };
    fit.correlation = r.correlation;
    fit.uniform_correlation = r.uniform_correlation;
    fit.candidates = r.candidates;
    keep(&mut fit, weights);
    Ok(fit)
}

/// Fits every group of a criterion, inner groups first. For the total the
/// samples are re-scored under `weights` before fitting.
pub fn fit_criterion(
    criterion: Criterion,
    records: &[PreferenceRecord],
    samples: &[SampleResult],
    weights: &mut WeightConfig,
    options: &FitOptions,
) -> Result<Vec<GroupFit>> {
    let groups = groups_for(criterion);
    if groups.is_empty() {
        return Err(Error::invalid(format!("criterion {criterion} has no weights to fit")));
    }
    let rescored;
    let samples = if criterion == Criterion::Total {
        let mut s = samples.to_vec();
        for x in &mut s {
            rescore(x, weights)?;
        }
        rescored = s;
        &rescored[..]
    } else {
        samples
    };
    groups
        .into_iter()
        .map(|g| fit_group(g, records, samples, weights, options))
        .collect()
}

/// Object fidelity, object consistency and background consistency groups,
/// then the total on re-scored samples.
pub fn fit_all(
    records: &[PreferenceRecord],
    samples: &[SampleResult],
    weights: &mut WeightConfig,
    options: &FitOptions,
) -> Result<Vec<GroupFit>> {
    let mut out = Vec::new();
    for c in [Criterion::OF, Criterion::OC, Criterion::BC, Criterion::Total] {
        out.extend(fit_criterion(c, records, samples, weights, options)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(values: &[f64]) -> GroupTerms {
        GroupTerms {
            offset: 0.0,
            parts: vec![super::super::terms::TermPart {
                coef: 1.0,
                terms: values.iter().copied().enumerate().collect(),
            }],
        }
    }

    /// Four models; humans prefer whichever side is larger in component 1.
    fn follows_component(k: usize) -> FitProblem {
        let quality = [[0.9, 0.1, 0.3], [0.7, 0.4, 0.2], [0.2, 0.8, 0.6], [0.5, 0.6, 0.9]];
        let mut pairs = Vec::new();
        for rep in 0..3 {
            for a in 0..4 {
                for b in 0..4 {
                    if a >= b {
                        continue;
                    }
                    let jitter = 0.01 * rep as f64;
                    let ta: Vec<f64> = quality[a].iter().map(|x| x - jitter).collect();
                    let tb: Vec<f64> = quality[b].to_vec();
                    let a_wins = ta[k] > tb[k];
                    pairs.push((format!("m{a}"), terms(&ta), format!("m{b}"), terms(&tb), a_wins));
                }
            }
        }
        FitProblem::from_pairs(Criterion::OF, 3, pairs).unwrap()
    }

    #[test]
    fn finds_the_followed_component() {
        let p = follows_component(1);
        let r = fit_weights(
            &p,
            &FitOptions {
                step: 0.1,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(!r.degenerate);
        assert!(r.correlation.unwrap() > 0.99);
        assert!(r.correlation.unwrap() >= r.uniform_correlation.unwrap());
        let argmax = (0..3).max_by(|&a, &b| r.weights[a].total_cmp(&r.weights[b])).unwrap();
        assert_eq!(argmax, 1);
    }

    #[test]
    fn constant_humans_are_degenerate() {
        let pairs = vec![
            ("a".to_string(), terms(&[0.1, 0.2]), "b".to_string(), terms(&[0.3, 0.1]), true),
            ("b".to_string(), terms(&[0.1, 0.2]), "c".to_string(), terms(&[0.3, 0.1]), true),
            ("c".to_string(), terms(&[0.1, 0.2]), "a".to_string(), terms(&[0.3, 0.1]), true),
        ];
        let p = FitProblem::from_pairs(Criterion::OC, 2, pairs).unwrap();
        let r = fit_weights(&p, &FitOptions::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn coarse_to_fine_is_no_worse_than_coarse() {
        let p = follows_component(2);
        let coarse = fit_weights(
            &p,
            &FitOptions {
                step: 0.05,
                ..FitOptions::default()
            },
        )
        .unwrap();
        let c2f = fit_weights(
            &p,
            &FitOptions {
                step: 0.01,
                coarse_to_fine: true,
                coarse_step: 0.05,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(c2f.correlation.unwrap() >= coarse.correlation.unwrap() - 1e-12);
    }
}
