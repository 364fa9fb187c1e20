//! Per-model summaries with bootstrap errors and breakdowns.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_se, mean, DEFAULT_RESAMPLES};
use crate::backends::{fid_between_sets, BackendIds};
use crate::error::{Error, Result};
use crate::lexicon::{ClassGroup, Lexicon};
use crate::metrics::{combine_total, iq_score};
use crate::model::{Criterion, EditType, SampleResult, WeightConfig};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregateOptions {
    pub bootstrap_resamples: usize,
    pub seed: u64,
    /// Count the model's IQ in every sample's total.
    pub iq_in_total: bool,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            bootstrap_resamples: DEFAULT_RESAMPLES,
            seed: 0,
            iq_in_total: true,
        }
    }
}

/// A mean with its bootstrap standard error (absent for fewer than two
/// values and for set-level statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub samples: usize,
    pub criteria: BTreeMap<Criterion, Stat>,
    /// Total score per edit type.
    pub by_edit_type: BTreeMap<EditType, Stat>,
    /// Total score per edited-class group.
    pub by_class_group: BTreeMap<ClassGroup, Stat>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub weights_hash: String,
    pub seed: u64,
    pub bootstrap_resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backends: Option<BackendIds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub metadata: RunMetadata,
    pub models: Vec<ModelSummary>,
    pub notes: Vec<String>,
}

impl BenchmarkReport {
    pub fn model(&self, id: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model_id == id)
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.models {
            let stats = m
                .criteria
                .values()
                .chain(m.by_edit_type.values())
                .chain(m.by_class_group.values());
            for s in stats {
                if !(0.0..=1.0).contains(&s.mean) || s.se.is_some_and(|e| !(e >= 0.0)) {
                    return Err(Error::invariant(format!(
                        "model {}: statistic {s:?} out of range",
                        m.model_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Reporting group of a sample: the whole image for scene edits, the
/// (added or edited) class's group otherwise.
pub fn class_group_of(sample: &SampleResult, lexicon: &Lexicon) -> ClassGroup {
    match (&sample.target_class, sample.edit_type.is_object_centric()) {
        (Some(c), true) => lexicon.class_group(c),
        (None, true) => ClassGroup::Other,
        _ => ClassGroup::WholeImage,
    }
}

/// IQ of one model from the features of its inputs and outputs.
pub fn model_iq(samples: &[&SampleResult]) -> Result<f64> {
    let mut inputs = Vec::with_capacity(samples.len());
    let mut outputs = Vec::with_capacity(samples.len());
    for s in samples {
        let f = s.features.as_ref().ok_or_else(|| {
            Error::invalid(format!("sample {}/{} has no features", s.model_id, s.query_id))
        })?;
        inputs.push(f.input.clone());
        outputs.push(f.output.clone());
    }
    iq_score(fid_between_sets(&inputs, &outputs)?)
}

/// Sorts samples canonically, sets every sample's IQ to its model's value
/// and recomputes totals. Returns the IQ per model (absent when it could not
/// be computed).
pub fn attach_iq(
    samples: &mut [SampleResult],
    weights: &WeightConfig,
    iq_in_total: bool,
) -> Result<BTreeMap<String, Option<f64>>> {
    samples.sort_by(|a, b| (&a.model_id, &a.query_id).cmp(&(&b.model_id, &b.query_id)));
    let mut iq = BTreeMap::new();
    for model in samples.iter().map(|s| s.model_id.clone()).collect::<BTreeSet<_>>() {
        let of_model: Vec<&SampleResult> = samples.iter().filter(|s| s.model_id == model).collect();
        let value = match model_iq(&of_model) {
            Ok(v) => Some(v),
            Err(e) => {
                warn!("model {model}: image quality unavailable ({e})");
                None
            }
        };
        iq.insert(model, value);
    }
    for s in samples.iter_mut() {
        s.scores.iq = iq[&s.model_id];
        let mut for_total = s.scores.clone();
        if !iq_in_total {
            for_total.iq = None;
        }
        s.scores.total = Some(combine_total(&for_total, weights)?);
    }
    Ok(iq)
}

fn stat(values: &[f64], resamples: usize, seed: u64) -> Result<Stat> {
    let se = if values.len() >= 2 {
        Some(bootstrap_se(values, mean, resamples, seed)?)
    } else {
        None
    };
    Ok(Stat {
        mean: mean(values).clamp(0.0, 1.0),
        se,
        n: values.len(),
    })
}

/// Means over the samples where each criterion is defined, IQ once per
/// model from its feature sets, totals, and per-type and per-group totals.
pub fn aggregate(
    samples: &[SampleResult],
    weights: &WeightConfig,
    lexicon: &Lexicon,
    options: &AggregateOptions,
    metadata: RunMetadata,
) -> Result<BenchmarkReport> {
    if samples.is_empty() {
        return Err(Error::invalid("nothing to aggregate: no samples"));
    }
    let mut samples = samples.to_vec();
    let iq = attach_iq(&mut samples, weights, options.iq_in_total)?;
    let b = options.bootstrap_resamples;
    let mut notes = Vec::new();
    let mut models = Vec::new();
    for (model, model_iq) in &iq {
        let mine: Vec<&SampleResult> = samples.iter().filter(|s| &s.model_id == model).collect();
        let seed = |label: String| derive_seed(options.seed, &format!("{model}:{label}"));
        let mut criteria = BTreeMap::new();
        match model_iq {
            Some(v) => {
                criteria.insert(
                    Criterion::IQ,
                    Stat {
                        mean: *v,
                        se: None,
                        n: mine.len(),
                    },
                );
            }
            None => notes.push(format!("{model}: image quality unavailable")),
        }
        for c in [Criterion::OF, Criterion::BF, Criterion::OC, Criterion::BC, Criterion::Total] {
            let values: Vec<f64> = mine.iter().filter_map(|s| s.scores.get(c)).collect();
            if !values.is_empty() {
                criteria.insert(c, stat(&values, b, seed(c.to_string()))?);
            }
        }
        let mut by_type: BTreeMap<EditType, Vec<f64>> = BTreeMap::new();
        let mut by_group: BTreeMap<ClassGroup, Vec<f64>> = BTreeMap::new();
        for s in &mine {
            let total = s.scores.total.expect("attach_iq sets totals");
            by_type.entry(s.edit_type).or_default().push(total);
            by_group.entry(class_group_of(s, lexicon)).or_default().push(total);
        }
        let by_edit_type = by_type
            .into_iter()
            .map(|(t, v)| Ok((t, stat(&v, b, seed(format!("type:{t}")))?)))
            .collect::<Result<_>>()?;
        let by_class_group = by_group
            .into_iter()
            .map(|(g, v)| Ok((g, stat(&v, b, seed(format!("group:{g:?}")))?)))
            .collect::<Result<_>>()?;
        models.push(ModelSummary {
            model_id: model.clone(),
            samples: mine.len(),
            criteria,
            by_edit_type,
            by_class_group,
        });
    }
    let report = BenchmarkReport {
        metadata: RunMetadata {
            bootstrap_resamples: b,
            ..metadata
        },
        models,
        notes,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CriterionScores, MetricVector};

    fn sample(model: &str, q: &str, of: f64, bc: f64) -> SampleResult {
        SampleResult {
            query_id: q.into(),
            model_id: model.into(),
            image_id: "i".into(),
            edit_type: EditType::Removal,
            target_class: Some("dog".into()),
            metrics: MetricVector::new(),
            scores: CriterionScores {
                of: Some(of),
                bc: Some(bc),
                ..Default::default()
            },
            features: None,
        }
    }

    fn opts() -> AggregateOptions {
        AggregateOptions {
            bootstrap_resamples: 200,
            seed: 1,
            iq_in_total: true,
        }
    }

    #[test]
    fn means_and_order_invariance() {
        let w = WeightConfig::uniform();
        let lex = Lexicon::builtin();
        let s = vec![sample("m", "a", 0.2, 1.0), sample("m", "b", 0.8, 0.0)];
        let r = aggregate(&s, &w, lex, &opts(), RunMetadata::default()).unwrap();
        let m = r.model("m").unwrap();
        assert!((m.criteria[&Criterion::OF].mean - 0.5).abs() < 1e-12);
        assert!((m.criteria[&Criterion::Total].mean - 0.5).abs() < 1e-12);
        assert!(!m.criteria.contains_key(&Criterion::IQ));
        assert_eq!(m.by_class_group.keys().copied().collect::<Vec<_>>(), vec![ClassGroup::Animal]);
        let rev: Vec<SampleResult> = s.iter().rev().cloned().collect();
        assert_eq!(aggregate(&rev, &w, lex, &opts(), RunMetadata::default()).unwrap(), r);
    }

    #[test]
    fn one_sample_is_its_own_mean() {
        let r = aggregate(
            &[sample("m", "a", 0.3, 0.9)],
            &WeightConfig::uniform(),
            Lexicon::builtin(),
            &opts(),
            RunMetadata::default(),
        )
        .unwrap();
        let of = r.models[0].criteria[&Criterion::OF];
        assert_eq!((of.mean, of.se, of.n), (0.3, None, 1));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(aggregate(&[], &WeightConfig::uniform(), Lexicon::builtin(), &opts(), RunMetadata::default()).is_err());
    }
}
