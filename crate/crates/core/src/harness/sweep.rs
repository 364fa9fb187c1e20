//! Reports across hyperparameter settings and the series they trace.

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, AggregateOptions, BenchmarkReport, RunMetadata};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::model::{Criterion, SampleResult, WeightConfig};

#[derive(Debug, Clone)]
pub struct SweepSetting {
    pub label: String,
    pub value: f64,
    pub samples: Vec<SampleResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub model_id: String,
    pub criterion: Criterion,
    /// `(parameter value, criterion mean)`, ascending in the parameter.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub settings: Vec<(String, f64, BenchmarkReport)>,
    pub series: Vec<SweepSeries>,
}

pub const SWEEP_CRITERIA: [Criterion; 5] = [
    Criterion::OF,
    Criterion::BF,
    Criterion::OC,
    Criterion::BC,
    Criterion::Total,
];

pub fn sweep(
    parameter: &str,
    settings: Vec<SweepSetting>,
    weights: &WeightConfig,
    lexicon: &Lexicon,
    options: &AggregateOptions,
    metadata: &RunMetadata,
) -> Result<SweepReport> {
    if settings.is_empty() {
        return Err(Error::invalid("sweep needs at least one setting"));
    }
    let mut settings = settings;
    settings.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.label.cmp(&b.label)));
    let mut reports = Vec::with_capacity(settings.len());
    for s in settings {
        let r = aggregate(&s.samples, weights, lexicon, options, metadata.clone())?;
        reports.push((s.label, s.value, r));
    }
    let mut models: Vec<String> = reports
        .iter()
        .flat_map(|(_, _, r)| r.models.iter().map(|m| m.model_id.clone()))
        .collect();
    models.sort();
    models.dedup();
    let mut series = Vec::new();
    for m in &models {
        for c in SWEEP_CRITERIA {
            let points: Vec<(f64, f64)> = reports
                .iter()
                .filter_map(|(_, v, r)| r.model(m)?.criteria.get(&c).map(|s| (*v, s.mean)))
                .collect();
            if !points.is_empty() {
                series.push(SweepSeries {
                    model_id: m.clone(),
                    criterion: c,
                    points,
                });
            }
        }
    }
    Ok(SweepReport {
        parameter: parameter.to_string(),
        settings: reports,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CriterionScores, EditType, MetricVector};

    fn samples(of: f64, bc: f64) -> Vec<SampleResult> {
        (0..3)
            .map(|i| SampleResult {
                query_id: format!("q{i}"),
                model_id: "m".into(),
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
            })
            .collect()
    }

    #[test]
    fn tradeoff_series_are_monotone() {
        let settings = vec![
            SweepSetting { label: "hi".into(), value: 7.5, samples: samples(0.9, 0.4) },
            SweepSetting { label: "lo".into(), value: 1.5, samples: samples(0.3, 0.9) },
            SweepSetting { label: "mid".into(), value: 4.0, samples: samples(0.6, 0.7) },
        ];
        let opts = AggregateOptions {
            bootstrap_resamples: 100,
            ..Default::default()
        };
        let r = sweep("guidance", settings, &WeightConfig::uniform(), Lexicon::builtin(), &opts, &RunMetadata::default()).unwrap();
        let of = r.series.iter().find(|s| s.criterion == Criterion::OF).unwrap();
        let bc = r.series.iter().find(|s| s.criterion == Criterion::BC).unwrap();
        assert_eq!(of.points.len(), 3);
        assert!(of.points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        assert!(bc.points.windows(2).all(|w| w[0].1 > w[1].1));
    }
}
