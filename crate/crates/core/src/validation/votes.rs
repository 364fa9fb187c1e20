//! Simulated annotators. Each judges pairs by a hidden utility, the
//! criterion score under a hidden weight configuration, with logistic noise.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Criterion, GroupId, PreferenceRecord, SampleRef, SampleResult, Vote, WeightConfig, WeightGroup};
use crate::util::rng_for;
use crate::workflows::rescore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoteOptions {
    pub criteria: Vec<Criterion>,
    /// Logistic temperature on utility differences; smaller is less noisy.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for VoteOptions {
    fn default() -> Self {
        VoteOptions {
            criteria: vec![Criterion::OF, Criterion::OC, Criterion::BC, Criterion::Total],
            temperature: 0.02,
            seed: 0,
        }
    }
}

/// Geometric weights `2^-k`, normalized: the first key dominates.
pub fn hidden_weights() -> WeightConfig {
    let mut w = WeightConfig::uniform();
    for g in GroupId::ALL {
        let raw: Vec<f64> = (0..g.keys().len()).map(|k| 0.5f64.powi(k as i32)).collect();
        let sum: f64 = raw.iter().sum();
        let v: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        w.set_group(g, WeightGroup::new(g, &v).expect("normalized"))
            .expect("valid group");
    }
    w
}

/// Three votes per pair of models per query and criterion, for every pair
/// where both sides have the criterion.
pub fn mock_votes(
    samples: &[SampleResult],
    hidden: &WeightConfig,
    options: &VoteOptions,
) -> Result<Vec<PreferenceRecord>> {
    let mut by_query: BTreeMap<&str, Vec<SampleResult>> = BTreeMap::new();
    for s in samples {
        let mut s2 = s.clone();
        rescore(&mut s2, hidden)?;
        by_query.entry(&s.query_id).or_default().push(s2);
    }
    let mut out = Vec::new();
    for &criterion in &options.criteria {
        for (query, group) in &mut by_query {
            group.sort_by(|a, b| a.model_id.cmp(&b.model_id));
            for i in 0..group.len() {
                for j in i + 1..group.len() {
                    let (x, y) = (&group[i], &group[j]);
                    let (Some(ux), Some(uy)) = (x.scores.get(criterion), y.scores.get(criterion)) else {
                        continue;
                    };
                    let question_id = format!("{criterion}:{query}:{}:{}", x.model_id, y.model_id);
                    let mut rng = rng_for(options.seed, &question_id);
                    let ((a, ua), (b, ub)) = if rng.random_bool(0.5) {
                        ((x, ux), (y, uy))
                    } else {
                        ((y, uy), (x, ux))
                    };
                    let p_a = 1.0 / (1.0 + (-(ua - ub) / options.temperature).exp());
                    let votes = (0..3)
                        .map(|_| if rng.random_bool(p_a) { Vote::A } else { Vote::B })
                        .collect();
                    let side = |s: &SampleResult| SampleRef {
                        model_id: s.model_id.clone(),
                        image: format!("{}/{}.png", s.model_id, s.query_id),
                    };
                    out.push(PreferenceRecord {
                        question_id,
                        criterion,
                        query_id: query.to_string(),
                        sample_a: side(a),
                        sample_b: side(b),
                        votes,
                    });
                }
            }
        }
    }
    Ok(out)
}
