//! Majority votes and winning rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Criterion, PreferenceRecord, Vote};

/// Winning rate per model for one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinningRates {
    pub criterion: Criterion,
    pub rates: BTreeMap<String, f64>,
}

impl WinningRates {
    /// Values of both rate maps over their common models, in model order.
    pub fn paired(&self, other: &WinningRates) -> (Vec<String>, Vec<f64>, Vec<f64>) {
        let mut models = Vec::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (m, x) in &self.rates {
            if let Some(y) = other.rates.get(m) {
                models.push(m.clone());
                a.push(*x);
                b.push(*y);
            }
        }
        (models, a, b)
    }
}

pub fn majority_vote(record: &PreferenceRecord) -> Result<Vote> {
    if record.votes.len() != 3 {
        return Err(Error::invariant(format!(
            "question {}: expected exactly 3 votes, got {}",
            record.question_id,
            record.votes.len()
        )));
    }
    let a = record.votes.iter().filter(|v| **v == Vote::A).count();
    Ok(if a >= 2 { Vote::A } else { Vote::B })
}

/// One compared pair and the credit each side earned (1, 0 or 0.5 each).
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome<'a> {
    pub model_a: &'a str,
    pub model_b: &'a str,
    pub credit_a: f64,
}

/// wins / appearances per model.
pub fn tally(criterion: Criterion, outcomes: &[PairOutcome<'_>]) -> WinningRates {
    let mut acc: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for o in outcomes {
        let a = acc.entry(o.model_a).or_default();
        a.0 += o.credit_a;
        a.1 += 1.0;
        let b = acc.entry(o.model_b).or_default();
        b.0 += 1.0 - o.credit_a;
        b.1 += 1.0;
    }
    WinningRates {
        criterion,
        rates: acc
            .into_iter()
            .map(|(m, (w, n))| (m.to_string(), w / n))
            .collect(),
    }
}

/// Human rates `u` from majority votes.
pub fn human_winning_rates(
    records: &[PreferenceRecord],
    criterion: Criterion,
) -> Result<WinningRates> {
    let mut outcomes = Vec::with_capacity(records.len());
    for r in records {
        if r.criterion != criterion {
            return Err(Error::invalid(format!(
                "question {} judges {}, expected {criterion}",
                r.question_id, r.criterion
            )));
        }
        r.validate()?;
        outcomes.push(PairOutcome {
            model_a: &r.sample_a.model_id,
            model_b: &r.sample_b.model_id,
            credit_a: if majority_vote(r)? == Vote::A { 1.0 } else { 0.0 },
        });
    }
    Ok(tally(criterion, &outcomes))
}

/// A question scored by the metric: the strictly higher side wins, exact
/// ties split the credit.
pub fn metric_credit(score_a: f64, score_b: f64) -> f64 {
    if score_a > score_b {
        1.0
    } else if score_b > score_a {
        0.0
    } else {
        0.5
    }
}
