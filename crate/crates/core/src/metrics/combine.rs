//! Convex combinations renormalized over the terms actually present.

use crate::error::{Error, Result};
use crate::model::{Criterion, CriterionScores, GroupId, WeightConfig};

/// `sum(w_k x_k) / sum(w_k)` over the given terms. When every present term
/// has zero weight the terms are averaged uniformly.
pub fn combine(weights: &WeightConfig, group: GroupId, terms: &[(&str, f64)]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::invalid(format!("nothing to combine in group {group}")));
    }
    let g = weights.group(group);
    let mut ws = Vec::with_capacity(terms.len());
    for (key, _) in terms {
        let w = g.get(key).ok_or_else(|| Error::MissingWeight {
            group: group.to_string(),
            key: key.to_string(),
        })?;
        ws.push(w);
    }
    let mass: f64 = ws.iter().sum();
    let value = if mass > 0.0 {
        terms.iter().zip(&ws).map(|((_, x), w)| w * x).sum::<f64>() / mass
    } else {
        terms.iter().map(|(_, x)| x).sum::<f64>() / terms.len() as f64
    };
    Ok(value.clamp(0.0, 1.0))
}

pub fn combine_of(weights: &WeightConfig, terms: &[(&str, f64)]) -> Result<f64> {
    combine(weights, GroupId::Of, terms)
}

pub fn combine_oc(weights: &WeightConfig, terms: &[(&str, f64)]) -> Result<f64> {
    combine(weights, GroupId::Oc, terms)
}

pub fn combine_bc(weights: &WeightConfig, terms: &[(&str, f64)]) -> Result<f64> {
    combine(weights, GroupId::Bc, terms)
}

/// Weighted total over whichever of IQ, OF, BF, OC, BC are present.
pub fn combine_total(scores: &CriterionScores, weights: &WeightConfig) -> Result<f64> {
    let terms: Vec<(&str, f64)> = Criterion::PARTS
        .iter()
        .filter_map(|c| scores.get(*c).map(|v| (c.weight_key(), v)))
        .collect();
    if terms.is_empty() {
        return Err(Error::invalid("total score needs at least one criterion"));
    }
    combine(weights, GroupId::Total, &terms)
}
