//! Stratified down-sampling of the candidate pool.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EditParams, EditQuery, EditType};
use crate::util::rng_for;

/// Targets per edit type. Types without a target keep every candidate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalanceConfig {
    pub per_type: BTreeMap<EditType, usize>,
    /// Upper bound on queries sharing a stratum within one edit type.
    pub per_stratum: Option<usize>,
}

impl BalanceConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        crate::model::io::read_json(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub edit_type: EditType,
    pub target: usize,
    pub selected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub candidates_by_type: BTreeMap<EditType, usize>,
    pub selected_by_type: BTreeMap<EditType, usize>,
    /// Selected queries per target class (object-centric types only).
    pub selected_by_class: BTreeMap<String, usize>,
    /// Selected queries per background or style option.
    pub selected_by_option: BTreeMap<String, usize>,
    pub shortfalls: Vec<Shortfall>,
}

/// Stratum a query is balanced over: the edited class for object-centric
/// edits, the chosen option otherwise.
pub fn stratum(q: &EditQuery) -> String {
    match &q.params {
        EditParams::BackgroundChange { background } => background.clone(),
        EditParams::StyleChange { style } => style.clone(),
        _ => q.edited_class().unwrap_or_default().to_string(),
    }
}

/// Round-robin over strata (sorted), each shuffled under the seed, until the
/// per-type target is met. Selected queries keep their pool order.
pub fn balance_pool(
    pool: &[EditQuery],
    cfg: &BalanceConfig,
    seed: u64,
) -> Result<(Vec<EditQuery>, BalanceReport)> {
    let ids: BTreeSet<&str> = pool.iter().map(|q| q.query_id.as_str()).collect();
    if ids.len() != pool.len() {
        return Err(Error::invariant("candidate pool has duplicate query ids"));
    }
    let mut report = BalanceReport::default();
    let mut by_type: BTreeMap<EditType, BTreeMap<String, Vec<usize>>> = BTreeMap::new();
    for (i, q) in pool.iter().enumerate() {
        *report.candidates_by_type.entry(q.edit_type()).or_default() += 1;
        by_type
            .entry(q.edit_type())
            .or_default()
            .entry(stratum(q))
            .or_default()
            .push(i);
    }

    let mut chosen = vec![false; pool.len()];
    for (t, strata) in by_type {
        let total: usize = strata.values().map(Vec::len).sum();
        let target = cfg.per_type.get(&t).copied().unwrap_or(total);
        let cap = cfg.per_stratum.unwrap_or(usize::MAX);
        let mut queues: Vec<Vec<usize>> = strata
            .into_iter()
            .map(|(name, mut idx)| {
                let mut rng = rng_for(seed, &format!("balance:{t}:{name}"));
                idx.shuffle(&mut rng);
                idx.truncate(cap);
                idx.reverse();
                idx
            })
            .collect();
        let mut selected = 0;
        while selected < target && queues.iter().any(|q| !q.is_empty()) {
            for q in queues.iter_mut() {
                if selected == target {
                    break;
                }
                if let Some(i) = q.pop() {
                    chosen[i] = true;
                    selected += 1;
                }
            }
        }
        if selected < target {
            report.shortfalls.push(Shortfall {
                edit_type: t,
                target,
                selected,
            });
        }
    }

    let out: Vec<EditQuery> = pool
        .iter()
        .zip(&chosen)
        .filter(|(_, c)| **c)
        .map(|(q, _)| q.clone())
        .collect();
    for q in &out {
        *report.selected_by_type.entry(q.edit_type()).or_default() += 1;
        let key = stratum(q);
        if q.edit_type().is_object_centric() {
            *report.selected_by_class.entry(key).or_default() += 1;
        } else {
            *report.selected_by_option.entry(key).or_default() += 1;
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Captions;

    fn q(id: &str, class: &str) -> EditQuery {
        EditQuery {
            query_id: id.into(),
            image_id: "i".into(),
            target_object_id: Some("o".into()),
            object_class: Some(class.into()),
            params: EditParams::Removal,
            captions: Captions::default(),
        }
    }

    #[test]
    fn untargeted_pool_is_unchanged() {
        let pool = vec![q("a", "dog"), q("b", "cat")];
        let (out, report) = balance_pool(&pool, &BalanceConfig::default(), 1).unwrap();
        assert_eq!(out, pool);
        assert!(report.shortfalls.is_empty());
    }

    #[test]
    fn overrepresented_class_is_downsampled() {
        let mut pool: Vec<EditQuery> = (0..6).map(|i| q(&format!("d{i}"), "dog")).collect();
        pool.push(q("c0", "cat"));
        pool.push(q("c1", "cat"));
        let cfg = BalanceConfig {
            per_type: [(EditType::Removal, 4)].into(),
            per_stratum: None,
        };
        let (out, report) = balance_pool(&pool, &cfg, 9).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(report.selected_by_class["dog"], 2);
        assert_eq!(report.selected_by_class["cat"], 2);
        assert_eq!(balance_pool(&pool, &cfg, 9).unwrap().0, out);
    }

    #[test]
    fn shortfall_is_reported() {
        let pool = vec![q("a", "dog")];
        let cfg = BalanceConfig {
            per_type: [(EditType::Removal, 3)].into(),
            per_stratum: None,
        };
        let (_, report) = balance_pool(&pool, &cfg, 0).unwrap();
        assert_eq!(
            report.shortfalls,
            vec![Shortfall {
                edit_type: EditType::Removal,
                target: 3,
                selected: 1
            }]
        );
    }
}
