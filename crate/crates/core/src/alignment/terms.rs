//! Criterion scores as functions of a single weight group.
//!
//! Fitting a group holds every other group fixed. Under that restriction a
//! sample's criterion score is `offset + sum(coef_j * combine(w, terms_j))`,
//! which is what [`GroupTerms`] stores, so a candidate weight vector costs
//! one pass over precomputed values.

use crate::error::{Error, Result};
use crate::model::{keys, Criterion, EditType, GroupId, MetricVector, SampleResult, WeightConfig};
use crate::workflows::TARGET_FLAG;

#[derive(Debug, Clone, PartialEq)]
pub struct TermPart {
    pub coef: f64,
    /// `(index into the group's keys, value)`.
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTerms {
    pub offset: f64,
    pub parts: Vec<TermPart>,
}

/// Same convention as [`crate::metrics::combine`]: renormalize over the
/// present terms, average uniformly when they all carry zero weight.
fn combine_indexed(w: &[f64], terms: &[(usize, f64)]) -> f64 {
    let mut mass = 0.0;
    let mut acc = 0.0;
    for &(i, x) in terms {
        mass += w[i];
        acc += w[i] * x;
    }
    let v = if mass > 0.0 {
        acc / mass
    } else {
        terms.iter().map(|(_, x)| x).sum::<f64>() / terms.len() as f64
    };
    v.clamp(0.0, 1.0)
}

impl GroupTerms {
    pub fn constant(value: f64) -> Self {
        GroupTerms {
            offset: value,
            parts: Vec::new(),
        }
    }

    fn single(terms: Vec<(usize, f64)>) -> Self {
        GroupTerms {
            offset: 0.0,
            parts: vec![TermPart { coef: 1.0, terms }],
        }
    }

    pub fn score(&self, w: &[f64]) -> f64 {
        let mut s = self.offset;
        for p in &self.parts {
            s += p.coef * combine_indexed(w, &p.terms);
        }
        s.clamp(0.0, 1.0)
    }
}

/// The criterion a group's weights feed into.
pub fn group_criterion(g: GroupId) -> Criterion {
    match g {
        GroupId::Of | GroupId::OfAddition => Criterion::OF,
        GroupId::Oc | GroupId::OcAttribute | GroupId::OcAttributeInner => Criterion::OC,
        GroupId::Bc | GroupId::BcStyle | GroupId::BcStyleInner => Criterion::BC,
        GroupId::Total => Criterion::Total,
    }
}

/// Groups fitted for a criterion, inner groups before the outer ones that
/// consume them.
pub fn groups_for(c: Criterion) -> Vec<GroupId> {
    match c {
        Criterion::OF => vec![GroupId::Of, GroupId::OfAddition],
        Criterion::OC => vec![GroupId::Oc, GroupId::OcAttributeInner, GroupId::OcAttribute],
        Criterion::BC => vec![GroupId::Bc, GroupId::BcStyleInner, GroupId::BcStyle],
        Criterion::Total => vec![GroupId::Total],
        Criterion::BF | Criterion::IQ => vec![],
    }
}

/// Whether samples of this edit type depend on the group's weights.
pub fn group_applies(g: GroupId, t: EditType) -> bool {
    use EditType::*;
    match g {
        GroupId::Of => matches!(t, Removal | Replacement | Resizing | AttributeChange),
        GroupId::OfAddition => t == Addition,
        GroupId::Oc => matches!(t, Resizing | BackgroundChange),
        GroupId::Bc => matches!(t, Addition | Removal | Replacement | Resizing | AttributeChange),
        GroupId::OcAttribute | GroupId::OcAttributeInner => t == AttributeChange,
        GroupId::BcStyle | GroupId::BcStyleInner => t == StyleChange,
        GroupId::Total => true,
    }
}

fn idx(g: GroupId, key: &str) -> usize {
    g.keys()
        .iter()
        .position(|k| *k == key)
        .unwrap_or_else(|| panic!("group {g} has no key {key}"))
}

fn need(mv: &MetricVector, key: &str) -> Result<f64> {
    mv.get(key)
        .ok_or_else(|| Error::invalid(format!("metric vector lacks `{key}`")))
}

fn triple(mv: &MetricVector, g: GroupId, names: [&str; 3]) -> Result<Vec<(usize, f64)>> {
    Ok(vec![
        (idx(g, "lpips"), need(mv, names[0])?),
        (idx(g, "dino"), need(mv, names[1])?),
        (idx(g, "l2"), need(mv, names[2])?),
    ])
}

const OC_DEG: [&str; 3] = [keys::OC_LPIPS_DEG, keys::OC_DINO_DEG, keys::OC_L2_DEG];
const OC_EDGE: [&str; 3] = [keys::OC_LPIPS_EDGE, keys::OC_DINO_EDGE, keys::OC_L2_EDGE];
const BC_DEG: [&str; 3] = [keys::BC_LPIPS_DEG, keys::BC_DINO_DEG, keys::BC_L2_DEG];
const BC_EDGE: [&str; 3] = [keys::BC_LPIPS_EDGE, keys::BC_DINO_EDGE, keys::BC_L2_EDGE];

/// Inner triple combined under the current weights of `inner`.
fn inner_value(mv: &MetricVector, inner: GroupId, names: [&str; 3], w: &WeightConfig) -> Result<f64> {
    let terms = triple(mv, inner, names)?;
    Ok(combine_indexed(&w.group(inner).to_vec(inner), &terms))
}

/// Splits an outer combination over `(key, value-or-inner)` into a linear
/// function of the inner group's weights.
fn inner_as_parts(
    outer: GroupId,
    w: &WeightConfig,
    fixed: &[(&str, f64)],
    inner_parts: Vec<(&str, Vec<(usize, f64)>)>,
) -> GroupTerms {
    let ow = w.group(outer);
    let n = (fixed.len() + inner_parts.len()) as f64;
    let mass: f64 = fixed
        .iter()
        .map(|(k, _)| ow.get(k).unwrap_or(0.0))
        .chain(inner_parts.iter().map(|(k, _)| ow.get(k).unwrap_or(0.0)))
        .sum();
    let coef = |k: &str| {
        if mass > 0.0 {
            ow.get(k).unwrap_or(0.0) / mass
        } else {
            1.0 / n
        }
    };
    GroupTerms {
        offset: fixed.iter().map(|(k, v)| coef(k) * v).sum(),
        parts: inner_parts
            .into_iter()
            .map(|(k, terms)| TermPart {
                coef: coef(k),
                terms,
            })
            .collect(),
    }
}

/// The sample's score for the group's criterion as a function of the
/// group's weights, every other group taken from `weights`. `None` when the
/// sample does not depend on the group. For the total group, `include_iq`
/// adds the sample's (per-model) IQ when it is known.
pub fn group_terms(
    sample: &SampleResult,
    g: GroupId,
    weights: &WeightConfig,
    include_iq: bool,
) -> Result<Option<GroupTerms>> {
    let t = sample.edit_type;
    if !group_applies(g, t) {
        return Ok(None);
    }
    let mv = &sample.metrics;
    let failed = t.is_object_centric() && mv.detection_failed(TARGET_FLAG);
    let terms = match g {
        GroupId::Total => {
            let s = &sample.scores;
            let mut terms = Vec::new();
            if include_iq {
                if let Some(iq) = s.iq {
                    terms.push((idx(g, "iq"), iq));
                }
            }
            for c in [Criterion::OF, Criterion::BF, Criterion::OC, Criterion::BC] {
                if let Some(v) = s.get(c) {
                    terms.push((idx(g, c.weight_key()), v));
                }
            }
            if terms.is_empty() {
                return Err(Error::invalid(format!(
                    "sample {}/{} has no criterion scores",
                    sample.model_id, sample.query_id
                )));
            }
            GroupTerms::single(terms)
        }
        GroupId::Of if t == EditType::Removal => {
            if failed {
                GroupTerms::constant(1.0)
            } else {
                GroupTerms::single(vec![
                    (idx(g, "clip"), 1.0 - need(mv, keys::OF_CLIP_C)?),
                    (idx(g, "det"), 1.0 - need(mv, keys::OF_DET)?),
                ])
            }
        }
        _ if failed && g != GroupId::Bc => GroupTerms::constant(0.0),
        GroupId::Of => GroupTerms::single(match t {
            EditType::Replacement => vec![
                (idx(g, "clip"), need(mv, keys::OF_CLIP_C)?),
                (idx(g, "det"), need(mv, keys::OF_DET)?),
            ],
            EditType::Resizing => vec![(idx(g, "size"), need(mv, keys::OF_SIZE)?)],
            _ => vec![(idx(g, "clip"), need(mv, keys::OF_CLIP_A)?)],
        }),
        GroupId::OfAddition => GroupTerms::single(vec![
            (idx(g, "clip_c"), need(mv, keys::OF_CLIP_C)?),
            (idx(g, "clip_r"), need(mv, keys::OF_CLIP_R)?),
            (idx(g, "det"), need(mv, keys::OF_DET)?),
        ]),
        GroupId::Oc => {
            let mut terms = triple(mv, g, [keys::OC_LPIPS, keys::OC_DINO, keys::OC_L2])?;
            terms.push((idx(g, "pos"), need(mv, keys::OC_POS)?));
            if t == EditType::BackgroundChange {
                terms.push((idx(g, "size"), need(mv, keys::OC_SIZE)?));
            }
            GroupTerms::single(terms)
        }
        GroupId::Bc => GroupTerms::single(triple(mv, g, [keys::BC_LPIPS, keys::BC_DINO, keys::BC_L2])?),
        GroupId::OcAttribute => {
            let inner = GroupId::OcAttributeInner;
            GroupTerms::single(vec![
                (idx(g, "deg"), inner_value(mv, inner, OC_DEG, weights)?),
                (idx(g, "edge"), inner_value(mv, inner, OC_EDGE, weights)?),
                (idx(g, "pos"), need(mv, keys::OC_POS)?),
                (idx(g, "size"), need(mv, keys::OC_SIZE)?),
            ])
        }
        GroupId::OcAttributeInner => inner_as_parts(
            GroupId::OcAttribute,
            weights,
            &[("pos", need(mv, keys::OC_POS)?), ("size", need(mv, keys::OC_SIZE)?)],
            vec![("deg", triple(mv, g, OC_DEG)?), ("edge", triple(mv, g, OC_EDGE)?)],
        ),
        GroupId::BcStyle => {
            let inner = GroupId::BcStyleInner;
            GroupTerms::single(vec![
                (idx(g, "deg"), inner_value(mv, inner, BC_DEG, weights)?),
                (idx(g, "edge"), inner_value(mv, inner, BC_EDGE, weights)?),
            ])
        }
        GroupId::BcStyleInner => inner_as_parts(
            GroupId::BcStyle,
            weights,
            &[],
            vec![("deg", triple(mv, g, BC_DEG)?), ("edge", triple(mv, g, BC_EDGE)?)],
        ),
    };
    Ok(Some(terms))
}
