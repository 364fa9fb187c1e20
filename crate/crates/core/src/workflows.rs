//! Per-task evaluation: atomic metrics from the backends, then criterion
//! scores from the metrics.
//!
//! Scores are a pure function of the [`MetricVector`] and the weights, so a
//! run can be re-scored under new weights without touching the backends.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendSet, DetectionResult, ImageRef};
use crate::error::{Error, Result};
use crate::filter::best_match;
use crate::metrics::{
    clip_alignment, combine, combine_total, degrade, distance_to_similarity, edge_raster,
    embedding_similarity, l2_similarity, normalize_crop, object_crop, position_consistency,
    size_consistency, size_fidelity, square_region, ObjectCrop, SizeThresholds,
};
use crate::model::{
    keys, Criterion, CriterionScores, EditParams, EditQuery, EditType, GroupId, ImageRecord,
    MetricVector, SampleResult, SceneObject, WeightConfig,
};
use crate::raster::{Mask, Raster};

/// Detection-failure flag of the edited (or added) object.
pub const TARGET_FLAG: &str = "target";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowConfig {
    pub size_thresholds: SizeThresholds,
    /// Score object crops against "red hat" rather than "hat".
    pub qualified_clip_target: bool,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        WorkflowConfig {
            size_thresholds: SizeThresholds::default(),
            qualified_clip_target: true,
        }
    }
}

pub struct EvaluationContext<'a> {
    pub query: &'a EditQuery,
    /// Prepared annotations of the original image.
    pub image: &'a ImageRecord,
    pub original: &'a Raster,
    pub edited: &'a Raster,
    /// Backend key of the edited image, `"<model_id>/<query_id>"`.
    pub edited_key: &'a str,
    pub backends: &'a BackendSet,
    pub weights: &'a WeightConfig,
    pub config: &'a WorkflowConfig,
}

impl EvaluationContext<'_> {
    fn original_ref(&self) -> ImageRef<'_> {
        ImageRef {
            key: &self.image.image_id,
            raster: self.original,
        }
    }

    fn edited_ref(&self) -> ImageRef<'_> {
        ImageRef {
            key: self.edited_key,
            raster: self.edited,
        }
    }

    fn dims(&self) -> (f64, f64) {
        (self.original.height() as f64, self.original.width() as f64)
    }

    fn target(&self) -> Result<&SceneObject> {
        let id = self.query.target_object_id.as_deref().ok_or_else(|| {
            Error::invalid(format!("query {} has no target object", self.query.query_id))
        })?;
        self.image.object(id).ok_or_else(|| {
            Error::invalid(format!(
                "query {}: object {id} not in image {}",
                self.query.query_id, self.image.image_id
            ))
        })
    }

    /// Mask of an annotated object in the original image: the detection
    /// overlapping its box most, or the box itself when nothing is found.
    fn original_mask(&self, obj: &SceneObject) -> Result<Mask> {
        let found = self.backends.segmenter.detect_all(self.original_ref(), &obj.class_name)?;
        match best_match(&obj.bbox, &found) {
            Some(d) => Ok(d.mask.clone()),
            None => {
                warn!(
                    "image {}: {} not detected in the original, using its box",
                    self.image.image_id, obj.object_id
                );
                let (w, h) = self.original.dims();
                Ok(Mask::from_bbox(w, h, &obj.bbox))
            }
        }
    }

    fn detect_edited(&self, class: &str) -> Result<Option<DetectionResult>> {
        self.backends.segmenter.detect(self.edited_ref(), class)
    }

    fn clip(&self, text: &str, image: &Raster) -> Result<f64> {
        let t = self.backends.embedder.embed_text(text)?;
        let i = self.backends.embedder.embed_image(image)?;
        clip_alignment(&t, &i)
    }

    /// lpips, dino and l2 similarities of two equally sized rasters.
    fn triple(&self, a: &Raster, b: &Raster) -> Result<[f64; 3]> {
        let lpips = distance_to_similarity(self.backends.perceptual.distance(a, b)?)?;
        let dino = embedding_similarity(
            &self.backends.patch.embed(a)?,
            &self.backends.patch.embed(b)?,
        )?;
        Ok([lpips, dino, l2_similarity(a, b)?])
    }

    /// Background triple with `mask` blanked from both images.
    fn background_triple(&self, mask: Option<&Mask>) -> Result<[f64; 3]> {
        match mask {
            Some(m) => self.triple(&self.original.blank(m)?, &self.edited.blank(m)?),
            None => self.triple(self.original, self.edited),
        }
    }
}

fn insert_triple(mv: &mut MetricVector, names: [&str; 3], values: [f64; 3]) -> Result<()> {
    for (k, v) in names.into_iter().zip(values) {
        mv.insert(k, v)?;
    }
    Ok(())
}

const BC_TRIPLE: [&str; 3] = [keys::BC_LPIPS, keys::BC_DINO, keys::BC_L2];
const OC_TRIPLE: [&str; 3] = [keys::OC_LPIPS, keys::OC_DINO, keys::OC_L2];
const OC_DEG: [&str; 3] = [keys::OC_LPIPS_DEG, keys::OC_DINO_DEG, keys::OC_L2_DEG];
const OC_EDGE: [&str; 3] = [keys::OC_LPIPS_EDGE, keys::OC_DINO_EDGE, keys::OC_L2_EDGE];
const BC_DEG: [&str; 3] = [keys::BC_LPIPS_DEG, keys::BC_DINO_DEG, keys::BC_L2_DEG];
const BC_EDGE: [&str; 3] = [keys::BC_LPIPS_EDGE, keys::BC_DINO_EDGE, keys::BC_L2_EDGE];

/// Object consistency terms between an original and an edited crop.
struct ObjectComparison {
    triple: [f64; 3],
    pos: f64,
    size: f64,
}

fn compare_objects(
    ctx: &EvaluationContext<'_>,
    before: &ObjectCrop,
    after: &ObjectCrop,
) -> Result<ObjectComparison> {
    let (h, w) = ctx.dims();
    Ok(ObjectComparison {
        triple: ctx.triple(&normalize_crop(&before.raster), &normalize_crop(&after.raster))?,
        pos: position_consistency(before.center_of_mass, after.center_of_mass, before.area, h, w)?,
        size: size_consistency(before.area, after.area, h, w)?,
    })
}

pub fn eval_addition(ctx: &EvaluationContext<'_>) -> Result<MetricVector> {
    let EditParams::Addition {
        target_class,
        relation,
    } = &ctx.query.params
    else {
        return Err(Error::invalid("addition workflow on another edit type"));
    };
    let anchor = ctx.target()?;
    let mut mv = MetricVector::new();
    let Some(det) = ctx.detect_edited(target_class)? else {
        mv.set_detection_failure(TARGET_FLAG, true);
        insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(None)?)?;
        return Ok(mv);
    };
    mv.set_detection_failure(TARGET_FLAG, false);
    let crop = object_crop(ctx.edited, &det.mask)?;
    mv.insert(keys::OF_CLIP_C, ctx.clip(target_class, &normalize_crop(&crop.raster))?)?;
    let region = square_region(ctx.edited, &[anchor.bbox, det.bbox])?;
    let phrase = format!("{target_class} {} {}", relation.phrase(), anchor.class_name);
    mv.insert(keys::OF_CLIP_R, ctx.clip(&phrase, &normalize_crop(&region))?)?;
    mv.insert(keys::OF_DET, det.confidence)?;
    insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&det.mask))?)?;
    Ok(mv)
}

pub fn eval_removal(ctx: &EvaluationContext<'_>) -> Result<MetricVector> {
    let obj = ctx.target()?;
    let m0 = ctx.original_mask(obj)?;
    let mut mv = MetricVector::new();
    let Some(det) = ctx.detect_edited(&obj.class_name)? else {
        mv.set_detection_failure(TARGET_FLAG, true);
        insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&m0))?)?;
        return Ok(mv);
    };
    mv.set_detection_failure(TARGET_FLAG, false);
    let crop = object_crop(ctx.edited, &det.mask)?;
    mv.insert(keys::OF_CLIP_C, ctx.clip(&obj.class_name, &normalize_crop(&crop.raster))?)?;
    mv.insert(keys::OF_DET, det.confidence)?;
    let union = m0.union(&det.mask)?;
    insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&union))?)?;
    Ok(mv)
}

pub fn eval_replacement(ctx: &EvaluationContext<'_>) -> Result<MetricVector> {
    let EditParams::Replacement { target_class } = &ctx.query.params else {
        return Err(Error::invalid("replacement workflow on another edit type"));
    };
    let obj = ctx.target()?;
    let m0 = ctx.original_mask(obj)?;
    let mut mv = MetricVector::new();
    let Some(det) = ctx.detect_edited(target_class)? else {
        mv.set_detection_failure(TARGET_FLAG, true);
        insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&m0))?)?;
        return Ok(mv);
    };
    mv.set_detection_failure(TARGET_FLAG, false);
    let before = object_crop(ctx.original, &m0)?;
    let after = object_crop(ctx.edited, &det.mask)?;
    mv.insert(keys::OF_CLIP_C, ctx.clip(target_class, &normalize_crop(&after.raster))?)?;
    mv.insert(keys::OF_DET, det.confidence)?;
    let (h, w) = ctx.dims();
    mv.insert(
        keys::OC_POS,
        position_consistency(before.center_of_mass, after.center_of_mass, before.area, h, w)?,
    )?;
    let union = m0.union(&det.mask)?;
    insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&union))?)?;
    Ok(mv)
}

pub fn eval_resizing(ctx: &EvaluationContext<'_>) -> Result<MetricVector> {
    let EditParams::Resizing { direction } = &ctx.query.params else {
        return Err(Error::invalid("resizing workflow on another edit type"));
    };
    let obj = ctx.target()?;
    let m0 = ctx.original_mask(obj)?;
    let mut mv = MetricVector::new();
    let Some(det) = ctx.detect_edited(&obj.class_name)? else {
        mv.set_detection_failure(TARGET_FLAG, true);
        insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&m0))?)?;
        return Ok(mv);
    };
    mv.set_detection_failure(TARGET_FLAG, false);
    let before = object_crop(ctx.original, &m0)?;
    let after = object_crop(ctx.edited, &det.mask)?;
    mv.insert(
        keys::OF_SIZE,
        size_fidelity(before.area, after.area, *direction, ctx.config.size_thresholds)?,
    )?;
    let cmp = compare_objects(ctx, &before, &after)?;
    insert_triple(&mut mv, OC_TRIPLE, cmp.triple)?;
    mv.insert(keys::OC_POS, cmp.pos)?;
    let union = m0.union(&det.mask)?;
    insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&union))?)?;
    Ok(mv)
}

pub fn eval_attribute_change(ctx: &EvaluationContext<'_>) -> Result<MetricVector> {
    let EditParams::AttributeChange { to, .. } = &ctx.query.params else {
        return Err(Error::invalid("attribute workflow on another edit type"));
    };
    let obj = ctx.target()?;
    let m0 = ctx.original_mask(obj)?;
    let mut mv = MetricVector::new();
    let Some(det) = ctx.detect_edited(&obj.class_name)? else {
        mv.set_detection_failure(TARGET_FLAG, true);
        insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&m0))?)?;
        return Ok(mv);
    };
    mv.set_detection_failure(TARGET_FLAG, false);
    let before = object_crop(ctx.original, &m0)?;
    let after = object_crop(ctx.edited, &det.mask)?;
    let text = if ctx.config.qualified_clip_target {
        format!("{to} {}", obj.class_name)
    } else {
        obj.class_name.clone()
    };
    let (b, a) = (normalize_crop(&before.raster), normalize_crop(&after.raster));
    mv.insert(keys::OF_CLIP_A, ctx.clip(&text, &a)?)?;
    insert_triple(&mut mv, OC_DEG, ctx.triple(&degrade(&b), &degrade(&a))?)?;
    insert_triple(&mut mv, OC_EDGE, ctx.triple(&edge_raster(&b), &edge_raster(&a))?)?;
    let (h, w) = ctx.dims();
    mv.insert(
        keys::OC_POS,
        position_consistency(before.center_of_mass, after.center_of_mass, before.area, h, w)?,
    )?;
    mv.insert(keys::OC_SIZE, size_consistency(before.area, after.area, h, w)?)?;
    let union = m0.union(&det.mask)?;
    insert_triple(&mut mv, BC_TRIPLE, ctx.background_triple(Some(&union))?)?;
    Ok(mv)
}

/// Flag name for a foreground object of a background change.
pub fn object_flag(object_id: &str) -> String {
    format!("object:{object_id}")
}

pub fn eval_background_change(ctx: &EvaluationContext<'_>) -> Result<MetricVector> {
    let EditParams::BackgroundChange { background } = &ctx.query.params else {
        return Err(Error::invalid("background workflow on another edit type"));
    };
    let foreground: Vec<&SceneObject> = ctx.image.editable_objects().collect();
    if foreground.is_empty() {
        return Err(Error::invalid(format!(
            "query {}: background change needs at least one foreground object",
            ctx.query.query_id
        )));
    }
    let mut mv = MetricVector::new();
    let (w, h) = ctx.original.dims();
    let mut masked = Mask::empty(w, h);
    // lpips, dino, l2, pos, size summed over objects; undetected add 0.
    let mut sums = [0.0f64; 5];
    for obj in &foreground {
        let m0 = ctx.original_mask(obj)?;
        let Some(det) = ctx.detect_edited(&obj.class_name)? else {
            mv.set_detection_failure(&object_flag(&obj.object_id), true);
            continue;
        };
        mv.set_detection_failure(&object_flag(&obj.object_id), false);
        masked = masked.union(&m0)?.union(&det.mask)?;
        let before = object_crop(ctx.original, &m0)?;
        let after = object_crop(ctx.edited, &det.mask)?;
        let cmp = compare_objects(ctx, &before, &after)?;
        for (s, v) in sums.iter_mut().zip(cmp.triple.into_iter().chain([cmp.pos, cmp.size])) {
            *s += v;
        }
    }
    let n = foreground.len() as f64;
    let names = [keys::OC_LPIPS, keys::OC_DINO, keys::OC_L2, keys::OC_POS, keys::OC_SIZE];
    for (k, s) in names.into_iter().zip(sums) {
        mv.insert(k, (s / n).clamp(0.0, 1.0))?;
    }
    let background_only = ctx.edited.blank(&masked)?;
    mv.insert(keys::BF_CLIP, ctx.clip(background, &background_only)?)?;
    Ok(mv)
}

pub fn eval_style_change(ctx: &EvaluationContext<'_>) -> Result<MetricVector> {
    let EditParams::StyleChange { style } = &ctx.query.params else {
        return Err(Error::invalid("style workflow on another edit type"));
    };
    let mut mv = MetricVector::new();
    mv.insert(keys::BF_CLIP, ctx.clip(style, ctx.edited)?)?;
    insert_triple(&mut mv, BC_DEG, ctx.triple(&degrade(ctx.original), &degrade(ctx.edited))?)?;
    insert_triple(
        &mut mv,
        BC_EDGE,
        ctx.triple(&edge_raster(ctx.original), &edge_raster(ctx.edited))?,
    )?;
    Ok(mv)
}

/// The criteria each task is scored on.
pub fn criteria_for(t: EditType) -> &'static [Criterion] {
    match t {
        EditType::Addition | EditType::Removal => &[Criterion::OF, Criterion::BC],
        EditType::Replacement | EditType::Resizing | EditType::AttributeChange => {
            &[Criterion::OF, Criterion::OC, Criterion::BC]
        }
        EditType::BackgroundChange => &[Criterion::BF, Criterion::OC],
        EditType::StyleChange => &[Criterion::BF, Criterion::BC],
    }
}

fn need(mv: &MetricVector, key: &str) -> Result<f64> {
    mv.get(key)
        .ok_or_else(|| Error::invalid(format!("metric vector lacks `{key}`")))
}

fn triple_terms(mv: &MetricVector, names: [&str; 3]) -> Result<Vec<(&'static str, f64)>> {
    Ok(vec![
        ("lpips", need(mv, names[0])?),
        ("dino", need(mv, names[1])?),
        ("l2", need(mv, names[2])?),
    ])
}

/// Criterion scores of one sample from its metrics. IQ is left absent and
/// the total covers the per-sample criteria only.
pub fn score_metrics(
    edit_type: EditType,
    mv: &MetricVector,
    weights: &WeightConfig,
) -> Result<CriterionScores> {
    let failed = mv.detection_failed(TARGET_FLAG);
    let bc = || combine(weights, GroupId::Bc, &triple_terms(mv, BC_TRIPLE)?);
    let mut s = CriterionScores::default();
    match edit_type {
        EditType::Addition => {
            s.of = Some(if failed {
                0.0
            } else {
                combine(
                    weights,
                    GroupId::OfAddition,
                    &[
                        ("clip_c", need(mv, keys::OF_CLIP_C)?),
                        ("clip_r", need(mv, keys::OF_CLIP_R)?),
                        ("det", need(mv, keys::OF_DET)?),
                    ],
                )?
            });
            s.bc = Some(bc()?);
        }
        EditType::Removal => {
            s.of = Some(if failed {
                1.0
            } else {
                combine(
                    weights,
                    GroupId::Of,
                    &[
                        ("clip", 1.0 - need(mv, keys::OF_CLIP_C)?),
                        ("det", 1.0 - need(mv, keys::OF_DET)?),
                    ],
                )?
            });
            s.bc = Some(bc()?);
        }
        EditType::Replacement => {
            if failed {
                s.of = Some(0.0);
                s.oc = Some(0.0);
            } else {
                s.of = Some(combine(
                    weights,
                    GroupId::Of,
                    &[("clip", need(mv, keys::OF_CLIP_C)?), ("det", need(mv, keys::OF_DET)?)],
                )?);
                s.oc = Some(need(mv, keys::OC_POS)?);
            }
            s.bc = Some(bc()?);
        }
        EditType::Resizing => {
            if failed {
                s.of = Some(0.0);
                s.oc = Some(0.0);
            } else {
                s.of = Some(combine(weights, GroupId::Of, &[("size", need(mv, keys::OF_SIZE)?)])?);
                let mut terms = triple_terms(mv, OC_TRIPLE)?;
                terms.push(("pos", need(mv, keys::OC_POS)?));
                s.oc = Some(combine(weights, GroupId::Oc, &terms)?);
            }
            s.bc = Some(bc()?);
        }
        EditType::AttributeChange => {
            if failed {
                s.of = Some(0.0);
                s.oc = Some(0.0);
            } else {
                s.of = Some(combine(weights, GroupId::Of, &[("clip", need(mv, keys::OF_CLIP_A)?)])?);
                let deg = combine(weights, GroupId::OcAttributeInner, &triple_terms(mv, OC_DEG)?)?;
                let edge = combine(weights, GroupId::OcAttributeInner, &triple_terms(mv, OC_EDGE)?)?;
                s.oc = Some(combine(
                    weights,
                    GroupId::OcAttribute,
                    &[
                        ("deg", deg),
                        ("edge", edge),
                        ("pos", need(mv, keys::OC_POS)?),
                        ("size", need(mv, keys::OC_SIZE)?),
                    ],
                )?);
            }
            s.bc = Some(bc()?);
        }
        EditType::BackgroundChange => {
            s.bf = Some(need(mv, keys::BF_CLIP)?);
            let mut terms = triple_terms(mv, OC_TRIPLE)?;
            terms.push(("pos", need(mv, keys::OC_POS)?));
            terms.push(("size", need(mv, keys::OC_SIZE)?));
            s.oc = Some(combine(weights, GroupId::Oc, &terms)?);
        }
        EditType::StyleChange => {
            s.bf = Some(need(mv, keys::BF_CLIP)?);
            let deg = combine(weights, GroupId::BcStyleInner, &triple_terms(mv, BC_DEG)?)?;
            let edge = combine(weights, GroupId::BcStyleInner, &triple_terms(mv, BC_EDGE)?)?;
            s.bc = Some(combine(weights, GroupId::BcStyle, &[("deg", deg), ("edge", edge)])?);
        }
    }
    s.total = Some(combine_total(&s, weights)?);
    Ok(s)
}

/// Recomputes a sample's scores from its metrics under `weights`, keeping
/// its IQ and counting it in the total.
pub fn rescore(sample: &mut SampleResult, weights: &WeightConfig) -> Result<()> {
    let iq = sample.scores.iq;
    let mut s = score_metrics(sample.edit_type, &sample.metrics, weights)?;
    s.iq = iq;
    s.total = Some(combine_total(&s, weights)?);
    sample.scores = s;
    Ok(())
}

/// Dispatches on the edit type and scores the resulting metrics.
pub fn evaluate_sample(ctx: &EvaluationContext<'_>) -> Result<(MetricVector, CriterionScores)> {
    let t = ctx.query.edit_type();
    let (w, h) = ctx.original.dims();
    ctx.edited.check_same((w, h))?;
    let mv = match t {
        EditType::Addition => eval_addition(ctx)?,
        EditType::Removal => eval_removal(ctx)?,
        EditType::Replacement => eval_replacement(ctx)?,
        EditType::Resizing => eval_resizing(ctx)?,
        EditType::AttributeChange => eval_attribute_change(ctx)?,
        EditType::BackgroundChange => eval_background_change(ctx)?,
        EditType::StyleChange => eval_style_change(ctx)?,
    };
    let scores = score_metrics(t, &mv, ctx.weights)?;
    Ok((mv, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(pairs: &[(&str, f64)], failed: Option<bool>) -> MetricVector {
        let mut m = MetricVector::new();
        for (k, v) in pairs {
            m.insert(k, *v).unwrap();
        }
        if let Some(f) = failed {
            m.set_detection_failure(TARGET_FLAG, f);
        }
        m
    }

    const BC_ONES: [(&str, f64); 3] = [(keys::BC_LPIPS, 1.0), (keys::BC_DINO, 1.0), (keys::BC_L2, 1.0)];

    #[test]
    fn addition_arithmetic_and_failure() {
        let w = WeightConfig::uniform();
        let mut pairs = vec![(keys::OF_CLIP_C, 0.8), (keys::OF_CLIP_R, 0.6), (keys::OF_DET, 1.0)];
        pairs.extend(BC_ONES);
        let s = score_metrics(EditType::Addition, &mv(&pairs, Some(false)), &w).unwrap();
        assert!((s.of.unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(s.bc, Some(1.0));
        let f = score_metrics(EditType::Addition, &mv(&BC_ONES, Some(true)), &w).unwrap();
        assert_eq!(f.of, Some(0.0));
        assert_eq!(f.present(), vec![Criterion::OF, Criterion::BC]);
    }

    #[test]
    fn removal_uses_complements() {
        let w = WeightConfig::uniform();
        let mut pairs = vec![(keys::OF_CLIP_C, 0.4), (keys::OF_DET, 0.2)];
        pairs.extend(BC_ONES);
        let s = score_metrics(EditType::Removal, &mv(&pairs, Some(false)), &w).unwrap();
        assert!((s.of.unwrap() - 0.7).abs() < 1e-12);
        let f = score_metrics(EditType::Removal, &mv(&BC_ONES, Some(true)), &w).unwrap();
        assert_eq!(f.of, Some(1.0));
        let mut perfect_failure = vec![(keys::OF_CLIP_C, 1.0), (keys::OF_DET, 1.0)];
        perfect_failure.extend(BC_ONES);
        let p = score_metrics(EditType::Removal, &mv(&perfect_failure, Some(false)), &w).unwrap();
        assert_eq!(p.of, Some(0.0));
    }

    #[test]
    fn failures_zero_object_scores() {
        let w = WeightConfig::uniform();
        for t in [EditType::Replacement, EditType::Resizing, EditType::AttributeChange] {
            let s = score_metrics(t, &mv(&BC_ONES, Some(true)), &w).unwrap();
            assert_eq!((s.of, s.oc, s.bc), (Some(0.0), Some(0.0), Some(1.0)), "{t}");
        }
    }

    #[test]
    fn criteria_sets_follow_the_task_map() {
        let w = WeightConfig::uniform();
        let all: Vec<(&str, f64)> = [
            keys::OF_CLIP_C,
            keys::OF_CLIP_R,
            keys::OF_CLIP_A,
            keys::OF_DET,
            keys::OF_SIZE,
            keys::BF_CLIP,
            keys::OC_LPIPS,
            keys::OC_DINO,
            keys::OC_L2,
            keys::OC_POS,
            keys::OC_SIZE,
            keys::OC_LPIPS_DEG,
            keys::OC_DINO_DEG,
            keys::OC_L2_DEG,
            keys::OC_LPIPS_EDGE,
            keys::OC_DINO_EDGE,
            keys::OC_L2_EDGE,
            keys::BC_LPIPS,
            keys::BC_DINO,
            keys::BC_L2,
            keys::BC_LPIPS_DEG,
            keys::BC_DINO_DEG,
            keys::BC_L2_DEG,
            keys::BC_LPIPS_EDGE,
            keys::BC_DINO_EDGE,
            keys::BC_L2_EDGE,
        ]
        .into_iter()
        .map(|k| (k, 0.5))
        .collect();
        for t in EditType::ALL {
            let s = score_metrics(t, &mv(&all, Some(false)), &w).unwrap();
            assert_eq!(s.present(), criteria_for(t).to_vec(), "{t}");
            assert!((s.total.unwrap() - 0.5).abs() < 1e-12);
        }
    }

    mod rasters {
        use std::sync::Arc;

        use super::super::*;
        use crate::backends::mock::{
            signature_color, ColorStatsExtractor, FnVqa, MemorySegmenter, PaletteEmbedder,
            PixelPerceptual, ThumbnailEmbedder,
        };
        use crate::model::{BBox, Captions, SizeDirection};

        const SIDE: u32 = 64;
        const GRAY: [f32; 3] = [0.5, 0.5, 0.5];

        fn cup_box() -> BBox {
            BBox::new(16.0, 16.0, 16.0, 16.0)
        }

        fn record() -> ImageRecord {
            ImageRecord {
                image_id: "img".into(),
                width: SIDE,
                height: SIDE,
                objects: vec![SceneObject {
                    object_id: "o1".into(),
                    class_name: "cup".into(),
                    bbox: cup_box(),
                    attributes: Default::default(),
                    relations: vec![],
                    editable: true,
                }],
                source_path: String::new(),
            }
        }

        fn scene(with_cup: bool) -> Raster {
            let b = cup_box();
            let cup = signature_color("cup");
            Raster::from_fn(SIDE, SIDE, |x, y| {
                let inside = (x as f64) >= b.x
                    && (x as f64) < b.right()
                    && (y as f64) >= b.y
                    && (y as f64) < b.bottom();
                if with_cup && inside {
                    cup
                } else {
                    GRAY
                }
            })
        }

        fn backends(seg: MemorySegmenter) -> BackendSet {
            BackendSet {
                embedder: Arc::new(PaletteEmbedder::default()),
                perceptual: Arc::new(PixelPerceptual),
                patch: Arc::new(ThumbnailEmbedder),
                segmenter: Arc::new(seg),
                vqa: Arc::new(FnVqa(|_: &str, _: &str| Ok(true))),
                features: Arc::new(ColorStatsExtractor),
            }
        }

        fn cup_detection() -> DetectionResult {
            DetectionResult::new("cup", Mask::from_bbox(SIDE, SIDE, &cup_box()), 0.9).unwrap()
        }

        fn query(params: EditParams) -> EditQuery {
            EditQuery {
                query_id: "q".into(),
                image_id: "img".into(),
                target_object_id: Some("o1".into()),
                object_class: Some("cup".into()),
                params,
                captions: Captions::default(),
            }
        }

        fn run(q: &EditQuery, edited: &Raster, seg: MemorySegmenter) -> (MetricVector, CriterionScores) {
            let rec = record();
            let original = scene(true);
            let set = backends(seg);
            let weights = WeightConfig::uniform();
            let config = WorkflowConfig::default();
            let ctx = EvaluationContext {
                query: q,
                image: &rec,
                original: &original,
                edited,
                edited_key: "m/q",
                backends: &set,
                weights: &weights,
                config: &config,
            };
            evaluate_sample(&ctx).unwrap()
        }

        #[test]
        fn clean_removal_is_perfect() {
            let mut seg = MemorySegmenter::new();
            seg.insert("img", cup_detection());
            let (mv, s) = run(&query(EditParams::Removal), &scene(false), seg);
            assert!(mv.detection_failed(TARGET_FLAG));
            assert_eq!(s.of, Some(1.0));
            assert!((s.bc.unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn unchanged_resize_keeps_the_object_but_misses_the_size() {
            let mut seg = MemorySegmenter::new();
            seg.insert("img", cup_detection());
            seg.insert("m/q", cup_detection());
            let q = query(EditParams::Resizing {
                direction: SizeDirection::Larger,
            });
            let (mv, s) = run(&q, &scene(true), seg);
            assert_eq!(mv.get(keys::OF_SIZE), Some(0.0));
            assert!((s.oc.unwrap() - 1.0).abs() < 1e-9);
            assert!((s.bc.unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn recolor_scores_against_qualified_text() {
            let mut seg = MemorySegmenter::new();
            seg.insert("img", cup_detection());
            seg.insert("m/q", cup_detection());
            let q = query(EditParams::AttributeChange {
                category: crate::model::AttributeCategory::Color,
                from: "white".into(),
                to: "red".into(),
            });
            let b = cup_box();
            let mut edited = scene(true);
            for y in b.y as u32..b.bottom() as u32 {
                for x in b.x as u32..b.right() as u32 {
                    edited.set(x, y, signature_color("red"));
                }
            }
            let (_, recolored) = run(&q, &edited, seg.clone());
            let (_, untouched) = run(&q, &scene(true), seg);
            assert!(recolored.of.unwrap() > untouched.of.unwrap());
            assert!((recolored.bc.unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn identical_style_keeps_structure() {
            let q = EditQuery {
                target_object_id: None,
                object_class: None,
                ..query(EditParams::StyleChange {
                    style: "oil painting".into(),
                })
            };
            let (mv, s) = run(&q, &scene(true), MemorySegmenter::new());
            assert!(mv.get(keys::BF_CLIP).is_some());
            assert!((s.bc.unwrap() - 1.0).abs() < 1e-9);
            assert_eq!(s.present(), vec![Criterion::BF, Criterion::BC]);
        }

        #[test]
        fn background_change_with_missing_object() {
            let mut seg = MemorySegmenter::new();
            seg.insert("img", cup_detection());
            let q = query(EditParams::BackgroundChange {
                background: "beach".into(),
            });
            let (mv, s) = run(&q, &scene(true), seg);
            assert!(mv.detection_failed(&object_flag("o1")));
            assert_eq!(s.oc, Some(0.0));
            assert!(s.bf.is_some());
        }
    }
}
