//! Editable-object selection and image preparation.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{DetectionResult, ImageRef, Segmenter, Vqa};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::model::{BBox, ImageRecord, SceneObject};
use crate::raster::{Mask, Raster};

/// Output side of prepared images.
pub const PREPARED_SIDE: u32 = 512;

/// The six occlusion questions; `{A}` is replaced by the object name.
pub const OCCLUSION_QUESTIONS: [&str; 6] = [
    "Is the {A} hidden behind another object?",
    "Is part of the {A} covered by another object?",
    "Is the {A} partially outside the image frame?",
    "Is part of the {A} blocked by something else in the scene?",
    "Are parts of the {A} visible?",
    "Is the {A} fully in view without anything blocking it?",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooSmall,
    Cropped,
    Occluded,
    UndetectedIou,
    DuplicateClass,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::TooSmall => "too_small",
            RejectReason::Cropped => "cropped",
            RejectReason::Occluded => "occluded",
            RejectReason::UndetectedIou => "undetected_iou",
            RejectReason::DuplicateClass => "duplicate_class",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub object_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub image_id: String,
    pub kept_objects: Vec<String>,
    pub rejections: Vec<Rejection>,
}

impl FilterReport {
    pub fn reason(&self, object_id: &str) -> Option<RejectReason> {
        self.rejections
            .iter()
            .find(|r| r.object_id == object_id)
            .map(|r| r.reason)
    }
}

impl crate::model::Record for FilterReport {
    fn validate(&self) -> Result<()> {
        for r in &self.rejections {
            if self.kept_objects.contains(&r.object_id) {
                return Err(Error::invariant(format!(
                    "image {}: object {} both kept and rejected",
                    self.image_id, r.object_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_area_ratio: f64,
    pub iou_threshold: f64,
    pub min_desired_answers: usize,
    /// Desired answer for each of [`OCCLUSION_QUESTIONS`].
    pub desired_answers: [bool; 6],
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_area_ratio: 0.005,
            iou_threshold: 0.5,
            min_desired_answers: 4,
            desired_answers: [false, false, false, false, true, true],
        }
    }
}

pub fn check_size(bbox: &BBox, width: u32, height: u32, min_ratio: f64) -> Result<bool> {
    let area = width as f64 * height as f64;
    if area <= 0.0 {
        return Err(Error::invalid("size check on a zero-area image"));
    }
    Ok(bbox.area() / area >= min_ratio)
}

/// False when any side of the box touches the image border.
pub fn check_not_cropped(bbox: &BBox, width: u32, height: u32) -> bool {
    bbox.x > 0.0 && bbox.y > 0.0 && bbox.right() < width as f64 && bbox.bottom() < height as f64
}

pub fn occlusion_questions(object_name: &str) -> Vec<String> {
    OCCLUSION_QUESTIONS
        .iter()
        .map(|q| q.replace("{A}", object_name))
        .collect()
}

/// Number of desired answers. A backend failure counts as occluded.
pub fn check_occlusion(
    image: ImageRef<'_>,
    object_name: &str,
    vqa: &dyn Vqa,
    cfg: &FilterConfig,
) -> bool {
    let mut matches = 0;
    for (question, desired) in occlusion_questions(object_name).iter().zip(cfg.desired_answers) {
        match vqa.answer(image, question) {
            Ok(a) if a == desired => matches += 1,
            Ok(_) => {}
            Err(e) => {
                warn!(
                    "image {}: VQA failed for {object_name}, treating as occluded: {e}",
                    image.key
                );
                return false;
            }
        }
    }
    matches >= cfg.min_desired_answers
}

pub fn check_detection_iou(bbox: &BBox, detection: Option<&DetectionResult>, threshold: f64) -> bool {
    detection.is_some_and(|d| bbox.iou(&d.bbox) >= threshold)
}

/// Candidate overlapping `bbox` the most; earlier candidates win ties.
pub fn best_match<'a>(bbox: &BBox, candidates: &'a [DetectionResult]) -> Option<&'a DetectionResult> {
    candidates.iter().fold(None, |best: Option<&DetectionResult>, d| match best {
        Some(b) if bbox.iou(&b.bbox) >= bbox.iou(&d.bbox) => Some(b),
        _ => Some(d),
    })
}

fn first_failure(
    record: &ImageRecord,
    raster: &Raster,
    obj: &SceneObject,
    segmenter: &dyn Segmenter,
    vqa: &dyn Vqa,
    cfg: &FilterConfig,
) -> Result<Option<RejectReason>> {
    if !check_size(&obj.bbox, record.width, record.height, cfg.min_area_ratio)? {
        return Ok(Some(RejectReason::TooSmall));
    }
    if !check_not_cropped(&obj.bbox, record.width, record.height) {
        return Ok(Some(RejectReason::Cropped));
    }
    let image = ImageRef {
        key: &record.image_id,
        raster,
    };
    if !check_occlusion(image, &obj.class_name, vqa, cfg) {
        return Ok(Some(RejectReason::Occluded));
    }
    let candidates = segmenter.detect_all(image, &obj.class_name)?;
    if !check_detection_iou(&obj.bbox, best_match(&obj.bbox, &candidates), cfg.iou_threshold) {
        return Ok(Some(RejectReason::UndetectedIou));
    }
    Ok(None)
}

/// Runs the four checks on every covered object (first failure is reported),
/// then rejects every instance of a class that survives more than once.
pub fn filter_image(
    record: &ImageRecord,
    raster: &Raster,
    lexicon: &Lexicon,
    segmenter: &dyn Segmenter,
    vqa: &dyn Vqa,
    cfg: &FilterConfig,
) -> Result<FilterReport> {
    record.validate()?;
    raster.check_same((record.width, record.height))?;
    let mut passing = Vec::new();
    let mut rejections = Vec::new();
    for obj in record.objects.iter().filter(|o| lexicon.is_covered(&o.class_name)) {
        match first_failure(record, raster, obj, segmenter, vqa, cfg)? {
            Some(reason) => rejections.push(Rejection {
                object_id: obj.object_id.clone(),
                reason,
            }),
            None => passing.push(obj),
        }
    }
    let mut class_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &passing {
        *class_counts.entry(o.class_name.as_str()).or_default() += 1;
    }
    let mut kept_objects = Vec::new();
    for o in passing {
        if class_counts[o.class_name.as_str()] > 1 {
            rejections.push(Rejection {
                object_id: o.object_id.clone(),
                reason: RejectReason::DuplicateClass,
            });
        } else {
            kept_objects.push(o.object_id.clone());
        }
    }
    Ok(FilterReport {
        image_id: record.image_id.clone(),
        kept_objects,
        rejections,
    })
}

/// Filters many images in parallel; output order follows input order.
pub fn filter_images(
    images: &[(ImageRecord, Raster)],
    lexicon: &Lexicon,
    segmenter: &dyn Segmenter,
    vqa: &dyn Vqa,
    cfg: &FilterConfig,
) -> Result<Vec<FilterReport>> {
    images
        .par_iter()
        .map(|(r, img)| filter_image(r, img, lexicon, segmenter, vqa, cfg))
        .collect()
}

/// Square crop window followed by a uniform scale:
/// `out = (p - offset) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropTransform {
    pub x0: u32,
    pub y0: u32,
    pub side: u32,
    pub scale: f64,
}

impl CropTransform {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.x0 as f64) * self.scale,
            (y - self.y0 as f64) * self.scale,
        )
    }

    pub fn apply_bbox(&self, b: &BBox) -> BBox {
        let (x, y) = self.apply(b.x, b.y);
        BBox::new(x, y, b.w * self.scale, b.h * self.scale)
    }

    fn output_side(&self) -> u32 {
        (self.side as f64 * self.scale).round() as u32
    }

    pub fn apply_mask(&self, mask: &Mask) -> Mask {
        let out = self.output_side();
        mask.resample_window(
            self.x0 as f64,
            self.y0 as f64,
            self.side as f64,
            self.side as f64,
            out,
            out,
        )
    }

    pub fn apply_raster(&self, raster: &Raster) -> Raster {
        let out = self.output_side();
        let crop = raster.crop(self.x0 as i64, self.y0 as i64, self.side, self.side);
        if out == self.side {
            crop
        } else {
            crop.resize(out, out)
        }
    }
}

/// Offset of a `side`-long window inside `[0, len)`: centered, then shifted
/// the least needed to contain `[lo, hi)`.
fn window_offset(len: u32, side: u32, lo: f64, hi: f64) -> Option<u32> {
    let min_start = (hi - side as f64).ceil().max(0.0);
    let max_start = lo.floor().min((len - side) as f64);
    if min_start > max_start {
        return None;
    }
    let centered = ((len - side) / 2) as f64;
    Some(centered.clamp(min_start, max_start) as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedImage {
    pub record: ImageRecord,
    pub raster: Raster,
    pub transform: CropTransform,
}

/// Crops the largest square (side `min(W, H)`) that holds every kept object,
/// as close to centered as possible, and scales it to `out_side`. Kept
/// objects are marked editable; other objects are clipped to the window or
/// dropped when they leave it, and relations to dropped objects go too.
pub fn trim_and_resize(
    record: &ImageRecord,
    raster: &Raster,
    kept: &[String],
    out_side: u32,
) -> Result<PreparedImage> {
    if kept.is_empty() {
        return Err(Error::invalid(format!(
            "image {}: nothing kept to prepare",
            record.image_id
        )));
    }
    raster.check_same((record.width, record.height))?;
    let mut union: Option<BBox> = None;
    for id in kept {
        let obj = record.object(id).ok_or_else(|| {
            Error::invalid(format!("image {}: no object {id}", record.image_id))
        })?;
        union = Some(match union {
            Some(u) => u.union(&obj.bbox),
            None => obj.bbox,
        });
    }
    let union = union.expect("kept is nonempty");
    let side = record.width.min(record.height);
    let rejected = || {
        Error::invalid(format!(
            "image {}: kept objects do not fit a {side}x{side} window",
            record.image_id
        ))
    };
    let x0 = window_offset(record.width, side, union.x, union.right()).ok_or_else(rejected)?;
    let y0 = window_offset(record.height, side, union.y, union.bottom()).ok_or_else(rejected)?;
    let transform = CropTransform {
        x0,
        y0,
        side,
        scale: out_side as f64 / side as f64,
    };

    let window = BBox::new(x0 as f64, y0 as f64, side as f64, side as f64);
    let out = out_side as f64;
    let mut objects = Vec::new();
    for obj in &record.objects {
        let is_kept = kept.contains(&obj.object_id);
        let inter = window.intersection_area(&obj.bbox);
        if !is_kept && inter <= 0.0 {
            continue;
        }
        let x = obj.bbox.x.max(window.x);
        let y = obj.bbox.y.max(window.y);
        let clipped = BBox::new(
            x,
            y,
            obj.bbox.right().min(window.right()) - x,
            obj.bbox.bottom().min(window.bottom()) - y,
        );
        let mut b = transform.apply_bbox(&clipped);
        // Guard against rounding just past the border.
        b.x = b.x.clamp(0.0, out);
        b.y = b.y.clamp(0.0, out);
        b.w = b.w.min(out - b.x);
        b.h = b.h.min(out - b.y);
        if b.w <= 0.0 || b.h <= 0.0 {
            continue;
        }
        let mut o = obj.clone();
        o.bbox = b;
        o.editable = is_kept;
        objects.push(o);
    }
    let present: Vec<String> = objects.iter().map(|o| o.object_id.clone()).collect();
    for o in &mut objects {
        o.relations.retain(|r| present.contains(&r.object_id));
    }
    let prepared = ImageRecord {
        image_id: record.image_id.clone(),
        width: out_side,
        height: out_side,
        objects,
        source_path: record.source_path.clone(),
    };
    prepared.validate()?;
    Ok(PreparedImage {
        record: prepared,
        raster: transform.apply_raster(raster),
        transform,
    })
}
