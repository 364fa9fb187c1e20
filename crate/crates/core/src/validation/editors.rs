//! Scripted "editing models" over prepared images. Each writes
//! `<edited>/<model>/<query_id>.png` and a side-car under
//! `<edited>/<model>/<query_id>/` describing what its output contains.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{backdrop, is_round, luma, object_color, paint, shape_mask, with_luma};
use crate::backends::mock::{signature_color, Sidecar, SidecarDetection, SIDECAR_FILE};
use crate::error::{Error, Result};
use crate::filter::best_match;
use crate::backends::DetectionResult;
use crate::lexicon::Lexicon;
use crate::model::io::{load_records, read_json, write_json};
use crate::model::{BBox, EditParams, EditQuery, EditType, ImageRecord, SceneObject, SizeDirection};
use crate::query::generate::free_region;
use crate::raster::{Mask, Raster};
use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockEditor {
    /// Performs every edit as asked.
    Faithful,
    /// Faithful edits under a global brightness shift and noise.
    Sloppy,
    /// Every other query of each edit type loses the target object (or, for
    /// background changes, one foreground object); the rest are faithful.
    Weak,
    /// Returns the input unchanged.
    Noop,
}

impl MockEditor {
    pub const ALL: [MockEditor; 4] = [
        MockEditor::Faithful,
        MockEditor::Sloppy,
        MockEditor::Weak,
        MockEditor::Noop,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MockEditor::Faithful => "faithful",
            MockEditor::Sloppy => "sloppy",
            MockEditor::Weak => "weak",
            MockEditor::Noop => "noop",
        }
    }

    pub fn parse(s: &str) -> Option<MockEditor> {
        MockEditor::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

/// Linear scale factors of the faithful resizing edit.
pub const GROW: f64 = 1.5;
pub const SHRINK: f64 = 0.65;

/// Class → masks, as read from or written to a side-car.
pub type Detections = BTreeMap<String, Vec<Mask>>;

pub fn load_detections(dir: &Path) -> Result<Detections> {
    let file = dir.join(SIDECAR_FILE);
    if !file.is_file() {
        return Ok(Detections::new());
    }
    let sidecar: Sidecar = read_json(&file)?;
    let mut out = Detections::new();
    for (class, entries) in sidecar {
        for e in entries {
            out.entry(class.clone())
                .or_default()
                .push(Mask::load_png(&dir.join(&e.mask))?);
        }
    }
    Ok(out)
}

pub fn save_detections(detections: &Detections, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sidecar = Sidecar::new();
    let mut n = 0;
    for (class, masks) in detections {
        for m in masks.iter().filter(|m| !m.is_empty()) {
            let file = format!("mask_{n:03}.png");
            n += 1;
            m.save_png(&dir.join(&file))?;
            sidecar.entry(class.clone()).or_default().push(SidecarDetection {
                mask: file,
                confidence: 0.9,
            });
        }
    }
    write_json(&sidecar, &dir.join(SIDECAR_FILE))
}

#[derive(Debug, Clone)]
pub struct EditOutput {
    pub raster: Raster,
    pub detections: Detections,
}

/// Index of the side-car mask of `obj`, matched by box overlap.
fn mask_index(detections: &Detections, obj: &SceneObject) -> Option<usize> {
    let masks = detections.get(&obj.class_name)?;
    let candidates: Vec<DetectionResult> = masks
        .iter()
        .filter_map(|m| DetectionResult::new(&obj.class_name, m.clone(), 1.0).ok())
        .collect();
    let best = best_match(&obj.bbox, &candidates)?;
    masks.iter().position(|m| *m == best.mask)
}

fn take_mask(detections: &mut Detections, obj: &SceneObject, dims: (u32, u32)) -> Mask {
    match mask_index(detections, obj) {
        Some(i) => {
            let list = detections.get_mut(&obj.class_name).expect("class present");
            let m = list.remove(i);
            if list.is_empty() {
                detections.remove(&obj.class_name);
            }
            m
        }
        None => Mask::from_bbox(dims.0, dims.1, &obj.bbox),
    }
}

fn object_mask(detections: &Detections, obj: &SceneObject, dims: (u32, u32)) -> Mask {
    match mask_index(detections, obj) {
        Some(i) => detections[&obj.class_name][i].clone(),
        None => Mask::from_bbox(dims.0, dims.1, &obj.bbox),
    }
}

/// Fills masked pixels row by row, interpolating between the nearest
/// unmasked pixels on either side.
pub fn inpaint(raster: &Raster, mask: &Mask) -> Raster {
    let mut out = raster.clone();
    let w = raster.width();
    for y in 0..raster.height() {
        let mut x = 0;
        while x < w {
            if !mask.get(x, y) {
                x += 1;
                continue;
            }
            let start = x;
            while x < w && mask.get(x, y) {
                x += 1;
            }
            let left = (start > 0).then(|| raster.get(start - 1, y));
            let right = (x < w).then(|| raster.get(x, y));
            let (l, r) = match (left, right) {
                (Some(l), Some(r)) => (l, r),
                (Some(l), None) => (l, l),
                (None, Some(r)) => (r, r),
                (None, None) => ([0.5; 3], [0.5; 3]),
            };
            let span = (x - start + 1) as f32;
            for (k, px) in (start..x).enumerate() {
                let t = (k + 1) as f32 / span;
                out.set(px, y, std::array::from_fn(|c| l[c] * (1.0 - t) + r[c] * t));
            }
        }
    }
    out
}

fn mean_color(raster: &Raster, mask: &Mask) -> [f32; 3] {
    let mut sum = [0.0f64; 3];
    let mut n = 0.0;
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            if mask.get(x, y) {
                let p = raster.get(x, y);
                for c in 0..3 {
                    sum[c] += p[c] as f64;
                }
                n += 1.0;
            }
        }
    }
    if n == 0.0 {
        return [0.5; 3];
    }
    sum.map(|s| (s / n) as f32)
}

fn clamp_box(b: BBox, w: u32, h: u32) -> BBox {
    let x0 = b.x.max(1.0);
    let y0 = b.y.max(1.0);
    let x1 = b.right().min(w as f64 - 1.0);
    let y1 = b.bottom().min(h as f64 - 1.0);
    BBox::new(x0, y0, (x1 - x0).max(1.0), (y1 - y0).max(1.0))
}

fn scaled(b: &BBox, f: f64) -> BBox {
    let (cx, cy) = b.center();
    BBox::new(cx - b.w * f / 2.0, cy - b.h * f / 2.0, b.w * f, b.h * f)
}

/// Replaces each masked pixel by `color` shifted to that pixel's luma.
pub fn recolor(raster: &mut Raster, mask: &Mask, color: [f32; 3]) {
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            if mask.get(x, y) {
                let l = raster.luma(x, y);
                raster.set(x, y, quantized_with_luma(with_luma(color, l), l));
            }
        }
    }
}

/// The 8-bit color near `c` whose luma is closest to `target`, so saving as
/// PNG keeps edge maps and block means intact. Resampled crops blend object
/// pixels with black, which scales any luma error, so matching the rounded
/// 8-bit luma alone is not enough.
fn quantized_with_luma(c: [f32; 3], target: f32) -> [f32; 3] {
    let base = c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as i32);
    let mut best: Option<((f32, i32), [f32; 3])> = None;
    for dr in -2..=2 {
        for dg in -2..=2 {
            for db in -2..=2 {
                let q = [base[0] + dr, base[1] + dg, base[2] + db];
                if q.iter().any(|v| !(0..=255).contains(v)) {
                    continue;
                }
                let f = q.map(|v| v as f32 / 255.0);
                let cost = ((luma(f) - target).abs(), dr * dr + dg * dg + db * db);
                if best.is_none_or(|(b, _)| cost < b) {
                    best = Some((cost, f));
                }
            }
        }
    }
    best.map_or(c, |(_, f)| f)
}

fn all_masks(detections: &Detections, dims: (u32, u32)) -> Mask {
    detections
        .values()
        .flatten()
        .fold(Mask::empty(dims.0, dims.1), |acc, m| acc.union(m).expect("same dims"))
}

fn place(raster: &mut Raster, detections: &mut Detections, class: &str, b: &BBox, lexicon: &Lexicon) {
    let (w, h) = raster.dims();
    let m = shape_mask(w, h, b, is_round(class, lexicon));
    paint(raster, &m, object_color(class, &[], lexicon));
    detections.entry(class.to_string()).or_default().push(m);
}

fn target<'a>(query: &EditQuery, image: &'a ImageRecord) -> Result<&'a SceneObject> {
    let id = query
        .target_object_id
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("query {} has no target", query.query_id)))?;
    image
        .object(id)
        .ok_or_else(|| Error::invalid(format!("query {}: unknown object {id}", query.query_id)))
}

fn new_backdrop(query: &EditQuery, background: &str, dims: (u32, u32), seed: u64) -> Raster {
    let c = signature_color(background);
    backdrop(dims.0, dims.1, c, c.map(|v| v * 0.8), seed, &query.query_id)
}

/// The edit as asked.
pub fn faithful_edit(
    query: &EditQuery,
    image: &ImageRecord,
    original: &Raster,
    detections: &Detections,
    seed: u64,
) -> Result<EditOutput> {
    let lexicon = Lexicon::builtin();
    let dims = original.dims();
    let (w, h) = dims;
    let mut raster = original.clone();
    let mut det = detections.clone();
    match &query.params {
        EditParams::Addition { target_class, relation } => {
            let anchor = target(query, image)?;
            if let Some(r) = free_region(image, anchor, *relation, 0.3) {
                let b = clamp_box(scaled(&r, 0.8), w, h);
                place(&mut raster, &mut det, target_class, &b, lexicon);
            }
        }
        EditParams::Removal => {
            let o = target(query, image)?;
            let m = take_mask(&mut det, o, dims);
            raster = inpaint(&raster, &m);
        }
        EditParams::Replacement { target_class } => {
            let o = target(query, image)?;
            let m = take_mask(&mut det, o, dims);
            raster = inpaint(&raster, &m);
            place(&mut raster, &mut det, target_class, &o.bbox, lexicon);
        }
        EditParams::Resizing { direction } => {
            let o = target(query, image)?;
            let m = take_mask(&mut det, o, dims);
            let color = mean_color(original, &m);
            raster = inpaint(&raster, &m);
            let f = match direction {
                SizeDirection::Larger => GROW,
                SizeDirection::Smaller => SHRINK,
            };
            let b = clamp_box(scaled(&o.bbox, f), w, h);
            let nm = shape_mask(w, h, &b, is_round(&o.class_name, lexicon));
            paint(&mut raster, &nm, color);
            det.entry(o.class_name.clone()).or_default().push(nm);
        }
        EditParams::AttributeChange { to, .. } => {
            let o = target(query, image)?;
            let m = object_mask(&det, o, dims);
            recolor(&mut raster, &m, signature_color(to));
        }
        EditParams::BackgroundChange { background } => {
            let keep = all_masks(&det, dims);
            let bg = new_backdrop(query, background, dims, seed);
            raster = Raster::from_fn(w, h, |x, y| {
                if keep.get(x, y) {
                    original.get(x, y)
                } else {
                    bg.get(x, y)
                }
            });
        }
        EditParams::StyleChange { style } => {
            let tint = signature_color(style);
            raster = Raster::from_fn(w, h, |x, y| {
                let p = original.get(x, y);
                std::array::from_fn(|c| 0.6 * p[c] + 0.4 * tint[c])
            });
        }
    }
    Ok(EditOutput {
        raster,
        detections: det,
    })
}

/// Output of a weak edit that went wrong.
fn failed_edit(
    query: &EditQuery,
    image: &ImageRecord,
    original: &Raster,
    detections: &Detections,
    seed: u64,
) -> Result<EditOutput> {
    let dims = original.dims();
    match query.edit_type() {
        EditType::Addition | EditType::Removal | EditType::StyleChange => Ok(EditOutput {
            raster: original.clone(),
            detections: detections.clone(),
        }),
        EditType::BackgroundChange => {
            let mut out = faithful_edit(query, image, original, detections, seed)?;
            if let Some(o) = image.editable_objects().next() {
                let m = take_mask(&mut out.detections, o, dims);
                out.raster = inpaint(&out.raster, &m);
            }
            Ok(out)
        }
        _ => {
            let o = target(query, image)?;
            let mut det = detections.clone();
            let m = take_mask(&mut det, o, dims);
            Ok(EditOutput {
                raster: inpaint(original, &m),
                detections: det,
            })
        }
    }
}

fn perturb(raster: &Raster, seed: u64, label: &str) -> Raster {
    let mut rng = rng_for(seed, &format!("sloppy:{label}"));
    Raster::from_fn(raster.width(), raster.height(), |x, y| {
        let p = raster.get(x, y);
        let n: f32 = rng.random_range(-0.04..0.04);
        p.map(|v| (0.9 * v + 0.08 + n).clamp(0.0, 1.0))
    })
}

/// Queries the weak editor gets wrong: every other one per edit type, in
/// query-id order.
pub fn weak_failures(queries: &[EditQuery]) -> std::collections::BTreeSet<String> {
    let mut by_type: BTreeMap<EditType, Vec<&str>> = BTreeMap::new();
    for q in queries {
        by_type.entry(q.edit_type()).or_default().push(&q.query_id);
    }
    by_type
        .into_values()
        .flat_map(|mut ids| {
            ids.sort();
            ids.into_iter().step_by(2).map(str::to_string).collect::<Vec<_>>()
        })
        .collect()
}

pub fn apply_editor(
    editor: MockEditor,
    query: &EditQuery,
    image: &ImageRecord,
    original: &Raster,
    detections: &Detections,
    fails: bool,
    seed: u64,
) -> Result<EditOutput> {
    match editor {
        MockEditor::Noop => Ok(EditOutput {
            raster: original.clone(),
            detections: detections.clone(),
        }),
        MockEditor::Faithful => faithful_edit(query, image, original, detections, seed),
        MockEditor::Sloppy => {
            let mut out = faithful_edit(query, image, original, detections, seed)?;
            out.raster = perturb(&out.raster, seed, &query.query_id);
            Ok(out)
        }
        MockEditor::Weak if fails => failed_edit(query, image, original, detections, seed),
        MockEditor::Weak => faithful_edit(query, image, original, detections, seed),
    }
}

/// Runs one editor over every query against a prepared-image directory
/// (`images.jsonl`, `images/`, `sidecars/`). Returns the number of outputs.
pub fn run_mock_editor(
    editor: MockEditor,
    model_id: &str,
    queries: &[EditQuery],
    prepared_dir: &Path,
    edited_dir: &Path,
    seed: u64,
) -> Result<usize> {
    let records: BTreeMap<String, ImageRecord> = load_records::<ImageRecord>(&prepared_dir.join("images.jsonl"))?
        .into_iter()
        .map(|r| (r.image_id.clone(), r))
        .collect();
    let fails = weak_failures(queries);
    let model_dir = edited_dir.join(model_id);
    std::fs::create_dir_all(&model_dir).map_err(|e| Error::io(&model_dir, e))?;
    queries
        .par_iter()
        .map(|q| {
            let image = records.get(&q.image_id).ok_or_else(|| {
                Error::invalid(format!("query {}: image {} not prepared", q.query_id, q.image_id))
            })?;
            let original = Raster::load_png(&prepared_dir.join(&image.source_path))?;
            let detections = load_detections(&prepared_dir.join("sidecars").join(&image.image_id))?;
            let out = apply_editor(
                editor,
                q,
                image,
                &original,
                &detections,
                fails.contains(&q.query_id),
                seed,
            )?;
            out.raster
                .save_png(&model_dir.join(format!("{}.png", q.query_id)))?;
            save_detections(&out.detections, &model_dir.join(&q.query_id))
        })
        .collect::<Result<Vec<()>>>()
        .map(|v| v.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inpaint_interpolates_rows() {
        let r = Raster::from_fn(5, 1, |x, _| [x as f32 / 4.0; 3]);
        let m = Mask::from_fn(5, 1, |x, _| (1..4).contains(&x));
        let out = inpaint(&r, &m);
        for x in 0..5 {
            assert!((out.get(x, 0)[0] - x as f32 / 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn recolor_keeps_luma() {
        let mut r = Raster::filled(4, 4, [0.3, 0.5, 0.4]);
        let before = r.luma(1, 1);
        recolor(&mut r, &Mask::full(4, 4), signature_color("red"));
        // 8-bit colors, luma well inside one 8-bit level.
        assert!((r.luma(1, 1) - before).abs() < 0.25 / 255.0);
        for c in r.get(1, 1) {
            assert!((c * 255.0 - (c * 255.0).round()).abs() < 1e-4);
        }
        assert_ne!(r.get(1, 1), [0.3, 0.5, 0.4]);
    }

    #[test]
    fn weak_fails_every_other_query_per_type() {
        let q = |id: &str, params: EditParams| EditQuery {
            query_id: id.into(),
            image_id: "i".into(),
            target_object_id: Some("o".into()),
            object_class: Some("cup".into()),
            params,
            captions: Default::default(),
        };
        let qs = vec![
            q("b", EditParams::Removal),
            q("a", EditParams::Removal),
            q("c", EditParams::Removal),
            q("d", EditParams::Replacement { target_class: "book".into() }),
        ];
        let f = weak_failures(&qs);
        assert_eq!(f.into_iter().collect::<Vec<_>>(), vec!["a", "c", "d"]);
    }
}
