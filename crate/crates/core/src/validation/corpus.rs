//! Synthetic scene-graph corpus: flat-shaded shapes on a textured backdrop,
//! with ground-truth masks and scripted VQA answers as side-cars.
//!
//! Motifs: desk scenes (0-7) and living rooms (8-14) carry relations that
//! recur often enough for additions and replacements; two street scenes
//! (15-16) are portrait; image 17 holds two dogs; image 18 has one object per
//! filter failure; image 19 is wide and its horse is mis-segmented.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backends::mock::{signature_color, Sidecar, SidecarDetection, SIDECAR_FILE, VQA_FILE};
use crate::error::{Error, Result};
use crate::lexicon::{ClassGroup, Lexicon};
use crate::model::corpus::{RawImage, RawObject, RawRelation};
use crate::model::io::write_json;
use crate::model::BBox;
use crate::raster::{Mask, Raster};
use crate::util::rng_for;

/// Luma every object is shaded at, so recolors can keep it exactly.
pub const OBJECT_LUMA: f32 = 0.42;

pub const MOCK_IMAGES: usize = 20;

pub(crate) fn luma(c: [f32; 3]) -> f32 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

/// Shifts a color along the gray axis until its luma is `target`.
pub fn with_luma(mut c: [f32; 3], target: f32) -> [f32; 3] {
    for _ in 0..8 {
        let d = target - luma(c);
        if d.abs() < 1e-6 {
            break;
        }
        c = c.map(|v| (v + d).clamp(0.0, 1.0));
    }
    c
}

/// Fill color of an object: its color attribute when it has one, otherwise
/// the signature of its class.
pub fn object_color(class: &str, attributes: &[String], lexicon: &Lexicon) -> [f32; 3] {
    let color = attributes.iter().find(|a| {
        lexicon.attribute_category(a) == Some(crate::model::AttributeCategory::Color)
    });
    with_luma(signature_color(color.map_or(class, |c| c.as_str())), OBJECT_LUMA)
}

/// Animals, food and tableware are drawn as ellipses, everything else as
/// rectangles.
pub fn is_round(class: &str, lexicon: &Lexicon) -> bool {
    matches!(
        lexicon.class_group(class),
        ClassGroup::Animal | ClassGroup::Dining | ClassGroup::Person
    )
}

/// Pixel footprint of a shape inside `b`.
pub fn shape_mask(width: u32, height: u32, b: &BBox, round: bool) -> Mask {
    if !round {
        return Mask::from_bbox(width, height, b);
    }
    let (cx, cy) = b.center();
    let (rx, ry) = (b.w / 2.0, b.h / 2.0);
    Mask::from_fn(width, height, |x, y| {
        let dx = (x as f64 + 0.5 - cx) / rx;
        let dy = (y as f64 + 0.5 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    })
}

pub fn paint(raster: &mut Raster, mask: &Mask, color: [f32; 3]) {
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            if mask.get(x, y) {
                raster.set(x, y, color);
            }
        }
    }
}

/// Vertical two-tone gradient with small seeded noise. Luma stays well
/// above the objects'.
pub fn backdrop(width: u32, height: u32, top: [f32; 3], bottom: [f32; 3], seed: u64, label: &str) -> Raster {
    let mut rng = rng_for(seed, &format!("backdrop:{label}"));
    let top = with_luma(top, 0.78);
    let bottom = with_luma(bottom, 0.68);
    Raster::from_fn(width, height, |_, y| {
        let t = y as f32 / (height.max(2) - 1) as f32;
        let n: f32 = rng.random_range(-0.02..0.02);
        std::array::from_fn(|c| (top[c] * (1.0 - t) + bottom[c] * t + n).clamp(0.0, 1.0))
    })
}

struct ObjSpec {
    id: &'static str,
    class: &'static str,
    bbox: [f64; 4],
    attrs: &'static [&'static str],
    rels: &'static [(&'static str, &'static str)],
}

const fn obj(
    id: &'static str,
    class: &'static str,
    bbox: [f64; 4],
    attrs: &'static [&'static str],
    rels: &'static [(&'static str, &'static str)],
) -> ObjSpec {
    ObjSpec {
        id,
        class,
        bbox,
        attrs,
        rels,
    }
}

struct Scene {
    width: u32,
    height: u32,
    palette: (&'static str, &'static str),
    objects: Vec<ObjSpec>,
    /// Scripted VQA answers (question, answer).
    vqa: &'static [(&'static str, bool)],
    /// Objects whose side-car mask is replaced by a small blob.
    missegmented: &'static [&'static str],
}

const TABLE: [f64; 4] = [30.0, 70.0, 100.0, 40.0];
const ON_TABLE: &[(&str, &str)] = &[("on", "table")];
const COUCH: [f64; 4] = [40.0, 58.0, 80.0, 42.0];
const ON_COUCH: &[(&str, &str)] = &[("on", "couch")];
const ABOVE_COUCH: &[(&str, &str)] = &[("above", "couch")];
const NEXT_TO_COUCH: &[(&str, &str)] = &[("next to", "couch")];

fn desk(items: Vec<ObjSpec>, table_attrs: &'static [&'static str]) -> Scene {
    let mut objects = vec![obj("table", "dining table", TABLE, table_attrs, &[])];
    objects.extend(items);
    Scene {
        width: 160,
        height: 120,
        palette: ("cream", "tan"),
        objects,
        vqa: &[],
        missegmented: &[],
    }
}

fn laptop(attrs: &'static [&'static str]) -> ObjSpec {
    obj("laptop", "laptop", [40.0, 44.0, 36.0, 24.0], attrs, ON_TABLE)
}

fn cup(attrs: &'static [&'static str]) -> ObjSpec {
    obj("cup", "cup", [92.0, 52.0, 14.0, 16.0], attrs, ON_TABLE)
}

fn book(attrs: &'static [&'static str]) -> ObjSpec {
    obj("book", "book", [110.0, 58.0, 16.0, 10.0], attrs, ON_TABLE)
}

fn living(couch_attrs: &'static [&'static str], items: Vec<ObjSpec>) -> Scene {
    let mut objects = vec![obj("couch", "couch", COUCH, couch_attrs, &[])];
    objects.extend(items);
    Scene {
        width: 160,
        height: 120,
        palette: ("beige", "brown"),
        objects,
        vqa: &[],
        missegmented: &[],
    }
}

fn cat(attrs: &'static [&'static str]) -> ObjSpec {
    obj("cat", "cat", [52.0, 36.0, 26.0, 20.0], attrs, ON_COUCH)
}

fn dog(attrs: &'static [&'static str]) -> ObjSpec {
    obj("dog", "dog", [84.0, 34.0, 28.0, 22.0], attrs, ON_COUCH)
}

fn tv(attrs: &'static [&'static str]) -> ObjSpec {
    obj("tv", "tv", [66.0, 6.0, 30.0, 20.0], attrs, ABOVE_COUCH)
}

fn plant() -> ObjSpec {
    obj("plant", "potted plant", [126.0, 66.0, 18.0, 30.0], &["green"], NEXT_TO_COUCH)
}

fn scenes() -> Vec<Scene> {
    vec![
        desk(vec![laptop(&["open", "silver"]), cup(&["red"])], &[]),
        desk(vec![laptop(&["closed", "black"]), cup(&["blue"])], &[]),
        desk(vec![laptop(&["open", "silver"]), book(&["red"])], &[]),
        desk(vec![cup(&["white"]), book(&["blue"])], &[]),
        desk(vec![laptop(&["open", "gray"]), cup(&["red"]), book(&["green"])], &[]),
        desk(vec![cup(&["blue"]), book(&["red"])], &["wooden"]),
        desk(vec![laptop(&["closed", "silver"])], &[]),
        desk(vec![book(&["green"]), laptop(&["open", "black"])], &[]),
        living(&["brown"], vec![cat(&["orange", "sleeping"]), tv(&["black"])]),
        living(&["gray"], vec![dog(&["brown", "sitting"]), plant()]),
        living(&["blue"], vec![cat(&["black"]), plant()]),
        living(&["brown"], vec![cat(&["white", "sleeping"]), tv(&["black"])]),
        living(&["gray"], vec![dog(&["white", "lying"]), tv(&["silver"]), plant()]),
        living(&["red"], vec![cat(&["gray"]), tv(&["black"]), plant()]),
        living(
            &["brown", "leather"],
            vec![cat(&["white"]), dog(&["black", "sitting"]), tv(&["black"]), plant()],
        ),
        Scene {
            width: 120,
            height: 160,
            palette: ("blue", "gray"),
            objects: vec![
                obj("car", "car", [18.0, 104.0, 80.0, 36.0], &["red", "parked"], &[]),
                obj("person", "person", [44.0, 46.0, 22.0, 54.0], &["standing"], &[("next to", "car")]),
                obj("hydrant", "fire hydrant", [100.0, 110.0, 12.0, 24.0], &["yellow"], &[]),
            ],
            vqa: &[],
            missegmented: &[],
        },
        Scene {
            width: 120,
            height: 160,
            palette: ("blue", "gray"),
            objects: vec![
                obj("car", "car", [24.0, 100.0, 76.0, 38.0], &["blue"], &[]),
                obj("person", "person", [70.0, 40.0, 20.0, 52.0], &["walking"], &[("next to", "car")]),
                obj("light", "traffic light", [12.0, 30.0, 12.0, 34.0], &[], &[]),
            ],
            vqa: &[],
            missegmented: &[],
        },
        Scene {
            width: 128,
            height: 128,
            palette: ("beige", "brown"),
            objects: vec![
                obj("couch", "couch", [14.0, 64.0, 100.0, 44.0], &["gray"], &[]),
                obj("dog_a", "dog", [24.0, 40.0, 30.0, 24.0], &["brown"], ON_COUCH),
                obj("dog_b", "dog", [74.0, 40.0, 30.0, 24.0], &["black"], ON_COUCH),
                obj("clock", "clock", [52.0, 8.0, 24.0, 20.0], &["white"], &[]),
            ],
            vqa: &[],
            missegmented: &[],
        },
        Scene {
            width: 160,
            height: 120,
            palette: ("green", "gray"),
            objects: vec![
                obj("ball", "sports ball", [10.0, 10.0, 6.0, 6.0], &[], &[]),
                obj("umbrella", "umbrella", [0.0, 30.0, 30.0, 40.0], &["blue"], &[]),
                obj("bicycle", "bicycle", [46.0, 50.0, 40.0, 30.0], &["red"], &[]),
                obj("bench", "bench", [100.0, 60.0, 44.0, 34.0], &["wooden"], &[]),
                obj("tree", "tree", [120.0, 4.0, 30.0, 30.0], &[], &[]),
            ],
            vqa: &[
                ("Is the bicycle hidden behind another object?", true),
                ("Is part of the bicycle covered by another object?", true),
                ("Is part of the bicycle blocked by something else in the scene?", true),
            ],
            missegmented: &[],
        },
        Scene {
            width: 192,
            height: 96,
            palette: ("blue", "green"),
            objects: vec![
                obj("horse", "horse", [20.0, 30.0, 50.0, 40.0], &["brown"], &[]),
                obj("boat", "boat", [112.0, 30.0, 48.0, 36.0], &["white"], &[]),
            ],
            vqa: &[],
            missegmented: &["horse"],
        },
    ]
}

pub fn mock_image_id(i: usize) -> String {
    format!("img{i:02}")
}

/// What [`build_mock_corpus`] wrote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockCorpus {
    pub images: Vec<String>,
    pub objects: usize,
}

/// Writes the 20-image corpus into `dir`: `<id>.json` annotations,
/// `images/<id>.png`, and `sidecars/<id>/` masks plus VQA scripts.
pub fn build_mock_corpus(seed: u64, dir: &Path) -> Result<MockCorpus> {
    let lexicon = Lexicon::builtin();
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    let mut summary = MockCorpus {
        images: Vec::new(),
        objects: 0,
    };
    for (i, scene) in scenes().into_iter().enumerate() {
        let id = mock_image_id(i);
        let (w, h) = (scene.width, scene.height);
        let mut raster = backdrop(
            w,
            h,
            signature_color(scene.palette.0),
            signature_color(scene.palette.1),
            seed,
            &id,
        );
        let side_dir = dir.join("sidecars").join(&id);
        std::fs::create_dir_all(&side_dir).map_err(|e| Error::io(&side_dir, e))?;
        let mut sidecar = Sidecar::new();
        let mut raw_objects = Vec::new();
        for (k, o) in scene.objects.iter().enumerate() {
            let attrs: Vec<String> = o.attrs.iter().map(|s| s.to_string()).collect();
            let b = BBox::from(o.bbox);
            let mask = shape_mask(w, h, &b, is_round(o.class, lexicon));
            paint(&mut raster, &mask, object_color(o.class, &attrs, lexicon));
            let detected = if scene.missegmented.contains(&o.id) {
                let blob = BBox::new(b.x + 2.0, b.y + 2.0, b.w / 4.0, b.h / 4.0);
                Mask::from_bbox(w, h, &blob)
            } else {
                mask
            };
            let file = format!("mask_{k:03}.png");
            detected.save_png(&side_dir.join(&file))?;
            sidecar.entry(o.class.to_string()).or_default().push(SidecarDetection {
                mask: file,
                confidence: 0.9,
            });
            raw_objects.push(RawObject {
                id: o.id.to_string(),
                name: o.class.to_string(),
                bbox: o.bbox,
                attributes: attrs,
                relations: o
                    .rels
                    .iter()
                    .map(|(name, other)| RawRelation {
                        name: name.to_string(),
                        object: other.to_string(),
                    })
                    .collect(),
            });
        }
        write_json(&sidecar, &side_dir.join(SIDECAR_FILE))?;
        if !scene.vqa.is_empty() {
            let script: BTreeMap<&str, bool> = scene.vqa.iter().copied().collect();
            write_json(&script, &side_dir.join(VQA_FILE))?;
        }
        let file = format!("images/{id}.png");
        raster.save_png(&dir.join(&file))?;
        summary.objects += raw_objects.len();
        write_json(
            &RawImage {
                image_id: id.clone(),
                width: w,
                height: h,
                file,
                objects: raw_objects,
            },
            &dir.join(format!("{id}.json")),
        )?;
        summary.images.push(id);
    }
    Ok(summary)
}
