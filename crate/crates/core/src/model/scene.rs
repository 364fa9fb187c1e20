//! Scene-graph records: images, annotated objects, attributes and relations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        BBox { x, y, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.right().min(other.right()) - self.x.max(other.x);
        let h = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BBox) -> BBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        BBox::new(
            x,
            y,
            self.right().max(other.right()) - x,
            self.bottom().max(other.bottom()) - y,
        )
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && self.x >= 0.0
            && self.y >= 0.0
            && self.right() <= width
            && self.bottom() <= height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeCategory {
    Color,
    State,
    Material,
    Action,
}

impl AttributeCategory {
    pub const ALL: [AttributeCategory; 4] = [
        AttributeCategory::Color,
        AttributeCategory::State,
        AttributeCategory::Material,
        AttributeCategory::Action,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttributeCategory::Color => "color",
            AttributeCategory::State => "state",
            AttributeCategory::Material => "material",
            AttributeCategory::Action => "action",
        }
    }
}

impl fmt::Display for AttributeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The nine consolidated spatial relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Under,
    Above,
    In,
    On,
    Left,
    Right,
    NextTo,
    Front,
    Behind,
}

impl Relation {
    pub const ALL: [Relation; 9] = [
        Relation::Under,
        Relation::Above,
        Relation::In,
        Relation::On,
        Relation::Left,
        Relation::Right,
        Relation::NextTo,
        Relation::Front,
        Relation::Behind,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::Under => "under",
            Relation::Above => "above",
            Relation::In => "in",
            Relation::On => "on",
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::NextTo => "next_to",
            Relation::Front => "front",
            Relation::Behind => "behind",
        }
    }

    /// Phrase used inside captions, instructions and CLIP target strings.
    pub fn phrase(&self) -> &'static str {
        match self {
            Relation::Under => "under",
            Relation::Above => "above",
            Relation::In => "in",
            Relation::On => "on",
            Relation::Left => "left of",
            Relation::Right => "right of",
            Relation::NextTo => "next to",
            Relation::Front => "in front of",
            Relation::Behind => "behind",
        }
    }

    pub fn parse(s: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRelation {
    pub relation: Relation,
    pub object_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object_id: String,
    pub class_name: String,
    pub bbox: BBox,
    #[serde(default)]
    pub attributes: BTreeMap<AttributeCategory, String>,
    /// `self <relation> other`.
    #[serde(default)]
    pub relations: Vec<ObjectRelation>,
    /// Set once the object survived filtering.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub editable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<SceneObject>,
    /// Relative to the directory holding the record.
    pub source_path: String,
}

impl ImageRecord {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invariant(format!(
                "image {} has zero dimension {}x{}",
                self.image_id, self.width, self.height
            )));
        }
        let mut seen = BTreeSet::new();
        for obj in &self.objects {
            if !seen.insert(obj.object_id.as_str()) {
                return Err(Error::invariant(format!(
                    "image {}: duplicate object id {}",
                    self.image_id, obj.object_id
                )));
            }
            if !obj.bbox.within(self.width as f64, self.height as f64) {
                return Err(Error::invariant(format!(
                    "image {}: object {} bbox {:?} lies outside the {}x{} image",
                    self.image_id, obj.object_id, obj.bbox, self.width, self.height
                )));
            }
        }
        Ok(())
    }

    pub fn object(&self, object_id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    pub fn classes(&self) -> BTreeSet<&str> {
        self.objects.iter().map(|o| o.class_name.as_str()).collect()
    }

    pub fn editable_objects(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.iter().filter(|o| o.editable)
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_of_half_offset_boxes() {
        let a = BBox::new(0.0, 0.0, 50.0, 50.0);
        let b = BBox::new(25.0, 0.0, 50.0, 50.0);
        assert!((a.iou(&b) - 1250.0 / 3750.0).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BBox::new(100.0, 100.0, 5.0, 5.0)), 0.0);
    }

    #[test]
    fn bbox_serializes_as_array() {
        let json = serde_json::to_string(&BBox::new(1.0, 2.0, 3.0, 4.5)).unwrap();
        assert_eq!(json, "[1.0,2.0,3.0,4.5]");
    }

    #[test]
    fn record_rejects_out_of_bounds_object() {
        let rec = ImageRecord {
            image_id: "img".into(),
            width: 100,
            height: 100,
            source_path: "img.png".into(),
            objects: vec![SceneObject {
                object_id: "o7".into(),
                class_name: "dog".into(),
                bbox: BBox::new(90.0, 10.0, 20.0, 20.0),
                attributes: BTreeMap::new(),
                relations: vec![],
                editable: false,
            }],
        };
        let err = rec.validate().unwrap_err().to_string();
        assert!(err.contains("o7"), "{err}");
    }
}
