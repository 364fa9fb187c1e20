//! Scene-graph corpus loading.
//!
//! A corpus directory holds one JSON document per image:
//!
//! ```json
//! {"image_id": "img1", "width": 640, "height": 480, "file": "img1.png",
//!  "objects": [{"id": "o1", "name": "table", "bbox": [10, 20, 300, 200],
//!               "attributes": ["brown", "wooden"],
//!               "relations": [{"name": "under", "object": "o2"}]}]}
//! ```
//!
//! Names are normalized through the [`Lexicon`]; attribute words and relation
//! phrases it does not know are dropped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scene::{BBox, ImageRecord, ObjectRelation, SceneObject};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRelation {
    pub name: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObject {
    pub id: String,
    pub name: String,
    pub bbox: [f64; 4],
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub relations: Vec<RawRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawImage {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub file: String,
    #[serde(default)]
    pub objects: Vec<RawObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub file: PathBuf,
    pub image_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusLoad {
    pub records: Vec<ImageRecord>,
    pub errors: Vec<RecordError>,
}

/// Converts a raw annotation into a validated record.
///
/// Objects keep their annotated name when it maps to no covered class, so they
/// still count as occupants for free-space and presence checks.
pub fn normalize(raw: &RawImage, lexicon: &Lexicon) -> Result<ImageRecord> {
    let objects = raw
        .objects
        .iter()
        .map(|o| {
            let class_name = lexicon
                .normalize_class(&o.name)
                .unwrap_or_else(|| o.name.trim().to_lowercase());
            let mut attributes = BTreeMap::new();
            for word in &o.attributes {
                if let Some(cat) = lexicon.attribute_category(word) {
                    attributes
                        .entry(cat)
                        .or_insert_with(|| word.trim().to_lowercase());
                }
            }
            let relations = o
                .relations
                .iter()
                .filter_map(|r| {
                    lexicon.relation(&r.name).map(|relation| ObjectRelation {
                        relation,
                        object_id: r.object.clone(),
                    })
                })
                .collect();
            SceneObject {
                object_id: o.id.clone(),
                class_name,
                bbox: BBox::from(o.bbox),
                attributes,
                relations,
                editable: false,
            }
        })
        .collect();
    let record = ImageRecord {
        image_id: raw.image_id.clone(),
        width: raw.width,
        height: raw.height,
        objects,
        source_path: raw.file.clone(),
    };
    record.validate()?;
    for obj in &record.objects {
        if let Some(r) = obj
            .relations
            .iter()
            .find(|r| record.object(&r.object_id).is_none())
        {
            return Err(Error::invariant(format!(
                "image {}: object {} relates to unknown object {}",
                record.image_id, obj.object_id, r.object_id
            )));
        }
    }
    Ok(record)
}

/// Loads every `*.json` document of `dir`, sorted by file name.
pub fn load_corpus(dir: &Path, lexicon: &Lexicon) -> Result<CorpusLoad> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();

    let mut load = CorpusLoad::default();
    for file in files {
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let raw: RawImage = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                let image_id = serde_json::from_str::<serde_json::Value>(&text)
                    .ok()
                    .and_then(|v| v.get("image_id")?.as_str().map(str::to_string));
                load.errors.push(RecordError {
                    file,
                    image_id,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match normalize(&raw, lexicon) {
            Ok(rec) => load.records.push(rec),
            Err(e) => load.errors.push(RecordError {
                file,
                image_id: Some(raw.image_id.clone()),
                message: e.to_string(),
            }),
        }
    }
    Ok(load)
}
