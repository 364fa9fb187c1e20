//! Model backend interfaces, deterministic mocks, and the backend registry.

pub mod frechet;
pub mod mock;
pub mod registry;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BBox;
use crate::raster::{Mask, Raster};

pub use frechet::{fid_between_sets, frechet_distance, gaussian_fit};
pub use registry::{BackendConfig, BackendSpec};

/// An image handed to a backend. `key` identifies the image for mocks that
/// read side-car files: `"<image_id>"` for originals and
/// `"<model_id>/<query_id>"` for edited outputs.
#[derive(Debug, Clone, Copy)]
pub struct ImageRef<'a> {
    pub key: &'a str,
    pub raster: &'a Raster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub class_name: String,
    pub mask: Mask,
    pub bbox: BBox,
    pub confidence: f64,
}

impl DetectionResult {
    pub fn new(class_name: impl Into<String>, mask: Mask, confidence: f64) -> Result<Self> {
        let class_name = class_name.into();
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invariant(format!(
                "detection of {class_name}: confidence {confidence} outside [0, 1]"
            )));
        }
        let bbox = mask.bbox().ok_or_else(|| {
            Error::invariant(format!("detection of {class_name} has an empty mask"))
        })?;
        Ok(DetectionResult {
            class_name,
            mask,
            bbox,
            confidence,
        })
    }
}

/// Joint text-image embedder (CLIP role).
pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>>;
    fn embed_image(&self, image: &Raster) -> Result<Vec<f64>>;
    fn embed_images(&self, images: &[&Raster]) -> Result<Vec<Vec<f64>>> {
        images.iter().map(|r| self.embed_image(r)).collect()
    }
}

/// Learned perceptual distance (LPIPS role).
pub trait Perceptual: Send + Sync {
    fn id(&self) -> String;
    fn distance(&self, a: &Raster, b: &Raster) -> Result<f64>;
}

/// Self-supervised image embedder (DINO role).
pub trait PatchEmbedder: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, image: &Raster) -> Result<Vec<f64>>;
}

/// Instance segmentation. Returns every candidate of the class, however low
/// its confidence.
pub trait Segmenter: Send + Sync {
    fn id(&self) -> String;
    fn detect_all(&self, image: ImageRef<'_>, class_name: &str) -> Result<Vec<DetectionResult>>;

    /// The highest-confidence candidate; the first one wins ties.
    fn detect(&self, image: ImageRef<'_>, class_name: &str) -> Result<Option<DetectionResult>> {
        let all = self.detect_all(image, class_name)?;
        Ok(all.into_iter().fold(None, |best: Option<DetectionResult>, d| match best {
            Some(b) if b.confidence >= d.confidence => Some(b),
            _ => Some(d),
        }))
    }
}

/// Yes/no visual question answering.
pub trait Vqa: Send + Sync {
    fn id(&self) -> String;
    fn answer(&self, image: ImageRef<'_>, question: &str) -> Result<bool>;
}

/// Fixed-dimension features for image-quality statistics.
pub trait FeatureExtractor: Send + Sync {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn features(&self, image: &Raster) -> Result<Vec<f64>>;
}

/// Every backend the harness needs, shareable across worker threads.
#[derive(Clone)]
pub struct BackendSet {
    pub embedder: Arc<dyn Embedder>,
    pub perceptual: Arc<dyn Perceptual>,
    pub patch: Arc<dyn PatchEmbedder>,
    pub segmenter: Arc<dyn Segmenter>,
    pub vqa: Arc<dyn Vqa>,
    pub features: Arc<dyn FeatureExtractor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendIds {
    pub embedder: String,
    pub perceptual: String,
    pub patch: String,
    pub segmenter: String,
    pub vqa: String,
    pub features: String,
}

impl BackendSet {
    pub fn ids(&self) -> BackendIds {
        BackendIds {
            embedder: self.embedder.id(),
            perceptual: self.perceptual.id(),
            patch: self.patch.id(),
            segmenter: self.segmenter.id(),
            vqa: self.vqa.id(),
            features: self.features.id(),
        }
    }
}

/// Checks that an embedding has unit L2 norm within `tol`.
pub fn check_unit_norm(v: &[f64], tol: f64) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (n - 1.0).abs() > tol {
        return Err(Error::invariant(format!(
            "embedding norm {n} is not 1 within {tol}"
        )));
    }
    Ok(())
}
