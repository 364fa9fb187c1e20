//! Backend registry: config names → adapter instances.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mock::{
    ColorStatsExtractor, HashEmbedder, OracleSegmenter, PaletteEmbedder, PixelPerceptual,
    ScriptedVqa, ThumbnailEmbedder,
};
use super::{BackendSet, Embedder, FeatureExtractor, PatchEmbedder, Perceptual, Segmenter, Vqa};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub adapter: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl BackendSpec {
    pub fn named(adapter: &str) -> Self {
        BackendSpec {
            adapter: adapter.into(),
            params: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: serde_json::Value) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    fn usize_param(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|n| n as usize).ok_or_else(|| {
                Error::invalid(format!("{}: parameter `{key}` must be an integer", self.adapter))
            }),
        }
    }

    /// `roots` (list of paths) or `root` (one path), resolved against `base`.
    fn roots_param(&self, base: &Path) -> Result<Vec<PathBuf>> {
        if let Some(list) = self.params.get("roots") {
            let items = list.as_array().ok_or_else(|| {
                Error::invalid(format!("{}: `roots` must be a list of paths", self.adapter))
            })?;
            return items
                .iter()
                .map(|v| {
                    v.as_str().map(|s| base.join(s)).ok_or_else(|| {
                        Error::invalid(format!("{}: `roots` must hold strings", self.adapter))
                    })
                })
                .collect();
        }
        let v = self.params.get("root").and_then(|v| v.as_str()).ok_or_else(|| {
            Error::invalid(format!("{}: missing parameter `root` or `roots`", self.adapter))
        })?;
        Ok(vec![base.join(v)])
    }
}

/// Which adapter fills each backend role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub embedder: BackendSpec,
    pub perceptual: BackendSpec,
    pub patch: BackendSpec,
    pub segmenter: BackendSpec,
    pub vqa: BackendSpec,
    pub features: BackendSpec,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let sidecars = serde_json::Value::String("sidecars".into());
        BackendConfig {
            embedder: BackendSpec::named("palette-embedder"),
            perceptual: BackendSpec::named("pixel-perceptual"),
            patch: BackendSpec::named("thumbnail-patch"),
            segmenter: BackendSpec::named("oracle-segmenter").with("root", sidecars.clone()),
            vqa: BackendSpec::named("scripted-vqa").with("root", sidecars),
            features: BackendSpec::named("color-stats"),
        }
    }
}

fn unknown(role: &'static str, spec: &BackendSpec) -> Error {
    Error::Unknown {
        kind: role,
        name: spec.adapter.clone(),
    }
}

impl BackendConfig {
    /// Points the side-car reading mocks at the given directories. Relative
    /// roots are taken against the working directory, unlike roots written in
    /// a config file. Other adapters are left alone.
    pub fn with_sidecar_roots(&self, roots: &[PathBuf]) -> BackendConfig {
        let list = serde_json::Value::Array(
            roots
                .iter()
                .map(|r| {
                    let abs = std::path::absolute(r).unwrap_or_else(|_| r.clone());
                    serde_json::Value::String(abs.to_string_lossy().into_owned())
                })
                .collect(),
        );
        let mut cfg = self.clone();
        for spec in [&mut cfg.segmenter, &mut cfg.vqa] {
            if matches!(spec.adapter.as_str(), "oracle-segmenter" | "scripted-vqa") {
                spec.params.remove("root");
                spec.params.insert("roots".into(), list.clone());
            }
        }
        cfg
    }

    /// Instantiates every role. Relative paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<BackendSet> {
        let embedder: Arc<dyn Embedder> = match self.embedder.adapter.as_str() {
            "palette-embedder" => Arc::new(PaletteEmbedder::default()),
            "hash-embedder" => Arc::new(HashEmbedder {
                dim: self.embedder.usize_param("dim", 64)?,
            }),
            _ => return Err(unknown("embedder adapter", &self.embedder)),
        };
        let perceptual: Arc<dyn Perceptual> = match self.perceptual.adapter.as_str() {
            "pixel-perceptual" => Arc::new(PixelPerceptual),
            _ => return Err(unknown("perceptual adapter", &self.perceptual)),
        };
        let patch: Arc<dyn PatchEmbedder> = match self.patch.adapter.as_str() {
            "thumbnail-patch" => Arc::new(ThumbnailEmbedder),
            "hash-patch" => Arc::new(HashEmbedder {
                dim: self.patch.usize_param("dim", 64)?,
            }),
            _ => return Err(unknown("patch adapter", &self.patch)),
        };
        let segmenter: Arc<dyn Segmenter> = match self.segmenter.adapter.as_str() {
            "oracle-segmenter" => {
                Arc::new(OracleSegmenter::with_roots(self.segmenter.roots_param(base)?))
            }
            _ => return Err(unknown("segmenter adapter", &self.segmenter)),
        };
        let vqa: Arc<dyn Vqa> = match self.vqa.adapter.as_str() {
            "scripted-vqa" => Arc::new(ScriptedVqa::with_roots(self.vqa.roots_param(base)?)),
            _ => return Err(unknown("vqa adapter", &self.vqa)),
        };
        let features: Arc<dyn FeatureExtractor> = match self.features.adapter.as_str() {
            "color-stats" => Arc::new(ColorStatsExtractor),
            _ => return Err(unknown("feature adapter", &self.features)),
        };
        Ok(BackendSet {
            embedder,
            perceptual,
            patch,
            segmenter,
            vqa,
            features,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_builds() {
        let set = BackendConfig::default().build(Path::new("/tmp")).unwrap();
        assert_eq!(set.ids().segmenter, "oracle-segmenter");
    }

    #[test]
    fn unknown_adapter_is_named() {
        let cfg = BackendConfig {
            embedder: BackendSpec::named("clip-vit-l14"),
            ..BackendConfig::default()
        };
        let err = cfg.build(Path::new(".")).err().unwrap().to_string();
        assert!(err.contains("clip-vit-l14"), "{err}");
    }
}
