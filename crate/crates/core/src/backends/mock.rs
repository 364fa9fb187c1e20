//! Deterministic stand-ins for the pretrained backends.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    DetectionResult, Embedder, FeatureExtractor, ImageRef, PatchEmbedder, Perceptual, Segmenter,
    Vqa,
};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::query::options::{BACKGROUNDS, STYLES};
use crate::raster::{Mask, Raster};
use crate::util::{contains_phrase, sha256};

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// Unit gaussian direction seeded by a digest.
fn digest_direction(digest: [u8; 32], dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::from_seed(digest);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = normalize(v) {
            return u;
        }
    }
}

fn raster_digest(r: &Raster) -> [u8; 32] {
    let mut bytes = Vec::with_capacity(8 + r.data().len());
    bytes.extend_from_slice(&r.width().to_le_bytes());
    bytes.extend_from_slice(&r.height().to_le_bytes());
    bytes.extend(r.to_rgb8().into_raw());
    sha256(&bytes)
}

/// Maps content digests to unit vectors.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 64 }
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-embedder/{}", self.dim)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let mut bytes = b"text:".to_vec();
        bytes.extend_from_slice(text.as_bytes());
        Ok(digest_direction(sha256(&bytes), self.dim))
    }

    fn embed_image(&self, image: &Raster) -> Result<Vec<f64>> {
        Ok(digest_direction(raster_digest(image), self.dim))
    }
}

impl PatchEmbedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-patch/{}", self.dim)
    }

    fn embed(&self, image: &Raster) -> Result<Vec<f64>> {
        Ok(digest_direction(raster_digest(image), self.dim))
    }
}

const NAMED_COLORS: &[(&str, [f32; 3])] = &[
    ("black", [0.1, 0.1, 0.1]),
    ("white", [0.95, 0.95, 0.95]),
    ("red", [0.85, 0.1, 0.1]),
    ("green", [0.1, 0.65, 0.15]),
    ("blue", [0.1, 0.2, 0.85]),
    ("yellow", [0.95, 0.85, 0.1]),
    ("brown", [0.5, 0.3, 0.1]),
    ("orange", [0.95, 0.55, 0.1]),
    ("pink", [0.95, 0.6, 0.75]),
    ("purple", [0.55, 0.15, 0.7]),
    ("gray", [0.5, 0.5, 0.5]),
    ("silver", [0.75, 0.75, 0.78]),
    ("gold", [0.85, 0.7, 0.2]),
    ("beige", [0.9, 0.85, 0.7]),
    ("tan", [0.8, 0.65, 0.45]),
    ("cream", [0.98, 0.93, 0.8]),
    ("gray scale", [0.5, 0.5, 0.5]),
];

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    match (i as i32).rem_euclid(6) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Color standing for a named concept in the mock world: named colors map to
/// themselves, everything else to a digest-derived hue.
pub fn signature_color(name: &str) -> [f32; 3] {
    let name = name.trim().to_lowercase();
    if let Some((_, c)) = NAMED_COLORS.iter().find(|(n, _)| *n == name) {
        return *c;
    }
    let h = sha256(format!("signature:{name}").as_bytes());
    let hue = u16::from_le_bytes([h[0], h[1]]) as f32 / 65536.0;
    let sat = 0.55 + 0.4 * (h[2] as f32 / 255.0);
    let val = 0.55 + 0.4 * (h[3] as f32 / 255.0);
    hsv_to_rgb(hue, sat, val)
}

const ANCHOR_LEVELS: [f32; 3] = [0.1, 0.5, 0.9];
const ANCHOR_SIGMA: f32 = 0.2;
pub const PALETTE_DIM: usize = 27;

fn soft_assign(rgb: [f32; 3], out: &mut [f64]) {
    let mut weights = [0.0f64; PALETTE_DIM];
    let mut total = 0.0;
    for (i, w) in weights.iter_mut().enumerate() {
        let a = [
            ANCHOR_LEVELS[i / 9],
            ANCHOR_LEVELS[(i / 3) % 3],
            ANCHOR_LEVELS[i % 3],
        ];
        let d2: f32 = (0..3).map(|k| (rgb[k] - a[k]).powi(2)).sum();
        *w = (-(d2 / (2.0 * ANCHOR_SIGMA * ANCHOR_SIGMA)) as f64).exp();
        total += *w;
    }
    for (o, w) in out.iter_mut().zip(weights) {
        *o += w / total;
    }
}

/// Mock joint embedder over a soft color histogram. Texts embed the colors
/// of the concepts they mention (named colors, object classes, backgrounds,
/// styles); images embed the colors of their non-zero pixels. Exactly zero
/// pixels are treated as masked out.
#[derive(Debug, Clone)]
pub struct PaletteEmbedder {
    vocabulary: Vec<String>,
}

impl Default for PaletteEmbedder {
    fn default() -> Self {
        let mut vocabulary: Vec<String> = NAMED_COLORS.iter().map(|(n, _)| n.to_string()).collect();
        vocabulary.extend(Lexicon::builtin().classes.keys().cloned());
        vocabulary.extend(BACKGROUNDS.iter().map(|s| s.to_string()));
        vocabulary.extend(STYLES.iter().map(|s| s.to_string()));
        // Longest phrases first so "gray scale" is not also read as "gray".
        vocabulary.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        vocabulary.dedup();
        PaletteEmbedder { vocabulary }
    }
}

impl PaletteEmbedder {
    /// Concepts recognised in the text, longest match first, no overlaps.
    pub fn concepts(&self, text: &str) -> Vec<String> {
        let mut remaining = text.to_lowercase();
        let mut found = Vec::new();
        for phrase in &self.vocabulary {
            while contains_phrase(&remaining, phrase) {
                found.push(phrase.clone());
                remaining = remove_first_phrase(&remaining, phrase);
            }
        }
        found
    }
}

fn remove_first_phrase(text: &str, phrase: &str) -> String {
    let words: Vec<String> = crate::util::tokenize(text);
    let target = crate::util::tokenize(phrase);
    if let Some(pos) = words
        .windows(target.len())
        .position(|w| w == target.as_slice())
    {
        let mut out = words[..pos].to_vec();
        out.push("|".into());
        out.extend_from_slice(&words[pos + target.len()..]);
        out.join(" ")
    } else {
        text.to_string()
    }
}

impl Embedder for PaletteEmbedder {
    fn id(&self) -> String {
        "palette-embedder".into()
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = vec![0.0; PALETTE_DIM];
        for c in self.concepts(text) {
            soft_assign(signature_color(&c), &mut v);
        }
        Ok(normalize(v).unwrap_or_else(|| {
            HashEmbedder { dim: PALETTE_DIM }
                .embed_text(text)
                .expect("hash embedding is infallible")
        }))
    }

    fn embed_image(&self, image: &Raster) -> Result<Vec<f64>> {
        let mut v = vec![0.0; PALETTE_DIM];
        for y in 0..image.height() {
            for x in 0..image.width() {
                let p = image.get(x, y);
                if p != [0.0; 3] {
                    soft_assign(p, &mut v);
                }
            }
        }
        Ok(normalize(v).unwrap_or_else(|| {
            let mut e = vec![0.0; PALETTE_DIM];
            e[0] = 1.0;
            e
        }))
    }
}

/// Mock patch embedder: a centered 8×8 thumbnail.
#[derive(Debug, Clone, Default)]
pub struct ThumbnailEmbedder;

impl PatchEmbedder for ThumbnailEmbedder {
    fn id(&self) -> String {
        "thumbnail-patch/8".into()
    }

    fn embed(&self, image: &Raster) -> Result<Vec<f64>> {
        let thumb = image.resize(8, 8);
        let v: Vec<f64> = thumb.data().iter().map(|x| *x as f64 - 0.5).collect();
        Ok(normalize(v).unwrap_or_else(|| {
            let mut e = vec![0.0; 8 * 8 * 3];
            e[0] = 1.0;
            e
        }))
    }
}

/// Mean absolute channel difference, a stand-in for a learned perceptual distance.
#[derive(Debug, Clone, Default)]
pub struct PixelPerceptual;

impl Perceptual for PixelPerceptual {
    fn id(&self) -> String {
        "pixel-perceptual".into()
    }

    fn distance(&self, a: &Raster, b: &Raster) -> Result<f64> {
        a.check_same(b.dims())?;
        let n = a.data().len().max(1);
        let sum: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (*x as f64 - *y as f64).abs())
            .sum();
        Ok(sum / n as f64)
    }
}

/// One entry of a `detections.json` side-car.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarDetection {
    /// Mask file relative to the side-car directory.
    pub mask: String,
    pub confidence: f64,
}

/// `detections.json`: class name → candidates.
pub type Sidecar = BTreeMap<String, Vec<SidecarDetection>>;

pub const SIDECAR_FILE: &str = "detections.json";
pub const VQA_FILE: &str = "vqa.json";

/// Reads ground-truth masks from `<root>/<key>/detections.json`, trying each
/// root in order. A missing side-car or class models "object not found".
#[derive(Debug)]
pub struct OracleSegmenter {
    roots: Vec<PathBuf>,
    cache: Mutex<BTreeMap<(String, String), Vec<DetectionResult>>>,
}

/// First `<root>/<key>` directory holding `file`.
fn find_sidecar(roots: &[PathBuf], key: &str, file: &str) -> Option<PathBuf> {
    roots
        .iter()
        .map(|r| r.join(key))
        .find(|d| d.join(file).is_file())
}

impl OracleSegmenter {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OracleSegmenter::with_roots(vec![root.into()])
    }

    pub fn with_roots(roots: Vec<PathBuf>) -> Self {
        OracleSegmenter {
            roots,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn roots(&self) -> &[PathBuf] {
        &self.roots
    }

    fn read(&self, key: &str, class_name: &str, dims: (u32, u32)) -> Result<Vec<DetectionResult>> {
        let Some(dir) = find_sidecar(&self.roots, key, SIDECAR_FILE) else {
            return Ok(Vec::new());
        };
        let file = dir.join(SIDECAR_FILE);
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: file.clone(),
            line: source.line(),
            source,
        })?;
        let Some(entries) = sidecar.get(class_name) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for entry in entries {
            let mask = Mask::load_png(&dir.join(&entry.mask))?;
            if mask.dims() != dims {
                return Err(Error::Dimension(format!(
                    "side-car mask {} is {:?}, image is {:?}",
                    entry.mask,
                    mask.dims(),
                    dims
                )));
            }
            if mask.is_empty() {
                continue;
            }
            out.push(DetectionResult::new(class_name, mask, entry.confidence)?);
        }
        Ok(out)
    }
}

impl Segmenter for OracleSegmenter {
    fn id(&self) -> String {
        "oracle-segmenter".into()
    }

    fn detect_all(&self, image: ImageRef<'_>, class_name: &str) -> Result<Vec<DetectionResult>> {
        let k = (image.key.to_string(), class_name.to_string());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&k) {
            return Ok(hit.clone());
        }
        let found = self.read(image.key, class_name, image.raster.dims())?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(k, found.clone());
        Ok(found)
    }
}

/// In-memory segmenter for tests.
#[derive(Debug, Default, Clone)]
pub struct MemorySegmenter {
    entries: BTreeMap<(String, String), Vec<DetectionResult>>,
}

impl MemorySegmenter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &str, detection: DetectionResult) {
        self.entries
            .entry((key.to_string(), detection.class_name.clone()))
            .or_default()
            .push(detection);
    }
}

impl Segmenter for MemorySegmenter {
    fn id(&self) -> String {
        "memory-segmenter".into()
    }

    fn detect_all(&self, image: ImageRef<'_>, class_name: &str) -> Result<Vec<DetectionResult>> {
        Ok(self
            .entries
            .get(&(image.key.to_string(), class_name.to_string()))
            .cloned()
            .unwrap_or_default())
    }
}

/// Answers from `<root>/<key>/vqa.json` (question → answer); questions not
/// listed get the answer of an unobstructed object.
#[derive(Debug, Clone)]
pub struct ScriptedVqa {
    roots: Vec<PathBuf>,
}

impl ScriptedVqa {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ScriptedVqa::with_roots(vec![root.into()])
    }

    pub fn with_roots(roots: Vec<PathBuf>) -> Self {
        ScriptedVqa { roots }
    }
}

/// Answer an unobstructed, fully visible object would get.
pub fn unobstructed_answer(question: &str) -> bool {
    let q = question.to_lowercase();
    !["hidden", "covered", "outside", "blocked by"]
        .iter()
        .any(|w| q.contains(w))
}

impl Vqa for ScriptedVqa {
    fn id(&self) -> String {
        "scripted-vqa".into()
    }

    fn answer(&self, image: ImageRef<'_>, question: &str) -> Result<bool> {
        if let Some(dir) = find_sidecar(&self.roots, image.key, VQA_FILE) {
            let file = dir.join(VQA_FILE);
            let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let script: BTreeMap<String, bool> =
                serde_json::from_str(&text).map_err(|source| Error::Json {
                    path: file.clone(),
                    line: source.line(),
                    source,
                })?;
            if let Some(a) = script.get(question) {
                return Ok(*a);
            }
        }
        Ok(unobstructed_answer(question))
    }
}

/// VQA backed by a closure.
pub struct FnVqa<F>(pub F);

impl<F> Vqa for FnVqa<F>
where
    F: Fn(&str, &str) -> Result<bool> + Send + Sync,
{
    fn id(&self) -> String {
        "fn-vqa".into()
    }

    fn answer(&self, image: ImageRef<'_>, question: &str) -> Result<bool> {
        (self.0)(image.key, question)
    }
}

/// Per-channel mean and standard deviation, scaled by 10.
#[derive(Debug, Clone, Default)]
pub struct ColorStatsExtractor;

impl FeatureExtractor for ColorStatsExtractor {
    fn id(&self) -> String {
        "color-stats/6".into()
    }

    fn dim(&self) -> usize {
        6
    }

    fn features(&self, image: &Raster) -> Result<Vec<f64>> {
        let n = (image.width() as f64 * image.height() as f64).max(1.0);
        let mut mean = [0.0f64; 3];
        for px in image.data().chunks_exact(3) {
            for c in 0..3 {
                mean[c] += px[c] as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0f64; 3];
        for px in image.data().chunks_exact(3) {
            for c in 0..3 {
                var[c] += (px[c] as f64 - mean[c]).powi(2);
            }
        }
        let mut out: Vec<f64> = mean.iter().map(|m| m * 10.0).collect();
        out.extend(var.iter().map(|v| (v / n).sqrt() * 10.0));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::check_unit_norm;

    #[test]
    fn hash_embedder_is_deterministic_and_unit() {
        let e = HashEmbedder::default();
        let r = Raster::filled(4, 4, [0.2, 0.4, 0.6]);
        let a = e.embed_image(&r).unwrap();
        assert_eq!(a, e.embed_image(&r).unwrap());
        check_unit_norm(&a, 1e-6).unwrap();
        check_unit_norm(&e.embed_text("a dog").unwrap(), 1e-6).unwrap();
    }

    #[test]
    fn palette_text_matches_colored_image() {
        let e = PaletteEmbedder::default();
        let red = e.embed_image(&Raster::filled(4, 4, signature_color("red"))).unwrap();
        let t_red = e.embed_text("red").unwrap();
        let t_blue = e.embed_text("blue").unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!(dot(&red, &t_red) > dot(&red, &t_blue));
        assert_eq!(e.concepts("a gray scale photo"), vec!["gray scale".to_string()]);
    }

    #[test]
    fn pixel_distance_of_identical_is_zero() {
        let r = Raster::filled(3, 3, [0.3; 3]);
        assert_eq!(PixelPerceptual.distance(&r, &r).unwrap(), 0.0);
    }

    #[test]
    fn oracle_without_sidecar_finds_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let seg = OracleSegmenter::new(dir.path());
        let r = Raster::new(4, 4);
        let img = ImageRef {
            key: "img",
            raster: &r,
        };
        assert!(seg.detect(img, "dog").unwrap().is_none());
    }

    #[test]
    fn oracle_picks_highest_confidence() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("img");
        let mut a = Mask::empty(8, 8);
        a.set(1, 1, true);
        let mut b = Mask::empty(8, 8);
        b.set(5, 5, true);
        a.save_png(&sub.join("a.png")).unwrap();
        b.save_png(&sub.join("b.png")).unwrap();
        let sidecar: Sidecar = [(
            "dog".to_string(),
            vec![
                SidecarDetection {
                    mask: "a.png".into(),
                    confidence: 0.3,
                },
                SidecarDetection {
                    mask: "b.png".into(),
                    confidence: 0.9,
                },
            ],
        )]
        .into();
        std::fs::write(sub.join(SIDECAR_FILE), serde_json::to_string(&sidecar).unwrap()).unwrap();
        let seg = OracleSegmenter::new(dir.path());
        let r = Raster::new(8, 8);
        let d = seg
            .detect(ImageRef { key: "img", raster: &r }, "dog")
            .unwrap()
            .unwrap();
        assert_eq!(d.confidence, 0.9);
        assert_eq!(d.mask.centroid(), Some((5.5, 5.5)));
    }
}
