//! Per-image query generation and the matching feasibility predicates.

use std::collections::BTreeSet;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::options::OptionSets;
use super::stats::RelationStats;
use crate::backends::Embedder;
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::metrics::clip_alignment;
use crate::model::{
    AttributeCategory, BBox, Captions, EditParams, EditQuery, EditType, ImageRecord, Relation,
    SceneObject, SizeDirection,
};
use crate::raster::Raster;
use crate::util::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    /// A `(class, relation, class)` triple is common when seen this often.
    pub relation_threshold: usize,
    /// Largest share of an addition region another object may cover.
    pub overlap_tolerance: f64,
    /// Area ratio at or above which "smaller" is allowed.
    pub beta_lo: f64,
    /// Area ratio at or below which "larger" is allowed.
    pub beta_hi: f64,
    pub edit_types: Vec<EditType>,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            relation_threshold: 5,
            overlap_tolerance: 0.3,
            beta_lo: 0.02,
            beta_hi: 0.25,
            edit_types: EditType::ALL.to_vec(),
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.overlap_tolerance) {
            return Err(Error::invalid("overlap tolerance must lie in [0, 1]"));
        }
        if !(0.0 < self.beta_lo && self.beta_lo < self.beta_hi && self.beta_hi <= 1.0) {
            return Err(Error::invalid(format!(
                "resizing bounds need 0 < beta_lo < beta_hi <= 1, got {} and {}",
                self.beta_lo, self.beta_hi
            )));
        }
        Ok(())
    }

    fn enabled(&self, t: EditType) -> bool {
        self.edit_types.contains(&t)
    }
}

fn slug(s: &str) -> String {
    s.replace(' ', "_")
}

fn object_query(image: &ImageRecord, o: &SceneObject, tag: String, params: EditParams) -> EditQuery {
    EditQuery {
        query_id: format!("{}.{}.{}", image.image_id, o.object_id, tag),
        image_id: image.image_id.clone(),
        target_object_id: Some(o.object_id.clone()),
        object_class: Some(o.class_name.clone()),
        params,
        captions: Captions::default(),
    }
}

/// Candidate placement boxes for a new object `relation` the anchor `b`.
pub fn addition_regions(b: &BBox, relation: Relation) -> Vec<BBox> {
    let BBox { x, y, w, h } = *b;
    match relation {
        Relation::Above | Relation::On => vec![BBox::new(x, y - h, w, h)],
        Relation::Under => vec![BBox::new(x, y + h, w, h)],
        Relation::Left => vec![BBox::new(x - w, y, w, h)],
        Relation::Right => vec![BBox::new(x + w, y, w, h)],
        Relation::NextTo => vec![BBox::new(x - w, y, w, h), BBox::new(x + w, y, w, h)],
        Relation::In => vec![BBox::new(x + w / 4.0, y + h / 4.0, w / 2.0, h / 2.0)],
        Relation::Front => vec![BBox::new(x, y + h / 2.0, w, h)],
        Relation::Behind => vec![BBox::new(x, y - h / 2.0, w, h)],
    }
}

/// First candidate region that fits the image and is not covered by another
/// annotated object beyond the tolerance.
pub fn free_region(
    image: &ImageRecord,
    anchor: &SceneObject,
    relation: Relation,
    tolerance: f64,
) -> Option<BBox> {
    addition_regions(&anchor.bbox, relation).into_iter().find(|r| {
        r.within(image.width as f64, image.height as f64)
            && image
                .objects
                .iter()
                .filter(|o| o.object_id != anchor.object_id)
                .all(|o| r.intersection_area(&o.bbox) <= tolerance * r.area())
    })
}

fn covered_candidates<'a>(
    stats: &'a RelationStats,
    lexicon: &Lexicon,
    image: &ImageRecord,
) -> Vec<&'a str> {
    let present = image.classes();
    stats
        .classes()
        .into_iter()
        .filter(|c| lexicon.is_covered(c) && !present.contains(c))
        .collect()
}

pub fn gen_addition(
    image: &ImageRecord,
    o: &SceneObject,
    stats: &RelationStats,
    lexicon: &Lexicon,
    cfg: &QueryConfig,
) -> Vec<EditQuery> {
    let mut out = Vec::new();
    for target in covered_candidates(stats, lexicon, image) {
        for relation in Relation::ALL {
            if stats.count(target, relation, &o.class_name) < cfg.relation_threshold {
                continue;
            }
            if free_region(image, o, relation, cfg.overlap_tolerance).is_none() {
                continue;
            }
            out.push(object_query(
                image,
                o,
                format!("addition.{}.{}", slug(target), relation),
                EditParams::Addition {
                    target_class: target.to_string(),
                    relation,
                },
            ));
        }
    }
    out
}

pub fn gen_removal(image: &ImageRecord, o: &SceneObject) -> EditQuery {
    object_query(image, o, "removal".into(), EditParams::Removal)
}

/// Relations of `o` in both directions: `(relation, other class, o is subject)`.
fn relations_of<'a>(image: &'a ImageRecord, o: &'a SceneObject) -> Vec<(Relation, &'a str, bool)> {
    let mut out = Vec::new();
    for r in &o.relations {
        if let Some(other) = image.object(&r.object_id) {
            out.push((r.relation, other.class_name.as_str(), true));
        }
    }
    for other in &image.objects {
        for r in other.relations.iter().filter(|r| r.object_id == o.object_id) {
            out.push((r.relation, other.class_name.as_str(), false));
        }
    }
    out
}

fn replacement_compatible(
    image: &ImageRecord,
    o: &SceneObject,
    target: &str,
    stats: &RelationStats,
    t: usize,
) -> bool {
    let rels = relations_of(image, o);
    !rels.is_empty()
        && rels.iter().all(|(rel, other, subject)| {
            let n = if *subject {
                stats.count(target, *rel, other)
            } else {
                stats.count(other, *rel, target)
            };
            n >= t
        })
}

pub fn gen_replacement(
    image: &ImageRecord,
    o: &SceneObject,
    stats: &RelationStats,
    lexicon: &Lexicon,
    cfg: &QueryConfig,
) -> Vec<EditQuery> {
    covered_candidates(stats, lexicon, image)
        .into_iter()
        .filter(|c| *c != o.class_name)
        .filter(|c| replacement_compatible(image, o, c, stats, cfg.relation_threshold))
        .map(|c| {
            object_query(
                image,
                o,
                format!("replacement.{}", slug(c)),
                EditParams::Replacement {
                    target_class: c.to_string(),
                },
            )
        })
        .collect()
}

pub fn allowed_directions(image: &ImageRecord, o: &SceneObject, cfg: &QueryConfig) -> Vec<SizeDirection> {
    let ratio = o.bbox.area() / image.area();
    let mut out = Vec::new();
    if ratio <= cfg.beta_hi {
        out.push(SizeDirection::Larger);
    }
    if ratio >= cfg.beta_lo {
        out.push(SizeDirection::Smaller);
    }
    out
}

pub fn gen_resizing(image: &ImageRecord, o: &SceneObject, cfg: &QueryConfig) -> Vec<EditQuery> {
    allowed_directions(image, o, cfg)
        .into_iter()
        .map(|direction| {
            object_query(
                image,
                o,
                format!("resizing.{}", direction.as_str()),
                EditParams::Resizing { direction },
            )
        })
        .collect()
}

pub fn attribute_alternatives(
    o: &SceneObject,
    category: AttributeCategory,
    stats: &RelationStats,
) -> BTreeSet<String> {
    let Some(current) = o.attributes.get(&category) else {
        return BTreeSet::new();
    };
    let mut alts = match category {
        AttributeCategory::State => stats.states_for(current),
        _ => stats.inventory(&o.class_name, category),
    };
    alts.remove(current);
    alts
}

pub fn gen_attribute_change(image: &ImageRecord, o: &SceneObject, stats: &RelationStats) -> Vec<EditQuery> {
    let mut out = Vec::new();
    for (category, from) in &o.attributes {
        for to in attribute_alternatives(o, *category, stats) {
            out.push(object_query(
                image,
                o,
                format!("attribute_change.{}.{}", category, slug(&to)),
                EditParams::AttributeChange {
                    category: *category,
                    from: from.clone(),
                    to,
                },
            ));
        }
    }
    out
}

/// Backgrounds ordered by increasing alignment with the image; equal
/// alignments are ordered by name.
pub fn rank_backgrounds(
    raster: &Raster,
    embedder: &dyn Embedder,
    options: &OptionSets,
) -> Result<Vec<(String, f64)>> {
    let image = embedder.embed_image(raster)?;
    let mut ranked = options
        .backgrounds
        .iter()
        .map(|b| Ok((b.clone(), clip_alignment(&embedder.embed_text(b)?, &image)?)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// The `⌊|B| / 2⌋` least aligned backgrounds.
pub fn background_pool(ranked: &[(String, f64)]) -> Vec<String> {
    ranked[..ranked.len() / 2].iter().map(|(b, _)| b.clone()).collect()
}

fn scene_query(image: &ImageRecord, tag: String, params: EditParams) -> EditQuery {
    EditQuery {
        query_id: format!("{}.{}", image.image_id, tag),
        image_id: image.image_id.clone(),
        target_object_id: None,
        object_class: None,
        params,
        captions: Captions::default(),
    }
}

pub fn gen_background_change(
    image: &ImageRecord,
    raster: &Raster,
    embedder: &dyn Embedder,
    options: &OptionSets,
    seed: u64,
) -> Result<EditQuery> {
    let pool = background_pool(&rank_backgrounds(raster, embedder, options)?);
    if pool.is_empty() {
        return Err(Error::invalid("background option set is too small"));
    }
    let mut rng = rng_for(seed, &format!("background:{}", image.image_id));
    let background = pool[rng.random_range(0..pool.len())].clone();
    Ok(scene_query(
        image,
        "background_change".into(),
        EditParams::BackgroundChange { background },
    ))
}

pub fn gen_style_change(image: &ImageRecord, options: &OptionSets, seed: u64) -> EditQuery {
    let mut rng = rng_for(seed, &format!("style:{}", image.image_id));
    let style = options.styles[rng.random_range(0..options.styles.len())].clone();
    scene_query(image, "style_change".into(), EditParams::StyleChange { style })
}

/// Everything the generators need besides the image itself.
pub struct GenerationInputs<'a> {
    pub stats: &'a RelationStats,
    pub lexicon: &'a Lexicon,
    pub options: &'a OptionSets,
    pub embedder: &'a dyn Embedder,
    pub config: &'a QueryConfig,
    pub seed: u64,
}

/// All candidate queries for one prepared image. Object-centric queries
/// target editable objects only; scene-level queries need at least one.
pub fn generate_for_image(
    image: &ImageRecord,
    raster: &Raster,
    inputs: &GenerationInputs<'_>,
) -> Vec<EditQuery> {
    let cfg = inputs.config;
    let mut out = Vec::new();
    let editable: Vec<&SceneObject> = image.editable_objects().collect();
    for o in &editable {
        if cfg.enabled(EditType::Addition) {
            out.extend(gen_addition(image, o, inputs.stats, inputs.lexicon, cfg));
        }
        if cfg.enabled(EditType::Removal) {
            out.push(gen_removal(image, o));
        }
        if cfg.enabled(EditType::Replacement) {
            out.extend(gen_replacement(image, o, inputs.stats, inputs.lexicon, cfg));
        }
        if cfg.enabled(EditType::AttributeChange) {
            out.extend(gen_attribute_change(image, o, inputs.stats));
        }
        if cfg.enabled(EditType::Resizing) {
            out.extend(gen_resizing(image, o, cfg));
        }
    }
    if !editable.is_empty() {
        if cfg.enabled(EditType::BackgroundChange) {
            match gen_background_change(image, raster, inputs.embedder, inputs.options, inputs.seed) {
                Ok(q) => out.push(q),
                Err(e) => warn!("image {}: background query skipped: {e}", image.image_id),
            }
        }
        if cfg.enabled(EditType::StyleChange) {
            out.push(gen_style_change(image, inputs.options, inputs.seed));
        }
    }
    out
}

/// Candidate pool over many images, ordered by image then generation order.
pub fn generate_queries(
    images: &[(ImageRecord, Raster)],
    inputs: &GenerationInputs<'_>,
) -> Result<Vec<EditQuery>> {
    inputs.config.validate()?;
    Ok(images
        .par_iter()
        .map(|(r, img)| generate_for_image(r, img, inputs))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

/// Re-checks a query against the rules that produced it. `Err` carries the
/// violated rule.
pub fn check_feasible(
    query: &EditQuery,
    image: &ImageRecord,
    raster: &Raster,
    inputs: &GenerationInputs<'_>,
) -> std::result::Result<(), String> {
    let cfg = inputs.config;
    if query.image_id != image.image_id {
        return Err("query names another image".into());
    }
    let target = match &query.target_object_id {
        Some(id) => {
            let o = image.object(id).ok_or("target object missing")?;
            if !o.editable {
                return Err(format!("target {id} is not editable"));
            }
            if query.object_class.as_deref() != Some(o.class_name.as_str()) {
                return Err("object class does not match the annotation".into());
            }
            Some(o)
        }
        None => None,
    };
    let absent = |class: &str| -> std::result::Result<(), String> {
        if image.classes().contains(class) {
            Err(format!("{class} already in the image"))
        } else if !inputs.lexicon.is_covered(class) {
            Err(format!("{class} is not a covered class"))
        } else {
            Ok(())
        }
    };
    match (&query.params, target) {
        (EditParams::Addition { target_class, relation }, Some(o)) => {
            absent(target_class)?;
            if inputs.stats.count(target_class, *relation, &o.class_name) < cfg.relation_threshold {
                return Err("relation is not common enough".into());
            }
            if free_region(image, o, *relation, cfg.overlap_tolerance).is_none() {
                return Err("no free region".into());
            }
        }
        (EditParams::Removal, Some(_)) => {
            if query.captions.description.is_some() {
                return Err("removal carries a description pair".into());
            }
        }
        (EditParams::Replacement { target_class }, Some(o)) => {
            absent(target_class)?;
            if !replacement_compatible(image, o, target_class, inputs.stats, cfg.relation_threshold) {
                return Err("replacement is not relation compatible".into());
            }
        }
        (EditParams::AttributeChange { category, from, to }, Some(o)) => {
            if o.attributes.get(category) != Some(from) {
                return Err("source attribute not annotated".into());
            }
            if !attribute_alternatives(o, *category, inputs.stats).contains(to) {
                return Err(format!("{to} is not an alternative to {from}"));
            }
        }
        (EditParams::Resizing { direction }, Some(o)) => {
            if !allowed_directions(image, o, cfg).contains(direction) {
                return Err("resizing direction not allowed for this size".into());
            }
        }
        (EditParams::BackgroundChange { background }, None) => {
            let ranked = rank_backgrounds(raster, inputs.embedder, inputs.options)
                .map_err(|e| e.to_string())?;
            if !background_pool(&ranked).contains(background) {
                return Err(format!("{background} is not among the least aligned backgrounds"));
            }
        }
        (EditParams::StyleChange { style }, None) => {
            if !inputs.options.styles.contains(style) {
                return Err(format!("unknown style {style}"));
            }
        }
        _ => return Err("target object presence does not match the edit type".into()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::mock::HashEmbedder;
    use crate::model::ObjectRelation;
    use crate::query::stats::build_stats;

    fn obj(id: &str, class: &str, b: BBox) -> SceneObject {
        SceneObject {
            object_id: id.into(),
            class_name: class.into(),
            bbox: b,
            attributes: Default::default(),
            relations: vec![],
            editable: true,
        }
    }

    fn image(objects: Vec<SceneObject>) -> ImageRecord {
        ImageRecord {
            image_id: "img".into(),
            width: 512,
            height: 512,
            objects,
            source_path: String::new(),
        }
    }

    fn stats_with(triples: &[(&str, Relation, &str, usize)]) -> RelationStats {
        let mut s = build_stats(&[], Lexicon::builtin());
        for (a, r, b, n) in triples {
            s.counts.insert((a.to_string(), *r, b.to_string()), *n);
        }
        s
    }

    #[test]
    fn addition_needs_frequency_absence_and_space() {
        let cfg = QueryConfig::default();
        let lex = Lexicon::builtin();
        let table = obj("t", "dining table", BBox::new(100.0, 300.0, 200.0, 100.0));
        let stats = stats_with(&[
            ("laptop", Relation::On, "dining table", 9),
            ("cup", Relation::On, "dining table", 2),
        ]);
        let img = image(vec![table.clone()]);
        let qs = gen_addition(&img, &table, &stats, lex, &cfg);
        assert_eq!(qs.len(), 1);
        assert_eq!(
            qs[0].params,
            EditParams::Addition {
                target_class: "laptop".into(),
                relation: Relation::On
            }
        );

        let with_laptop = image(vec![
            table.clone(),
            obj("l", "laptop", BBox::new(400.0, 20.0, 50.0, 50.0)),
        ]);
        assert!(gen_addition(&with_laptop, &table, &stats, lex, &cfg).is_empty());

        let flush = obj("t", "dining table", BBox::new(100.0, 0.0, 200.0, 100.0));
        assert!(gen_addition(&image(vec![flush.clone()]), &flush, &stats, lex, &cfg).is_empty());

        let crowded = image(vec![
            table.clone(),
            obj("c", "chair", BBox::new(100.0, 200.0, 200.0, 100.0)),
        ]);
        assert!(gen_addition(&crowded, &table, &stats, lex, &cfg).is_empty());
    }

    #[test]
    fn replacement_checks_both_directions() {
        let cfg = QueryConfig::default();
        let lex = Lexicon::builtin();
        let mut cup = obj("c", "cup", BBox::new(10.0, 10.0, 40.0, 40.0));
        cup.relations.push(ObjectRelation {
            relation: Relation::On,
            object_id: "t".into(),
        });
        let mut person = obj("p", "person", BBox::new(300.0, 10.0, 40.0, 40.0));
        person.relations.push(ObjectRelation {
            relation: Relation::NextTo,
            object_id: "c".into(),
        });
        let table = obj("t", "dining table", BBox::new(10.0, 60.0, 200.0, 40.0));
        let img = image(vec![cup.clone(), person, table]);
        let stats = stats_with(&[
            ("bowl", Relation::On, "dining table", 5),
            ("person", Relation::NextTo, "bowl", 5),
            ("vase", Relation::On, "dining table", 50),
        ]);
        let qs = gen_replacement(&img, &cup, &stats, lex, &cfg);
        assert_eq!(qs.len(), 1);
        assert_eq!(
            qs[0].params,
            EditParams::Replacement {
                target_class: "bowl".into()
            }
        );
        let isolated = obj("c", "cup", BBox::new(10.0, 10.0, 40.0, 40.0));
        assert!(gen_replacement(&image(vec![isolated.clone()]), &isolated, &stats, lex, &cfg).is_empty());
    }

    #[test]
    fn resizing_bounds() {
        let cfg = QueryConfig::default();
        let dirs = |side: f64| {
            let o = obj("o", "dog", BBox::new(1.0, 1.0, side, side));
            allowed_directions(&image(vec![o.clone()]), &o, &cfg)
        };
        let s = 512.0f64;
        assert_eq!(dirs(s * 0.1), vec![SizeDirection::Larger]);
        assert_eq!(dirs(s * 0.10f64.sqrt()), vec![SizeDirection::Larger, SizeDirection::Smaller]);
        assert_eq!(dirs(s * 0.5f64.sqrt()), vec![SizeDirection::Smaller]);
    }

    #[test]
    fn attribute_alternatives_follow_category_rules() {
        let mut stats = stats_with(&[]);
        stats.attributes.insert(
            "bench".into(),
            [(
                AttributeCategory::Color,
                ["brown", "yellow", "black"].map(String::from).into(),
            )]
            .into(),
        );
        let mut bench = obj("b", "bench", BBox::new(1.0, 1.0, 9.0, 9.0));
        assert!(gen_attribute_change(&image(vec![]), &bench, &stats).is_empty());
        bench.attributes.insert(AttributeCategory::Color, "brown".into());
        bench.attributes.insert(AttributeCategory::State, "wet".into());
        let tos: Vec<String> = gen_attribute_change(&image(vec![]), &bench, &stats)
            .into_iter()
            .map(|q| match q.params {
                EditParams::AttributeChange { to, .. } => to,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(tos, vec!["black", "yellow", "dry"]);
    }

    #[test]
    fn style_draws_are_seeded_and_uniform() {
        let options = OptionSets::default();
        let img = image(vec![]);
        assert_eq!(gen_style_change(&img, &options, 3), gen_style_change(&img, &options, 3));
        let n = 10_000usize;
        let mut counts = std::collections::BTreeMap::new();
        for i in 0..n {
            let mut r = img.clone();
            r.image_id = format!("img{i}");
            if let EditParams::StyleChange { style } = gen_style_change(&r, &options, 11).params {
                *counts.entry(style).or_insert(0usize) += 1;
            }
        }
        assert_eq!(counts.len(), 10);
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        for (s, c) in counts {
            assert!((c as f64 - 1000.0).abs() <= 3.0 * sigma, "{s}: {c}");
        }
    }

    #[test]
    fn background_ties_break_by_name() {
        struct Flat;
        impl Embedder for Flat {
            fn id(&self) -> String {
                "flat".into()
            }
            fn embed_text(&self, _: &str) -> Result<Vec<f64>> {
                Ok(vec![1.0, 0.0])
            }
            fn embed_image(&self, _: &Raster) -> Result<Vec<f64>> {
                Ok(vec![0.0, 1.0])
            }
        }
        let options = OptionSets::default();
        let ranked = rank_backgrounds(&Raster::new(4, 4), &Flat, &options).unwrap();
        let pool = background_pool(&ranked);
        let mut sorted: Vec<String> = options.backgrounds.clone();
        sorted.sort();
        assert_eq!(pool, sorted[..13].to_vec());
        let h = HashEmbedder::default();
        let raster = Raster::filled(8, 8, [0.3, 0.6, 0.2]);
        let a = gen_background_change(&image(vec![]), &raster, &h, &options, 5).unwrap();
        let b = gen_background_change(&image(vec![]), &raster, &h, &options, 5).unwrap();
        assert_eq!(a, b);
        let top = &rank_backgrounds(&raster, &h, &options).unwrap()[26].0;
        for seed in 0..50 {
            let q = gen_background_change(&image(vec![]), &raster, &h, &options, seed).unwrap();
            assert_ne!(q.params, EditParams::BackgroundChange { background: top.clone() });
        }
    }
}
