//! Corpus-wide relation and attribute statistics.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::lexicon::Lexicon;
use crate::model::{AttributeCategory, ImageRecord, Relation};

type Triple = (String, Relation, String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationStats {
    /// `(class_a, relation, class_b)` → number of annotated `a relation b`.
    pub counts: BTreeMap<Triple, usize>,
    /// Attribute words seen per class and category.
    pub attributes: BTreeMap<String, BTreeMap<AttributeCategory, BTreeSet<String>>>,
    /// State → states it may be swapped to.
    pub state_alternatives: BTreeMap<String, BTreeSet<String>>,
}

impl RelationStats {
    pub fn count(&self, a: &str, relation: Relation, b: &str) -> usize {
        self.counts
            .get(&(a.to_string(), relation, b.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn inventory(&self, class: &str, category: AttributeCategory) -> BTreeSet<String> {
        self.attributes
            .get(class)
            .and_then(|m| m.get(&category))
            .cloned()
            .unwrap_or_default()
    }

    pub fn states_for(&self, state: &str) -> BTreeSet<String> {
        self.state_alternatives.get(state).cloned().unwrap_or_default()
    }

    /// Every class that occurs in some relation, sorted.
    pub fn classes(&self) -> BTreeSet<&str> {
        self.counts
            .keys()
            .flat_map(|(a, _, b)| [a.as_str(), b.as_str()])
            .collect()
    }

    fn merge(mut self, other: RelationStats) -> RelationStats {
        for (k, n) in other.counts {
            *self.counts.entry(k).or_default() += n;
        }
        for (class, cats) in other.attributes {
            let mine = self.attributes.entry(class).or_default();
            for (cat, words) in cats {
                mine.entry(cat).or_default().extend(words);
            }
        }
        self
    }
}

fn image_stats(record: &ImageRecord) -> RelationStats {
    let mut s = RelationStats::default();
    for obj in &record.objects {
        for rel in &obj.relations {
            if let Some(other) = record.object(&rel.object_id) {
                *s.counts
                    .entry((obj.class_name.clone(), rel.relation, other.class_name.clone()))
                    .or_default() += 1;
            }
        }
        let cats = s.attributes.entry(obj.class_name.clone()).or_default();
        for (cat, word) in &obj.attributes {
            cats.entry(*cat).or_default().insert(word.clone());
        }
    }
    s
}

/// Tallies every annotated relation and attribute over the corpus.
pub fn build_stats(corpus: &[ImageRecord], lexicon: &Lexicon) -> RelationStats {
    let mut stats = corpus
        .par_iter()
        .map(image_stats)
        .reduce(RelationStats::default, RelationStats::merge);
    let states: BTreeSet<&String> = lexicon
        .state_pairs
        .iter()
        .flat_map(|(a, b)| [a, b])
        .collect();
    for s in states {
        stats
            .state_alternatives
            .insert(s.clone(), lexicon.state_alternatives(s));
    }
    stats
}
