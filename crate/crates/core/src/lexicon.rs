//! Editable lookup tables: covered classes, aliases, attribute categories,
//! relation phrases and state alternatives.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeCategory, Relation};

const BUILTIN: &str = include_str!("../data/lexicon.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Covered detector class → supercategory.
    pub classes: BTreeMap<String, String>,
    pub aliases: BTreeMap<String, String>,
    pub attributes: BTreeMap<String, AttributeCategory>,
    pub relations: BTreeMap<String, Relation>,
    pub state_pairs: Vec<(String, String)>,
}

/// Reporting groups for edited object classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassGroup {
    WholeImage,
    Person,
    Animal,
    Vehicle,
    Household,
    Dining,
    Outdoor,
    Other,
}

impl ClassGroup {
    pub const ALL: [ClassGroup; 8] = [
        ClassGroup::WholeImage,
        ClassGroup::Person,
        ClassGroup::Animal,
        ClassGroup::Vehicle,
        ClassGroup::Household,
        ClassGroup::Dining,
        ClassGroup::Outdoor,
        ClassGroup::Other,
    ];

    pub fn title(&self) -> &'static str {
        match self {
            ClassGroup::WholeImage => "Whole Image",
            ClassGroup::Person => "Person",
            ClassGroup::Animal => "Animal",
            ClassGroup::Vehicle => "Vehicle",
            ClassGroup::Household => "Household",
            ClassGroup::Dining => "Dining",
            ClassGroup::Outdoor => "Outdoor",
            ClassGroup::Other => "Other",
        }
    }

    fn from_supercategory(s: &str) -> ClassGroup {
        match s {
            "person" => ClassGroup::Person,
            "animal" => ClassGroup::Animal,
            "vehicle" => ClassGroup::Vehicle,
            "furniture" | "electronic" | "appliance" | "indoor" => ClassGroup::Household,
            "kitchen" | "food" => ClassGroup::Dining,
            "outdoor" => ClassGroup::Outdoor,
            _ => ClassGroup::Other,
        }
    }
}

impl fmt::Display for ClassGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

fn clean(word: &str) -> String {
    word.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl Lexicon {
    pub fn builtin() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| serde_json::from_str(BUILTIN).expect("shipped lexicon parses"))
    }

    pub fn load(path: &Path) -> Result<Lexicon> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lex: Lexicon = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: source.line(),
            source,
        })?;
        for (alias, target) in &lex.aliases {
            if !lex.classes.contains_key(target) {
                return Err(Error::invariant(format!(
                    "alias `{alias}` points at uncovered class `{target}`"
                )));
            }
        }
        Ok(lex)
    }

    /// Canonical covered class for a freeform name, if any.
    pub fn normalize_class(&self, name: &str) -> Option<String> {
        let name = clean(name);
        if self.classes.contains_key(&name) {
            return Some(name);
        }
        self.aliases.get(&name).cloned()
    }

    pub fn is_covered(&self, class: &str) -> bool {
        self.classes.contains_key(class)
    }

    pub fn class_group(&self, class: &str) -> ClassGroup {
        self.classes
            .get(class)
            .map(|s| ClassGroup::from_supercategory(s))
            .unwrap_or(ClassGroup::Other)
    }

    pub fn attribute_category(&self, word: &str) -> Option<AttributeCategory> {
        self.attributes.get(&clean(word)).copied()
    }

    pub fn relation(&self, phrase: &str) -> Option<Relation> {
        let p = clean(phrase).replace('_', " ");
        self.relations
            .get(&p)
            .copied()
            .or_else(|| Relation::parse(&p.replace(' ', "_")))
    }

    /// States a given state may be swapped to.
    pub fn state_alternatives(&self, state: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (a, b) in &self.state_pairs {
            if a == state {
                out.insert(b.clone());
            }
            if b == state {
                out.insert(a.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_eighty_classes() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.classes.len(), 80);
        assert_eq!(lex.normalize_class("Sofa").as_deref(), Some("couch"));
        assert_eq!(lex.normalize_class("lamp"), None);
        assert_eq!(lex.class_group("dog"), ClassGroup::Animal);
        assert_eq!(lex.class_group("pizza"), ClassGroup::Dining);
        assert_eq!(lex.class_group("laptop"), ClassGroup::Household);
    }

    #[test]
    fn relation_phrases_consolidate() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.relation("on top of"), Some(Relation::On));
        assert_eq!(lex.relation("to the left of"), Some(Relation::Left));
        assert_eq!(lex.relation("next_to"), Some(Relation::NextTo));
        assert_eq!(lex.relation("holding"), None);
    }

    #[test]
    fn state_pairs_are_symmetric() {
        let lex = Lexicon::builtin();
        assert!(lex.state_alternatives("dry").contains("wet"));
        assert!(!lex.state_alternatives("wet").contains("rusted"));
    }
}
