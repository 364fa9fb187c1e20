use std::fmt;

use serde::{Deserialize, Serialize};

use super::scene::{AttributeCategory, Relation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditType {
    Addition,
    Removal,
    Replacement,
    AttributeChange,
    Resizing,
    BackgroundChange,
    StyleChange,
}

impl EditType {
    pub const ALL: [EditType; 7] = [
        EditType::Addition,
        EditType::Removal,
        EditType::Replacement,
        EditType::AttributeChange,
        EditType::Resizing,
        EditType::BackgroundChange,
        EditType::StyleChange,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EditType::Addition => "addition",
            EditType::Removal => "removal",
            EditType::Replacement => "replacement",
            EditType::AttributeChange => "attribute_change",
            EditType::Resizing => "resizing",
            EditType::BackgroundChange => "background_change",
            EditType::StyleChange => "style_change",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            EditType::Addition => "Object Addition",
            EditType::Removal => "Object Removal",
            EditType::Replacement => "Object Replacement",
            EditType::AttributeChange => "Attribute Change",
            EditType::Resizing => "Object Resizing",
            EditType::BackgroundChange => "Background Change",
            EditType::StyleChange => "Style Change",
        }
    }

    pub fn is_object_centric(&self) -> bool {
        !matches!(self, EditType::BackgroundChange | EditType::StyleChange)
    }

    pub fn parse(s: &str) -> Option<EditType> {
        EditType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for EditType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeDirection {
    Larger,
    Smaller,
}

impl SizeDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            SizeDirection::Larger => "larger",
            SizeDirection::Smaller => "smaller",
        }
    }
}

/// Edit-type specific parameters; the tag doubles as the query's edit type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "edit_type", rename_all = "snake_case")]
pub enum EditParams {
    Addition {
        target_class: String,
        relation: Relation,
    },
    Removal,
    Replacement {
        target_class: String,
    },
    AttributeChange {
        category: AttributeCategory,
        from: String,
        to: String,
    },
    Resizing {
        direction: SizeDirection,
    },
    BackgroundChange {
        background: String,
    },
    StyleChange {
        style: String,
    },
}

impl EditParams {
    pub fn edit_type(&self) -> EditType {
        match self {
            EditParams::Addition { .. } => EditType::Addition,
            EditParams::Removal => EditType::Removal,
            EditParams::Replacement { .. } => EditType::Replacement,
            EditParams::AttributeChange { .. } => EditType::AttributeChange,
            EditParams::Resizing { .. } => EditType::Resizing,
            EditParams::BackgroundChange { .. } => EditType::BackgroundChange,
            EditParams::StyleChange { .. } => EditType::StyleChange,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionPair {
    pub original: String,
    pub edited: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Captions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<DescriptionPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub needs_manual_fix: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditQuery {
    pub query_id: String,
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_object_id: Option<String>,
    /// Class of the object at `target_object_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_class: Option<String>,
    #[serde(flatten)]
    pub params: EditParams,
    #[serde(default)]
    pub captions: Captions,
}

impl EditQuery {
    pub fn edit_type(&self) -> EditType {
        self.params.edit_type()
    }

    /// Removal is only posed to instruction-based models.
    pub fn instruction_only(&self) -> bool {
        self.edit_type() == EditType::Removal
    }

    /// Class of the object the edit is about: the new object for additions,
    /// the pre-existing one for every other object-centric edit.
    pub fn edited_class(&self) -> Option<&str> {
        match &self.params {
            EditParams::Addition { target_class, .. } => Some(target_class),
            _ => self.object_class.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let object_centric = self.edit_type().is_object_centric();
        if object_centric && (self.target_object_id.is_none() || self.object_class.is_none()) {
            return Err(Error::invariant(format!(
                "query {}: {} requires a target object",
                self.query_id,
                self.edit_type()
            )));
        }
        if !object_centric && self.target_object_id.is_some() {
            return Err(Error::invariant(format!(
                "query {}: {} must not name a target object",
                self.query_id,
                self.edit_type()
            )));
        }
        if self.instruction_only() && self.captions.description.is_some() {
            return Err(Error::invariant(format!(
                "query {}: removal queries carry no description pair",
                self.query_id
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_flatten_into_query_json() {
        let q = EditQuery {
            query_id: "q1".into(),
            image_id: "img".into(),
            target_object_id: Some("o1".into()),
            object_class: Some("bench".into()),
            params: EditParams::AttributeChange {
                category: AttributeCategory::Color,
                from: "brown".into(),
                to: "yellow".into(),
            },
            captions: Captions::default(),
        };
        let json = serde_json::to_value(&q).unwrap();
        assert_eq!(json["edit_type"], "attribute_change");
        assert_eq!(json["category"], "color");
        let back: EditQuery = serde_json::from_value(json).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn removal_with_description_is_invalid() {
        let mut q = EditQuery {
            query_id: "q".into(),
            image_id: "i".into(),
            target_object_id: Some("o".into()),
            object_class: Some("dog".into()),
            params: EditParams::Removal,
            captions: Captions::default(),
        };
        assert!(q.validate().is_ok());
        q.captions.description = Some(DescriptionPair {
            original: "a dog".into(),
            edited: "no dog".into(),
        });
        assert!(q.validate().is_err());
    }
}
