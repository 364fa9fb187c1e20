//! Convex-combination weights for every score aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit sum of a weight group.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Named weight groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupId {
    /// Object fidelity: clip, det, size.
    Of,
    /// Object fidelity for additions: clip_c, clip_r, det.
    OfAddition,
    /// Object consistency: lpips, dino, l2, pos, size.
    Oc,
    /// Background consistency: lpips, dino, l2.
    Bc,
    /// Attribute-change object consistency: deg, edge, pos, size.
    OcAttribute,
    /// Attribute-change perceptual triple used inside deg and edge.
    OcAttributeInner,
    /// Style-change background consistency: deg, edge.
    BcStyle,
    /// Style-change perceptual triple used inside deg and edge.
    BcStyleInner,
    /// Total score: iq, of, bf, oc, bc.
    Total,
}

impl GroupId {
    pub const ALL: [GroupId; 9] = [
        GroupId::Of,
        GroupId::OfAddition,
        GroupId::Oc,
        GroupId::Bc,
        GroupId::OcAttribute,
        GroupId::OcAttributeInner,
        GroupId::BcStyle,
        GroupId::BcStyleInner,
        GroupId::Total,
    ];

    pub fn keys(&self) -> &'static [&'static str] {
        match self {
            GroupId::Of => &["clip", "det", "size"],
            GroupId::OfAddition => &["clip_c", "clip_r", "det"],
            GroupId::Oc => &["lpips", "dino", "l2", "pos", "size"],
            GroupId::Bc | GroupId::OcAttributeInner | GroupId::BcStyleInner => {
                &["lpips", "dino", "l2"]
            }
            GroupId::OcAttribute => &["deg", "edge", "pos", "size"],
            GroupId::BcStyle => &["deg", "edge"],
            GroupId::Total => &["iq", "of", "bf", "oc", "bc"],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            GroupId::Of => "of",
            GroupId::OfAddition => "of_addition",
            GroupId::Oc => "oc",
            GroupId::Bc => "bc",
            GroupId::OcAttribute => "oc_attribute",
            GroupId::OcAttributeInner => "oc_attribute_inner",
            GroupId::BcStyle => "bc_style",
            GroupId::BcStyleInner => "bc_style_inner",
            GroupId::Total => "total",
        }
    }

    pub fn parse(s: &str) -> Option<GroupId> {
        GroupId::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Nonnegative weights over a fixed key set, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightGroup(BTreeMap<String, f64>);

impl WeightGroup {
    pub fn new(id: GroupId, weights: &[f64]) -> Result<Self> {
        let keys = id.keys();
        if weights.len() != keys.len() {
            return Err(Error::invalid(format!(
                "group {id} takes {} weights, got {}",
                keys.len(),
                weights.len()
            )));
        }
        let group = WeightGroup(
            keys.iter()
                .zip(weights)
                .map(|(k, w)| (k.to_string(), *w))
                .collect(),
        );
        group.validate(id)?;
        Ok(group)
    }

    pub fn uniform(id: GroupId) -> Self {
        let n = id.keys().len();
        WeightGroup(
            id.keys()
                .iter()
                .map(|k| (k.to_string(), 1.0 / n as f64))
                .collect(),
        )
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    /// Weights in the group's canonical key order.
    pub fn to_vec(&self, id: GroupId) -> Vec<f64> {
        id.keys().iter().map(|k| self.0[*k]).collect()
    }

    pub fn validate(&self, id: GroupId) -> Result<()> {
        let keys = id.keys();
        if self.0.len() != keys.len() || keys.iter().any(|k| !self.0.contains_key(*k)) {
            return Err(Error::invariant(format!(
                "group {id} must have exactly the keys {keys:?}, got {:?}",
                self.0.keys().collect::<Vec<_>>()
            )));
        }
        if let Some((k, w)) = self.0.iter().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::invariant(format!("group {id}: weight {k} = {w} is negative")));
        }
        let sum: f64 = self.0.values().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invariant(format!(
                "group {id}: weights sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

/// All weight groups of the scoring pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    groups: BTreeMap<GroupId, WeightGroup>,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig::uniform()
    }
}

impl WeightConfig {
    pub fn uniform() -> Self {
        WeightConfig {
            groups: GroupId::ALL
                .into_iter()
                .map(|g| (g, WeightGroup::uniform(g)))
                .collect(),
        }
    }

    pub fn group(&self, id: GroupId) -> &WeightGroup {
        // validate() guarantees presence; constructors only produce full configs.
        &self.groups[&id]
    }

    pub fn set_group(&mut self, id: GroupId, group: WeightGroup) -> Result<()> {
        group.validate(id)?;
        self.groups.insert(id, group);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for id in GroupId::ALL {
            match self.groups.get(&id) {
                Some(g) => g.validate(id)?,
                None => {
                    return Err(Error::invariant(format!("weight group {id} is missing")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: WeightConfig = serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<weights>".into(),
            line: e.line(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: WeightConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            line: e.line(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = serde_json::to_string_pretty(self).expect("weights serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
