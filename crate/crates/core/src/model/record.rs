//! Per-sample evaluation records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::query::EditType;
use crate::error::{Error, Result};

/// Metric keys recorded in a [`MetricVector`].
pub mod keys {
    pub const OF_CLIP_C: &str = "of.clip_c";
    pub const OF_CLIP_R: &str = "of.clip_r";
    pub const OF_CLIP_A: &str = "of.clip_a";
    pub const OF_DET: &str = "of.det";
    pub const OF_SIZE: &str = "of.size";
    pub const BF_CLIP: &str = "bf.clip";
    pub const OC_LPIPS: &str = "oc.lpips";
    pub const OC_DINO: &str = "oc.dino";
    pub const OC_L2: &str = "oc.l2";
    pub const OC_POS: &str = "oc.pos";
    pub const OC_SIZE: &str = "oc.size";
    pub const OC_LPIPS_DEG: &str = "oc.lpips.deg";
    pub const OC_DINO_DEG: &str = "oc.dino.deg";
    pub const OC_L2_DEG: &str = "oc.l2.deg";
    pub const OC_LPIPS_EDGE: &str = "oc.lpips.edge";
    pub const OC_DINO_EDGE: &str = "oc.dino.edge";
    pub const OC_L2_EDGE: &str = "oc.l2.edge";
    pub const BC_LPIPS: &str = "bc.lpips";
    pub const BC_DINO: &str = "bc.dino";
    pub const BC_L2: &str = "bc.l2";
    pub const BC_LPIPS_DEG: &str = "bc.lpips.deg";
    pub const BC_DINO_DEG: &str = "bc.dino.deg";
    pub const BC_L2_DEG: &str = "bc.l2.deg";
    pub const BC_LPIPS_EDGE: &str = "bc.lpips.edge";
    pub const BC_DINO_EDGE: &str = "bc.dino.edge";
    pub const BC_L2_EDGE: &str = "bc.l2.edge";
}

/// Normalized atomic metric values of one sample. Every value lies in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    detection_failure: BTreeMap<String, bool>,
}

fn check_unit(key: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invariant(format!(
            "metric `{key}` = {value} outside [0, 1]"
        )));
    }
    Ok(())
}

impl MetricVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &str, value: f64) -> Result<()> {
        check_unit(key, value)?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn values(&self) -> &BTreeMap<String, f64> {
        &self.values
    }

    pub fn set_detection_failure(&mut self, role: &str, failed: bool) {
        self.detection_failure.insert(role.to_string(), failed);
    }

    pub fn detection_failed(&self, role: &str) -> bool {
        self.detection_failure.get(role).copied().unwrap_or(false)
    }

    pub fn detection_flags(&self) -> &BTreeMap<String, bool> {
        &self.detection_failure
    }

    pub fn validate(&self) -> Result<()> {
        self.values.iter().try_for_each(|(k, v)| check_unit(k, *v))
    }
}

/// The five scoring criteria plus the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    IQ,
    OF,
    BF,
    OC,
    BC,
    Total,
}

impl Criterion {
    /// Criteria combined into the total score.
    pub const PARTS: [Criterion; 5] = [
        Criterion::IQ,
        Criterion::OF,
        Criterion::BF,
        Criterion::OC,
        Criterion::BC,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::IQ => "IQ",
            Criterion::OF => "OF",
            Criterion::BF => "BF",
            Criterion::OC => "OC",
            Criterion::BC => "BC",
            Criterion::Total => "Total",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Criterion::IQ => "Image Quality",
            Criterion::OF => "Object Fidelity",
            Criterion::BF => "Background Fidelity",
            Criterion::OC => "Object Consistency",
            Criterion::BC => "Background Consistency",
            Criterion::Total => "Total Score",
        }
    }

    /// Weight key inside the total-score group.
    pub fn weight_key(&self) -> &'static str {
        match self {
            Criterion::IQ => "iq",
            Criterion::OF => "of",
            Criterion::BF => "bf",
            Criterion::OC => "oc",
            Criterion::BC => "bc",
            Criterion::Total => "total",
        }
    }

    pub fn parse(s: &str) -> Option<Criterion> {
        [
            Criterion::IQ,
            Criterion::OF,
            Criterion::BF,
            Criterion::OC,
            Criterion::BC,
            Criterion::Total,
        ]
        .into_iter()
        .find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriterionScores {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub of: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<f64>,
    /// Per-model image quality, shared by every sample of the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<f64>,
}

impl CriterionScores {
    pub fn get(&self, criterion: Criterion) -> Option<f64> {
        match criterion {
            Criterion::IQ => self.iq,
            Criterion::OF => self.of,
            Criterion::BF => self.bf,
            Criterion::OC => self.oc,
            Criterion::BC => self.bc,
            Criterion::Total => self.total,
        }
    }

    pub fn set(&mut self, criterion: Criterion, value: Option<f64>) {
        match criterion {
            Criterion::IQ => self.iq = value,
            Criterion::OF => self.of = value,
            Criterion::BF => self.bf = value,
            Criterion::OC => self.oc = value,
            Criterion::BC => self.bc = value,
            Criterion::Total => self.total = value,
        }
    }

    /// Present per-sample criteria (IQ excluded).
    pub fn present(&self) -> Vec<Criterion> {
        [Criterion::OF, Criterion::BF, Criterion::OC, Criterion::BC]
            .into_iter()
            .filter(|c| self.get(*c).is_some())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for c in [
            Criterion::IQ,
            Criterion::OF,
            Criterion::BF,
            Criterion::OC,
            Criterion::BC,
            Criterion::Total,
        ] {
            if let Some(v) = self.get(c) {
                check_unit(c.as_str(), v)?;
            }
        }
        Ok(())
    }
}

/// Feature vectors of an input/output pair, kept for set-level image quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// One evaluated (query, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub query_id: String,
    pub model_id: String,
    pub image_id: String,
    pub edit_type: EditType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_class: Option<String>,
    pub metrics: MetricVector,
    pub scores: CriterionScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeaturePair>,
}

impl SampleResult {
    pub fn validate(&self) -> Result<()> {
        self.metrics.validate()?;
        self.scores.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_vector_rejects_out_of_range() {
        let mut mv = MetricVector::new();
        assert!(mv.insert(keys::OF_DET, 1.0).is_ok());
        assert!(mv.insert(keys::OF_DET, 1.000_000_000_1).is_err());
        assert!(mv.insert(keys::OF_DET, -0.0001).is_err());
    }

    #[test]
    fn loaded_vector_is_validated() {
        let mv: MetricVector =
            serde_json::from_str(r#"{"values":{"of.det":1.5}}"#).unwrap();
        assert!(mv.validate().is_err());
    }
}
