use serde::{Deserialize, Serialize};

use super::record::Criterion;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vote {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRef {
    pub model_id: String,
    /// Path or identifier of the edited image shown to annotators.
    pub image: String,
}

/// One pairwise question answered by three annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub question_id: String,
    pub criterion: Criterion,
    pub query_id: String,
    pub sample_a: SampleRef,
    pub sample_b: SampleRef,
    pub votes: Vec<Vote>,
}

impl PreferenceRecord {
    pub fn validate(&self) -> Result<()> {
        if self.votes.len() != 3 {
            return Err(Error::invariant(format!(
                "question {}: expected exactly 3 votes, got {}",
                self.question_id,
                self.votes.len()
            )));
        }
        if self.sample_a == self.sample_b {
            return Err(Error::invariant(format!(
                "question {}: both sides show the same sample",
                self.question_id
            )));
        }
        if self.sample_a.model_id == self.sample_b.model_id {
            return Err(Error::invariant(format!(
                "question {}: both sides come from model {}",
                self.question_id, self.sample_a.model_id
            )));
        }
        if self.criterion == Criterion::IQ {
            return Err(Error::invariant(format!(
                "question {}: image quality is not judged pairwise",
                self.question_id
            )));
        }
        Ok(())
    }
}
