//! Run configuration: one JSON document covering every pipeline step.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alignment::FitOptions;
use crate::backends::BackendConfig;
use crate::caption::LlmConfig;
use crate::error::Result;
use crate::filter::{FilterConfig, PREPARED_SIDE};
use crate::harness::AggregateOptions;
use crate::lexicon::Lexicon;
use crate::model::io::read_json;
use crate::model::WeightConfig;
use crate::query::{BalanceConfig, QueryConfig};
use crate::util::json_hash;
use crate::workflows::WorkflowConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub backends: BackendConfig,
    pub filter: FilterConfig,
    pub prepared_side: u32,
    pub queries: QueryConfig,
    pub balance: BalanceConfig,
    pub llm: LlmConfig,
    /// Directory of template overrides (`prompts/*.txt`, `instructions/*.txt`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    pub workflow: WorkflowConfig,
    /// Weight file; uniform weights when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    pub fit: FitOptions,
    pub aggregate: AggregateOptions,
    /// Lexicon override; the built-in lexicon when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            backends: BackendConfig::default(),
            filter: FilterConfig::default(),
            prepared_side: PREPARED_SIDE,
            queries: QueryConfig::default(),
            balance: BalanceConfig::default(),
            llm: LlmConfig::default(),
            templates: None,
            workflow: WorkflowConfig::default(),
            weights: None,
            fit: FitOptions::default(),
            aggregate: AggregateOptions::default(),
            lexicon: None,
        }
    }
}

impl RunConfig {
    /// Reads a config and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig = read_json(path)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.queries.validate()?;
        cfg.workflow.size_thresholds.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.templates, &mut self.weights, &mut self.lexicon]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        if let Some(s) = &mut self.llm.script {
            let mut p = PathBuf::from(&*s);
            resolve(&mut p);
            *s = p.to_string_lossy().into_owned();
        }
    }

    pub fn hash(&self) -> String {
        json_hash(self)
    }

    pub fn weights(&self) -> Result<WeightConfig> {
        match &self.weights {
            Some(p) => WeightConfig::load(p),
            None => Ok(WeightConfig::uniform()),
        }
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon {
            Some(p) => Lexicon::load(p),
            None => Ok(Lexicon::builtin().clone()),
        }
    }
}
