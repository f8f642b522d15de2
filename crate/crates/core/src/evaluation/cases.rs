//! Self-contained scripted cases: a sample, a method config, a scripted
//! backend and the decision it must produce. Used for offline end-to-end checks.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::backend::{SamplingParams, ScriptedBackend};
use crate::config::MethodConfig;
use crate::engine::{self, Backends, DecisionContext};
use crate::error::{Error, Result};
use crate::prompts::PromptCatalog;
use crate::types::{AbstainDecision, QuerySample};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Expectation {
    pub abstain: bool,
    #[serde(default)]
    pub parsed: Option<String>,
    /// Votes that must be present with these values.
    #[serde(default)]
    pub votes: BTreeMap<String, bool>,
    /// Substrings some flag must contain.
    #[serde(default)]
    pub flags_contain: Vec<String>,
    #[serde(default)]
    pub reconstructed_contains: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScriptedCase {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub sample: QuerySample,
    pub method: MethodConfig,
    #[serde(default)]
    pub seed: u64,
    pub expect: Expectation,
    /// Fixture in the scripted backend's format.
    pub backend: serde_json::Value,
}

impl ScriptedCase {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Every `*.json` case in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::load(p)).collect()
    }

    pub fn backend(&self) -> Result<ScriptedBackend> {
        ScriptedBackend::from_value(self.backend.clone())
    }

    /// Decide the case's sample against a fresh scripted backend.
    pub async fn run(&self) -> Result<(AbstainDecision, Arc<ScriptedBackend>)> {
        let backend = Arc::new(self.backend()?);
        let backends = Backends::scripted(backend.clone());
        let catalog = PromptCatalog::default();
        let params = SamplingParams::default();
        let ctx = DecisionContext {
            backends: &backends,
            catalog: &catalog,
            params: &params,
            seed: self.seed,
        };
        let decision = engine::decide(&ctx, &self.sample, &self.method).await?;
        Ok((decision, backend))
    }

    /// Compare a decision with the expectation; the error lists every mismatch.
    pub fn check(&self, d: &AbstainDecision) -> std::result::Result<(), String> {
        let e = &self.expect;
        let mut problems = Vec::new();
        if d.abstain != e.abstain {
            problems.push(format!("abstain {} (expected {})", d.abstain, e.abstain));
        }
        if let Some(p) = &e.parsed {
            if &d.candidate.parsed != p {
                problems.push(format!("parsed {:?} (expected {p:?})", d.candidate.parsed));
            }
        }
        for (k, v) in &e.votes {
            if d.votes.get(k) != Some(v) {
                problems.push(format!("vote {k} = {:?} (expected {v})", d.votes.get(k)));
            }
        }
        for needle in &e.flags_contain {
            if !d.flags.iter().any(|f| f.contains(needle.as_str())) {
                problems.push(format!("no flag mentions {needle:?}; flags {:?}", d.flags));
            }
        }
        if let Some(needle) = &e.reconstructed_contains {
            if !d
                .reconstructed_query
                .as_deref()
                .is_some_and(|q| q.contains(needle.as_str()))
            {
                problems.push(format!(
                    "reconstructed query {:?} lacks {needle:?}",
                    d.reconstructed_query
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(format!("{}: {}", self.name, problems.join("; ")))
        }
    }
}
