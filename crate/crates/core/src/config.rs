//! Method configuration and the TOML document shared by the CLI and gateway.
//!
//! ```toml
//! prompt_catalog = "prompts.toml"   # optional
//!
//! [sampling]
//! temperature = 0.1
//!
//! [method]
//! method = "trace_inversion"
//! scorers = ["SE", "TrInv-LLM", "GROUND"]
//!
//! [endpoints.model]
//! kind = "chat"
//! base_url = "http://localhost:8000/v1"
//! model_id = "phi-4"
//! auth_env = "OPENAI_API_KEY"
//!
//! [endpoints.embedding]
//! kind = "embedding"
//! base_url = "http://localhost:8001/v1"
//! model_id = "sentence-transformers/all-MiniLM-L6-v2"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendEndpoint, EndpointKind, SamplingParams};
use crate::engine::Backends;
use crate::error::{Error, Result};
use crate::prompts::PromptCatalog;
use crate::types::{Method, ScorerKind};

fn default_k() -> usize {
    3
}

fn default_domains() -> Vec<String> {
    vec!["factual".into(), "commonsense".into(), "mathematical".into()]
}

fn default_scorers() -> Vec<ScorerKind> {
    ScorerKind::ALL.to_vec()
}

fn default_top_k() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// Append the chain-of-thought instruction to a baseline's first answering turn.
    #[serde(default)]
    pub cot_variant: bool,
    /// Compete: number of alternative answers.
    #[serde(default = "default_k")]
    pub k_alternatives: usize,
    /// Cooperate: one expert per domain.
    #[serde(default = "default_domains")]
    pub expert_domains: Vec<String>,
    /// Probs / AskCali: calibrated abstention threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Trace Inversion: enabled scorers (one for an ablation, three for the ensemble).
    #[serde(default = "default_scorers")]
    pub scorers: Vec<ScorerKind>,
    /// Trace Inversion: SE cosine threshold; calibrated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_threshold: Option<f64>,
    /// Probs: top-k logprobs averaged per position.
    #[serde(default = "default_top_k")]
    pub probs_top_k: u32,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        MethodConfig {
            method,
            cot_variant: false,
            k_alternatives: default_k(),
            expert_domains: default_domains(),
            threshold: None,
            scorers: default_scorers(),
            se_threshold: None,
            probs_top_k: default_top_k(),
        }
    }

    pub fn with_threshold(mut self, p: f64) -> Self {
        self.threshold = Some(p);
        self
    }

    pub fn with_scorers(mut self, scorers: &[ScorerKind]) -> Self {
        self.scorers = scorers.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: Option<f64>| match v {
            Some(x) if !(0.0..=1.0).contains(&x) => {
                Err(Error::Config(format!("{name} {x} outside [0, 1]")))
            }
            _ => Ok(()),
        };
        unit("threshold", self.threshold)?;
        unit("se_threshold", self.se_threshold)?;
        match self.method {
            Method::Compete if self.k_alternatives == 0 => {
                Err(Error::Config("k_alternatives must be >= 1".into()))
            }
            Method::Cooperate if self.expert_domains.is_empty() => {
                Err(Error::Config("expert_domains must not be empty".into()))
            }
            Method::Probs if self.probs_top_k == 0 => {
                Err(Error::Config("probs_top_k must be >= 1".into()))
            }
            Method::TraceInversion => {
                if self.scorers.is_empty() {
                    return Err(Error::Config("at least one scorer must be enabled".into()));
                }
                let mut seen = self.scorers.clone();
                seen.sort();
                seen.dedup();
                if seen.len() != self.scorers.len() {
                    return Err(Error::Config("duplicate scorer in scorer set".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The calibrated threshold a confidence-based method needs at inference time.
    pub fn require_threshold(&self) -> Result<f64> {
        self.threshold.ok_or_else(|| {
            Error::Config(format!(
                "{} needs a calibrated threshold before inference",
                self.method.display_name()
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointsConfig {
    /// The model under test.
    pub model: BackendEndpoint,
    /// Query reconstruction model; defaults to the model under test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstructor: Option<BackendEndpoint>,
    /// TrInv-LLM judge; defaults to the model under test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<BackendEndpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<BackendEndpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groundedness: Option<BackendEndpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSettings {
    /// Fraction of each dataset held out for threshold calibration.
    pub holdout_fraction: f64,
    /// Runs with more sample-level failures than this fraction are marked failed.
    pub max_failure_rate: f64,
    /// Samples in flight per run.
    pub concurrency: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            holdout_fraction: 0.2,
            max_failure_rate: 0.05,
            concurrency: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewaySettings {
    pub listen: String,
    /// Calibrated thresholds for confidence-based methods picked by `method_override`.
    pub thresholds: BTreeMap<Method, f64>,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            listen: "127.0.0.1:8080".into(),
            thresholds: BTreeMap::new(),
        }
    }
}

impl AppConfig {
    /// The configured method with `method` swapped in, carrying its gateway threshold.
    pub fn method_for(&self, method: Method) -> MethodConfig {
        if method == self.method.method {
            return self.method.clone();
        }
        let mut cfg = self.method.clone();
        cfg.method = method;
        cfg.threshold = self.gateway.thresholds.get(&method).copied();
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    pub endpoints: EndpointsConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_catalog: Option<PathBuf>,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
    #[serde(default)]
    pub gateway: GatewaySettings,
}

impl AppConfig {
    /// Parse a config file. Relative fixture and catalog paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.method.validate()?;
        cfg.sampling.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |e: &mut BackendEndpoint| {
            if e.kind == EndpointKind::Scripted && Path::new(&e.base_url).is_relative() {
                e.base_url = base.join(&e.base_url).to_string_lossy().into_owned();
            }
        };
        let ep = &mut self.endpoints;
        fix(&mut ep.model);
        for e in [
            &mut ep.reconstructor,
            &mut ep.judge,
            &mut ep.embedding,
            &mut ep.groundedness,
        ]
        .into_iter()
        .flatten()
        {
            fix(e);
        }
        if let Some(p) = &self.prompt_catalog {
            if p.is_relative() {
                self.prompt_catalog = Some(base.join(p));
            }
        }
    }

    pub fn catalog(&self) -> Result<PromptCatalog> {
        match &self.prompt_catalog {
            Some(p) => PromptCatalog::load(p),
            None => Ok(PromptCatalog::default()),
        }
    }

    pub fn connect(&self) -> Result<Backends> {
        let ep = &self.endpoints;
        let model = ep.model.connect_chat()?;
        Ok(Backends {
            reconstructor: ep.reconstructor.as_ref().map(|e| e.connect_chat()).transpose()?,
            judge: ep.judge.as_ref().map(|e| e.connect_chat()).transpose()?,
            embedder: ep.embedding.as_ref().map(|e| e.connect_embedder()).transpose()?,
            guard: ep.groundedness.as_ref().map(|e| e.connect_guard()).transpose()?,
            model,
        })
    }

    pub fn shared_catalog(&self) -> Result<Arc<PromptCatalog>> {
        self.catalog().map(Arc::new)
    }
}
