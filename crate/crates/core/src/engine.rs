//! Method dispatch: one entry point that turns a sample into an [`AbstainDecision`].

use std::sync::Arc;
use std::time::Instant;

use crate::backend::{ChatModel, Embedder, GroundednessGuard, SamplingParams, ScriptedBackend};
use crate::baselines;
use crate::config::MethodConfig;
use crate::error::Result;
use crate::prompts::PromptCatalog;
use crate::scorers::DEFAULT_SE_THRESHOLD;
use crate::trace_inversion;
use crate::types::{AbstainDecision, Method, QuerySample};

/// Endpoints a decision may call. Reconstruction and judging fall back to the model under test.
#[derive(Clone)]
pub struct Backends {
    pub model: Arc<dyn ChatModel>,
    pub reconstructor: Option<Arc<dyn ChatModel>>,
    pub judge: Option<Arc<dyn ChatModel>>,
    pub embedder: Option<Arc<dyn Embedder>>,
    pub guard: Option<Arc<dyn GroundednessGuard>>,
}

impl Backends {
    pub fn new(model: Arc<dyn ChatModel>) -> Self {
        Backends {
            model,
            reconstructor: None,
            judge: None,
            embedder: None,
            guard: None,
        }
    }

    /// Every endpoint kind served by one scripted fixture set.
    pub fn scripted(backend: Arc<ScriptedBackend>) -> Self {
        Backends {
            model: backend.clone(),
            reconstructor: None,
            judge: None,
            embedder: Some(backend.clone()),
            guard: Some(backend),
        }
    }

    pub fn reconstructor(&self) -> &dyn ChatModel {
        self.reconstructor.as_deref().unwrap_or(self.model.as_ref())
    }

    pub fn judge(&self) -> &dyn ChatModel {
        self.judge.as_deref().unwrap_or(self.model.as_ref())
    }
}

/// Everything a single decision borrows.
#[derive(Clone, Copy)]
pub struct DecisionContext<'a> {
    pub backends: &'a Backends,
    pub catalog: &'a PromptCatalog,
    pub params: &'a SamplingParams,
    /// Experiment seed; methods with random choices derive per-sample streams from it.
    pub seed: u64,
}

/// Run the configured method on one sample.
pub async fn decide(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
) -> Result<AbstainDecision> {
    cfg.validate()?;
    let start = Instant::now();
    let mut decision = match cfg.method {
        Method::TraceInversion => {
            let tau = cfg.se_threshold.unwrap_or(DEFAULT_SE_THRESHOLD);
            trace_inversion::decide(ctx, sample, &cfg.scorers, tau).await?
        }
        Method::Probs => {
            let threshold = cfg.require_threshold()?;
            let answer = baselines::probs::answer_with_logprobs(ctx, sample, cfg).await?;
            let p = baselines::probs::probs_confidence::<f64>(&answer, cfg.probs_top_k as usize)?;
            baselines::threshold_decide(Method::Probs, p, threshold, answer)
        }
        Method::AskCali => {
            let threshold = cfg.require_threshold()?;
            let estimate = baselines::askcali::askcali_confidence(ctx, sample, cfg).await?;
            let mut d =
                baselines::threshold_decide(Method::AskCali, estimate.p, threshold, estimate.answer);
            if estimate.unparsed {
                d.flag("unparsed probability; treated as 0");
            }
            d
        }
        Method::Reflect => baselines::reflect::reflect_decide(ctx, sample, cfg).await?,
        Method::Cooperate => baselines::cooperate::cooperate_decide(ctx, sample, cfg).await?,
        Method::Compete => baselines::compete::compete_decide(ctx, sample, cfg).await?,
    };
    decision.latency_ms = start.elapsed().as_millis() as u64;
    Ok(decision)
}
