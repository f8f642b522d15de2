//! Comparison methods: two confidence-threshold baselines (Probs, AskCali),
//! self-reflection, and the cooperative / competitive multi-agent schemes.

pub mod askcali;
pub mod calibration;
pub mod compete;
pub mod cooperate;
pub mod probs;
pub mod reflect;

use crate::backend::{Completion, Message, SamplingParams};
use crate::config::MethodConfig;
use crate::engine::DecisionContext;
use crate::error::Result;
use crate::parsing::parse_answer;
use crate::prompts::apply_cot_variant;
use crate::types::{AbstainDecision, Method, ModelAnswer, QuerySample};

pub use calibration::{calibrate_threshold, ConfidenceRecord};

/// Question text for a baseline's first answering turn.
pub fn question_text(sample: &QuerySample, cfg: &MethodConfig) -> String {
    if cfg.cot_variant {
        apply_cot_variant(&sample.prompt)
    } else {
        sample.prompt.clone()
    }
}

pub(crate) fn to_answer(completion: Completion, options: &[String]) -> ModelAnswer {
    ModelAnswer {
        parsed: parse_answer(&completion.text, options),
        raw_text: completion.text,
        logprob_summary: completion.logprob_summary,
    }
}

/// First answering turn shared by the prompting and collaboration baselines.
pub(crate) async fn initial_answer(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
    params: &SamplingParams,
) -> Result<ModelAnswer> {
    let completion = ctx
        .backends
        .model
        .chat(&[Message::user(question_text(sample, cfg))], params)
        .await?;
    Ok(to_answer(completion, &sample.options))
}

/// Answer when the confidence reaches the threshold; abstain below it.
pub fn threshold_decide(method: Method, p: f64, threshold: f64, answer: ModelAnswer) -> AbstainDecision {
    let mut d = AbstainDecision::new(method, p < threshold, answer);
    d.scores.insert("confidence".into(), p);
    d.scores.insert("threshold".into(), threshold);
    d
}
