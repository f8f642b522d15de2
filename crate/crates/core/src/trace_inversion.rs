//! Trace Inversion: elicit a reasoning trace, reconstruct from the trace alone
//! the query the model answered, and abstain when it is misaligned with the
//! user's query.

use std::future::Future;
use std::pin::Pin;

use serde::{Deserialize, Serialize};

use crate::backend::{ChatModel, Message, SamplingParams};
use crate::engine::DecisionContext;
use crate::error::{Error, Result};
use crate::parsing::parse_answer;
use crate::prompts::{apply_cot_variant, PromptCatalog, Stage};
use crate::scorers::{self, ensemble_decide, ScorerVote};
use crate::types::{AbstainDecision, Method, ModelAnswer, QuerySample, ScorerKind};

const RECONSTRUCTION_MARKER: &str = "reconstructed query:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub sample_id: String,
    pub steps_text: String,
    /// `raw_text` is the closing region of `steps_text` that carries the answer.
    pub final_answer: ModelAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedQuery {
    pub text: String,
    pub source_trace_id: String,
}

/// The question as sent for trace elicitation: the prompt plus the CoT instruction.
pub fn trace_prompt(sample: &QuerySample) -> String {
    apply_cot_variant(&sample.prompt)
}

/// Byte offset where the final-answer region of a trace starts.
fn final_region_start(text: &str) -> usize {
    let lower = text.to_ascii_lowercase();
    if let Some(i) = lower.rfind("final answer") {
        return i;
    }
    let trimmed = text.trim_end();
    trimmed
        .rfind('\n')
        .map(|i| i + 1)
        .unwrap_or(0)
}

pub async fn generate_trace(
    model: &dyn ChatModel,
    sample: &QuerySample,
    params: &SamplingParams,
) -> Result<ReasoningTrace> {
    let completion = model
        .chat(&[Message::user(trace_prompt(sample))], params)
        .await?;
    let steps_text = completion.text;
    if steps_text.trim().is_empty() {
        return Err(Error::Degenerate(format!(
            "empty reasoning trace for sample {}",
            sample.id
        )));
    }
    let start = final_region_start(&steps_text);
    let final_answer = ModelAnswer {
        raw_text: steps_text[start..].to_string(),
        parsed: parse_answer(&steps_text, &sample.options),
        logprob_summary: completion.logprob_summary,
    };
    Ok(ReasoningTrace {
        sample_id: sample.id.clone(),
        steps_text,
        final_answer,
    })
}

/// Text after the last "Reconstructed query:" marker, or the whole completion.
pub fn extract_reconstruction(completion: &str) -> &str {
    let lower = completion.to_ascii_lowercase();
    match lower.rfind(RECONSTRUCTION_MARKER) {
        Some(i) => completion[i + RECONSTRUCTION_MARKER.len()..].trim(),
        None => completion.trim(),
    }
}

/// Ask `model` to invert the trace. The request carries the trace and nothing
/// else from the original exchange.
pub async fn reconstruct_query(
    model: &dyn ChatModel,
    catalog: &PromptCatalog,
    trace: &ReasoningTrace,
    params: &SamplingParams,
) -> Result<ReconstructedQuery> {
    if trace.steps_text.trim().is_empty() {
        return Err(Error::Degenerate("cannot reconstruct from an empty trace".into()));
    }
    let prompt = catalog.render(Stage::Reconstruct, &[("trace", &trace.steps_text)]);
    let completion = model.chat(&[Message::user(prompt)], params).await?;
    let text = extract_reconstruction(&completion.text);
    if text.is_empty() {
        return Err(Error::Degenerate(format!(
            "empty reconstruction for trace {}",
            trace.sample_id
        )));
    }
    Ok(ReconstructedQuery {
        text: text.to_string(),
        source_trace_id: trace.sample_id.clone(),
    })
}

type VoteFuture<'a> = Pin<Box<dyn Future<Output = (ScorerKind, Result<ScorerVote>)> + Send + 'a>>;

/// Run the enabled scorers concurrently. Missing backends are configuration
/// errors; scorer failures come back per scorer.
pub async fn score_alignment(
    ctx: &DecisionContext<'_>,
    enabled: &[ScorerKind],
    se_threshold: f64,
    q: &str,
    q_star: &str,
) -> Result<Vec<(ScorerKind, Result<ScorerVote>)>> {
    if enabled.is_empty() {
        return Err(Error::Config("Trace Inversion needs at least one scorer".into()));
    }
    let mut futures: Vec<VoteFuture<'_>> = Vec::with_capacity(enabled.len());
    for &kind in enabled {
        match kind {
            ScorerKind::Se => {
                let embedder = ctx.backends.embedder.as_deref().ok_or_else(|| {
                    Error::Config("SE scorer enabled but no embedding endpoint configured".into())
                })?;
                futures.push(Box::pin(async move {
                    (kind, scorers::se_vote(embedder, q, q_star, se_threshold).await)
                }));
            }
            ScorerKind::TrInvLlm => {
                let judge = ctx.backends.judge();
                futures.push(Box::pin(async move {
                    (
                        kind,
                        scorers::llm_judge_vote(judge, ctx.catalog, q, q_star, ctx.params).await,
                    )
                }));
            }
            ScorerKind::Ground => {
                let guard = ctx.backends.guard.as_deref().ok_or_else(|| {
                    Error::Config("GROUND scorer enabled but no groundedness endpoint configured".into())
                })?;
                futures.push(Box::pin(async move {
                    (kind, scorers::ground_vote(guard, q, q_star).await)
                }));
            }
        }
    }
    Ok(futures::future::join_all(futures).await)
}

/// Full pipeline for one sample.
pub async fn decide(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    enabled: &[ScorerKind],
    se_threshold: f64,
) -> Result<AbstainDecision> {
    let trace = generate_trace(ctx.backends.model.as_ref(), sample, ctx.params)
        .await
        .map_err(Error::at_stage("trace"))?;

    let reconstruction = reconstruct_query(
        ctx.backends.reconstructor(),
        ctx.catalog,
        &trace,
        ctx.params,
    )
    .await;
    let q_star = match reconstruction {
        Ok(r) => r,
        Err(Error::Degenerate(reason)) => {
            let mut d = AbstainDecision::new(Method::TraceInversion, true, trace.final_answer);
            d.flag(format!("degenerate reconstruction: {reason}"));
            return Ok(d);
        }
        Err(e) => return Err(Error::at_stage("reconstruction")(e)),
    };

    let results = score_alignment(ctx, enabled, se_threshold, &sample.prompt, &q_star.text)
        .await
        .map_err(Error::at_stage("scoring"))?;

    let mut decision = AbstainDecision::new(Method::TraceInversion, false, trace.final_answer);
    let mut votes = Vec::with_capacity(results.len());
    let mut last_error = None;
    for (kind, result) in results {
        match result {
            Ok(vote) => {
                decision.votes.insert(kind.name().into(), vote.abstain_vote);
                decision.scores.insert(kind.name().into(), vote.score);
                if let Some(note) = &vote.note {
                    decision.flag(format!("{kind}: {note}"));
                }
                votes.push(vote);
            }
            Err(e) => {
                tracing::warn!(scorer = %kind, error = %e, "scorer dropped");
                decision.flag(format!("{kind} dropped: {e}"));
                last_error = Some(e);
            }
        }
    }
    if votes.is_empty() {
        let cause = last_error.unwrap_or_else(|| Error::Config("no scorer votes".into()));
        return Err(Error::at_stage("scoring")(cause));
    }
    decision.abstain = ensemble_decide(&votes)?;
    decision.reconstructed_query = Some(q_star.text);
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruction_marker_extraction() {
        assert_eq!(
            extract_reconstruction("Reconstructed query: What is 2+2?"),
            "What is 2+2?"
        );
        assert_eq!(
            extract_reconstruction("Sure.\nRECONSTRUCTED QUERY:\n  How many apples?  "),
            "How many apples?"
        );
        assert_eq!(extract_reconstruction("  How many apples?\n"), "How many apples?");
        assert_eq!(extract_reconstruction("Reconstructed query:   "), "");
    }

    #[test]
    fn final_region_is_a_suffix() {
        let t = "Step 1: think\nStep 2: more\nFinal answer: B";
        assert_eq!(&t[final_region_start(t)..], "Final answer: B");
        let t = "Step 1: think\nso B\n";
        assert_eq!(&t[final_region_start(t)..], "so B\n");
        assert_eq!(final_region_start("B"), 0);
    }
}
