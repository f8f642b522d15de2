//! Query-misalignment scorers and the majority-vote ensemble.
//!
//! Each scorer compares the user query `q` with the reconstructed query `q*`
//! and votes to abstain when they diverge.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::backend::{ChatModel, Embedder, GroundednessGuard, Message, SamplingParams};
use crate::error::{Error, Result};
use crate::parsing::parse_answer;
use crate::prompts::{PromptCatalog, Stage};
use crate::types::{ScorerKind, UNPARSED};

/// Fixed SE threshold when none has been calibrated.
pub const DEFAULT_SE_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerVote {
    pub scorer: ScorerKind,
    pub abstain_vote: bool,
    /// Cosine for SE, 1/0 for the judge's YES/NO, guard risk score (or 1/0) for GROUND.
    pub score: f64,
    /// Set when the scorer fell back to a conservative default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<F: Float>(a: &[F], b: &[F]) -> Result<F> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "cosine of vectors with dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (mut dot, mut na, mut nb) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na.is_zero() || nb.is_zero() {
        return Err(Error::Degenerate("cosine of a zero vector".into()));
    }
    let c = dot / (na.sqrt() * nb.sqrt());
    Ok(c.max(-F::one()).min(F::one()))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("SE threshold {tau} outside [0, 1]")));
    }
    Ok(())
}

/// SE: abstain when the embedding cosine falls strictly below `tau`.
pub async fn se_vote(embedder: &dyn Embedder, q: &str, q_star: &str, tau: f64) -> Result<ScorerVote> {
    check_tau(tau)?;
    if q.trim().is_empty() || q_star.trim().is_empty() {
        return Err(Error::Degenerate("cannot embed empty text".into()));
    }
    let (vq, vs) = futures::try_join!(embedder.embed(q), embedder.embed(q_star))?;
    let score = cosine(&vq, &vs)?;
    Ok(ScorerVote {
        scorer: ScorerKind::Se,
        abstain_vote: score < tau,
        score,
        note: None,
    })
}

/// TrInv-LLM: ask a chat model whether both prompts share framing, intent and context.
///
/// Anything but a parsed YES counts as a vote to abstain.
pub async fn llm_judge_vote(
    judge: &dyn ChatModel,
    catalog: &PromptCatalog,
    q: &str,
    q_star: &str,
    params: &SamplingParams,
) -> Result<ScorerVote> {
    let prompt = catalog.render(Stage::Judge, &[("q1", q), ("q2", q_star)]);
    let completion = judge.chat(&[Message::user(prompt)], params).await?;
    let verdict = parse_answer(&completion.text, &["YES", "NO"]);
    let same = verdict == "YES";
    Ok(ScorerVote {
        scorer: ScorerKind::TrInvLlm,
        abstain_vote: !same,
        score: if same { 1.0 } else { 0.0 },
        note: (verdict == UNPARSED).then(|| "unparsed judge verdict".to_string()),
    })
}

/// GROUND: is `q*` grounded in `q`? A risk flag is a vote to abstain.
pub async fn ground_vote(guard: &dyn GroundednessGuard, q: &str, q_star: &str) -> Result<ScorerVote> {
    let g = guard.check(q, q_star).await?;
    Ok(ScorerVote {
        scorer: ScorerKind::Ground,
        abstain_vote: g.risk,
        score: g.score.unwrap_or(if g.risk { 1.0 } else { 0.0 }),
        note: None,
    })
}

/// Strict majority of the surviving votes; an even split abstains.
pub fn ensemble_decide(votes: &[ScorerVote]) -> Result<bool> {
    if votes.is_empty() {
        return Err(Error::Config("ensemble needs at least one scorer vote".into()));
    }
    let yes = votes.iter().filter(|v| v.abstain_vote).count();
    let no = votes.len() - yes;
    Ok(yes >= no)
}
