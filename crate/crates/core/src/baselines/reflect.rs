//! Self-reflection: the model judges its own answer as True (A) or False (B).

use crate::backend::Message;
use crate::config::MethodConfig;
use crate::engine::DecisionContext;
use crate::error::Result;
use crate::parsing::parse_answer;
use crate::prompts::Stage;
use crate::types::{AbstainDecision, Method, QuerySample, UNPARSED};

pub(crate) const VERDICT_OPTIONS: [&str; 2] = ["A", "B"];

/// Abstain unless the verdict is A; an unreadable verdict also abstains.
pub(crate) fn verdict_abstains(verdict: &str) -> bool {
    verdict != "A"
}

pub async fn reflect_decide(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
) -> Result<AbstainDecision> {
    let answer = super::initial_answer(ctx, sample, cfg, ctx.params).await?;
    let prompt = ctx.catalog.render(
        Stage::ReflectVerdict,
        &[("question", &sample.prompt), ("answer", answer.raw_text.trim())],
    );
    let reply = ctx
        .backends
        .model
        .chat(&[Message::user(prompt)], ctx.params)
        .await?;
    let verdict = parse_answer(&reply.text, &VERDICT_OPTIONS[..]);
    let abstain = verdict_abstains(&verdict);
    let mut d = AbstainDecision::new(Method::Reflect, abstain, answer);
    d.votes.insert("reflect".into(), abstain);
    if verdict == UNPARSED {
        d.flag("unparsed verdict");
    }
    Ok(d)
}
