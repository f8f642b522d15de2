//! Cooperative experts: domain knowledge, feedback on the proposed answer,
//! then one final judgment over all feedback.

use crate::backend::Message;
use crate::config::MethodConfig;
use crate::engine::DecisionContext;
use crate::error::{Error, Result};
use crate::parsing::parse_answer;
use crate::prompts::Stage;
use crate::types::{AbstainDecision, Method, QuerySample, UNPARSED};

use super::reflect::{verdict_abstains, VERDICT_OPTIONS};

async fn expert_feedback(
    ctx: &DecisionContext<'_>,
    question: &str,
    answer: &str,
    domain: &str,
) -> Result<String> {
    let model = ctx.backends.model.as_ref();
    let knowledge = model
        .chat(
            &[Message::user(ctx.catalog.render(
                Stage::CooperateKnowledge,
                &[("question", question), ("domain", domain)],
            ))],
            ctx.params,
        )
        .await?;
    let feedback = model
        .chat(
            &[Message::user(ctx.catalog.render(
                Stage::CooperateFeedback,
                &[
                    ("knowledge", knowledge.text.trim()),
                    ("question", question),
                    ("answer", answer),
                ],
            ))],
            ctx.params,
        )
        .await?;
    Ok(feedback.text.trim().to_string())
}

pub async fn cooperate_decide(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
) -> Result<AbstainDecision> {
    let answer = super::initial_answer(ctx, sample, cfg, ctx.params).await?;
    let proposed = answer.raw_text.trim().to_string();

    let results = futures::future::join_all(
        cfg.expert_domains
            .iter()
            .map(|domain| expert_feedback(ctx, &sample.prompt, &proposed, domain)),
    )
    .await;

    let mut flags = Vec::new();
    let mut feedbacks = Vec::new();
    let mut last_error = None;
    for (domain, result) in cfg.expert_domains.iter().zip(results) {
        match result {
            Ok(text) => feedbacks.push((domain, text)),
            Err(e) => {
                tracing::warn!(%domain, error = %e, "expert dropped");
                flags.push(format!("expert {domain} dropped: {e}"));
                last_error = Some(e);
            }
        }
    }
    if feedbacks.is_empty() {
        let cause = last_error.unwrap_or_else(|| Error::Config("no experts".into()));
        return Err(Error::at_stage("experts")(cause));
    }

    let joined = feedbacks
        .iter()
        .enumerate()
        .map(|(i, (domain, text))| format!("Feedback {} ({domain}): {text}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = ctx.catalog.render(
        Stage::CooperateVerdict,
        &[
            ("question", &sample.prompt),
            ("answer", &proposed),
            ("feedbacks", &joined),
        ],
    );
    let reply = ctx
        .backends
        .model
        .chat(&[Message::user(prompt)], ctx.params)
        .await?;
    let verdict = parse_answer(&reply.text, &VERDICT_OPTIONS[..]);
    let abstain = verdict_abstains(&verdict);

    let mut d = AbstainDecision::new(Method::Cooperate, abstain, answer);
    d.votes.insert("judge".into(), abstain);
    d.scores.insert("experts".into(), feedbacks.len() as f64);
    d.flags = flags;
    if verdict == UNPARSED {
        d.flag("unparsed verdict");
    }
    Ok(d)
}
