//! Competing alternatives: argue for other options and see whether the model
//! switches. A strict majority of switched answers means abstain.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::backend::Message;
use crate::config::MethodConfig;
use crate::engine::DecisionContext;
use crate::error::{Error, Result};
use crate::parsing::parse_answer;
use crate::prompts::Stage;
use crate::types::{AbstainDecision, Method, QuerySample};

/// Per-sample RNG stream derived from the experiment seed and the sample id.
pub fn sample_rng(seed: u64, sample_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(sample_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// `k` alternatives drawn without replacement from the options other than
/// `chosen`; when fewer exist they are reused round-robin.
pub fn pick_alternatives(
    options: &[String],
    chosen: &str,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>> {
    let mut pool: Vec<String> = options
        .iter()
        .filter(|o| !o.eq_ignore_ascii_case(chosen))
        .cloned()
        .collect();
    if pool.is_empty() {
        return Err(Error::Input(format!(
            "no alternative to {chosen} among {} options",
            options.len()
        )));
    }
    pool.shuffle(rng);
    Ok((0..k).map(|i| pool[i % pool.len()].clone()).collect())
}

/// Strict majority of changed answers.
pub fn majority_changed(changed: usize, rounds: usize) -> bool {
    2 * changed > rounds
}

async fn round(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    alternative: &str,
) -> Result<String> {
    let model = ctx.backends.model.as_ref();
    let knowledge = model
        .chat(
            &[Message::user(ctx.catalog.render(
                Stage::CompeteKnowledge,
                &[("question", &sample.prompt), ("alternative", alternative)],
            ))],
            ctx.params,
        )
        .await?;
    let reply = model
        .chat(
            &[Message::user(ctx.catalog.render(
                Stage::CompeteReanswer,
                &[("knowledge", knowledge.text.trim()), ("question", &sample.prompt)],
            ))],
            ctx.params,
        )
        .await?;
    Ok(parse_answer(&reply.text, &sample.options))
}

pub async fn compete_decide(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
) -> Result<AbstainDecision> {
    let answer = super::initial_answer(ctx, sample, cfg, ctx.params).await?;
    let mut rng = sample_rng(ctx.seed, &sample.id);
    let alternatives = pick_alternatives(&sample.options, &answer.parsed, cfg.k_alternatives, &mut rng)?;

    let results =
        futures::future::join_all(alternatives.iter().map(|alt| round(ctx, sample, alt))).await;

    let mut flags = Vec::new();
    let mut answers = Vec::new();
    let mut last_error = None;
    for (i, (alt, result)) in alternatives.iter().zip(results).enumerate() {
        match result {
            Ok(a) => answers.push((i, a)),
            Err(e) => {
                tracing::warn!(round = i + 1, alternative = %alt, error = %e, "round dropped");
                flags.push(format!("round {} ({alt}) dropped: {e}", i + 1));
                last_error = Some(e);
            }
        }
    }
    if answers.is_empty() {
        let cause = last_error.unwrap_or_else(|| Error::Config("no rounds".into()));
        return Err(Error::at_stage("rounds")(cause));
    }

    let changed = answers.iter().filter(|(_, a)| *a != answer.parsed).count();
    let abstain = majority_changed(changed, answers.len());
    let mut d = AbstainDecision::new(Method::Compete, abstain, answer);
    for (i, a) in &answers {
        d.votes.insert(format!("round{}", i + 1), *a != d.candidate.parsed);
    }
    d.scores
        .insert("changed_fraction".into(), changed as f64 / answers.len() as f64);
    d.flags = flags;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(n: usize) -> Vec<String> {
        crate::parsing::option_letters(n)
    }

    #[test]
    fn majority_rule() {
        assert!(majority_changed(2, 3));
        assert!(!majority_changed(1, 2));
        assert!(!majority_changed(1, 3));
        assert!(majority_changed(1, 1));
    }

    #[test]
    fn alternatives_exclude_choice_and_are_seeded() {
        let mut a = sample_rng(7, "q1");
        let mut b = sample_rng(7, "q1");
        let x = pick_alternatives(&opts(4), "A", 3, &mut a).unwrap();
        let y = pick_alternatives(&opts(4), "A", 3, &mut b).unwrap();
        assert_eq!(x, y);
        assert!(!x.contains(&"A".to_string()));
        let mut sorted = x.clone();
        sorted.sort();
        assert_eq!(sorted, vec!["B", "C", "D"]);
    }

    #[test]
    fn alternatives_reuse_when_scarce() {
        let mut rng = sample_rng(1, "q");
        let x = pick_alternatives(&opts(2), "A", 3, &mut rng).unwrap();
        assert_eq!(x, vec!["B", "B", "B"]);
        let x = pick_alternatives(&opts(4), "Z", 5, &mut rng).unwrap();
        assert_eq!(x.len(), 5);
        assert_eq!(x[0], x[4]);
        assert!(pick_alternatives(&opts(1), "A", 3, &mut rng).is_err());
    }
}
