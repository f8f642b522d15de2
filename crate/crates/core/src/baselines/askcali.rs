//! Verbalized confidence: ask for a guess, then for the probability it is correct.

use std::sync::LazyLock;

use regex::Regex;

use crate::backend::Message;
use crate::config::MethodConfig;
use crate::engine::DecisionContext;
use crate::error::Result;
use crate::prompts::Stage;
use crate::types::{ModelAnswer, QuerySample};

use super::{question_text, to_answer};

static DECIMAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d*\.?\d+").unwrap());

const MARKER: &str = "probability:";

/// First decimal in `[0, 1]` after the last "Probability:" marker (or anywhere
/// when the marker is absent).
pub fn parse_probability(text: &str) -> Option<f64> {
    let lower = text.to_ascii_lowercase();
    let tail = match lower.rfind(MARKER) {
        Some(i) => &text[i + MARKER.len()..],
        None => text,
    };
    DECIMAL
        .find_iter(tail)
        .filter_map(|m| m.as_str().parse::<f64>().ok())
        .find(|p| (0.0..=1.0).contains(p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerbalizedEstimate {
    pub answer: ModelAnswer,
    pub p: f64,
    /// No probability could be read; `p` was set to 0.
    pub unparsed: bool,
}

pub async fn askcali_confidence(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
) -> Result<VerbalizedEstimate> {
    let model = ctx.backends.model.as_ref();
    let guess_prompt = ctx
        .catalog
        .render(Stage::AskCaliGuess, &[("question", &question_text(sample, cfg))]);
    let mut turns = vec![Message::user(guess_prompt)];
    let guess = model.chat(&turns, ctx.params).await?;
    turns.push(Message::assistant(guess.text.clone()));
    turns.push(Message::user(ctx.catalog.render(Stage::AskCaliProbability, &[])));
    let reply = model.chat(&turns, ctx.params).await?;

    let answer = to_answer(guess, &sample.options);
    Ok(match parse_probability(&reply.text) {
        Some(p) => VerbalizedEstimate {
            answer,
            p,
            unparsed: false,
        },
        None => VerbalizedEstimate {
            answer,
            p: 0.0,
            unparsed: true,
        },
    })
}
