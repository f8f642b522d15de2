//! Token-probability confidence: the exponentiated mean, over the answer span,
//! of each position's mean top-k log-probability.

use num_traits::Float;

use crate::error::BackendError;
use crate::config::MethodConfig;
use crate::engine::DecisionContext;
use crate::error::{Error, Result};
use crate::types::{ModelAnswer, QuerySample};

fn capability(msg: impl Into<String>) -> Error {
    Error::Backend(BackendError::Capability(msg.into()))
}

/// Confidence from raw top-k rows, one row of log-probabilities per position.
pub fn confidence_from_rows<F: Float>(rows: &[Vec<F>], k: usize) -> Result<F> {
    if k == 0 {
        return Err(Error::Config("top-k must be >= 1".into()));
    }
    if rows.is_empty() {
        return Err(capability("no logprobs over the answer span"));
    }
    let kf = F::from(k).expect("k fits the scalar");
    let mut total = F::zero();
    for (i, row) in rows.iter().enumerate() {
        if row.len() < k {
            return Err(capability(format!(
                "position {i} carries {} of the {k} requested top logprobs",
                row.len()
            )));
        }
        let sum = row[..k].iter().fold(F::zero(), |acc, &lp| acc + lp);
        total = total + sum / kf;
    }
    let n = F::from(rows.len()).expect("length fits the scalar");
    Ok((total / n).exp())
}

/// Confidence of an answer from its recorded logprobs.
pub fn probs_confidence<F: Float>(answer: &ModelAnswer, k: usize) -> Result<F> {
    let span = answer
        .answer_span()
        .ok_or_else(|| capability("backend returned no logprobs"))?;
    let rows: Vec<Vec<F>> = span
        .iter()
        .map(|p| {
            p.top
                .iter()
                .map(|t| F::from(t.logprob).expect("logprob fits the scalar"))
                .collect()
        })
        .collect();
    confidence_from_rows(&rows, k)
}

/// First answering turn with logprobs requested.
pub async fn answer_with_logprobs(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
) -> Result<ModelAnswer> {
    let model = ctx.backends.model.as_ref();
    if !model.supports_logprobs() {
        return Err(capability(format!(
            "{} does not expose token logprobs",
            model.id()
        )));
    }
    let params = ctx.params.clone().with_logprobs(cfg.probs_top_k);
    let answer = super::initial_answer(ctx, sample, cfg, &params).await?;
    if answer.logprob_summary.is_none() {
        return Err(capability("backend returned no logprobs"));
    }
    Ok(answer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{PositionLogprobs, TopLogprob};
    use proptest::prelude::*;

    fn position(token: &str, top: &[f64]) -> PositionLogprobs {
        PositionLogprobs {
            token: token.into(),
            logprob: top[0],
            top: top
                .iter()
                .enumerate()
                .map(|(i, &lp)| TopLogprob {
                    token: format!("t{i}"),
                    logprob: lp,
                })
                .collect(),
        }
    }

    #[test]
    fn single_position_example() {
        let ln = |x: f64| x.ln();
        let row = vec![ln(0.6), ln(0.2), ln(0.1), ln(0.05), ln(0.05)];
        let got: f64 = confidence_from_rows(std::slice::from_ref(&row), 5).unwrap();
        let oracle = (row.iter().sum::<f64>() / 5.0).exp();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn span_is_answer_position() {
        let answer = ModelAnswer {
            raw_text: "The answer is B".into(),
            parsed: "B".into(),
            logprob_summary: Some(vec![
                position("The", &[-3.0, -3.0]),
                position(" B", &[-0.1, -2.0]),
            ]),
        };
        let got: f64 = probs_confidence(&answer, 2).unwrap();
        assert!((got - (-1.05f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn capability_errors() {
        let bare = ModelAnswer {
            raw_text: "B".into(),
            parsed: "B".into(),
            logprob_summary: None,
        };
        let err = probs_confidence::<f64>(&bare, 5).unwrap_err();
        assert!(matches!(err, Error::Backend(BackendError::Capability(_))));
        let short = vec![vec![-0.1f64, -0.2]];
        assert!(confidence_from_rows(&short, 5).is_err());
    }

    proptest! {
        #[test]
        fn raising_one_logprob_raises_confidence(
            rows in prop::collection::vec(prop::collection::vec(-20.0f64..-0.01, 5), 1..6),
            pos in 0usize..6,
            j in 0usize..5,
            bump in 0.001f64..5.0,
        ) {
            let pos = pos % rows.len();
            let base: f64 = confidence_from_rows(&rows, 5).unwrap();
            let mut up = rows.clone();
            up[pos][j] += bump;
            let raised: f64 = confidence_from_rows(&up, 5).unwrap();
            prop_assert!(raised > base);
            prop_assert!(base > 0.0 && base <= 1.0);
        }
    }
}
