//! The abstention confusion convention and the two evaluation metrics.
//!
//! A decision is a *positive* when it abstains. It is *correct* when the
//! abstain bit matches [`should_abstain_label`]: abstain exactly when the
//! candidate answer would be wrong (or the question has no right answer).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{AbstainDecision, ConfusionCounts, ModelAnswer, QuerySample, UNPARSED};

/// Ground-truth abstention label for one sample and candidate answer.
///
/// Reference matching is exact on the trimmed, case-folded option token.
/// The unparsed sentinel never matches.
pub fn should_abstain_label(sample: &QuerySample, candidate: &ModelAnswer) -> bool {
    if !sample.answerable {
        return true;
    }
    let parsed = candidate.parsed.trim();
    if parsed.eq_ignore_ascii_case(UNPARSED) {
        return true;
    }
    !sample
        .references
        .iter()
        .any(|r| r.trim().eq_ignore_ascii_case(parsed))
}

pub fn tally<'a, I>(pairs: I) -> ConfusionCounts
where
    I: IntoIterator<Item = (&'a AbstainDecision, &'a QuerySample)>,
{
    let mut counts = ConfusionCounts::default();
    for (decision, sample) in pairs {
        counts.record(
            decision.abstain,
            should_abstain_label(sample, &decision.candidate),
        );
    }
    counts
}

/// Tally over two parallel lists; lengths must agree.
pub fn tally_aligned(
    decisions: &[AbstainDecision],
    samples: &[QuerySample],
) -> Result<ConfusionCounts> {
    if decisions.len() != samples.len() {
        return Err(Error::Input(format!(
            "{} decisions for {} samples",
            decisions.len(),
            samples.len()
        )));
    }
    Ok(tally(decisions.iter().zip(samples)))
}

/// Abstain Accuracy: (TP + TN) / total.
pub fn abstain_accuracy<F: Scalar>(c: &ConfusionCounts) -> Result<F> {
    let total = c.total();
    if total == 0 {
        return Err(Error::UndefinedMetric("abstain accuracy"));
    }
    Ok(F::from_count(c.tp + c.tn) / F::from_count(total))
}

/// Reliable Accuracy: TN / (TN + FN), accuracy over answered questions.
///
/// Undefined when every question was abstained on.
pub fn reliable_accuracy<F: Scalar>(c: &ConfusionCounts) -> Result<F> {
    let answered = c.answered();
    if answered == 0 {
        return Err(Error::UndefinedMetric("reliable accuracy"));
    }
    Ok(F::from_count(c.tn) / F::from_count(answered))
}

/// A metric value as it appears in reports: a number, or an explicit marker.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Value(f64),
    Undefined(UndefinedMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum UndefinedMarker {
    #[serde(rename = "all-abstain")]
    AllAbstain,
    #[serde(rename = "no-samples")]
    NoSamples,
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(v),
            MetricValue::Undefined(_) => None,
        }
    }

    pub fn a_acc(c: &ConfusionCounts) -> MetricValue {
        abstain_accuracy(c)
            .map(MetricValue::Value)
            .unwrap_or(MetricValue::Undefined(UndefinedMarker::NoSamples))
    }

    pub fn r_acc(c: &ConfusionCounts) -> MetricValue {
        reliable_accuracy(c)
            .map(MetricValue::Value)
            .unwrap_or(MetricValue::Undefined(UndefinedMarker::AllAbstain))
    }
}

impl std::fmt::Display for MetricValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricValue::Value(v) => write!(f, "{v:.3}"),
            MetricValue::Undefined(UndefinedMarker::AllAbstain) => f.write_str("all-abstain"),
            MetricValue::Undefined(UndefinedMarker::NoSamples) => f.write_str("no-samples"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Dataset, Method};
    use crate::Exact;
    use proptest::prelude::*;

    fn answer(parsed: &str) -> ModelAnswer {
        ModelAnswer {
            raw_text: parsed.into(),
            parsed: parsed.into(),
            logprob_summary: None,
        }
    }

    fn answerable(reference: &str) -> QuerySample {
        QuerySample::new("s", "q", Dataset::Mmlu).with_reference(reference)
    }

    fn decision(abstain: bool, parsed: &str) -> AbstainDecision {
        AbstainDecision::new(Method::Reflect, abstain, answer(parsed))
    }

    #[test]
    fn label_examples() {
        assert!(!should_abstain_label(&answerable("B"), &answer("B")));
        assert!(should_abstain_label(
            &QuerySample::new("u", "q", Dataset::Umwp),
            &answer("A")
        ));
        assert!(should_abstain_label(&answerable("C"), &answer("Z")));
        assert!(!should_abstain_label(&answerable(" b "), &answer("B")));
        assert!(should_abstain_label(&answerable("Z"), &answer("Z")));
    }

    #[test]
    fn tally_examples() {
        let samples: Vec<_> = (0..5).map(|_| answerable("A")).collect();
        let answered: Vec<_> = (0..5).map(|_| decision(false, "A")).collect();
        assert_eq!(
            tally_aligned(&answered, &samples).unwrap(),
            ConfusionCounts::new(0, 5, 0, 0)
        );

        let unanswerable: Vec<_> = (0..4)
            .map(|_| QuerySample::new("u", "q", Dataset::Bbq))
            .collect();
        let abstained: Vec<_> = (0..4).map(|_| decision(true, "A")).collect();
        assert_eq!(
            tally_aligned(&abstained, &unanswerable).unwrap(),
            ConfusionCounts::new(4, 0, 0, 0)
        );

        // One of each cell: abstain-wrong, answer-right, abstain-right, answer-wrong.
        let samples = vec![answerable("A"), answerable("A"), answerable("A"), answerable("A")];
        let decisions = vec![
            decision(true, "B"),
            decision(false, "A"),
            decision(true, "A"),
            decision(false, "C"),
        ];
        assert_eq!(
            tally_aligned(&decisions, &samples).unwrap(),
            ConfusionCounts::new(1, 1, 1, 1)
        );
        assert!(tally_aligned(&decisions, &samples[..3]).is_err());
    }

    #[test]
    fn metric_examples() {
        let c = ConfusionCounts::new(3, 4, 2, 1);
        assert_eq!(abstain_accuracy::<Exact>(&c).unwrap(), Exact::new(7, 10));
        assert_eq!(reliable_accuracy::<Exact>(&c).unwrap(), Exact::new(4, 5));
        assert!((abstain_accuracy::<f64>(&c).unwrap() - 0.7).abs() < 1e-15);
        assert!((reliable_accuracy::<f32>(&c).unwrap() - 0.8).abs() < 1e-6);

        assert_eq!(abstain_accuracy::<f64>(&ConfusionCounts::new(1, 1, 1, 1)).unwrap(), 0.5);
        assert_eq!(abstain_accuracy::<f64>(&ConfusionCounts::new(0, 9, 0, 0)).unwrap(), 1.0);
        assert_eq!(reliable_accuracy::<f64>(&ConfusionCounts::new(0, 9, 0, 0)).unwrap(), 1.0);
        assert_eq!(reliable_accuracy::<f64>(&ConfusionCounts::new(5, 0, 0, 5)).unwrap(), 0.0);
    }

    #[test]
    fn undefined_paths() {
        assert!(matches!(
            abstain_accuracy::<f64>(&ConfusionCounts::default()),
            Err(Error::UndefinedMetric(_))
        ));
        let all_abstain = ConfusionCounts::new(3, 0, 2, 0);
        assert!(matches!(
            reliable_accuracy::<f64>(&all_abstain),
            Err(Error::UndefinedMetric(_))
        ));
        assert_eq!(MetricValue::r_acc(&all_abstain).to_string(), "all-abstain");
        assert_eq!(
            serde_json::to_string(&MetricValue::r_acc(&all_abstain)).unwrap(),
            "\"all-abstain\""
        );
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(bool, bool, u8)>> {
        // (abstain, answerable, parsed option index; 4 = "Z")
        prop::collection::vec((any::<bool>(), any::<bool>(), 0u8..5), 1..40)
    }

    fn build(pairs: &[(bool, bool, u8)]) -> (Vec<AbstainDecision>, Vec<QuerySample>) {
        let letters = ["A", "B", "C", "D", "Z"];
        pairs
            .iter()
            .map(|&(abstain, ans, idx)| {
                let s = if ans {
                    answerable("A")
                } else {
                    QuerySample::new("u", "q", Dataset::Quail)
                };
                (decision(abstain, letters[idx as usize]), s)
            })
            .unzip()
    }

    proptest! {
        #[test]
        fn metrics_stay_in_unit_interval(pairs in arb_pairs()) {
            let (d, s) = build(&pairs);
            let c = tally_aligned(&d, &s).unwrap();
            prop_assert_eq!(c.total() as usize, pairs.len());
            let a: f64 = abstain_accuracy(&c).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            if let Ok(r) = reliable_accuracy::<f64>(&c) {
                prop_assert!((0.0..=1.0).contains(&r));
            } else {
                prop_assert_eq!(c.tp + c.fp, c.total());
            }
        }

        #[test]
        fn tally_is_permutation_invariant(pairs in arb_pairs(), rot in 0usize..40) {
            let (d, s) = build(&pairs);
            let mut zipped: Vec<_> = d.into_iter().zip(s).collect();
            let before = tally(zipped.iter().map(|(d, s)| (d, s)));
            let k = rot % zipped.len();
            zipped.rotate_left(k);
            zipped.reverse();
            let after = tally(zipped.iter().map(|(d, s)| (d, s)));
            prop_assert_eq!(before, after);
        }
    }
}
