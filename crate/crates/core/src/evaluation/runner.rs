//! One seeded run of a method over a dataset: optional threshold calibration
//! on a held-out split, concurrent decisions, tally, decision log.

use std::io::Write;
use std::path::PathBuf;

use futures::stream::{self, StreamExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::SamplingParams;
use crate::baselines::{self, calibrate_threshold, ConfidenceRecord};
use crate::config::{EvaluationSettings, MethodConfig};
use crate::engine::{self, Backends, DecisionContext};
use crate::error::{Error, Result};
use crate::metrics::{should_abstain_label, MetricValue};
use crate::prompts::PromptCatalog;
use crate::scorers;
use crate::trace_inversion;
use crate::types::{AbstainDecision, ConfusionCounts, Dataset, Method, ModelAnswer, QuerySample, ScorerKind};

use super::aggregate::Metric;
use super::dataset::DatasetFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    #[serde(default)]
    pub cot_variant: bool,
    pub dataset: Dataset,
    pub backend: String,
    pub seed: u64,
    pub counts: ConfusionCounts,
    pub a_acc: MetricValue,
    pub r_acc: MetricValue,
    /// Calibrated (or configured) threshold the run decided with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Samples that reached a decision.
    pub evaluated: usize,
    /// Samples whose decision failed.
    pub failures: usize,
    /// More than the allowed fraction of samples failed.
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_log: Option<PathBuf>,
}

impl RunResult {
    /// A result carrying only counts; both metrics derive from them.
    pub fn from_counts(method: Method, dataset: Dataset, backend: impl Into<String>, seed: u64, counts: ConfusionCounts) -> Self {
        RunResult {
            method,
            cot_variant: false,
            dataset,
            backend: backend.into(),
            seed,
            a_acc: MetricValue::a_acc(&counts),
            r_acc: MetricValue::r_acc(&counts),
            evaluated: counts.total() as usize,
            counts,
            threshold: None,
            failures: 0,
            failed: false,
            decision_log: None,
        }
    }

    pub fn metric(&self, metric: Metric) -> MetricValue {
        match metric {
            Metric::AAcc => self.a_acc,
            Metric::RAcc => self.r_acc,
        }
    }
}

/// One decision log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub should_abstain: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<AbstainDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: u64,
    pub settings: EvaluationSettings,
    /// Where to write the decision log (JSONL); nothing is written when absent.
    pub decision_log: Option<PathBuf>,
}

impl RunOptions {
    pub fn seeded(seed: u64) -> Self {
        RunOptions {
            seed,
            ..Default::default()
        }
    }
}

enum Calibration {
    None,
    Probability,
    SeCosine,
}

fn calibration_kind(cfg: &MethodConfig) -> Calibration {
    match cfg.method {
        Method::Probs | Method::AskCali if cfg.threshold.is_none() => Calibration::Probability,
        Method::TraceInversion if cfg.se_threshold.is_none() && cfg.scorers.contains(&ScorerKind::Se) => {
            Calibration::SeCosine
        }
        _ => Calibration::None,
    }
}

/// Seeded held-out split. Returns (dev, test), each in dataset order.
pub fn holdout_split(samples: &[QuerySample], fraction: f64, seed: u64) -> (Vec<&QuerySample>, Vec<&QuerySample>) {
    let n = samples.len();
    let mut n_dev = (n as f64 * fraction).round() as usize;
    if n >= 2 {
        n_dev = n_dev.clamp(1, n - 1);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_dev = vec![false; n];
    for &i in &order[..n_dev.min(n)] {
        in_dev[i] = true;
    }
    let (dev, test): (Vec<_>, Vec<_>) = samples.iter().zip(&in_dev).partition(|(_, &d)| d);
    (
        dev.into_iter().map(|(s, _)| s).collect(),
        test.into_iter().map(|(s, _)| s).collect(),
    )
}

async fn dev_confidence(
    ctx: &DecisionContext<'_>,
    sample: &QuerySample,
    cfg: &MethodConfig,
    kind: &Calibration,
) -> Result<(ModelAnswer, f64)> {
    match kind {
        Calibration::Probability if cfg.method == Method::Probs => {
            let answer = baselines::probs::answer_with_logprobs(ctx, sample, cfg).await?;
            let p = baselines::probs::probs_confidence::<f64>(&answer, cfg.probs_top_k as usize)?;
            Ok((answer, p))
        }
        Calibration::Probability => {
            let e = baselines::askcali::askcali_confidence(ctx, sample, cfg).await?;
            Ok((e.answer, e.p))
        }
        Calibration::SeCosine => {
            let embedder = ctx.backends.embedder.as_deref().ok_or_else(|| {
                Error::Config("SE scorer enabled but no embedding endpoint configured".into())
            })?;
            let trace = trace_inversion::generate_trace(ctx.backends.model.as_ref(), sample, ctx.params).await?;
            let q_star =
                trace_inversion::reconstruct_query(ctx.backends.reconstructor(), ctx.catalog, &trace, ctx.params)
                    .await?;
            let vote = scorers::se_vote(embedder, &sample.prompt, &q_star.text, 0.0).await?;
            Ok((trace.final_answer, vote.score.clamp(0.0, 1.0)))
        }
        Calibration::None => unreachable!("no calibration requested"),
    }
}

async fn calibrate(
    ctx: &DecisionContext<'_>,
    dev: &[&QuerySample],
    cfg: &MethodConfig,
    kind: &Calibration,
    concurrency: usize,
) -> Result<f64> {
    let results: Vec<_> = stream::iter(dev.iter().copied())
        .map(|s| async move { (s, dev_confidence(ctx, s, cfg, kind).await) })
        .buffered(concurrency.max(1))
        .collect()
        .await;
    let mut records = Vec::with_capacity(results.len());
    for (sample, result) in results {
        match result {
            Ok((answer, p)) => {
                let correct = !should_abstain_label(sample, &answer);
                records.push(ConfidenceRecord::new(sample.id.clone(), p, correct)?);
            }
            Err(e) => tracing::warn!(sample = %sample.id, error = %e, "calibration sample dropped"),
        }
    }
    calibrate_threshold(&records)
}

fn write_log(path: &PathBuf, entries: &[DecisionLogEntry]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Run `cfg` over `dataset` with one seed.
pub async fn run_experiment(
    cfg: &MethodConfig,
    dataset: &DatasetFile,
    backends: &Backends,
    catalog: &PromptCatalog,
    params: &SamplingParams,
    opts: &RunOptions,
) -> Result<RunResult> {
    cfg.validate()?;
    let settings = &opts.settings;
    let mut params = params.clone();
    params.seed = params.seed.or(Some(opts.seed));
    let ctx = DecisionContext {
        backends,
        catalog,
        params: &params,
        seed: opts.seed,
    };

    let mut cfg = cfg.clone();
    let kind = calibration_kind(&cfg);
    let test: Vec<&QuerySample> = match kind {
        Calibration::None => dataset.samples.iter().collect(),
        _ => {
            let (dev, test) = holdout_split(&dataset.samples, settings.holdout_fraction, opts.seed);
            let t = calibrate(&ctx, &dev, &cfg, &kind, settings.concurrency)
                .await
                .map_err(Error::at_stage("calibration"))?;
            match kind {
                Calibration::SeCosine => cfg.se_threshold = Some(t),
                _ => cfg.threshold = Some(t),
            }
            test
        }
    };

    let cfg = &cfg;
    let ctx = &ctx;
    let outcomes: Vec<_> = stream::iter(test)
        .map(|s| async move { (s, engine::decide(ctx, s, cfg).await) })
        .buffered(settings.concurrency.max(1))
        .collect()
        .await;

    let mut counts = ConfusionCounts::default();
    let mut failures = 0;
    let mut log = Vec::with_capacity(outcomes.len());
    for (sample, outcome) in outcomes {
        match outcome {
            Ok(decision) => {
                let should = should_abstain_label(sample, &decision.candidate);
                counts.record(decision.abstain, should);
                log.push(DecisionLogEntry {
                    sample_id: sample.id.clone(),
                    should_abstain: Some(should),
                    decision: Some(decision),
                    error: None,
                });
            }
            Err(e) => {
                tracing::warn!(sample = %sample.id, error = %e, "sample failed");
                failures += 1;
                log.push(DecisionLogEntry {
                    sample_id: sample.id.clone(),
                    should_abstain: None,
                    decision: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let attempted = log.len();
    let failed = attempted > 0 && failures as f64 > settings.max_failure_rate * attempted as f64;
    if failed {
        tracing::error!(failures, attempted, "run marked failed");
    }
    if let Some(path) = &opts.decision_log {
        write_log(path, &log)?;
    }

    let mut result = RunResult::from_counts(cfg.method, dataset.name.clone(), backends.model.id(), opts.seed, counts);
    result.cot_variant = cfg.cot_variant;
    result.threshold = match cfg.method {
        Method::TraceInversion if cfg.scorers.contains(&ScorerKind::Se) => cfg.se_threshold,
        _ => cfg.threshold,
    };
    result.failures = failures;
    result.failed = failed;
    result.decision_log = opts.decision_log.clone();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let samples: Vec<QuerySample> = (0..50)
            .map(|i| QuerySample::new(format!("q{i}"), "p", Dataset::Mmlu))
            .collect();
        let (dev, test) = holdout_split(&samples, 0.2, 3);
        assert_eq!(dev.len(), 10);
        assert_eq!(test.len(), 40);
        let (dev2, _) = holdout_split(&samples, 0.2, 3);
        assert_eq!(dev, dev2);
        let (dev3, _) = holdout_split(&samples, 0.2, 4);
        assert_ne!(dev, dev3);
        assert!(dev.iter().all(|d| !test.iter().any(|t| t.id == d.id)));
    }

    #[test]
    fn metrics_recompute_from_counts() {
        let r = RunResult::from_counts(Method::Reflect, Dataset::Mmlu, "m", 0, ConfusionCounts::new(3, 4, 2, 1));
        assert_eq!(r.a_acc, MetricValue::Value(0.7));
        assert_eq!(r.r_acc, MetricValue::Value(0.8));
    }
}
