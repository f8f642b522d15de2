//! Domain types shared by every decision path.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel for an answer no parsing rule could extract.
pub const UNPARSED: &str = "Z";

/// Benchmark a sample belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Dataset {
    Mmlu,
    GsmMc,
    Umwp,
    KnowledgeCrosswords,
    HellaSwag,
    Quail,
    Misconceptions,
    Propaganda,
    Bbq,
    Custom(String),
}

impl Dataset {
    /// The nine benchmarks in table column order.
    pub const STANDARD: [Dataset; 9] = [
        Dataset::Mmlu,
        Dataset::GsmMc,
        Dataset::Umwp,
        Dataset::KnowledgeCrosswords,
        Dataset::HellaSwag,
        Dataset::Quail,
        Dataset::Misconceptions,
        Dataset::Propaganda,
        Dataset::Bbq,
    ];

    pub fn name(&self) -> &str {
        match self {
            Dataset::Mmlu => "mmlu",
            Dataset::GsmMc => "gsm_mc",
            Dataset::Umwp => "umwp",
            Dataset::KnowledgeCrosswords => "knowledge_crosswords",
            Dataset::HellaSwag => "hellaswag",
            Dataset::Quail => "quail",
            Dataset::Misconceptions => "misconceptions",
            Dataset::Propaganda => "propaganda",
            Dataset::Bbq => "bbq",
            Dataset::Custom(name) => name,
        }
    }

    /// Column header used in rendered tables.
    pub fn short_label(&self) -> &str {
        match self {
            Dataset::Mmlu => "MMLU",
            Dataset::GsmMc => "GSM",
            Dataset::Umwp => "UMWP",
            Dataset::KnowledgeCrosswords => "KC",
            Dataset::HellaSwag => "HS",
            Dataset::Quail => "Qu",
            Dataset::Misconceptions => "Mis",
            Dataset::Propaganda => "Prop",
            Dataset::Bbq => "BBQ",
            Dataset::Custom(name) => name,
        }
    }

    pub fn domain(&self) -> DomainGroup {
        match self {
            Dataset::Mmlu | Dataset::GsmMc | Dataset::Umwp => DomainGroup::MathKnowledge,
            Dataset::KnowledgeCrosswords | Dataset::HellaSwag | Dataset::Quail => {
                DomainGroup::Comprehension
            }
            Dataset::Misconceptions | Dataset::Propaganda | Dataset::Bbq => {
                DomainGroup::BiasesSafety
            }
            Dataset::Custom(_) => DomainGroup::Other,
        }
    }

    /// Whether the benchmark mixes in questions that have no correct answer.
    pub fn has_unanswerable(&self) -> bool {
        matches!(self, Dataset::Umwp | Dataset::Quail | Dataset::Bbq)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "mmlu" => Dataset::Mmlu,
            "gsm" | "gsmmc" => Dataset::GsmMc,
            "umwp" => Dataset::Umwp,
            "kc" | "knowledgecrosswords" => Dataset::KnowledgeCrosswords,
            "hs" | "hellaswag" => Dataset::HellaSwag,
            "qu" | "quail" => Dataset::Quail,
            "mis" | "misconceptions" => Dataset::Misconceptions,
            "prop" | "propaganda" => Dataset::Propaganda,
            "bbq" => Dataset::Bbq,
            "" => return Err(Error::Input("empty dataset name".into())),
            _ => Dataset::Custom(s.trim().to_string()),
        })
    }
}

impl TryFrom<String> for Dataset {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Dataset> for String {
    fn from(d: Dataset) -> String {
        d.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainGroup {
    MathKnowledge,
    Comprehension,
    BiasesSafety,
    Other,
}

impl DomainGroup {
    pub const STANDARD: [DomainGroup; 3] = [
        DomainGroup::MathKnowledge,
        DomainGroup::Comprehension,
        DomainGroup::BiasesSafety,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DomainGroup::MathKnowledge => "Math & Knowledge",
            DomainGroup::Comprehension => "Comprehension",
            DomainGroup::BiasesSafety => "Biases & Safety",
            DomainGroup::Other => "Other",
        }
    }

    /// The domain's answerable-only benchmarks and its mixed benchmark.
    pub fn gap_datasets(self) -> Option<([Dataset; 2], Dataset)> {
        match self {
            DomainGroup::MathKnowledge => Some(([Dataset::Mmlu, Dataset::GsmMc], Dataset::Umwp)),
            DomainGroup::Comprehension => Some((
                [Dataset::KnowledgeCrosswords, Dataset::HellaSwag],
                Dataset::Quail,
            )),
            DomainGroup::BiasesSafety => {
                Some(([Dataset::Misconceptions, Dataset::Propaganda], Dataset::Bbq))
            }
            DomainGroup::Other => None,
        }
    }
}

/// Why a query warrants abstention; metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Unanswerable,
    UnderspecifiedContext,
    UnderspecifiedAim,
    FalsePremise,
    Subjective,
    Answerable,
}

fn default_options() -> Vec<String> {
    ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect()
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySample {
    pub id: String,
    /// Question plus optional context, already rendered with its options.
    pub prompt: String,
    pub answerable: bool,
    #[serde(default)]
    pub references: Vec<String>,
    pub dataset: Dataset,
    #[serde(default)]
    pub domain_group: Option<DomainGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    /// Option letters the answer is parsed against.
    #[serde(default = "default_options")]
    pub options: Vec<String>,
}

impl QuerySample {
    pub fn new(id: impl Into<String>, prompt: impl Into<String>, dataset: Dataset) -> Self {
        QuerySample {
            id: id.into(),
            prompt: prompt.into(),
            answerable: false,
            references: Vec::new(),
            domain_group: Some(dataset.domain()),
            dataset,
            scenario: None,
            options: default_options(),
        }
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.answerable = true;
        self.references.push(reference.into());
        self
    }

    pub fn with_options<S: AsRef<str>>(mut self, options: &[S]) -> Self {
        self.options = options.iter().map(|o| o.as_ref().to_string()).collect();
        self
    }

    pub fn domain(&self) -> DomainGroup {
        self.domain_group.unwrap_or_else(|| self.dataset.domain())
    }

    pub fn validate(&self) -> Result<()> {
        if self.answerable && self.references.is_empty() {
            return Err(Error::Input(format!(
                "sample {} is answerable but has no references",
                self.id
            )));
        }
        if !self.answerable && self.scenario == Some(Scenario::Answerable) {
            return Err(Error::Input(format!(
                "sample {} is unanswerable but tagged with the Answerable scenario",
                self.id
            )));
        }
        Ok(())
    }
}

/// One top-k alternative at a generated position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopLogprob {
    pub token: String,
    pub logprob: f64,
}

/// The sampled token at one position and its top-k alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionLogprobs {
    pub token: String,
    pub logprob: f64,
    pub top: Vec<TopLogprob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAnswer {
    pub raw_text: String,
    /// Upper-cased option token, or [`UNPARSED`].
    pub parsed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprob_summary: Option<Vec<PositionLogprobs>>,
}

impl ModelAnswer {
    pub fn is_unparsed(&self) -> bool {
        self.parsed == UNPARSED
    }

    /// Positions covering the parsed answer token.
    ///
    /// The span is the last position whose sampled token (trimmed, case-folded)
    /// equals the parsed answer; when no single position carries it, the whole
    /// generation is the span.
    pub fn answer_span(&self) -> Option<&[PositionLogprobs]> {
        let positions = self.logprob_summary.as_deref()?;
        if !self.is_unparsed() {
            let hit = positions.iter().rposition(|p| {
                p.token
                    .trim_matches(|c: char| !c.is_ascii_alphanumeric())
                    .eq_ignore_ascii_case(&self.parsed)
            });
            if let Some(i) = hit {
                return Some(&positions[i..=i]);
            }
        }
        Some(positions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TraceInversion,
    Probs,
    #[serde(rename = "askcali")]
    AskCali,
    Reflect,
    Cooperate,
    Compete,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Probs,
        Method::AskCali,
        Method::Reflect,
        Method::Cooperate,
        Method::Compete,
        Method::TraceInversion,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::TraceInversion => "trace_inversion",
            Method::Probs => "probs",
            Method::AskCali => "askcali",
            Method::Reflect => "reflect",
            Method::Cooperate => "cooperate",
            Method::Compete => "compete",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::TraceInversion => "Trace Inversion",
            Method::Probs => "Probs",
            Method::AskCali => "AskCali",
            Method::Reflect => "Reflect",
            Method::Cooperate => "Cooperate",
            Method::Compete => "Compete",
        }
    }

    /// Methods that abstain by comparing a confidence against a calibrated threshold.
    pub fn needs_threshold(self) -> bool {
        matches!(self, Method::Probs | Method::AskCali)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "traceinversion" | "trinv" => Ok(Method::TraceInversion),
            "probs" => Ok(Method::Probs),
            "askcali" => Ok(Method::AskCali),
            "reflect" => Ok(Method::Reflect),
            "cooperate" => Ok(Method::Cooperate),
            "compete" => Ok(Method::Compete),
            _ => Err(Error::Input(format!("unknown method {s:?}"))),
        }
    }
}

/// The three query-misalignment scorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScorerKind {
    #[serde(rename = "SE")]
    Se,
    #[serde(rename = "TrInv-LLM")]
    TrInvLlm,
    #[serde(rename = "GROUND")]
    Ground,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 3] = [ScorerKind::Se, ScorerKind::TrInvLlm, ScorerKind::Ground];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Se => "SE",
            ScorerKind::TrInvLlm => "TrInv-LLM",
            ScorerKind::Ground => "GROUND",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "se" => Ok(ScorerKind::Se),
            "trinvllm" | "llm" | "judge" => Ok(ScorerKind::TrInvLlm),
            "ground" => Ok(ScorerKind::Ground),
            _ => Err(Error::Input(format!("unknown scorer {s:?}"))),
        }
    }
}

/// The engine's verdict for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstainDecision {
    pub abstain: bool,
    /// Always produced, even when abstaining.
    pub candidate: ModelAnswer,
    /// Scorer (or judge) name to abstain vote.
    #[serde(default)]
    pub votes: BTreeMap<String, bool>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
    pub method: Method,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstructed_query: Option<String>,
    /// Fallbacks taken while deciding (unparsed verdicts, dropped scorers, ...).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl AbstainDecision {
    pub fn new(method: Method, abstain: bool, candidate: ModelAnswer) -> Self {
        AbstainDecision {
            abstain,
            candidate,
            votes: BTreeMap::new(),
            scores: BTreeMap::new(),
            method,
            latency_ms: 0,
            reconstructed_query: None,
            flags: Vec::new(),
        }
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        self.flags.push(flag.into());
    }
}

/// Abstention confusion matrix: positive = abstain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn answered(&self) -> u64 {
        self.tn + self.fn_
    }

    pub fn record(&mut self, abstained: bool, should_abstain: bool) {
        match (abstained, should_abstain) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            tn: self.tn + rhs.tn,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}
