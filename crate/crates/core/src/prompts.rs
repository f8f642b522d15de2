//! Versioned prompt catalog keyed by (method, stage).
//!
//! Templates use `{name}` placeholders. Only placeholders supplied at render
//! time are substituted; any other braces (such as the `{most likely guess}`
//! format hint) pass through untouched.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CATALOG_VERSION: u32 = 1;

/// Chain-of-thought elicitation instruction appended to a question.
pub const COT_INSTRUCTION: &str =
    "Provide step-by-step reasoning, with 'Step 1:', 'Step 2:', etc. followed by 'Final answer:'.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Trace Inversion: reconstruct the query from a reasoning trace.
    Reconstruct,
    /// Trace Inversion: LLM judgment of whether two prompts are equivalent.
    Judge,
    AskCaliGuess,
    AskCaliProbability,
    ReflectVerdict,
    CooperateKnowledge,
    CooperateFeedback,
    CooperateVerdict,
    CompeteKnowledge,
    CompeteReanswer,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Reconstruct,
        Stage::Judge,
        Stage::AskCaliGuess,
        Stage::AskCaliProbability,
        Stage::ReflectVerdict,
        Stage::CooperateKnowledge,
        Stage::CooperateFeedback,
        Stage::CooperateVerdict,
        Stage::CompeteKnowledge,
        Stage::CompeteReanswer,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Stage::Reconstruct => "trace_inversion.reconstruct",
            Stage::Judge => "trace_inversion.judge",
            Stage::AskCaliGuess => "askcali.guess",
            Stage::AskCaliProbability => "askcali.probability",
            Stage::ReflectVerdict => "reflect.verdict",
            Stage::CooperateKnowledge => "cooperate.knowledge",
            Stage::CooperateFeedback => "cooperate.feedback",
            Stage::CooperateVerdict => "cooperate.verdict",
            Stage::CompeteKnowledge => "compete.knowledge",
            Stage::CompeteReanswer => "compete.reanswer",
        }
    }

    fn from_key(key: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.key() == key)
    }

    pub fn default_template(self) -> &'static str {
        match self {
            Stage::Reconstruct => "You are a puzzle solver. Given the following reasoning trace, reconstruct the initial question by interpreting the steps in the reasoning trace. Do not answer the question.\nReasoning Trace:\n{trace}\n\nReconstructed query:",
            Stage::Judge => "Do the following two prompts convey the same framing, intent, and context?\n\nPrompt 1: {q1}\nPrompt 2: {q2}\n\nSelect YES or NO:\nFinal answer:",
            Stage::AskCaliGuess => "Provide your best guess for the following question. Give only the guess.\nExample: {most likely guess}.\nQuestion: {question}.",
            Stage::AskCaliProbability => "Provide the probability your guess is correct.\nProbability:",
            Stage::ReflectVerdict => "Question: {question}. Answer: {answer}.\nIs the above answer correct? A. True B. False.\nFinal answer:",
            Stage::CooperateKnowledge => "Question: {question}.\nFor the {domain} domain, generate domain-specific knowledge.\nKnowledge:",
            Stage::CooperateFeedback => "Knowledge: {knowledge}\nQuestion: {question}.\nAnswer: {answer}.\nReview the proposed answer and provide feedback on correctness.\nFeedback:",
            Stage::CooperateVerdict => "Question: {question}.\nAnswer: {answer}.\n{feedbacks}\nBased on feedback, is the proposed answer correct? A. True B. False.\nFinal answer:",
            Stage::CompeteKnowledge => "Question: {question}.\nAlternative answer: {alternative}.\nGenerate supporting knowledge.\nKnowledge:",
            Stage::CompeteReanswer => "Knowledge: {knowledge}\nQuestion: {question}.\nAnswer the question using this knowledge.\nNew answer:",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCatalog {
    pub version: u32,
    #[serde(default)]
    prompts: BTreeMap<String, String>,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        PromptCatalog {
            version: CATALOG_VERSION,
            prompts: Stage::ALL
                .iter()
                .map(|s| (s.key().to_string(), s.default_template().to_string()))
                .collect(),
        }
    }
}

impl PromptCatalog {
    /// Load a catalog file (TOML or JSON by extension). Missing stages keep
    /// their default texts; unknown stage keys are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: PromptCatalog = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        if file.version != CATALOG_VERSION {
            return Err(Error::Config(format!(
                "prompt catalog version {} is not supported (expected {CATALOG_VERSION})",
                file.version
            )));
        }
        let mut catalog = PromptCatalog::default();
        for (key, template) in file.prompts {
            if Stage::from_key(&key).is_none() {
                return Err(Error::Config(format!("unknown prompt stage {key:?}")));
            }
            catalog.prompts.insert(key, template);
        }
        Ok(catalog)
    }

    pub fn set(&mut self, stage: Stage, template: impl Into<String>) {
        self.prompts.insert(stage.key().to_string(), template.into());
    }

    pub fn template(&self, stage: Stage) -> &str {
        self.prompts
            .get(stage.key())
            .map(String::as_str)
            .unwrap_or_else(|| stage.default_template())
    }

    pub fn render(&self, stage: Stage, vars: &[(&str, &str)]) -> String {
        render(self.template(stage), vars)
    }
}

/// Single-pass substitution so that values containing `{...}` are never re-expanded.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Append the chain-of-thought instruction, at most once.
pub fn apply_cot_variant(base_prompt: &str) -> String {
    if base_prompt.trim_end().ends_with(COT_INSTRUCTION) {
        base_prompt.to_string()
    } else {
        format!("{base_prompt}\n{COT_INSTRUCTION}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruction_prompt_text() {
        let p = PromptCatalog::default().render(Stage::Reconstruct, &[("trace", "Step 1: x")]);
        assert!(p.starts_with("You are a puzzle solver."));
        assert!(p.contains("Do not answer the question.\nReasoning Trace:\nStep 1: x\n"));
        assert!(p.ends_with("Reconstructed query:"));
    }

    #[test]
    fn render_leaves_unknown_placeholders() {
        let p = PromptCatalog::default().render(Stage::AskCaliGuess, &[("question", "2+2?")]);
        assert!(p.contains("Example: {most likely guess}."));
        assert!(p.contains("Question: 2+2?."));
    }

    #[test]
    fn render_does_not_reexpand_values() {
        assert_eq!(render("{a}-{b}", &[("a", "{b}"), ("b", "x")]), "{b}-x");
        assert_eq!(render("open { brace", &[]), "open { brace");
    }

    #[test]
    fn cot_variant() {
        let once = apply_cot_variant("What is 2+2?");
        assert_eq!(once, format!("What is 2+2?\n{COT_INSTRUCTION}"));
        assert_eq!(apply_cot_variant(&once), once);
    }

    #[test]
    fn load_overrides_and_rejects_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prompts.toml");
        std::fs::write(
            &path,
            "version = 1\n[prompts]\n\"reflect.verdict\" = \"Is {answer} right?\"\n",
        )
        .unwrap();
        let c = PromptCatalog::load(&path).unwrap();
        assert_eq!(c.template(Stage::ReflectVerdict), "Is {answer} right?");
        assert_eq!(c.template(Stage::Judge), Stage::Judge.default_template());

        std::fs::write(&path, "version = 1\n[prompts]\n\"nope\" = \"x\"\n").unwrap();
        assert!(PromptCatalog::load(&path).is_err());
        std::fs::write(&path, "version = 7\n").unwrap();
        assert!(PromptCatalog::load(&path).is_err());
    }
}
