//! Rule-based extraction of a final answer token from free-form model output.
//!
//! Rules fire in priority order; within a rule the last occurrence in the text
//! wins, since models often restate their answer at the end. A captured token
//! only counts when it belongs to the option set.

use std::sync::LazyLock;

use regex::Regex;

use crate::types::UNPARSED;

/// One extraction heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseRule {
    pub name: &'static str,
    pub pattern: &'static str,
    pub priority: u8,
}

pub const RULES: [ParseRule; 5] = [
    ParseRule {
        name: "final-answer-marker",
        pattern: "\"Final answer: X\"",
        priority: 1,
    },
    ParseRule {
        name: "answer-marker",
        pattern: "\"Answer: X\"",
        priority: 2,
    },
    ParseRule {
        name: "correct-answer-phrase",
        pattern: "\"The correct answer is X\"",
        priority: 3,
    },
    ParseRule {
        name: "isolated-option-line",
        pattern: "a line holding only X, optionally wrapped in punctuation",
        priority: 4,
    },
    ParseRule {
        name: "last-option-in-final-line",
        pattern: "the last standalone X on the final non-empty line",
        priority: 5,
    },
];

// Characters allowed between a marker and the token: spaces, markdown emphasis, brackets.
const WRAP: &str = r"[\s\*_`\(\[\{:：]*";

static FINAL_ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?i)final\s+answer(?:\s+is)?[\s\*_`]*[:：]?{WRAP}(?:option\s+)?([A-Za-z]+)\b"
    ))
    .unwrap()
});

static ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?i)\banswer[\s\*_`]*[:：]{WRAP}(?:option\s+)?([A-Za-z]+)\b"
    ))
    .unwrap()
});

static CORRECT_ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?i)the\s+correct\s+answer\s+is{WRAP}(?:option\s+)?([A-Za-z]+)\b"
    ))
    .unwrap()
});

static ISOLATED_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[\s\*_`\(\[\{]*([A-Za-z]+)[\s\*_`\)\]\}\.:,!]*$").unwrap()
});

static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z]+").unwrap());

/// Extract the answer token from `raw`, or [`UNPARSED`] when nothing matches.
///
/// Markers and options match case-insensitively and the result is reported
/// upper-case. The final-line fallback only accepts single-letter options in
/// upper case, so the article "a" is never read as option A.
pub fn parse_answer<S: AsRef<str>>(raw: &str, options: &[S]) -> String {
    parse_with_rule(raw, options)
        .map(|(token, _)| token)
        .unwrap_or_else(|| UNPARSED.to_string())
}

/// Like [`parse_answer`], also reporting which rule fired.
pub fn parse_with_rule<S: AsRef<str>>(raw: &str, options: &[S]) -> Option<(String, &'static ParseRule)> {
    let canonical = |token: &str| -> Option<String> {
        options
            .iter()
            .map(AsRef::as_ref)
            .find(|o| o.trim().eq_ignore_ascii_case(token))
            .map(|o| o.trim().to_ascii_uppercase())
    };

    for (rule, re) in [
        (&RULES[0], &*FINAL_ANSWER),
        (&RULES[1], &*ANSWER),
        (&RULES[2], &*CORRECT_ANSWER),
    ] {
        let hit = re
            .captures_iter(raw)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .find_map(|c| canonical(&c[1]));
        if let Some(token) = hit {
            return Some((token, rule));
        }
    }

    let lines: Vec<&str> = raw.lines().filter(|l| !l.trim().is_empty()).collect();
    if let Some(token) = lines
        .iter()
        .rev()
        .filter_map(|l| ISOLATED_LINE.captures(l))
        .find_map(|c| canonical(&c[1]))
    {
        return Some((token, &RULES[3]));
    }

    let last = lines.last()?;
    WORD.find_iter(last)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .map(|m| m.as_str())
        .filter(|w| w.len() > 1 || w.chars().all(|c| c.is_ascii_uppercase()))
        .find_map(canonical)
        .map(|token| (token, &RULES[4]))
}

/// Option letters `A`, `B`, ... for an `n`-way multiple-choice question.
pub fn option_letters(n: usize) -> Vec<String> {
    (b'A'..=b'Z')
        .take(n)
        .map(|b| char::from(b).to_string())
        .collect()
}
