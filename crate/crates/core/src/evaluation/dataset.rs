//! JSONL dataset files: one [`QuerySample`] object per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, DomainGroup, QuerySample};

/// Per-dataset sample cap.
pub const DEFAULT_CAP: usize = 3500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub name: Dataset,
    pub domain_group: DomainGroup,
    pub samples: Vec<QuerySample>,
}

impl DatasetFile {
    /// Wrap samples, taking the name from the first one. All samples must share a dataset.
    pub fn new(samples: Vec<QuerySample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Input("dataset has no samples".into()))?;
        let name = first.dataset.clone();
        if let Some(other) = samples.iter().find(|s| s.dataset != name) {
            return Err(Error::Input(format!(
                "sample {} belongs to {} but the file is {}",
                other.id, other.dataset, name
            )));
        }
        Ok(DatasetFile {
            domain_group: first.domain(),
            name,
            samples,
        })
    }
}

/// Parse JSONL text. Blank lines are skipped; errors carry 1-based line numbers.
pub fn parse_jsonl(text: &str) -> Result<Vec<QuerySample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema {
            line: i + 1,
            message,
        };
        let sample: QuerySample = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        sample.validate().map_err(|e| schema(e.to_string()))?;
        out.push(sample);
    }
    Ok(out)
}

/// Read, validate and cap a dataset file.
pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let text = std::fs::read_to_string(path)?;
    let samples = parse_jsonl(&text)?;
    DatasetFile::new(subsample(&samples, DEFAULT_CAP))
}

/// Indices kept when capping `n` items at `cap`: `floor(i * n / cap)`.
pub fn subsample_indices(n: usize, cap: usize) -> Vec<usize> {
    assert!(cap > 0, "subsample cap must be positive");
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|i| (i as u128 * n as u128 / cap as u128) as usize).collect()
}

/// Uniform, order-preserving, seed-independent subsample.
pub fn subsample<T: Clone>(items: &[T], cap: usize) -> Vec<T> {
    subsample_indices(items.len(), cap)
        .into_iter()
        .map(|i| items[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(id: usize, answerable: bool, refs: &str) -> String {
        format!(
            r#"{{"id":"q{id}","prompt":"Q{id}? A. x B. y","answerable":{answerable},"references":{refs},"dataset":"MMLU"}}"#
        )
    }

    #[test]
    fn parses_valid_lines() {
        let text = [line(0, true, r#"["A"]"#), line(1, false, "[]"), String::new(), line(2, true, r#"["B"]"#)]
            .join("\n");
        let samples = parse_jsonl(&text).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[1].options, vec!["A", "B", "C", "D"]);
        let file = DatasetFile::new(samples).unwrap();
        assert_eq!(file.domain_group, DomainGroup::MathKnowledge);
    }

    #[test]
    fn answerable_without_references_is_rejected_at_its_line() {
        let text = [line(0, true, r#"["A"]"#), line(1, true, "[]")].join("\n");
        match parse_jsonl(&text) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_answerable_flag_is_rejected() {
        let text = r#"{"id":"q","prompt":"p","dataset":"MMLU"}"#;
        assert!(matches!(parse_jsonl(text), Err(Error::Schema { line: 1, .. })));
    }

    #[test]
    fn load_caps_large_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.jsonl");
        let text: Vec<String> = (0..5000).map(|i| line(i, true, r#"["A"]"#)).collect();
        std::fs::write(&path, text.join("\n")).unwrap();
        let file = load_dataset(&path).unwrap();
        assert_eq!(file.samples.len(), 3500);
        assert_eq!(file.samples[1].id, "q1");
        assert_eq!(file.samples[2].id, "q2");
        assert_eq!(file.samples[3].id, "q4");
    }

    #[test]
    fn index_formula() {
        assert_eq!(subsample_indices(10, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(subsample_indices(5, 5), vec![0, 1, 2, 3, 4]);
        let v: Vec<u32> = (0..7).collect();
        assert_eq!(subsample(&v, 7), v);
    }

    proptest! {
        #[test]
        fn subsample_is_idempotent_and_ordered(n in 0usize..400, cap in 1usize..200) {
            let items: Vec<usize> = (0..n).collect();
            let once = subsample(&items, cap);
            prop_assert_eq!(once.len(), n.min(cap));
            prop_assert!(once.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(subsample(&once, cap), once.clone());
            prop_assert_eq!(subsample(&items, cap), once);
        }
    }
}
