//! Seed means per dataset, domain and grand overalls, and the
//! answerable-vs-unanswerable gap.
//!
//! Overalls are unweighted means of dataset cells: a domain overall averages
//! its datasets, the grand overall averages all nine datasets. Missing cells
//! are listed on the row and left out of every mean.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, DomainGroup};

use super::runner::RunResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AAcc,
    RAcc,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::AAcc => "A-Acc",
            Metric::RAcc => "R-Acc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "aacc" | "abstain" => Ok(Metric::AAcc),
            "racc" | "reliable" => Ok(Metric::RAcc),
            _ => Err(Error::Input(format!("unknown metric {s:?}"))),
        }
    }
}

/// Identifies one table row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub method: String,
    pub backend: String,
    #[serde(default)]
    pub cot_variant: bool,
}

impl RowKey {
    pub fn new(method: impl Into<String>, backend: impl Into<String>) -> Self {
        RowKey {
            method: method.into(),
            backend: backend.into(),
            cot_variant: false,
        }
    }

    pub fn with_cot(mut self, cot: bool) -> Self {
        self.cot_variant = cot;
        self
    }
}

/// One metric value from one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub key: RowKey,
    pub dataset: Dataset,
    pub seed: u64,
    pub value: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn dataset_index(d: &Dataset) -> Option<usize> {
    Dataset::STANDARD.iter().position(|s| s == d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub key: RowKey,
    /// Seed means in [`Dataset::STANDARD`] order.
    pub datasets: [Option<f64>; 9],
    /// Overalls in [`DomainGroup::STANDARD`] order.
    pub domains: [Option<f64>; 3],
    pub overall: Option<f64>,
    pub missing: Vec<Dataset>,
}

impl TableRow {
    pub fn from_datasets(key: RowKey, datasets: [Option<f64>; 9]) -> Self {
        let domains = DomainGroup::STANDARD.map(|g| {
            mean(
                Dataset::STANDARD
                    .iter()
                    .zip(&datasets)
                    .filter(|(d, _)| d.domain() == g)
                    .filter_map(|(_, v)| *v),
            )
        });
        let missing = Dataset::STANDARD
            .iter()
            .zip(&datasets)
            .filter(|(_, v)| v.is_none())
            .map(|(d, _)| d.clone())
            .collect();
        TableRow {
            key,
            overall: mean(datasets.iter().filter_map(|v| *v)),
            datasets,
            domains,
            missing,
        }
    }

    pub fn dataset(&self, d: &Dataset) -> Option<f64> {
        dataset_index(d).and_then(|i| self.datasets[i])
    }

    pub fn domain(&self, g: DomainGroup) -> Option<f64> {
        DomainGroup::STANDARD
            .iter()
            .position(|&s| s == g)
            .and_then(|i| self.domains[i])
    }

    /// The 13 numeric columns: each domain's three datasets then its overall, then the grand overall.
    pub fn numeric(&self) -> [Option<f64>; 13] {
        let mut out = [None; 13];
        for g in 0..3 {
            out[4 * g..4 * g + 3].copy_from_slice(&self.datasets[3 * g..3 * g + 3]);
            out[4 * g + 3] = self.domains[g];
        }
        out[12] = self.overall;
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub metric: Metric,
    pub rows: Vec<TableRow>,
}

impl ResultTable {
    pub fn row(&self, key: &RowKey) -> Option<&TableRow> {
        self.rows.iter().find(|r| &r.key == key)
    }

    /// One row per (method, CoT variant): per-dataset means across backends.
    pub fn averaged_over_backends(&self, label: &str) -> ResultTable {
        let mut groups: Vec<((String, bool), Vec<&TableRow>)> = Vec::new();
        for row in &self.rows {
            let k = (row.key.method.clone(), row.key.cot_variant);
            match groups.iter_mut().find(|(g, _)| *g == k) {
                Some((_, rows)) => rows.push(row),
                None => groups.push((k, vec![row])),
            }
        }
        let rows = groups
            .into_iter()
            .map(|((method, cot), rows)| {
                let datasets: [Option<f64>; 9] =
                    std::array::from_fn(|i| mean(rows.iter().filter_map(|r| r.datasets[i])));
                TableRow::from_datasets(RowKey::new(method, label).with_cot(cot), datasets)
            })
            .collect();
        ResultTable {
            metric: self.metric,
            rows,
        }
    }
}

/// Seed-mean the cells into rows. Row order follows first appearance.
pub fn aggregate_cells(cells: &[ScoreCell], metric: Metric) -> Result<ResultTable> {
    let mut order: Vec<RowKey> = Vec::new();
    let mut sums: BTreeMap<(RowKey, usize), Vec<f64>> = BTreeMap::new();
    for cell in cells {
        let Some(i) = dataset_index(&cell.dataset) else {
            tracing::warn!(dataset = %cell.dataset, "dataset outside the standard table layout; skipped");
            continue;
        };
        if !order.contains(&cell.key) {
            order.push(cell.key.clone());
        }
        sums.entry((cell.key.clone(), i)).or_default().push(cell.value);
    }
    if order.is_empty() {
        return Err(Error::EmptyTable);
    }
    let rows = order
        .into_iter()
        .map(|key| {
            let datasets = std::array::from_fn(|i| {
                sums.get(&(key.clone(), i))
                    .and_then(|v| mean(v.iter().copied()))
            });
            TableRow::from_datasets(key, datasets)
        })
        .collect();
    Ok(ResultTable { metric, rows })
}

/// Aggregate run results. Failed runs and undefined metric values are left out.
pub fn aggregate(results: &[RunResult], metric: Metric) -> Result<ResultTable> {
    let cells: Vec<ScoreCell> = results
        .iter()
        .filter(|r| {
            if r.failed {
                tracing::warn!(method = %r.method, dataset = %r.dataset, seed = r.seed, "failed run excluded");
            }
            !r.failed
        })
        .filter_map(|r| {
            r.metric(metric).value().map(|value| ScoreCell {
                key: RowKey::new(r.method.display_name(), r.backend.clone()).with_cot(r.cot_variant),
                dataset: r.dataset.clone(),
                seed: r.seed,
                value,
            })
        })
        .collect();
    aggregate_cells(&cells, metric)
}

/// Mean over backends of `mean(answerable datasets) - unanswerable dataset`
/// for one method's rows in `domain`.
pub fn answerable_gap(table: &ResultTable, method: &str, cot_variant: bool, domain: DomainGroup) -> Result<f64> {
    let ([a1, a2], u) = domain
        .gap_datasets()
        .ok_or_else(|| Error::Input(format!("no gap is defined for {}", domain.label())))?;
    let rows: Vec<&TableRow> = table
        .rows
        .iter()
        .filter(|r| r.key.method == method && r.key.cot_variant == cot_variant)
        .collect();
    if rows.is_empty() {
        return Err(Error::Input(format!("no rows for method {method}")));
    }
    let mut gaps = Vec::with_capacity(rows.len());
    for row in rows {
        let cell = |d: &Dataset| {
            row.dataset(d).ok_or_else(|| {
                Error::Input(format!(
                    "gap unavailable: {} / {} lacks {}",
                    row.key.backend, method, d
                ))
            })
        };
        gaps.push((cell(&a1)? + cell(&a2)?) / 2.0 - cell(&u)?);
    }
    Ok(mean(gaps).expect("at least one row"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub method: String,
    pub cot_variant: bool,
    /// Per domain in [`DomainGroup::STANDARD`] order; `None` when unavailable.
    pub gaps: [Option<f64>; 3],
}

/// One gap row per (method, CoT variant), in table order.
pub fn gap_rows(table: &ResultTable) -> Vec<GapRow> {
    let mut keys: Vec<(String, bool)> = Vec::new();
    for r in &table.rows {
        let k = (r.key.method.clone(), r.key.cot_variant);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, cot)| GapRow {
            gaps: DomainGroup::STANDARD.map(|g| answerable_gap(table, &method, cot, g).ok()),
            method,
            cot_variant: cot,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(key: &RowKey, values: [f64; 9], seed: u64) -> Vec<ScoreCell> {
        Dataset::STANDARD
            .iter()
            .zip(values)
            .map(|(d, value)| ScoreCell {
                key: key.clone(),
                dataset: d.clone(),
                seed,
                value,
            })
            .collect()
    }

    const PHI4_PROBS: [f64; 9] = [0.477, 0.509, 0.488, 0.451, 0.666, 0.303, 0.512, 0.624, 0.332];

    #[test]
    fn phi4_probs_row() {
        let key = RowKey::new("Probs", "phi-4");
        let t = aggregate_cells(&cells(&key, PHI4_PROBS, 0), Metric::AAcc).unwrap();
        let row = &t.rows[0];
        assert!((row.domain(DomainGroup::MathKnowledge).unwrap() - 0.491).abs() < 0.0005);
        assert!((row.overall.unwrap() - 0.484).abs() < 0.0015);
        assert!(row.missing.is_empty());
    }

    #[test]
    fn seeds_are_averaged() {
        let key = RowKey::new("Probs", "m");
        let mut all = cells(&key, [0.2; 9], 0);
        all.extend(cells(&key, [0.4; 9], 1));
        let t = aggregate_cells(&all, Metric::AAcc).unwrap();
        assert!((t.rows[0].overall.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_dataset_and_missing_cells() {
        let key = RowKey::new("Reflect", "m");
        let one = ScoreCell {
            key: key.clone(),
            dataset: Dataset::Quail,
            seed: 0,
            value: 0.61,
        };
        let t = aggregate_cells(&[one], Metric::AAcc).unwrap();
        let row = &t.rows[0];
        assert_eq!(row.overall, Some(0.61));
        assert_eq!(row.domain(DomainGroup::Comprehension), Some(0.61));
        assert_eq!(row.domain(DomainGroup::MathKnowledge), None);
        assert_eq!(row.missing.len(), 8);
        assert!(answerable_gap(&t, "Reflect", false, DomainGroup::Comprehension).is_err());
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(aggregate_cells(&[], Metric::AAcc), Err(Error::EmptyTable)));
    }

    #[test]
    fn gap_of_flat_scores_is_zero() {
        let mut all = Vec::new();
        for b in ["a", "b"] {
            all.extend(cells(&RowKey::new("X", b), [0.5; 9], 0));
        }
        let t = aggregate_cells(&all, Metric::AAcc).unwrap();
        for g in DomainGroup::STANDARD {
            assert!(answerable_gap(&t, "X", false, g).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_layout() {
        let row = TableRow::from_datasets(RowKey::new("m", "b"), std::array::from_fn(|i| Some(i as f64)));
        let n = row.numeric();
        assert_eq!(n[0], Some(0.0));
        assert_eq!(n[3], Some(1.0));
        assert_eq!(n[4], Some(3.0));
        assert_eq!(n[7], Some(4.0));
        assert_eq!(n[12], Some(4.0));
    }
}
