//! CSV and aligned-text renderings of result tables.
//!
//! The main table has three key columns followed by 13 numeric columns: each
//! domain's three datasets and its overall, then the grand overall.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::{Dataset, DomainGroup, Method};

use super::aggregate::{gap_rows, GapRow, Metric, ResultTable, RowKey, TableRow};

const KEY_COLUMNS: [&str; 3] = ["method", "backend", "cot_variant"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "text" | "txt" => Ok(TableFormat::Text),
            _ => Err(Error::Input(format!("unknown table format {s:?}"))),
        }
    }
}

fn domain_short(g: DomainGroup) -> &'static str {
    match g {
        DomainGroup::MathKnowledge => "M&K",
        DomainGroup::Comprehension => "C",
        DomainGroup::BiasesSafety => "B&S",
        DomainGroup::Other => "Other",
    }
}

/// The 13 numeric column names.
pub fn numeric_columns() -> Vec<String> {
    let mut cols = Vec::with_capacity(13);
    for (g, group) in DomainGroup::STANDARD.iter().enumerate() {
        for d in &Dataset::STANDARD[3 * g..3 * g + 3] {
            cols.push(d.short_label().to_string());
        }
        cols.push(format!("{} Overall", domain_short(*group)));
    }
    cols.push("Overall".into());
    cols
}

fn ensure_rows(table: &ResultTable) -> Result<()> {
    if table.rows.is_empty() {
        Err(Error::EmptyTable)
    } else {
        Ok(())
    }
}

pub fn to_csv(table: &ResultTable) -> Result<String> {
    ensure_rows(table)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(numeric_columns());
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![
            row.key.method.clone(),
            row.key.backend.clone(),
            row.key.cot_variant.to_string(),
        ];
        rec.extend(row.numeric().iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn from_csv(text: &str, metric: Metric) -> Result<ResultTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let expected: Vec<String> = KEY_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(numeric_columns())
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Schema {
            line: 1,
            message: "unexpected table header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let schema = |message: String| Error::Schema { line, message };
        let cot = rec[2]
            .parse::<bool>()
            .map_err(|e| schema(format!("cot_variant: {e}")))?;
        let mut numeric = [None; 13];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let field = rec[3 + j].trim();
            if !field.is_empty() {
                *slot = Some(
                    field
                        .parse::<f64>()
                        .map_err(|e| schema(format!("column {}: {e}", expected[3 + j])))?,
                );
            }
        }
        let datasets: [Option<f64>; 9] = std::array::from_fn(|k| numeric[4 * (k / 3) + k % 3]);
        let missing = Dataset::STANDARD
            .iter()
            .zip(&datasets)
            .filter(|(_, v)| v.is_none())
            .map(|(d, _)| d.clone())
            .collect();
        rows.push(TableRow {
            key: RowKey::new(&rec[0], &rec[1]).with_cot(cot),
            datasets,
            domains: [numeric[3], numeric[7], numeric[11]],
            overall: numeric[12],
            missing,
        });
    }
    let table = ResultTable { metric, rows };
    ensure_rows(&table)?;
    Ok(table)
}

fn label(key: &RowKey) -> String {
    let mut s = format!("{} / {}", key.backend, key.method);
    if key.cot_variant {
        s.push_str(" + CoT prompt");
    }
    s
}

fn fmt_cell(v: Option<f64>, places: usize) -> String {
    v.map(|x| format!("{x:.places$}")).unwrap_or_else(|| "-".into())
}

fn render_grid(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule);
    for r in rows {
        line(&mut out, r);
    }
    out
}

pub fn to_text(table: &ResultTable) -> Result<String> {
    ensure_rows(table)?;
    let mut header = vec![table.metric.label().to_string()];
    header.extend(numeric_columns());
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![label(&r.key)];
            cells.extend(r.numeric().iter().map(|v| fmt_cell(*v, 3)));
            cells
        })
        .collect();
    let mut out = render_grid(&header, &rows);
    for r in table.rows.iter().filter(|r| !r.missing.is_empty()) {
        let names: Vec<&str> = r.missing.iter().map(|d| d.short_label()).collect();
        let _ = writeln!(out, "missing {}: {}", label(&r.key), names.join(", "));
    }
    Ok(out)
}

fn gap_label(g: &GapRow) -> String {
    if g.cot_variant {
        format!("{} + CoT prompt", g.method)
    } else {
        g.method.clone()
    }
}

/// Mean gap over the regular (non-CoT) rows of every method other than Trace Inversion.
pub fn baseline_average(gaps: &[GapRow]) -> [Option<f64>; 3] {
    std::array::from_fn(|i| {
        let vals: Vec<f64> = gaps
            .iter()
            .filter(|g| !g.cot_variant && g.method != Method::TraceInversion.display_name())
            .filter_map(|g| g.gaps[i])
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    })
}

pub fn gap_text(table: &ResultTable) -> Result<String> {
    ensure_rows(table)?;
    let gaps = gap_rows(table);
    let mut header = vec!["Method".to_string()];
    header.extend(DomainGroup::STANDARD.iter().map(|g| g.label().to_string()));
    let mut rows: Vec<Vec<String>> = gaps
        .iter()
        .map(|g| {
            let mut cells = vec![gap_label(g)];
            cells.extend(g.gaps.iter().map(|v| fmt_cell(*v, 4)));
            cells
        })
        .collect();
    let avg = baseline_average(&gaps);
    if avg.iter().any(Option::is_some) {
        let mut cells = vec!["Average (Baselines)".to_string()];
        cells.extend(avg.iter().map(|v| fmt_cell(*v, 4)));
        rows.push(cells);
    }
    Ok(render_grid(&header, &rows))
}

pub fn gap_csv(table: &ResultTable) -> Result<String> {
    ensure_rows(table)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string(), "cot_variant".to_string()];
    header.extend(DomainGroup::STANDARD.iter().map(|g| g.label().to_string()));
    w.write_record(&header)?;
    for g in gap_rows(table) {
        let mut rec = vec![g.method.clone(), g.cot_variant.to_string()];
        rec.extend(g.gaps.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Regular versus CoT-prompt rows per method, averaged over backends.
pub fn cot_text(table: &ResultTable) -> Result<String> {
    let avg = table.averaged_over_backends("avg");
    let mut header = vec![format!("{} (avg over backends)", table.metric.label())];
    header.extend(numeric_columns());
    let mut rows = Vec::new();
    for regular in avg.rows.iter().filter(|r| !r.key.cot_variant) {
        let cot_key = regular.key.clone().with_cot(true);
        let Some(cot) = avg.row(&cot_key) else { continue };
        for (name, row) in [("Regular", regular), ("+ CoT prompt", cot)] {
            let mut cells = vec![format!("{} / {name}", row.key.method)];
            cells.extend(row.numeric().iter().map(|v| fmt_cell(*v, 3)));
            rows.push(cells);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(render_grid(&header, &rows))
}

/// Write the table, gap table and (when CoT rows exist) the CoT comparison into `dir`.
pub fn emit_tables(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_rows(table)?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("table.csv", to_csv(table)?)?;
    put("table.txt", to_text(table)?)?;
    put("gap.csv", gap_csv(table)?)?;
    put("gap.txt", gap_text(table)?)?;
    match cot_text(table) {
        Ok(text) => put("cot.txt", text)?,
        Err(Error::EmptyTable) => {}
        Err(e) => return Err(e),
    }
    Ok(written)
}
