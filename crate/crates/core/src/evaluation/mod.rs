//! Dataset ingestion, seeded experiment runs, table aggregation and rendering.

pub mod aggregate;
pub mod cases;
pub mod dataset;
pub mod runner;
pub mod tables;

pub use aggregate::{aggregate, aggregate_cells, answerable_gap, gap_rows, GapRow, Metric, ResultTable, RowKey, ScoreCell, TableRow};
pub use dataset::{load_dataset, parse_jsonl, subsample, DatasetFile, DEFAULT_CAP};
pub use runner::{run_experiment, DecisionLogEntry, RunOptions, RunResult};
pub use cases::ScriptedCase;
pub use tables::{emit_tables, from_csv, gap_csv, gap_text, to_csv, to_text, TableFormat};
