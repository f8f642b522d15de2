//! Batch benchmark CLI: run methods over datasets, aggregate results into tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use abstain_core::config::AppConfig;
use abstain_core::evaluation::{
    aggregate, emit_tables, from_csv, gap_csv, gap_text, load_dataset, run_experiment, to_csv, to_text,
    Metric, ResultTable, RunOptions, RunResult, TableFormat,
};
use abstain_core::types::Method;

const RESULTS_FILE: &str = "results.jsonl";

#[derive(Parser)]
#[command(name = "eval", version, about = "Abstention benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over one dataset, once per seed.
    Run {
        /// Overrides the method named in the config.
        #[arg(long)]
        method: Option<Method>,
        /// Dataset JSONL; subsampled to at most 3500 samples.
        #[arg(long)]
        dataset: PathBuf,
        /// Config file with endpoints, method and sampling settings.
        #[arg(long)]
        backend: PathBuf,
        /// Row label for this backend; defaults to the model id.
        #[arg(long)]
        label: Option<String>,
        /// Repeat for several seeds.
        #[arg(long, default_value = "0")]
        seed: Vec<u64>,
        /// Add the chain-of-thought instruction to baseline prompts.
        #[arg(long)]
        cot: bool,
        /// Output directory; results are appended to results.jsonl, decision logs go under logs/.
        #[arg(long)]
        out: PathBuf,
    },
    /// Seed-average results into the per-dataset table.
    Aggregate {
        /// results.jsonl, a directory holding one, or a table CSV.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "text")]
        format: TableFormat,
        #[arg(long, default_value = "a-acc")]
        metric: Metric,
        /// Write every rendering (table, gap, CoT comparison) into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answerable-minus-unanswerable gap per domain.
    Gap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "text")]
        format: TableFormat,
        #[arg(long, default_value = "a-acc")]
        metric: Metric,
    },
}

fn results_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(RESULTS_FILE)
    } else {
        p.to_path_buf()
    }
}

fn read_results(path: &Path) -> anyhow::Result<Vec<RunResult>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn load_table(input: &Path, metric: Metric) -> anyhow::Result<ResultTable> {
    let path = results_path(input);
    if path.extension().is_some_and(|e| e == "csv") {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(from_csv(&text, metric)?);
    }
    Ok(aggregate(&read_results(&path)?, metric)?)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

#[allow(clippy::too_many_arguments)]
async fn run(
    method: Option<Method>,
    dataset: &Path,
    backend: &Path,
    label: Option<String>,
    seeds: &[u64],
    cot: bool,
    out: &Path,
) -> anyhow::Result<()> {
    let app = AppConfig::load(backend).with_context(|| format!("loading {}", backend.display()))?;
    let mut cfg = match method {
        Some(m) => app.method_for(m),
        None => app.method.clone(),
    };
    cfg.cot_variant |= cot;
    let label = label.unwrap_or_else(|| app.endpoints.model.model_id.clone());
    if label.is_empty() {
        bail!("no backend label: pass --label or set endpoints.model.model_id");
    }
    let data = load_dataset(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let backends = app.connect()?;
    let catalog = app.catalog()?;

    std::fs::create_dir_all(out)?;
    let mut sink = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join(RESULTS_FILE))?;
    for &seed in seeds {
        let log = out.join("logs").join(format!(
            "{}{}_{}_{}_seed{seed}.jsonl",
            cfg.method.id(),
            if cfg.cot_variant { "_cot" } else { "" },
            slug(data.name.name()),
            slug(&label)
        ));
        let opts = RunOptions {
            seed,
            settings: app.evaluation.clone(),
            decision_log: Some(log),
        };
        let mut result = run_experiment(&cfg, &data, &backends, &catalog, &app.sampling, &opts).await?;
        result.backend = label.clone();
        serde_json::to_writer(&mut sink, &result)?;
        sink.write_all(b"\n")?;
        println!(
            "{} {} {} seed={} A-Acc={} R-Acc={} evaluated={} failures={}{}",
            cfg.method.display_name(),
            data.name,
            label,
            seed,
            result.a_acc,
            result.r_acc,
            result.evaluated,
            result.failures,
            if result.failed { " FAILED" } else { "" }
        );
    }
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run {
            method,
            dataset,
            backend,
            label,
            seed,
            cot,
            out,
        } => run(method, &dataset, &backend, label, &seed, cot, &out).await?,
        Command::Aggregate {
            input,
            format,
            metric,
            out,
        } => {
            let table = load_table(&input, metric)?;
            match format {
                TableFormat::Csv => print!("{}", to_csv(&table)?),
                TableFormat::Text => print!("{}", to_text(&table)?),
            }
            if let Some(dir) = out {
                for p in emit_tables(&table, &dir)? {
                    eprintln!("wrote {}", p.display());
                }
            }
        }
        Command::Gap { input, format, metric } => {
            let table = load_table(&input, metric)?;
            match format {
                TableFormat::Csv => print!("{}", gap_csv(&table)?),
                TableFormat::Text => print!("{}", gap_text(&table)?),
            }
        }
    }
    Ok(())
}
