//! The `dqi` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dqi_core::dimensions::{quality_report, QualityConfig, QualityReport};
use dqi_core::drift::{drift_report, DriftReport};
use dqi_core::eval::{cross_validate, EvalConfig, EvalReport};
use dqi_core::pipeline::{replay, Script, SCRIPT_VERSION};
use dqi_core::procedures::{run_spec, ProcedureSpec, ProcedureSummary};
use dqi_core::tabular::{ingest_csv, Dataset, IngestOptions, SnapshotId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ErrorClass};
use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "dqi", version, about = "Data-quality scoring, cleaning and drift checks for tabular ML datasets")]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a CSV on every quality dimension.
    Report {
        csv: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Quality configuration (JSON text or a path to a JSON file).
        #[arg(long)]
        config: Option<String>,
    },
    /// Apply one procedure and write the result.
    Apply {
        csv: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Procedure spec (JSON text or a path to a JSON file).
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a script of procedures and write the final snapshot.
    Pipeline {
        csv: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// A script exported by a session, or a bare array of specs (JSON
        /// text or a path to a JSON file).
        #[arg(long)]
        script: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate a model on a CSV.
    Evaluate {
        csv: PathBuf,
        #[arg(long)]
        label: String,
        /// Ingest options (JSON text or a path to a JSON file).
        #[arg(long)]
        ingest: Option<String>,
        /// Evaluation configuration (JSON text or a path to a JSON file).
        #[arg(long)]
        config: Option<String>,
    },
    /// Two-sample drift tests between two CSVs.
    Drift {
        before: PathBuf,
        after: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "DQI_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        /// Directory where sessions are saved and reloaded from.
        #[arg(long, env = "DQI_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        max_upload_mb: usize,
    },
    /// Print the OpenAPI document of the service.
    Schema,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Label column of the input.
    #[arg(long)]
    pub label: Option<String>,
    /// Ingest options (JSON text or a path to a JSON file).
    #[arg(long)]
    pub ingest: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApplyOutput {
    pub result: ProcedureSummary,
    pub drift: Option<DriftReport>,
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub root_snapshot: SnapshotId,
    /// Output snapshot of every step.
    pub snapshots: Vec<SnapshotId>,
    pub final_snapshot: SnapshotId,
    pub rows: usize,
    pub columns: usize,
    pub out: PathBuf,
}

/// Entry point of the binary: exit 0 on success, 1 on usage or validation
/// errors, 2 on internal errors.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let json = cli.json;
    let outcome = std::panic::catch_unwind(move || run(cli)).unwrap_or_else(|_| Err(ApiError::internal("unexpected failure")));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                print_out(&serde_json::to_string_pretty(&e).expect("error serializes"));
            } else {
                eprintln!("error: {}", e.message);
            }
            ExitCode::from(if e.class() == ErrorClass::Internal { 2 } else { 1 })
        }
    }
}

/// Parses an argument that is either inline JSON or a path to a JSON file.
fn json_arg<T: DeserializeOwned>(what: &str, arg: &str) -> Result<T, ApiError> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| ApiError::new("unreadable_input", format!("cannot read {what} file {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| ApiError::new("invalid_argument", format!("invalid {what}: {e}")))
}

fn read_input(path: &Path) -> Result<Vec<u8>, ApiError> {
    std::fs::read(path).map_err(|e| ApiError::new("unreadable_input", format!("cannot read {}: {e}", path.display())))
}

fn ingest_options(input: &InputArgs) -> Result<IngestOptions, ApiError> {
    let mut opts = match &input.ingest {
        Some(arg) => json_arg("ingest options", arg)?,
        None => IngestOptions::default(),
    };
    if let Some(label) = &input.label {
        opts.label_column = Some(label.clone());
    }
    Ok(opts)
}

fn load(path: &Path, opts: &IngestOptions) -> Result<Dataset, ApiError> {
    let ingested = ingest_csv(&read_input(path)?, opts)?;
    for w in &ingested.warnings {
        eprintln!("warning: row {} column `{}`: {}", w.row, w.column, w.message);
    }
    Ok(ingested.dataset)
}

fn write_output(path: &Path, ds: &Dataset) -> Result<(), ApiError> {
    std::fs::write(path, ds.to_csv()).map_err(|e| ApiError::new("io", format!("cannot write {}: {e}", path.display())))
}

/// Writes to stdout; a reader that went away early (`dqi schema | head`) is
/// not an error.
fn print_out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{text}").and_then(|_| stdout.flush());
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce(&T) -> String) {
    if json {
        print_out(&serde_json::to_string_pretty(value).expect("output serializes"));
    } else {
        print_out(&human(value));
    }
}

fn score(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

pub fn run(cli: Cli) -> Result<(), ApiError> {
    let json = cli.json;
    match cli.command {
        Command::Report { csv, input, config } => {
            let ds = load(&csv, &ingest_options(&input)?)?;
            let cfg: QualityConfig = match config {
                Some(c) => json_arg("quality config", &c)?,
                None => QualityConfig::default(),
            };
            let rep = quality_report(&ds, &cfg)?;
            emit(json, &rep, human_report);
        }
        Command::Apply { csv, input, spec, out } => {
            let ds = load(&csv, &ingest_options(&input)?)?;
            let spec: ProcedureSpec = json_arg("spec", &spec)?;
            let result = run_spec(&ds, &spec)?;
            let drift = drift_report(&ds, &result.output, 0.05).ok();
            write_output(&out, &result.output)?;
            let output = ApplyOutput {
                result: result.summary(),
                drift,
                out,
            };
            emit(json, &output, |o| {
                format!(
                    "{}/{}: {} cells changed, {} rows and {} columns removed\nsnapshot {} written to {}",
                    o.result.spec.family,
                    o.result.spec.method,
                    o.result.cells_changed,
                    o.result.rows_removed,
                    o.result.cols_removed,
                    o.result.output_snapshot,
                    o.out.display()
                )
            });
        }
        Command::Pipeline { csv, input, script, out } => {
            let value: serde_json::Value = json_arg("script", &script)?;
            let mut script: Script = if value.is_array() {
                Script {
                    version: SCRIPT_VERSION,
                    ingest: IngestOptions::default(),
                    root_snapshot: None,
                    steps: serde_json::from_value(value).map_err(|e| ApiError::new("invalid_argument", format!("invalid script: {e}")))?,
                }
            } else {
                serde_json::from_value(value).map_err(|e| ApiError::new("invalid_argument", format!("invalid script: {e}")))?
            };
            if let Some(arg) = &input.ingest {
                script.ingest = json_arg("ingest options", arg)?;
            }
            if let Some(label) = &input.label {
                script.ingest.label_column = Some(label.clone());
            }
            let rep = replay(&read_input(&csv)?, &script)?;
            write_output(&out, &rep.dataset)?;
            let output = PipelineOutput {
                root_snapshot: rep.snapshots[0].clone(),
                snapshots: rep.snapshots[1..].to_vec(),
                final_snapshot: rep.dataset.snapshot_id().clone(),
                rows: rep.dataset.row_count(),
                columns: rep.dataset.column_count(),
                out,
            };
            emit(json, &output, |o| {
                format!(
                    "replayed {} steps: {} rows x {} columns\nsnapshot {} written to {}",
                    o.snapshots.len(),
                    o.rows,
                    o.columns,
                    o.final_snapshot,
                    o.out.display()
                )
            });
        }
        Command::Evaluate { csv, label, ingest, config } => {
            let input = InputArgs { label: Some(label), ingest };
            let ds = load(&csv, &ingest_options(&input)?)?;
            let cfg: EvalConfig = match config {
                Some(c) => json_arg("evaluation config", &c)?,
                None => EvalConfig::for_dataset(&ds),
            };
            let rep = cross_validate(&ds, &cfg)?;
            emit(json, &rep, human_eval);
        }
        Command::Drift { before, after, input, alpha } => {
            let opts = ingest_options(&input)?;
            let rep = drift_report(&load(&before, &opts)?, &load(&after, &opts)?, alpha)?;
            emit(json, &rep, human_drift);
        }
        Command::Serve {
            bind,
            data_dir,
            max_upload_mb,
        } => {
            let _ = tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
                .with_writer(std::io::stderr)
                .try_init();
            let state = Arc::new(AppState::open(data_dir, max_upload_mb.saturating_mul(1024 * 1024))?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::internal(format!("cannot start runtime: {e}")))?;
            rt.block_on(server::serve(&bind, state, |addr| {
                eprintln!("listening on http://{addr}");
                tracing::info!("no authentication; keep the service on a trusted interface");
            }))
            .map_err(|e| ApiError::new("io", format!("cannot serve on {bind}: {e}")))?;
        }
        Command::Schema => {
            print_out(&serde_json::to_string_pretty(&crate::openapi::document()).expect("document serializes"));
        }
    }
    Ok(())
}

fn human_report(rep: &QualityReport) -> String {
    let d = &rep.dataset;
    let mut out = format!(
        "snapshot {}\noverall {}  completeness {}  uniqueness {}  validity {}  consistency {}  outlier-freedom {}\n",
        rep.snapshot_id,
        score(Some(d.overall)),
        score(d.completeness),
        score(d.uniqueness),
        score(d.validity),
        score(d.consistency),
        score(d.outlier_freedom)
    );
    for (name, col) in &rep.per_column {
        out.push_str(&format!(
            "  {name}: overall {}  completeness {}  validity {}\n",
            score(Some(col.scores.overall)),
            score(col.scores.completeness),
            score(col.scores.validity)
        ));
    }
    out.trim_end().to_string()
}

fn human_eval(rep: &EvalReport) -> String {
    format!(
        "{} {:.4} ± {:.4} over {} folds ({} rows used, {} excluded)",
        rep.primary_metric,
        rep.primary(),
        rep.std[&rep.primary_metric],
        rep.per_fold.len(),
        rep.rows_used,
        rep.rows_excluded
    )
}

fn human_drift(rep: &DriftReport) -> String {
    let mut out = format!("drift penalty {:.4}\n", rep.drift_penalty);
    for k in &rep.ks {
        out.push_str(&format!(
            "  {}: D = {:.4}, p = {:.4}{}\n",
            k.column,
            k.d_stat,
            k.p_value,
            if k.drifted { "  DRIFTED" } else { "" }
        ));
    }
    for c in &rep.categorical {
        out.push_str(&format!("  {}: TV = {:.4}\n", c.column, c.tv_distance));
    }
    out.trim_end().to_string()
}
