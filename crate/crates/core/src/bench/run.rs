//! Running a task over a dataset and aggregating the records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{self, MetricsError};
use super::tasks::{DatasetRow, ItemSet, TaskKind, TaskSpec, LABELS, NER_ENTITIES};
use crate::notation::Value;
use crate::render::{PromptError, Templates};
use crate::runtime::{CallOutcome, CallPolicy, Engine, RuntimeError};

/// Name of the metadata file written next to the results.
pub const RUN_METADATA_FILE: &str = "run_metadata.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("dataset line {line}: {message}")]
    DatasetFormat { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("sample `{sample}`: {source}")]
    Runtime { sample: String, source: RuntimeError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_error(path: &Path, e: std::io::Error) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MultilabelLine {
    id: String,
    text: String,
    labels: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NerLine {
    id: String,
    text: String,
    entities: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticLine {
    id: String,
}

/// Parses a JSON Lines dataset. Blank lines are skipped; ids must be unique.
pub fn parse_dataset(kind: TaskKind, text: &str) -> Result<Vec<DatasetRow>, BenchError> {
    let mut rows = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| BenchError::DatasetFormat { line: line_no, message };
        let row = match kind {
            TaskKind::Multilabel => {
                let l: MultilabelLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
                if let Some(unknown) = l.labels.iter().find(|x| !LABELS.contains(&x.as_str())) {
                    return Err(bad(format!("unknown label `{unknown}`")));
                }
                DatasetRow::Multilabel { id: l.id, text: l.text, labels: l.labels }
            }
            TaskKind::Ner => {
                let l: NerLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
                if let Some(unknown) = l.entities.keys().find(|k| !NER_ENTITIES.contains(&k.as_str())) {
                    return Err(bad(format!("unknown entity class `{unknown}`")));
                }
                DatasetRow::Ner { id: l.id, text: l.text, entities: l.entities }
            }
            TaskKind::SyntheticGen => {
                let l: SyntheticLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
                DatasetRow::Synthetic { id: l.id }
            }
        };
        if !ids.insert(row.id().to_string()) {
            return Err(bad(format!("duplicate id `{}`", row.id())));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_dataset(kind: TaskKind, path: &Path) -> Result<Vec<DatasetRow>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_dataset(kind, &text)
}

/// `count` synthetic rows with ids `gen-0000`, `gen-0001`, ...
pub fn synthetic_rows(count: usize) -> Vec<DatasetRow> {
    (0..count).map(DatasetRow::synthetic).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub sample_id: String,
    /// A valid typed output was produced.
    pub success: bool,
    pub predicted: Option<Value>,
    pub gold: Option<Value>,
    pub attempts_used: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl BenchRecord {
    fn from_outcome(sample_id: String, gold: Option<Value>, outcome: &CallOutcome) -> Self {
        BenchRecord {
            sample_id,
            success: outcome.result.is_some(),
            predicted: outcome.result.as_ref().map(|r| r.value.clone()),
            gold,
            attempts_used: outcome.attempts.len(),
            prompt_tokens: outcome.total_prompt_tokens,
            completion_tokens: outcome.total_completion_tokens,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Samples in flight at once. Replays need 1 to stay in order.
    pub concurrency: usize,
    /// Records are appended here as samples finish, then rewritten sorted.
    pub records_path: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { concurrency: 1, records_path: None }
    }
}

/// One record per row, sorted by sample id.
pub async fn run_task(
    task: &TaskSpec,
    rows: &[DatasetRow],
    policy: &CallPolicy,
    engine: &Engine,
    options: &RunOptions,
) -> Result<Vec<BenchRecord>, BenchError> {
    let specs = rows.iter().map(|row| task.prompt_for(row)).collect::<Result<Vec<_>, _>>()?;
    let mut sink = match &options.records_path {
        Some(path) => Some(File::create(path).map_err(|e| io_error(path, e))?),
        None => None,
    };

    let mut pending = stream::iter(rows.iter().zip(&specs))
        .map(|(row, spec)| async move {
            let sample = row.id().to_string();
            let outcome = match engine.call(spec, policy).await {
                Ok(outcome) => outcome,
                Err(RuntimeError::Exhausted(outcome)) => *outcome,
                Err(source) => return Err(BenchError::Runtime { sample, source }),
            };
            Ok(BenchRecord::from_outcome(sample, task.gold(row), &outcome))
        })
        .buffer_unordered(options.concurrency.max(1));

    let mut records = Vec::with_capacity(rows.len());
    while let Some(record) = pending.next().await {
        let record = record?;
        if let (Some(file), Some(path)) = (sink.as_mut(), &options.records_path) {
            writeln!(file, "{}", serde_json::to_string(&record).expect("record serializes")).map_err(|e| io_error(path, e))?;
        }
        records.push(record);
    }
    records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    if let Some(path) = &options.records_path {
        write_records(path, &records)?;
    }
    Ok(records)
}

pub fn write_records(path: &Path, records: &[BenchRecord]) -> Result<(), BenchError> {
    let mut text = String::new();
    for record in records {
        text.push_str(&serde_json::to_string(record).expect("record serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub retries: u32,
    pub samples: usize,
    pub successes: usize,
    pub reliability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variety: Option<f64>,
    /// Mean of prompt plus completion tokens per sample, repairs included.
    pub mean_token_usage: f64,
    /// Factors of the performance term, in the task's order.
    pub performance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ntu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gms: Option<f64>,
}

/// Aggregates records. With `token_range` given as `(min, max)` the report
/// also carries NTU and GMS.
pub fn aggregate(
    task: &TaskSpec,
    retries: u32,
    records: &[BenchRecord],
    token_range: Option<(f64, f64)>,
) -> Result<MetricsReport, MetricsError> {
    let samples = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let reliability = metrics::reliability(successes, samples);
    let total_tokens: u64 = records.iter().map(|r| r.prompt_tokens + r.completion_tokens).sum();
    let mean_token_usage = if samples == 0 { 0.0 } else { total_tokens as f64 / samples as f64 };

    let mut report = MetricsReport {
        task: task.kind,
        retries,
        samples,
        successes,
        reliability,
        precision: None,
        recall: None,
        f1: None,
        exact_accuracy: None,
        variety: None,
        mean_token_usage,
        performance: Vec::new(),
        ntu: None,
        gms: None,
    };

    match task.kind {
        TaskKind::Multilabel | TaskKind::Ner => {
            let gold: Vec<ItemSet> =
                records.iter().map(|r| r.gold.as_ref().map(|g| task.items(g)).unwrap_or_default()).collect();
            let predicted: Vec<Option<ItemSet>> =
                records.iter().map(|r| r.predicted.as_ref().map(|p| task.items(p))).collect();
            let flat: Vec<ItemSet> = predicted.iter().map(|p| p.clone().unwrap_or_default()).collect();
            let prf = metrics::micro_prf(&flat, &gold);
            let accuracy = metrics::exact_accuracy(&predicted, &gold);
            report.precision = Some(prf.precision);
            report.recall = Some(prf.recall);
            report.f1 = Some(prf.f1);
            report.exact_accuracy = Some(accuracy);
            report.performance = match task.kind {
                TaskKind::Multilabel => vec![accuracy, prf.f1],
                _ => vec![prf.f1, prf.f1],
            };
        }
        TaskKind::SyntheticGen => {
            let names: Vec<&str> =
                records.iter().filter_map(|r| r.predicted.as_ref().and_then(TaskSpec::generated_name)).collect();
            match metrics::variety(&names) {
                Ok(v) => {
                    report.variety = Some(v);
                    report.performance = vec![v];
                }
                Err(MetricsError::EmptyRun) => {}
                Err(e) => return Err(e),
            }
        }
    }

    if let Some((min, max)) = token_range {
        let norm = metrics::ntu(mean_token_usage, min, max)?;
        report.ntu = Some(norm);
        if !report.performance.is_empty() {
            report.gms = Some(metrics::gms(reliability, &report.performance, norm));
        }
    }
    Ok(report)
}

/// Reports for several retry settings plus consistency between the
/// 0-retry and 2-retry GMS when both are present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub settings: Vec<MetricsReport>,
    pub consistency: Option<f64>,
}

pub fn summarize(settings: Vec<MetricsReport>) -> BenchSummary {
    let gms_at = |r: u32| settings.iter().find(|s| s.retries == r).and_then(|s| s.gms);
    let consistency = match (gms_at(0), gms_at(2)) {
        (Some(g0), Some(g2)) => metrics::consistency(g0, g2),
        _ => None,
    };
    BenchSummary { settings, consistency }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub task: TaskKind,
    pub model_name: String,
    pub policy: CallPolicy,
    pub method: crate::render::Method,
    pub samples: usize,
    pub transport: String,
    pub template_sha256: BTreeMap<String, String>,
    /// How retries are carried out.
    pub retry_semantics: String,
    pub token_accounting: String,
}

impl RunMetadata {
    pub fn new(task: &TaskSpec, policy: &CallPolicy, templates: &Templates, samples: usize, transport: &str) -> Self {
        RunMetadata {
            task: task.kind,
            model_name: policy.model_name.clone(),
            policy: policy.clone(),
            method: task.method,
            samples,
            transport: transport.to_string(),
            template_sha256: templates.hashes().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            retry_semantics: "repair-prompt: each retry resends the full conversation plus the failed reply and a \
                              diagnostic message"
                .into(),
            token_accounting: "endpoint-reported usage; prompt plus completion tokens summed over every attempt of a sample"
                .into(),
        }
    }
}

/// Writes records, metrics and run metadata into `dir`.
pub fn write_outputs(
    dir: &Path,
    records: &[BenchRecord],
    report: &MetricsReport,
    metadata: &RunMetadata,
) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_records(&dir.join(RECORDS_FILE), records)?;
    let metrics_path = dir.join(METRICS_FILE);
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&metrics_path, text + "\n").map_err(|e| io_error(&metrics_path, e))?;
    let meta_path = dir.join(RUN_METADATA_FILE);
    let text = serde_json::to_string_pretty(metadata).expect("metadata serializes");
    std::fs::write(&meta_path, text + "\n").map_err(|e| io_error(&meta_path, e))
}
