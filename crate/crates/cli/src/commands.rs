use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use typed_prompt::bench::{
    aggregate, load_dataset, load_tables, reproduce_gms_table, run_task, shipped_tables, synthetic_rows, write_outputs,
    BenchError, RunMetadata, RunOptions, TaskKind, TaskSpec, RECORDS_FILE, TABLE_TOLERANCE,
};
use typed_prompt::client::{ChatTransport, ClientError, HttpTransport, RecordingTransport, ReplayTransport};
use typed_prompt::notation::{extract_candidate_output, parse_value, Provenance};
use typed_prompt::render::{ChatMessage, ContentPart, Method, Renderer};
use typed_prompt::runtime::{CallPolicy, Engine, RuntimeError};
use typed_prompt::validate::{conform, describe_errors};

use crate::config::Settings;
use crate::files::{load_call, load_schema, type_text};
use crate::CliError;

/// Where model replies come from.
#[derive(Debug, Clone, Default)]
pub struct TransportChoice {
    pub record: Option<PathBuf>,
    pub replay: Option<PathBuf>,
}

impl TransportChoice {
    fn label(&self) -> &'static str {
        if self.replay.is_some() {
            "replay"
        } else {
            "http"
        }
    }

    fn build(&self, settings: &Settings) -> Result<Arc<dyn ChatTransport>, CliError> {
        let usage = |e: ClientError| CliError::Usage(e.to_string());
        let base: Arc<dyn ChatTransport> = match &self.replay {
            Some(path) => {
                let replay = ReplayTransport::open(path).map_err(usage)?;
                match &self.record {
                    Some(out) => Arc::new(RecordingTransport::create(replay, out).map_err(usage)?),
                    None => Arc::new(replay),
                }
            }
            None => {
                let http = HttpTransport::new(settings.http()).map_err(usage)?;
                match &self.record {
                    Some(out) => Arc::new(RecordingTransport::create(http, out).map_err(usage)?),
                    None => Arc::new(http),
                }
            }
        };
        Ok(base)
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))
}

/// Transport problems that come from configuration rather than the model.
fn classify(e: RuntimeError) -> CliError {
    match e {
        RuntimeError::Transport(
            err @ (ClientError::AuthMissing(_)
            | ClientError::ReplayMismatch { .. }
            | ClientError::ReplayExhausted(_)
            | ClientError::Transcript(_)
            | ClientError::UnreadableImage(_)),
        ) => CliError::Usage(err.to_string()),
        RuntimeError::Prompt(err) => CliError::Usage(err.to_string()),
        RuntimeError::InvalidPolicy(msg) => CliError::Usage(msg),
        other => CliError::Failure(other.to_string()),
    }
}

pub fn format_messages(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for message in messages {
        out.push_str(&format!("=== {} ===\n", message.role.as_str()));
        for part in &message.content {
            match part {
                ContentPart::Text(text) => out.push_str(text),
                ContentPart::Image(image) => out.push_str(&format!(
                    "[image: {}, {} base64 chars, detail {}]",
                    image.media_type,
                    image.base64.len(),
                    image.detail.as_str()
                )),
            }
            out.push('\n');
        }
    }
    out
}

pub fn render(schema: &Path, call: &Path, method: Option<Method>, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = load_call(call, load_schema(schema)?, method)?;
    let messages = Renderer::default().render_prompt(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    write!(out, "{}", format_messages(&messages)).map_err(|e| CliError::Failure(e.to_string()))
}

pub fn parse(schema: &Path, ty: &str, input: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let registry = load_schema(schema)?;
    let expr = type_text(Path::new("--type"), "type", ty)?;
    let missing = registry.resolve(&expr);
    if !missing.is_empty() {
        return Err(CliError::Usage(format!("unresolved type: {}", missing.join(", "))));
    }
    let reply = match input {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => {
            let mut text = String::new();
            std::io::stdin().read_to_string(&mut text).map_err(|e| CliError::Usage(format!("stdin: {e}")))?;
            text
        }
    };
    let candidate = extract_candidate_output(&reply);
    let warning = match candidate.provenance {
        Provenance::Labeled { ambiguous: false } => None,
        Provenance::Labeled { ambiguous: true } => Some("several `output` blocks; using the first"),
        Provenance::AnyFence => Some("no `output` block; using the last fenced block"),
        Provenance::WholeText => Some("no fenced block; using the whole reply"),
    };
    if let Some(w) = warning {
        let _ = writeln!(err, "warning: {w}");
    }
    let value = parse_value(&candidate.text).map_err(|e| CliError::Failure(format!("parse error at {}", e.display_with_excerpt())))?;
    match conform(&value, &expr, &registry) {
        Ok(typed) => writeln!(out, "{}", typed.value).map_err(|e| CliError::Failure(e.to_string())),
        Err(errors) => Err(CliError::Failure(format!("invalid output:\n{}", describe_errors(&errors)))),
    }
}

pub fn call(
    schema: &Path,
    call: &Path,
    method: Option<Method>,
    settings: &Settings,
    transport: &TransportChoice,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let spec = load_call(call, load_schema(schema)?, method)?;
    let policy = settings.policy();
    policy.check().map_err(|e| CliError::Usage(e.to_string()))?;
    let engine = Engine::new(transport.build(settings)?);
    let result = runtime()?.block_on(engine.call(&spec, &policy));
    let (outcome, failure) = match result {
        Ok(outcome) => (outcome, None),
        Err(RuntimeError::Exhausted(outcome)) => {
            let msg = format!("no valid output after {} attempts", outcome.attempts.len());
            (*outcome, Some(msg))
        }
        Err(e) => return Err(classify(e)),
    };
    let json = serde_json::to_string_pretty(&outcome).expect("outcome serializes");
    writeln!(out, "{json}").map_err(|e| CliError::Failure(e.to_string()))?;
    match failure {
        None => Ok(()),
        Some(msg) => Err(CliError::Failure(msg)),
    }
}

pub struct BenchArgs {
    pub task: TaskKind,
    pub dataset: Option<PathBuf>,
    pub samples: usize,
    pub method: Option<Method>,
    pub out_dir: PathBuf,
    pub concurrency: usize,
}

pub fn bench(args: &BenchArgs, settings: &Settings, transport: &TransportChoice, out: &mut dyn Write) -> Result<(), CliError> {
    let mut task = TaskSpec::new(args.task);
    if let Some(method) = args.method {
        task.method = method;
    }
    let rows = match (args.task, &args.dataset) {
        (TaskKind::SyntheticGen, None) => synthetic_rows(args.samples),
        (_, Some(path)) => load_dataset(args.task, path).map_err(|e| CliError::Usage(e.to_string()))?,
        (_, None) => return Err(CliError::Usage(format!("task `{}` needs a dataset", args.task.as_str()))),
    };
    let policy: CallPolicy = settings.policy();
    policy.check().map_err(|e| CliError::Usage(e.to_string()))?;
    let engine = Engine::new(transport.build(settings)?);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Usage(format!("{}: {e}", args.out_dir.display())))?;
    let concurrency = if transport.replay.is_some() { 1 } else { args.concurrency.max(1) };
    let options = RunOptions { concurrency, records_path: Some(args.out_dir.join(RECORDS_FILE)) };
    let records = runtime()?.block_on(run_task(&task, &rows, &policy, &engine, &options)).map_err(|e| match e {
        BenchError::Runtime { sample, source } => {
            let inner = classify(source);
            match inner {
                CliError::Usage(m) => CliError::Usage(format!("sample {sample}: {m}")),
                CliError::Failure(m) => CliError::Failure(format!("sample {sample}: {m}")),
            }
        }
        other => CliError::Usage(other.to_string()),
    })?;
    let report = aggregate(&task, policy.max_retries, &records, None).map_err(|e| CliError::Failure(e.to_string()))?;
    let meta = RunMetadata::new(&task, &policy, &Renderer::default().templates, records.len(), transport.label());
    write_outputs(&args.out_dir, &records, &report, &meta).map_err(|e| CliError::Usage(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    writeln!(out, "{json}").map_err(|e| CliError::Failure(e.to_string()))
}

pub fn report(fixture: Option<&Path>, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let tables = match fixture {
        Some(path) => load_tables(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => shipped_tables(),
    };
    let table = reproduce_gms_table(&tables, TABLE_TOLERANCE).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = if json { serde_json::to_string_pretty(&table).expect("table serializes") + "\n" } else { table.render_text() };
    write!(out, "{text}").map_err(|e| CliError::Failure(e.to_string()))?;
    if table.all_within_tolerance() {
        Ok(())
    } else {
        let rows: Vec<String> = table.failures().map(|r| format!("{}/{}", r.framework, r.task.as_str())).collect();
        Err(CliError::Failure(format!("out of tolerance: {}", rows.join(", "))))
    }
}
