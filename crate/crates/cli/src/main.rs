use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use typed_prompt::bench::TaskKind;
use typed_prompt::render::Method;
use typed_prompt_cli::commands::{self, BenchArgs, TransportChoice};
use typed_prompt_cli::config::{self, ConfigFile, Overrides, ENV_CONFIG};
use typed_prompt_cli::CliError;

/// Typed prompts for structured model output.
#[derive(Parser)]
#[command(name = "typed-prompt", version)]
struct Cli {
    /// TOML configuration file (also read from TYPED_PROMPT_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the system and user messages for a call.
    Render {
        schema: PathBuf,
        call: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
    },
    /// Extract, parse and validate a model reply offline.
    Parse {
        schema: PathBuf,
        /// Expected type, e.g. `list[Person]`.
        #[arg(long = "type")]
        ty: String,
        /// Reply file; standard input when absent.
        input: Option<PathBuf>,
    },
    /// Make one call and print the outcome as JSON.
    Call {
        schema: PathBuf,
        call: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        transport: TransportArgs,
    },
    /// Run a benchmark task and write records, metrics and run metadata.
    Bench {
        #[arg(value_parser = parse_task)]
        task: TaskKind,
        /// JSON Lines dataset; not needed for `synthetic`.
        dataset: Option<PathBuf>,
        /// Sample count for `synthetic`.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        concurrency: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        transport: TransportArgs,
    },
    /// Recompute the published score table and print deviations.
    Report {
        /// Table fixture; the shipped one when absent.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_output_tokens: Option<u32>,
}

#[derive(Args)]
struct TransportArgs {
    /// Append every exchange to this transcript.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Serve replies from this transcript instead of the network.
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse()
}

impl From<&ModelArgs> for Overrides {
    fn from(m: &ModelArgs) -> Self {
        Overrides {
            model: m.model.clone(),
            base_url: m.base_url.clone(),
            retries: m.retries,
            temperature: m.temperature,
            max_output_tokens: m.max_output_tokens,
        }
    }
}

impl From<&TransportArgs> for TransportChoice {
    fn from(t: &TransportArgs) -> Self {
        TransportChoice { record: t.record.clone(), replay: t.replay.clone() }
    }
}

fn settings(config_path: Option<&PathBuf>, model: &ModelArgs) -> Result<config::Settings, CliError> {
    let path = config_path.cloned().or_else(|| std::env::var_os(ENV_CONFIG).map(PathBuf::from));
    let file = match path {
        Some(p) => config::load_config(&p)?,
        None => ConfigFile::default(),
    };
    Ok(config::resolve(&model.into(), &|k| std::env::var(k).ok(), &file))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Render { schema, call, method } => commands::render(&schema, &call, method, &mut stdout),
        Command::Parse { schema, ty, input } => {
            commands::parse(&schema, &ty, input.as_deref(), &mut stdout, &mut std::io::stderr())
        }
        Command::Call { schema, call, method, model, transport } => {
            let settings = settings(cli.config.as_ref(), &model)?;
            commands::call(&schema, &call, method, &settings, &(&transport).into(), &mut stdout)
        }
        Command::Bench { task, dataset, samples, method, out, concurrency, model, transport } => {
            let settings = settings(cli.config.as_ref(), &model)?;
            let args = BenchArgs { task, dataset, samples, method, out_dir: out, concurrency };
            commands::bench(&args, &settings, &(&transport).into(), &mut stdout)
        }
        Command::Report { fixture, json } => commands::report(fixture.as_deref(), json, &mut stdout),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
