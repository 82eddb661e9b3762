use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use turnsmith_core::conversation::{parse_conversation, DocumentError, ValidationReport};
use turnsmith_core::experiment::{
    export_results, run_experiment, ExperimentSpec, Progress, RunOptions, DEFAULT_WORKERS,
};
use turnsmith_core::quality::validate_conversation;
use turnsmith_core::retrieval::{read_corpus_jsonl, Bm25Params, Chunking, CorpusStore};
use turnsmith_core::Backends;
use turnsmith_server::ServerConfig;

/// Corpus management, validation and experiments for multi-turn RAG
/// conversations.
#[derive(Debug, Parser)]
#[command(name = "turnsmith", version)]
struct Cli {
    /// Directory holding corpus indexes.
    #[arg(long, global = true, env = "TURNSMITH_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and query corpus indexes.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Conversation file utilities.
    #[command(subcommand)]
    Conv(ConvCommand),
    /// Offline experiment runs.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Build an index from a JSONL file of {document_id, title, text} lines.
    Ingest(IngestArgs),
    /// Query an index with BM25.
    Search {
        #[arg(long)]
        id: String,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    id: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = Chunking::default().max_tokens)]
    max_tokens: usize,
    #[arg(long, default_value_t = 0)]
    overlap: usize,
}

#[derive(Debug, Subcommand)]
enum ConvCommand {
    /// Check a conversation file; exits 1 on schema errors.
    Validate { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Run an experiment spec and write the `.eval.json` export.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
    },
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn open_store(dir: &Path) -> Result<Arc<CorpusStore>> {
    Ok(Arc::new(
        CorpusStore::open(dir).with_context(|| format!("opening corpus store {}", dir.display()))?,
    ))
}

fn corpus(data_dir: &Path, command: CorpusCommand) -> Result<ExitCode> {
    let store = open_store(data_dir)?;
    match command {
        CorpusCommand::Ingest(args) => {
            let file = fs::File::open(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
            let docs = read_corpus_jsonl(BufReader::new(file))?;
            let chunking = Chunking {
                max_tokens: args.max_tokens,
                overlap: args.overlap,
            };
            store.ingest(&args.id, docs, chunking)?;
            let summary = store.list().into_iter().find(|s| s.corpus_id == args.id);
            print_json(&summary);
        }
        CorpusCommand::Search { id, query, top_k } => {
            let hits = store.search(&id, &query, top_k, Bm25Params::default())?;
            print_json(&hits);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(file: &Path) -> Result<ExitCode> {
    let bytes = fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let report = match parse_conversation(&bytes) {
        Ok(conv) => validate_conversation(&conv),
        Err(DocumentError::Schema(v)) => ValidationReport {
            errors: vec![v],
            issues: Vec::new(),
        },
        Err(DocumentError::Malformed(m)) => {
            eprintln!("malformed document: {m}");
            return Ok(ExitCode::FAILURE);
        }
    };
    print_json(&report);
    for e in &report.errors {
        eprintln!("SchemaViolation at {}: {}", e.path, e.message);
    }
    Ok(if report.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn experiment(data_dir: &Path, spec_path: &Path, out: &Path, workers: usize) -> Result<ExitCode> {
    let bytes = fs::read(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = match ExperimentSpec::parse(&bytes) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("invalid experiment spec: {e}");
            return Ok(ExitCode::FAILURE);
        }
    };
    let config = ServerConfig::load(None)?;
    let store = open_store(data_dir)?;
    let backends = Backends::standard(store, config.default_endpoint());
    let progress = Progress::new();
    let result = match run_experiment(
        &spec,
        &backends,
        RunOptions {
            workers: workers.max(1),
        },
        &progress,
    ) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("experiment failed: {e}");
            return Ok(ExitCode::FAILURE);
        }
    };
    fs::write(out, export_results(&result)).with_context(|| format!("writing {}", out.display()))?;
    let p = result.progress;
    eprintln!("{} of {} task runs completed, {} failed", p.done, p.total, p.failed);
    Ok(ExitCode::SUCCESS)
}

fn serve(data_dir: PathBuf, data_dir_given: bool, config: Option<PathBuf>) -> Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let mut config = ServerConfig::load(config.as_deref())?;
    if data_dir_given {
        config.data_dir = data_dir;
    }
    tokio::runtime::Runtime::new()?.block_on(turnsmith_server::serve(config))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli, data_dir_given: bool) -> Result<ExitCode> {
    match cli.command {
        Command::Corpus(c) => corpus(&cli.data_dir, c),
        Command::Conv(ConvCommand::Validate { file }) => validate(&file),
        Command::Experiment(ExperimentCommand::Run { spec, out, workers }) => {
            experiment(&cli.data_dir, &spec, &out, workers)
        }
        Command::Serve { config } => serve(cli.data_dir, data_dir_given, config),
    }
}

fn main() -> ExitCode {
    let matches = <Cli as clap::CommandFactory>::command().get_matches();
    let data_dir_given = matches.value_source("data_dir") != Some(clap::parser::ValueSource::DefaultValue);
    let cli = match <Cli as clap::FromArgMatches>::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli, data_dir_given) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
