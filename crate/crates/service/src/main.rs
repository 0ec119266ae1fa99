use std::io::{self, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use epmem_service::evaluate::{evaluate, write_reports, EvalRequest};
use epmem_service::{repl, server, AppConfig, AskRequest, Runtime};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "epmem", version, about = "Episodic memory over first-person video captions")]
struct Cli {
    /// JSON config file. EPMEM_* environment variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Stub captioner, hashed embeddings, extractive answers; no network.
    #[arg(long, global = true)]
    offline: bool,
    /// Memory store file (overrides config store_path).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a caption fixture, frame manifest or frame directory.
    Ingest {
        source: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Answer one question.
    Ask {
        question: String,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        video: Option<String>,
        /// Print the same JSON body as POST /ask.
        #[arg(long)]
        json: bool,
    },
    /// Read questions from stdin until `:quit`.
    Repl {
        #[arg(short, long)]
        k: Option<usize>,
    },
    /// Score a QA dataset against per-video memories.
    Eval {
        dataset: PathBuf,
        /// Directory of `<video_id>.store` or `<video_id>.jsonl` caption fixtures.
        memories: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write report.json and report.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Debug: answer with the gold answer.
        #[arg(long, hide = true)]
        identity: bool,
        #[arg(long)]
        label: Option<String>,
    },
    /// Serve the HTTP API and console.
    Serve,
}

fn load_config(cli: &Cli) -> anyhow::Result<AppConfig> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    if let Some(s) = &cli.store {
        cfg.store_path = s.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    let stdout = io::stdout();
    match cli.command {
        Command::Ingest { ref source, json } => {
            let rt = Runtime::open(cfg, cli.offline)?;
            let summary = rt
                .ingest_path(source)
                .with_context(|| format!("ingesting {}", source.display()))?;
            let mut out = stdout.lock();
            if json {
                writeln!(out, "{}", serde_json::to_string(&summary)?)?;
            } else {
                writeln!(
                    out,
                    "frames: {}\ncaptions: {}\nchunks: {}\nfailures: {}\nstatus: {:?}",
                    summary.frames,
                    summary.captions,
                    summary.chunks,
                    summary.failures.len(),
                    summary.status
                )?;
                for f in &summary.failures {
                    writeln!(out, "  failed {} frame {}: {}", f.video_id, f.frame_index, f.error)?;
                }
            }
        }
        Command::Ask { ref question, k, ref video, json } => {
            let rt = Runtime::open(cfg, cli.offline)?;
            let resp = rt.ask(&AskRequest {
                question: question.clone(),
                k,
                video_id: video.clone(),
            })?;
            let mut out = stdout.lock();
            if json {
                writeln!(out, "{}", serde_json::to_string(&resp)?)?;
            } else {
                write!(out, "{}", resp.render())?;
            }
        }
        Command::Repl { k } => {
            let rt = Runtime::open(cfg, cli.offline)?;
            if io::stdin().is_terminal() {
                eprintln!("{} chunks loaded. Type a question, or {} to exit.", rt.stats().chunk_count, repl::QUIT);
            }
            repl::run(&rt, k, io::stdin().lock(), stdout.lock())?;
        }
        Command::Eval { ref dataset, ref memories, format, ref out, identity, ref label } => {
            let req = EvalRequest {
                dataset: dataset.clone(),
                memories: memories.clone(),
                identity,
                label: label.clone(),
            };
            let report = evaluate(&cfg, cli.offline, &req)?;
            if let Some(dir) = out {
                let [j, t] = write_reports(&report, dir)?;
                eprintln!("wrote {} and {}", j.display(), t.display());
            }
            let mut o = stdout.lock();
            match format {
                Format::Json => writeln!(o, "{}", report.to_json())?,
                Format::Text => write!(o, "{}", report.render_text())?,
            }
            if report.flagged > 0 {
                eprintln!("{} sample(s) flagged; see per_sample errors", report.flagged);
            }
        }
        Command::Serve => {
            let rt = Arc::new(Runtime::open(cfg, cli.offline)?);
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(server::serve(rt))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("EPMEM_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
