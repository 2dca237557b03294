//! Command-line front end.

pub mod config;

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use xmaster_core::agent::Trace;
use xmaster_core::eval::{load_dataset, run_ablation, run_benchmark, BenchConfig, BenchDeps};
use xmaster_core::stream_parser::segment_with;
use xmaster_core::workflow::{run_workflow, WorkflowConfig};
use xmaster_tools::{serve, Mode, ToolService};

pub use config::CliConfig;

#[derive(Debug, Parser)]
#[command(name = "xmaster", version, about = "Tool-augmented reasoning agent and evaluation harness")]
pub struct Cli {
    /// TOML config file; defaults to $XMASTER_CONFIG or ./xmaster.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect raw model output.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
    /// Run one agent on one query.
    Solve {
        #[arg(long)]
        query: String,
        /// File holding the role prompt.
        #[arg(long)]
        role: Option<PathBuf>,
        /// Write the full trace as JSON.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Web search and parse service.
    Tools {
        #[command(subcommand)]
        command: ToolsCommand,
    },
    /// Multi-agent workflow.
    Workflow {
        #[command(subcommand)]
        command: WorkflowCommand,
    },
    /// Score the workflow on a dataset.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
pub enum TraceCommand {
    /// Print the segments of a raw trace as JSON lines.
    Segment { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum ToolsCommand {
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Answer only from cassettes in DIR.
        #[arg(long, value_name = "DIR", conflicts_with = "record")]
        replay: Option<PathBuf>,
        /// Write a cassette per live response into DIR.
        #[arg(long, value_name = "DIR")]
        record: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct StageFlags {
    /// Run one agent per stage instead of n.
    #[arg(long)]
    pub no_scatter: bool,
    /// Skip the rewrite and selection stages.
    #[arg(long)]
    pub no_stack: bool,
}

#[derive(Debug, Subcommand)]
pub enum WorkflowCommand {
    Run {
        #[arg(long)]
        query: String,
        #[command(flatten)]
        stages: StageFlags,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON lines of question records.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub stages: StageFlags,
    #[arg(long, default_value = "model")]
    pub judge: String,
    /// Workflows in flight at once.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long)]
    pub n: Option<usize>,
    /// Run all three scatter/stack settings and write the ablation grid.
    #[arg(long, conflicts_with_all = ["no_scatter", "no_stack"])]
    pub ablation: bool,
    /// Skip the tool-free baseline row.
    #[arg(long)]
    pub no_baseline: bool,
}

pub async fn run(cli: Cli) -> Result<()> {
    let cfg = CliConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Trace {
            command: TraceCommand::Segment { file },
        } => trace_segment(&cfg, &file),
        Command::Solve { query, role, trace_out } => solve(&cfg, &query, role.as_deref(), trace_out.as_deref()).await,
        Command::Tools {
            command: ToolsCommand::Serve { port, host, replay, record },
        } => {
            let mode = match (replay, record) {
                (Some(dir), _) => Mode::Replay(dir),
                (None, Some(dir)) => Mode::Record(dir),
                (None, None) => Mode::Live,
            };
            tools_serve(&cfg, SocketAddr::new(host, port), mode).await
        }
        Command::Workflow {
            command: WorkflowCommand::Run { query, stages, n, out },
        } => workflow_run(&cfg, &query, workflow_config(&cfg, &stages, n), &out).await,
        Command::Bench(args) => bench(&cfg, args).await,
    }
}

fn workflow_config(cfg: &CliConfig, stages: &StageFlags, n: Option<usize>) -> WorkflowConfig {
    let mut wf = cfg.workflow.clone();
    if stages.no_scatter {
        wf.scatter = false;
    }
    if stages.no_stack {
        wf.stack = false;
    }
    if let Some(n) = n {
        wf.n_parallel = n;
    }
    wf
}

fn trace_segment(cfg: &CliConfig, file: &Path) -> Result<()> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    for seg in segment_with(&text, &cfg.agent.tags) {
        println!("{}", serde_json::to_string(&seg)?);
    }
    Ok(())
}

async fn solve(cfg: &CliConfig, query: &str, role: Option<&Path>, trace_out: Option<&Path>) -> Result<()> {
    let role_prompt = match role {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let agent = cfg.agent()?;
    let trace = agent.solve(query, &role_prompt).await?;
    if let Some(path) = trace_out {
        write_json(path, &trace)?;
    }
    report_answer(&trace, &cfg.agent.answer_marker)
}

fn report_answer(trace: &Trace, marker: &str) -> Result<()> {
    match xmaster_core::agent::extract_answer(trace, marker).or_else(|| trace.answer_text().map(str::to_string)) {
        Some(answer) => {
            println!("{answer}");
            Ok(())
        }
        None => bail!(
            "no answer (termination {:?}{})",
            trace.termination,
            trace.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
        ),
    }
}

async fn tools_serve(cfg: &CliConfig, addr: SocketAddr, mode: Mode) -> Result<()> {
    let service = Arc::new(ToolService::new(cfg.tool_config(mode)?)?);
    let handle = serve(service, addr).await?;
    println!("listening on {}", handle.url());
    tokio::signal::ctrl_c().await?;
    handle.shutdown().await?;
    Ok(())
}

async fn workflow_run(cfg: &CliConfig, query: &str, wf: WorkflowConfig, out: &Path) -> Result<()> {
    let agent = cfg.agent()?;
    let run = run_workflow(&agent, query, &wf).await?;
    run.persist(out).with_context(|| format!("writing {}", out.display()))?;
    match run.final_extracted(&cfg.agent.answer_marker).or_else(|| run.final_answer.clone()) {
        Some(answer) => {
            println!("{answer}");
            Ok(())
        }
        None => bail!(
            "workflow produced no answer{}",
            run.failure.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
        ),
    }
}

async fn bench(cfg: &CliConfig, args: BenchArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let (agent, baseline) = cfg.agent_and_baseline()?;
    let deps = BenchDeps {
        agent,
        baseline: (!args.no_baseline).then_some(baseline),
        judge: cfg.judge(&args.judge)?,
    };
    let mut bc = BenchConfig::new(&args.out);
    bc.runs = args.runs;
    bc.concurrency = args.concurrency;
    bc.workflow = workflow_config(cfg, &args.stages, args.n);
    if args.ablation {
        let (grid, _) = run_ablation(&dataset, &deps, &bc).await?;
        print!("{}", grid.to_markdown());
    } else {
        let report = run_benchmark(&dataset, &deps, &bc).await?;
        print!("{}", report.to_markdown());
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}
