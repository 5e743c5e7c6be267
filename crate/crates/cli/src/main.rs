//! Command-line front end: corpus generation, evaluation runs against an
//! external connector, scripted mock agents, and leaderboard reports.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use traceval_core::corpus::{load_corpus, save_corpus};
use traceval_core::fixtures::{generate_switch_corpus, mock_agent, MockAgentKind};
use traceval_core::report::{build_row, emit, EvalRun, ReportFormat};
use traceval_core::{
    compute_report, enumerate_paths, run_cases, CaseResult, ChallengeMode, Connector,
    ConnectorError, HttpConnector, ScoredCase, SessionConfig, SubprocessConnector, TestCase,
    TurnReply, TurnRequest,
};

#[derive(Parser)]
#[command(name = "traceval", about = "Evaluation engine and harness for tool-using agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a challenge over a corpus against an external agent connector.
    Eval(EvalArgs),
    /// Corpus fixtures.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
    /// Serve a scripted agent over stdin/stdout (one JSON document per line).
    MockAgent(MockAgentArgs),
    /// Combine the three challenge runs into a leaderboard report.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum FixturesCommand {
    /// Generate a deterministic corpus covering the policy-switch space.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    C1,
    C2,
    C3,
}

impl From<ModeArg> for ChallengeMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::C1 => ChallengeMode::C1FullExecution,
            ModeArg::C2 => ChallengeMode::C2RedactedHistory,
            ModeArg::C3 => ChallengeMode::C3InjectedHistory,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Directory holding one test case per JSON document.
    #[arg(long)]
    corpus: PathBuf,
    /// Challenge protocol to run.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Agent endpoint: an http:// URL or a command line to spawn.
    #[arg(long)]
    connector: String,
    /// Concurrent workers; each gets its own connector session.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output file for the run (JSON).
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Recorded in the output; reserved for seeded agent behaviors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write enumerated paths and decision trees for audit.
    #[arg(long)]
    dump_paths: bool,
    /// Override the per-task step budget (default: 2 x gold calls + 2).
    #[arg(long)]
    step_budget: Option<usize>,
    /// Per-turn connector timeout in seconds.
    #[arg(long, default_value_t = 60)]
    turn_timeout_secs: u64,
    /// Exit zero even when cases failed with protocol errors.
    #[arg(long)]
    allow_protocol_errors: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Comma-separated task counts, e.g. 2,3,4.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4])]
    tasks: Vec<usize>,
    /// Cases per policy combination.
    #[arg(long, default_value_t = 1)]
    per_combo: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MockKindArg {
    Perfect,
    SerializeParallel,
    WrongTool,
    DropHidden,
}

#[derive(Args)]
struct MockAgentArgs {
    /// Corpus the scripted agent replays gold data from.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = MockKindArg::Perfect)]
    kind: MockKindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

#[derive(Args)]
struct ReportArgs {
    /// Full-execution run output (eval --mode c1).
    #[arg(long)]
    c1: PathBuf,
    /// Redacted-history run output (eval --mode c2).
    #[arg(long)]
    c2: PathBuf,
    /// Injected-history run output (eval --mode c3).
    #[arg(long)]
    c3: PathBuf,
    /// Agent label for the leaderboard row.
    #[arg(long)]
    label: String,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Eval(args) => eval(args),
        Command::Fixtures(FixturesCommand::Gen(args)) => {
            gen_corpus(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::MockAgent(args) => {
            serve_mock_agent(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            report(args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn gen_corpus(args: GenArgs) -> Result<()> {
    let cases = generate_switch_corpus(&args.tasks, args.per_combo, args.seed)
        .context("generating corpus")?;
    save_corpus(&args.out, &cases).context("writing corpus")?;
    eprintln!("wrote {} cases to {}", cases.len(), args.out.display());
    Ok(())
}

/// Connector that failed to start; every case it touches records a protocol
/// error instead of aborting the batch.
struct FailedConnector(String);

impl Connector for FailedConnector {
    fn exchange(&mut self, _request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
        Err(ConnectorError::Protocol(self.0.clone()))
    }
}

fn make_connector(endpoint: &str, timeout: Duration) -> Result<Box<dyn Connector>> {
    if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
        return Ok(Box::new(HttpConnector::new(endpoint, timeout).map_err(
            |err| anyhow::anyhow!("invalid connector endpoint: {err}"),
        )?));
    }
    let argv: Vec<String> = endpoint.split_whitespace().map(str::to_string).collect();
    let connector =
        SubprocessConnector::spawn(&argv, timeout).context("spawning connector subprocess")?;
    Ok(Box::new(connector))
}

fn eval(args: EvalArgs) -> Result<ExitCode> {
    let cases = load_corpus(&args.corpus).context("loading corpus")?;
    if cases.is_empty() {
        bail!("corpus {} holds no cases", args.corpus.display());
    }
    let mode: ChallengeMode = args.mode.into();
    let timeout = Duration::from_secs(args.turn_timeout_secs);
    let mut config = SessionConfig::new(mode);
    config.step_budget = args.step_budget;
    config.turn_timeout = timeout;

    // Surface connector misconfiguration before the batch starts.
    drop(make_connector(&args.connector, timeout)?);

    let endpoint = args.connector.clone();
    let results = run_cases(&cases, &config, args.workers, |worker| {
        match make_connector(&endpoint, timeout) {
            Ok(connector) => connector,
            Err(err) => {
                eprintln!("worker {worker}: {err:#}");
                Box::new(FailedConnector(err.to_string()))
            }
        }
    });

    let scored: Vec<ScoredCase> = results.iter().map(CaseResult::scored).collect();
    let summary = compute_report(&scored);
    eprintln!(
        "{} cases | accuracy {:.4} | ap {:.4} | op_rate {:.4}",
        summary.count, summary.accuracy, summary.ap_mean, summary.op_rate
    );

    if args.dump_paths {
        let dump_path = paths_dump_file(&args.out);
        write_paths_dump(&dump_path, &cases)?;
        eprintln!("wrote path dump to {}", dump_path.display());
    }

    let run = EvalRun {
        mode,
        seed: args.seed,
        connector: args.connector.clone(),
        cases: results,
    };
    let mut document = serde_json::to_string_pretty(&run).expect("run serializes");
    document.push('\n');
    fs::write(&args.out, document)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("wrote results to {}", args.out.display());

    let protocol_errors = run.cases.iter().filter(|c| c.has_protocol_error()).count();
    if protocol_errors > 0 && !args.allow_protocol_errors {
        eprintln!("{protocol_errors} cases hit protocol errors");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn paths_dump_file(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "report".to_string());
    out.with_file_name(format!("{stem}_paths.json"))
}

fn write_paths_dump(path: &Path, cases: &[TestCase]) -> Result<()> {
    let mut dump = Vec::new();
    for case in cases {
        for (task_index, task) in case.tasks.iter().enumerate() {
            if task.gold_graph.node_count() == 0 {
                continue;
            }
            let set = enumerate_paths(&task.gold_graph)
                .with_context(|| format!("enumerating {}#{task_index}", case.id))?;
            let tree = traceval_core::build_decision_tree(&set, task.gold_graph.nodes());
            dump.push(serde_json::json!({
                "case_id": case.id,
                "task_index": task_index,
                "optimal_length": set.optimal_length,
                "paths": set.paths,
                "tree": tree.dump(),
            }));
        }
    }
    let mut document = serde_json::to_string_pretty(&dump).expect("dump serializes");
    document.push('\n');
    fs::write(path, document).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn serve_mock_agent(args: MockAgentArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus).context("loading corpus")?;
    let kind = match args.kind {
        MockKindArg::Perfect => MockAgentKind::Perfect,
        MockKindArg::SerializeParallel => MockAgentKind::SerializeParallel,
        MockKindArg::WrongTool => MockAgentKind::WrongTool(args.seed),
        MockKindArg::DropHidden => MockAgentKind::DropHiddenInfo(args.seed),
    };
    let mut agent = mock_agent(kind, &corpus);
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.context("reading request line")?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<TurnRequest>(&line) {
            Ok(request) => agent
                .exchange(&request)
                .unwrap_or_else(|err| TurnReply::Text(format!("mock agent error: {err}"))),
            Err(err) => TurnReply::Text(format!("mock agent could not parse request: {err}")),
        };
        serde_json::to_writer(&mut stdout, &reply).context("writing reply")?;
        stdout.write_all(b"\n")?;
        stdout.flush()?;
    }
    Ok(())
}

fn load_run(path: &Path) -> Result<EvalRun> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn report(args: ReportArgs) -> Result<()> {
    let c1 = load_run(&args.c1)?;
    let c2 = load_run(&args.c2)?;
    let c3 = load_run(&args.c3)?;
    let expect_mode = |run: &EvalRun, mode: ChallengeMode, flag: &str| -> Result<()> {
        if run.mode != mode {
            bail!("--{flag} file was produced by a different mode");
        }
        Ok(())
    };
    expect_mode(&c1, ChallengeMode::C1FullExecution, "c1")?;
    expect_mode(&c2, ChallengeMode::C2RedactedHistory, "c2")?;
    expect_mode(&c3, ChallengeMode::C3InjectedHistory, "c3")?;

    let row = build_row(&c1.cases, &c2.cases, &c3.cases, &args.label)?;
    let format = match args.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Markdown => ReportFormat::Markdown,
    };
    let text = emit(&[row], format)?;
    match &args.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote report to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
