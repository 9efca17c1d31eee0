//! `spicepilot`: parse, lint, classify and simulate SPICE netlists, and run
//! or score LLM netlist-generation benchmarks.
//!
//! Exit codes: 0 success, 1 domain failure (invalid netlist, failed lint,
//! simulation error), 2 usage or configuration error.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spicepilot_core::harness::{
    find_task, load_records, load_suite, run_benchmark, score, suggest_guidelines, BenchOptions, DatasetStore,
    LiveProvider, PilotPrompt, Provider, RepairOptions, ReplayProvider, RunStore, Task,
    DEFAULT_SUGGESTION_THRESHOLD,
};
use spicepilot_core::lint::{lint, TaskRequirements};
use spicepilot_core::metrics::compute_metrics;
use spicepilot_core::netlist::{flatten, parse_netlist, parse_value, serialize, AnalysisDirective, ElementKind, Netlist};
use spicepilot_core::sim::{
    dc_operating_point, dc_sweep, external_engine_run, transient, EngineConfig, ENGINE_ENV,
};

use config::CliConfig;

#[derive(Parser)]
#[command(name = "spicepilot", version, about = "SPICE netlist toolkit and LLM benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a netlist and print its canonical form.
    Parse {
        file: PathBuf,
        /// Print the parsed structure as JSON instead.
        #[arg(long)]
        json: bool,
    },
    /// Lint a netlist and print the report as JSON; exit 0 iff valid.
    Lint {
        file: PathBuf,
        /// Requirements from a task suite, as `suite.json#ID`.
        #[arg(long, conflicts_with = "requirements")]
        task: Option<String>,
        /// Requirements from a standalone JSON file.
        #[arg(long)]
        requirements: Option<PathBuf>,
    },
    /// Print transistor, node and element counts with the difficulty tier.
    Classify { file: PathBuf },
    /// Run DC, sweep or transient analyses and print JSON results.
    Simulate(SimulateArgs),
    /// Benchmark runs and scoring.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Validated dataset store.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
}

#[derive(Args)]
struct SimulateArgs {
    file: PathBuf,
    /// DC operating point.
    #[arg(long)]
    op: bool,
    /// DC sweep of a source.
    #[arg(long, num_args = 4, value_names = ["SOURCE", "START", "STOP", "STEP"])]
    dc: Option<Vec<String>>,
    /// Backward-Euler transient.
    #[arg(long, num_args = 2, value_names = ["TSTEP", "TSTOP"])]
    tran: Option<Vec<String>>,
    /// Write the transient waveform as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Solver options and engine command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cross-check the operating point against an external engine command
    /// (`{netlist}` is replaced by the netlist path).
    #[arg(long)]
    engine: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Live,
    Replay,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run every suite task n times through the repair loop.
    Run {
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "replay")]
        provider: ProviderKind,
        #[arg(long)]
        replay_dir: Option<PathBuf>,
        /// Directory for `records.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset store; defaults to `dataset.jsonl` in the output directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        max_iters: Option<u32>,
        #[arg(long)]
        concurrency: Option<usize>,
    },
    /// Score run records as a Pass@k table.
    Score {
        /// Run directory or `records.jsonl` file.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5")]
        k: Vec<u64>,
        /// Take difficulty tiers from this suite instead of the records.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, conflicts_with = "json")]
        csv: bool,
        #[arg(long)]
        json: bool,
    },
    /// Propose guidelines from lint failures in run records.
    Suggest {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SUGGESTION_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Copy the store to a JSONL file.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure class deciding the exit code.
enum Failure {
    Domain(anyhow::Error),
    Usage(anyhow::Error),
}

type Outcome = Result<bool, Failure>;

trait UsageContext<T> {
    fn usage(self) -> Result<T, Failure>;
    fn domain(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn domain(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Domain(e.into()))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .usage()
}

fn load_netlist(path: &Path) -> Result<Netlist, Failure> {
    let text = read(path)?;
    parse_netlist(&text)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
        .domain()
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .usage()?;
    }
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .usage()
}

fn cmd_parse(file: &Path, as_json: bool) -> Outcome {
    let netlist = load_netlist(file)?;
    if as_json {
        print_json(&netlist);
    } else {
        print!("{}", serialize(&netlist));
    }
    Ok(true)
}

fn task_requirements(spec: &str) -> Result<TaskRequirements, Failure> {
    let (path, id) = spec
        .rsplit_once('#')
        .ok_or_else(|| anyhow!("--task expects SUITE#ID, got `{spec}`"))
        .usage()?;
    let id: u32 = id.parse().with_context(|| format!("bad task id `{id}`")).usage()?;
    let suite = load_suite(Path::new(path)).usage()?;
    let task = find_task(&suite, id).usage()?;
    Ok(TaskRequirements {
        expected_transistor_range: Some(task.expected_transistor_range),
        ..task.requirements.clone()
    })
}

fn cmd_lint(file: &Path, task: Option<&str>, requirements: Option<&Path>) -> Outcome {
    let req = match (task, requirements) {
        (Some(spec), _) => task_requirements(spec)?,
        (None, Some(path)) => {
            let req: TaskRequirements = serde_json::from_str(&read(path)?)
                .with_context(|| format!("malformed requirements {}", path.display()))
                .usage()?;
            req.validate().usage()?;
            req
        }
        (None, None) => TaskRequirements::default(),
    };
    let netlist = load_netlist(file)?;
    let report = lint(&netlist, &req);
    println!("{}", report.to_json());
    Ok(report.is_valid())
}

fn flat(netlist: &Netlist) -> Result<Netlist, Failure> {
    if netlist.elements.iter().any(|e| e.kind() == ElementKind::Subckt) {
        flatten(netlist).domain()
    } else {
        Ok(netlist.clone())
    }
}

fn cmd_classify(file: &Path) -> Outcome {
    let netlist = flat(&load_netlist(file)?)?;
    print_json(&compute_metrics(&netlist));
    Ok(true)
}

fn value(token: &str) -> Result<f64, Failure> {
    parse_value(token)
        .map_err(|e| anyhow!("bad numeric value `{token}`: {e}"))
        .usage()
}

enum Run {
    Op,
    Dc(String, f64, f64, f64),
    Tran(f64, f64),
}

fn requested_runs(args: &SimulateArgs, netlist: &Netlist) -> Result<Vec<Run>, Failure> {
    let mut runs = Vec::new();
    if args.op {
        runs.push(Run::Op);
    }
    if let Some(dc) = &args.dc {
        runs.push(Run::Dc(dc[0].clone(), value(&dc[1])?, value(&dc[2])?, value(&dc[3])?));
    }
    if let Some(tran) = &args.tran {
        runs.push(Run::Tran(value(&tran[0])?, value(&tran[1])?));
    }
    if runs.is_empty() {
        for d in &netlist.directives {
            match d {
                AnalysisDirective::Op => runs.push(Run::Op),
                AnalysisDirective::Dc {
                    source,
                    start,
                    stop,
                    step,
                } => runs.push(Run::Dc(source.clone(), *start, *stop, *step)),
                AnalysisDirective::Tran { tstep, tstop, .. } => runs.push(Run::Tran(*tstep, *tstop)),
                _ => {}
            }
        }
    }
    if runs.is_empty() {
        runs.push(Run::Op);
    }
    Ok(runs)
}

fn engine_check(
    netlist: &Netlist,
    command: &str,
    internal: &BTreeMap<spicepilot_core::netlist::NodeId, f64>,
) -> Result<serde_json::Value, Failure> {
    let workdir = std::env::temp_dir().join(format!("spicepilot-engine-{}", std::process::id()));
    let run = external_engine_run(netlist, &EngineConfig::new(command), &workdir);
    let _ = fs::remove_dir_all(&workdir);
    let run = match run {
        Ok(run) => run,
        Err(e) => return Ok(json!({ "error": e.to_string() })),
    };
    let Some(engine) = run.node_voltages else {
        return Ok(json!({ "error": "engine output has no node voltage table" }));
    };
    let mut worst: f64 = 0.0;
    for (node, v) in &engine {
        if let Some(mine) = internal.get(node) {
            let scale = v.abs().max(1e-6);
            worst = worst.max((mine - v).abs() / scale);
        }
    }
    Ok(json!({ "node_voltages": engine, "max_relative_difference": worst }))
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome {
    let config = args.config.as_deref().map(CliConfig::load).transpose().usage()?;
    let options = config.as_ref().map(|c| c.sim.options.clone()).unwrap_or_default();
    let engine = args
        .engine
        .clone()
        .or_else(|| config.as_ref().and_then(|c| c.sim.engine.clone()))
        .or_else(|| std::env::var(ENGINE_ENV).ok().filter(|s| !s.trim().is_empty()));
    let netlist = load_netlist(&args.file)?;
    let runs = requested_runs(args, &netlist)?;
    if args.csv.is_some() && !runs.iter().any(|r| matches!(r, Run::Tran(..))) {
        return Err(Failure::Usage(anyhow!("--csv needs a transient analysis")));
    }

    let mut out = serde_json::Map::new();
    for run in runs {
        match run {
            Run::Op => {
                let op = dc_operating_point(&netlist, &options).domain()?;
                let mut entry = serde_json::to_value(&op).expect("solution serializes");
                if let Some(command) = &engine {
                    entry["engine"] = engine_check(&netlist, command, &op.node_voltages)?;
                }
                out.insert("op".into(), entry);
            }
            Run::Dc(source, start, stop, step) => {
                let sweep = dc_sweep(&netlist, &source, start, stop, step, &options).domain()?;
                out.insert("dc".into(), serde_json::to_value(&sweep).expect("sweep serializes"));
            }
            Run::Tran(tstep, tstop) => {
                let trace = transient(&netlist, tstep, tstop, &options).domain()?;
                if let Some(path) = &args.csv {
                    write_file(path, &trace.to_csv())?;
                }
                let last = trace.times.len() - 1;
                let final_voltages: BTreeMap<_, _> = trace
                    .node_voltages
                    .iter()
                    .map(|(n, s)| (n.as_str().to_string(), s[last]))
                    .collect();
                out.insert(
                    "tran".into(),
                    json!({
                        "points": trace.times.len(),
                        "tstop": trace.times[last],
                        "final_voltages": final_voltages,
                        "csv": args.csv.as_ref().map(|p| p.display().to_string()),
                    }),
                );
            }
        }
    }
    print_json(&out);
    Ok(true)
}

struct BenchInputs {
    suite: Vec<Task>,
    prompt: PilotPrompt,
    provider: Box<dyn Provider>,
    options: BenchOptions,
    out: PathBuf,
    dataset: PathBuf,
}

#[allow(clippy::too_many_arguments)]
fn bench_inputs(
    suite: Option<PathBuf>,
    config_path: Option<PathBuf>,
    provider: ProviderKind,
    replay_dir: Option<PathBuf>,
    out: Option<PathBuf>,
    dataset: Option<PathBuf>,
    n: Option<u32>,
    max_iters: Option<u32>,
    concurrency: Option<usize>,
) -> anyhow::Result<BenchInputs> {
    let config = match &config_path {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let suite_path = suite
        .or(config.paths.suite.clone())
        .ok_or_else(|| anyhow!("no task suite: pass --suite or set paths.suite"))?;
    let suite = load_suite(&suite_path)?;
    let out = out
        .or(config.paths.runs.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set paths.runs"))?;
    let dataset = dataset
        .or(config.paths.dataset.clone())
        .unwrap_or_else(|| out.join("dataset.jsonl"));
    let prompt = match &config.paths.prompt {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let prompt: PilotPrompt = serde_json::from_str(&text).with_context(|| format!("malformed prompt {}", p.display()))?;
            prompt.validate()?;
            prompt
        }
        None => PilotPrompt::default(),
    };
    let provider: Box<dyn Provider> = match provider {
        ProviderKind::Replay => {
            let dir = replay_dir
                .or(config.paths.replay.clone())
                .ok_or_else(|| anyhow!("replay provider needs --replay-dir or paths.replay"))?;
            if !dir.is_dir() {
                bail!("replay directory {} does not exist", dir.display());
            }
            Box::new(ReplayProvider::new(dir))
        }
        ProviderKind::Live => Box::new(LiveProvider::from_env(
            config.provider.live_config(),
            &config.provider.api_key_env,
        )?),
    };
    let options = BenchOptions {
        n_attempts: n.unwrap_or(config.bench.n_attempts),
        concurrency: concurrency.unwrap_or(config.provider.concurrency),
        repair: RepairOptions {
            max_iters: max_iters.unwrap_or(config.bench.max_iters),
            sim: config.sim.options.clone(),
        },
    };
    Ok(BenchInputs {
        suite,
        prompt,
        provider,
        options,
        out,
        dataset,
    })
}

fn cmd_bench(command: BenchCommand) -> Outcome {
    match command {
        BenchCommand::Run {
            suite,
            config,
            provider,
            replay_dir,
            out,
            dataset,
            n,
            max_iters,
            concurrency,
        } => {
            let inputs = bench_inputs(suite, config, provider, replay_dir, out, dataset, n, max_iters, concurrency)
                .usage()?;
            let store = RunStore::open(&inputs.out).usage()?;
            let dataset = DatasetStore::open(&inputs.dataset).usage()?;
            let records = run_benchmark(
                &inputs.suite,
                inputs.provider.as_ref(),
                &inputs.prompt,
                &inputs.options,
                &store,
                Some(&dataset),
            )
            .usage()?;
            let summary: Vec<_> = records
                .iter()
                .map(|r| {
                    json!({
                        "task_id": r.task_id,
                        "difficulty": r.difficulty,
                        "n": r.n,
                        "c": r.c,
                        "verdicts": r.attempts.iter().map(|a| a.final_verdict).collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(&json!({
                "records": store.path().display().to_string(),
                "dataset": dataset.path().display().to_string(),
                "dataset_records": dataset.len(),
                "tasks": summary,
            }));
            Ok(true)
        }
        BenchCommand::Score {
            records,
            k,
            suite,
            csv,
            json: as_json,
        } => {
            let records = load_records(&records).usage()?;
            let suite = suite.as_deref().map(load_suite).transpose().usage()?;
            let table = score(&records, &k, suite.as_deref()).domain()?;
            if csv {
                print!("{}", table.render_csv());
            } else if as_json {
                print_json(&table);
            } else {
                print!("{}", table.render_text());
            }
            Ok(true)
        }
        BenchCommand::Suggest { records, threshold } => {
            let records = load_records(&records).usage()?;
            let reports: Vec<_> = records
                .iter()
                .flat_map(|r| &r.attempts)
                .flat_map(|a| &a.iterations)
                .filter_map(|t| t.judgement.as_ref().and_then(|j| j.lint.clone()))
                .collect();
            print_json(&suggest_guidelines(&reports, threshold));
            Ok(true)
        }
    }
}

fn cmd_dataset(command: DatasetCommand) -> Outcome {
    match command {
        DatasetCommand::Export { store, out } => {
            if !store.exists() {
                return Err(Failure::Usage(anyhow!("dataset store {} does not exist", store.display())));
            }
            let store = DatasetStore::open(&store).domain()?;
            store.export(&out).usage()?;
            eprintln!("exported {} records to {}", store.len(), out.display());
            Ok(true)
        }
    }
}

fn init_logging() {
    let ansi = std::env::var_os("NO_COLOR").is_none() && std::io::stderr().is_terminal();
    let filter = tracing_subscriber::EnvFilter::try_from_env("SPICEPILOT_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(ansi)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging();
    let outcome = match cli.command {
        Command::Parse { file, json } => cmd_parse(&file, json),
        Command::Lint {
            file,
            task,
            requirements,
        } => cmd_lint(&file, task.as_deref(), requirements.as_deref()),
        Command::Classify { file } => cmd_classify(&file),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Bench { command } => cmd_bench(command),
        Command::Dataset { command } => cmd_dataset(command),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
