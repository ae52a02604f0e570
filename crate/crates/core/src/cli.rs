//! Command-line front end. Every command writes a machine-readable report
//! (JSON or CSV) to `--output` or standard output; when the report goes to a
//! file a short human-readable table is printed as well.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::allocator::{allocate_exact, allocate_greedy};
use crate::compat::{enumerate_partitions, Partition};
use crate::error::Error;
use crate::io::{parse_problem, LoadedProblem};
use crate::mcts::{
    search_root_parallel, Exploitation, LeafEvaluator, MctsParams, SearchBudget, TaskOutcome,
    DEFAULT_CP,
};
use crate::model::{Allocation, TaskType};
use crate::scenario::{self, compare, load_scenario, Mode, Scenario, Summary, CROWN_LIKE};

/// Iterations used by `search` when neither budget flag is given.
pub const DEFAULT_SEARCH_ITERATIONS: u64 = 1000;

#[derive(Debug, Parser)]
#[command(
    name = "qram",
    version,
    about = "Utility-maximising resource allocation with concurrent task search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Allocate every task on its own (no concurrency).
    Allocate(AllocateArgs),
    /// Search the combination tree for the best concurrent allocation.
    Search(SearchArgs),
    /// Allocate every leaf of the combination tree.
    Enumerate(EnumerateArgs),
    /// Run a scenario once and write per-epoch metrics as CSV.
    Simulate(SimulateArgs),
    /// Run a scenario in both modes over several seeds.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Use the exhaustive oracle instead of the greedy allocator.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Iteration cap (1000 when no budget flag is given).
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Wall-clock cap; results then depend on machine speed.
    #[arg(long)]
    pub time_budget_ms: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_CP)]
    pub cp: f64,
    /// Independent searches with seeds `seed..seed+runs`, best one reported.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, value_enum, default_value_t = ExploitationArg::Mean)]
    pub exploitation: ExploitationArg,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file; the bundled crown_like storyboard when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Multi)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the scenario's search iterations.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Overrides the scenario's exploration constant.
    #[arg(long)]
    pub cp: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scenario file; the bundled crown_like storyboard when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for per-run CSVs and summary.json.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub runs: usize,
    /// Seed of the first run; run `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub cp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Standard,
    #[value(alias = "multioperation")]
    Multi,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Standard => Mode::Standard,
            ModeArg::Multi => Mode::Multioperation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExploitationArg {
    Mean,
    Best,
}

impl From<ExploitationArg> for Exploitation {
    fn from(e: ExploitationArg) -> Self {
        match e {
            ExploitationArg::Mean => Exploitation::Mean,
            ExploitationArg::Best => Exploitation::Best,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] Error),
}

impl CliError {
    /// 2 for bad input, 3 when a size or budget guard refused the work.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(e) if e.is_budget_error() => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(p) => fs::write(p, bytes).map_err(io_err(p)),
        None => io::stdout()
            .write_all(bytes)
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("reports serialise");
    s.push(b'\n');
    s
}

fn load_problem(path: &Path) -> CliResult<LoadedProblem> {
    Ok(parse_problem(&read(path)?)?)
}

fn load_scenario_or_default(path: Option<&Path>) -> CliResult<Scenario> {
    Ok(match path {
        Some(p) => load_scenario(&read(p)?)?,
        None => load_scenario(CROWN_LIKE)?,
    })
}

#[derive(Debug, Serialize)]
pub struct Usage {
    pub resource: String,
    pub used: f64,
    pub bound: f64,
}

#[derive(Debug, Serialize)]
pub struct AllocatedTask {
    pub task_id: u64,
    pub task_type: TaskType,
    pub config_id: usize,
    pub quality: f64,
    pub utility: f64,
}

#[derive(Debug, Serialize)]
pub struct AllocationReport {
    pub method: &'static str,
    pub total_utility: f64,
    pub feasible: bool,
    pub tasks: Vec<AllocatedTask>,
    pub usage: Vec<Usage>,
}

#[derive(Debug, Serialize)]
pub struct SearchReport {
    pub seed: u64,
    pub runs: usize,
    pub best_utility: f64,
    pub baseline_utility: f64,
    /// Blocks of task ids.
    pub best_partition: Vec<Vec<u64>>,
    pub iterations_run: u64,
    pub leaf_evaluations: usize,
    pub utility_trace: Vec<(u64, f64)>,
    pub tasks: Vec<TaskOutcome>,
    pub usage: Vec<Usage>,
}

#[derive(Debug, Serialize)]
pub struct EnumeratedPartition {
    pub blocks: Vec<Vec<u64>>,
    pub utility: f64,
}

#[derive(Debug, Serialize)]
pub struct EnumerateReport {
    pub count: usize,
    /// Sorted by utility, best first.
    pub partitions: Vec<EnumeratedPartition>,
}

fn usage(lp: &LoadedProblem, alloc: &Allocation) -> Vec<Usage> {
    lp.resource_names
        .iter()
        .enumerate()
        .map(|(j, name)| Usage {
            resource: name.clone(),
            used: alloc.used[j],
            bound: lp.bounds[j],
        })
        .collect()
}

fn block_ids(lp: &LoadedProblem, part: &Partition) -> Vec<Vec<u64>> {
    part.blocks()
        .iter()
        .map(|b| b.members().map(|i| lp.tasks[i].id).collect())
        .collect()
}

pub fn cmd_allocate(args: &AllocateArgs) -> CliResult<AllocationReport> {
    let lp = load_problem(&args.input)?;
    let problem = lp.problem()?;
    info!("allocating {} tasks", problem.executables().len());
    let alloc = if args.exact {
        allocate_exact(&problem)?
    } else {
        allocate_greedy(&problem)?
    };
    let tasks = problem
        .executables()
        .iter()
        .map(|t| {
            let cid = alloc.choices[&t.id];
            let c = t
                .configs
                .iter()
                .find(|c| c.id == cid)
                .expect("chosen config exists");
            AllocatedTask {
                task_id: t.id,
                task_type: t.task_type,
                config_id: cid,
                quality: c.quality,
                utility: t.weight * c.utility,
            }
        })
        .collect();
    Ok(AllocationReport {
        method: if args.exact { "exact" } else { "greedy" },
        total_utility: alloc.total_utility,
        feasible: alloc.used.fits_within(&lp.bounds),
        tasks,
        usage: usage(&lp, &alloc),
    })
}

pub fn cmd_search(args: &SearchArgs) -> CliResult<SearchReport> {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    if !(args.cp.is_finite() && args.cp >= 0.0) {
        return Err(CliError::Usage("--cp must be a non-negative number".into()));
    }
    let lp = load_problem(&args.input)?;
    let budget = SearchBudget {
        max_iterations: match (args.iterations, args.time_budget_ms) {
            (None, None) => Some(DEFAULT_SEARCH_ITERATIONS),
            (it, _) => it,
        },
        deadline: args.time_budget_ms.map(Duration::from_millis),
    };
    let params = MctsParams {
        cp: args.cp,
        exploitation: args.exploitation.into(),
    };
    let ev = LeafEvaluator::new(&lp.compat, &lp.tasks, &lp.bounds, &lp.rule)?;
    let seeds: Vec<u64> = (0..args.runs as u64)
        .map(|i| args.seed.wrapping_add(i))
        .collect();
    info!(
        "searching {} tasks with {} seed(s)",
        lp.tasks.len(),
        seeds.len()
    );
    let r = search_root_parallel(&ev, budget, &seeds, params)?;
    Ok(SearchReport {
        seed: args.seed,
        runs: args.runs,
        best_utility: r.best_utility,
        baseline_utility: r.baseline_utility,
        best_partition: block_ids(&lp, &r.best_partition),
        iterations_run: r.iterations_run,
        leaf_evaluations: r.leaf_evaluations,
        tasks: ev.outcomes(&r.best_partition, &r.best_allocation),
        usage: usage(&lp, &r.best_allocation),
        utility_trace: r.utility_trace,
    })
}

pub fn cmd_enumerate(args: &EnumerateArgs) -> CliResult<EnumerateReport> {
    let lp = load_problem(&args.input)?;
    let parts = enumerate_partitions(&lp.compat)?;
    info!("allocating {} partitions", parts.len());
    let ev = LeafEvaluator::new(&lp.compat, &lp.tasks, &lp.bounds, &lp.rule)?;
    let mut rows = parts
        .iter()
        .map(|p| {
            Ok(EnumeratedPartition {
                blocks: block_ids(&lp, p),
                utility: ev.evaluate(p)?.total_utility,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    rows.sort_by(|a, b| b.utility.total_cmp(&a.utility));
    Ok(EnumerateReport {
        count: rows.len(),
        partitions: rows,
    })
}

fn apply_overrides(sc: &mut Scenario, iterations: Option<u64>, cp: Option<f64>) -> CliResult<()> {
    if let Some(it) = iterations {
        sc.search.iterations = it;
    }
    if let Some(cp) = cp {
        if !(cp.is_finite() && cp >= 0.0) {
            return Err(CliError::Usage("--cp must be a non-negative number".into()));
        }
        sc.search.cp = cp;
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<scenario::MetricsSeries> {
    let mut sc = load_scenario_or_default(args.input.as_deref())?;
    apply_overrides(&mut sc, args.iterations, args.cp)?;
    info!(
        "simulating {} in {} mode, seed {}",
        sc.name,
        Mode::from(args.mode).as_str(),
        args.seed
    );
    Ok(scenario::run(&sc, args.mode.into(), args.seed)?)
}

pub fn cmd_compare(args: &CompareArgs) -> CliResult<scenario::Comparison> {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let mut sc = load_scenario_or_default(args.input.as_deref())?;
    apply_overrides(&mut sc, args.iterations, args.cp)?;
    info!("comparing modes on {} over {} runs", sc.name, args.runs);
    Ok(compare(&sc, args.runs, args.seed)?)
}

pub fn summary_table(standard: &Summary, multi: &Summary) -> String {
    let mut s = format!(
        "{:<15}{:>12}{:>12}{:>12}{:>12}{:>12}\n",
        "mode", "median", "min", "max", "mean", "std"
    );
    for (name, x) in [("standard", standard), ("multioperation", multi)] {
        let _ = writeln!(
            s,
            "{:<15}{:>12.2}{:>12.2}{:>12.2}{:>12.2}{:>12.2}",
            name, x.median, x.min, x.max, x.mean, x.std
        );
    }
    s
}

fn csv_bytes(series: &scenario::MetricsSeries) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    Ok(buf)
}

/// Runs one parsed command, writing reports and tables.
pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Allocate(a) => {
            let r = cmd_allocate(a)?;
            emit(a.output.as_deref(), &to_json(&r))?;
            if a.output.is_some() {
                println!(
                    "{} utility {:.4} (feasible: {})",
                    r.method, r.total_utility, r.feasible
                );
                for u in &r.usage {
                    println!("  {:<12}{:>10.4} / {:.4}", u.resource, u.used, u.bound);
                }
            }
        }
        Command::Search(a) => {
            let r = cmd_search(a)?;
            emit(a.output.as_deref(), &to_json(&r))?;
            if a.output.is_some() {
                println!("baseline utility {:.4}", r.baseline_utility);
                println!(
                    "best utility     {:.4}  partition {:?}",
                    r.best_utility, r.best_partition
                );
            }
        }
        Command::Enumerate(a) => {
            let r = cmd_enumerate(a)?;
            emit(a.output.as_deref(), &to_json(&r))?;
            if a.output.is_some() {
                for p in &r.partitions {
                    println!("{:>12.4}  {:?}", p.utility, p.blocks);
                }
            }
        }
        Command::Simulate(a) => {
            let series = cmd_simulate(a)?;
            emit(a.output.as_deref(), &csv_bytes(&series)?)?;
            if a.output.is_some() {
                println!(
                    "{} seed {} total utility {:.2}",
                    series.mode.as_str(),
                    series.seed,
                    series.total_utility()
                );
            }
        }
        Command::Compare(a) => {
            let c = cmd_compare(a)?;
            if let Some(dir) = &a.output {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
                for run in &c.runs {
                    for series in [&run.standard, &run.multioperation] {
                        let path =
                            dir.join(format!("run_{}_{}.csv", run.seed, series.mode.as_str()));
                        emit(Some(&path), &csv_bytes(series)?)?;
                    }
                }
                emit(Some(&dir.join("summary.json")), &to_json(&c.summary))?;
            }
            print!(
                "{}",
                summary_table(&c.summary.standard, &c.summary.multioperation)
            );
        }
    }
    Ok(())
}
