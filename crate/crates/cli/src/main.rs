use std::path::PathBuf;
use std::sync::mpsc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use symhom_cli::config::{RunConfig, Task};
use symhom_cli::run::{emit, execute, Job};
use symhom_cli::CliError;

#[derive(Parser)]
#[command(name = "symhom", version, about = "Symplectic homogenization on T*T^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Run configuration (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated horizons, e.g. 1,2,4 (overrides k_list).
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock budget; the run aborts with exit code 3 when exceeded.
    #[arg(long)]
    budget_seconds: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Selector tables h_k on a momentum grid.
    Homogenize(Common),
    /// Rotations of momentum-returning orbits.
    Orbits(Common),
    /// Invariant measures with prescribed rotation.
    Measures(Common),
    /// Clarke, limit and strong differentials of the selector tables.
    Subdiff(Common),
    /// Periodic-orbit census and capacities.
    Census(Common),
    /// Rotation-action set of the last selector table.
    Rset(Common),
}

fn prepare(task: Task, c: Common) -> Result<(Job, PathBuf, Option<u64>), CliError> {
    let mut config = RunConfig::load(&c.config)?;
    if let Some(t) = config.task {
        if t != task {
            return Err(CliError::Config(format!("task: configuration says {} but the subcommand is {}", t.name(), task.name())));
        }
    }
    config.task = Some(task);
    if let Some(k) = c.k {
        config.k_list = k;
    }
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if c.budget_seconds.is_some() {
        config.budget_seconds = c.budget_seconds;
    }
    let out = c.out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    config.output_dir = None;
    config.validate(task)?;
    let base = c.config.parent().map(PathBuf::from).unwrap_or_default();
    let hamiltonian = config.resolve_hamiltonian(&base)?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("output_dir: {e}")))?;
    let cache_dir = config.cache.then(|| out.join("cache"));
    let budget = config.budget_seconds;
    Ok((Job { task, config, hamiltonian, cache_dir }, out, budget))
}

fn run(task: Task, c: Common) -> Result<(), CliError> {
    let (job, out, budget) = prepare(task, c)?;
    let job = std::sync::Arc::new(job);
    let (tx, rx) = mpsc::channel();
    let worker = job.clone();
    std::thread::spawn(move || {
        let _ = tx.send(execute(&worker));
    });
    let result = match budget {
        Some(b) => rx.recv_timeout(Duration::from_secs(b)).map_err(|_| CliError::BudgetExceeded(b))?,
        None => rx.recv().expect("worker reports a result"),
    };
    let (artifacts, runtime) = result?;
    emit(&out, &job, &artifacts, runtime)?;
    println!("{} finished in {:.2} s; {} artifacts written to {}", task.name(), runtime, artifacts.len(), out.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let (task, common) = match cli.command {
        Command::Homogenize(c) => (Task::Homogenize, c),
        Command::Orbits(c) => (Task::Orbits, c),
        Command::Measures(c) => (Task::Measures, c),
        Command::Subdiff(c) => (Task::Subdiff, c),
        Command::Census(c) => (Task::Census, c),
        Command::Rset(c) => (Task::Rset, c),
    };
    if let Err(e) = run(task, common) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
