//! `noclat`: NoC latency model and simulator.
//!
//! Exit status: 0 success, 1 runtime or I/O failure, 2 bad usage or config,
//! 3 a sweep point is unstable, 4 the model fixed point did not converge.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use deflect_noc::harness::{self, report, ExperimentConfig, Status};
use deflect_noc::par::{with_workers, Execution};
use deflect_noc::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "noclat", version, about = "Latency model and simulator for NoCs with deflection routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytical model over the sweep.
    Analyze(Common),
    /// Run the cycle-accurate simulator over the sweep and seeds.
    Simulate(Common),
    /// Compare model and simulator at every sweep point.
    Validate(Common),
    /// Time the analytical model on uniform traffic for several mesh sizes.
    Bench(BenchArgs),
    /// Compare per-row and per-column deflected traffic of model and simulator.
    DeflectionCheck(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Args)]
struct Output {
    /// Output directory; defaults to the config's `out_dir` or `results`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweep points and seeds.
    #[arg(long, env = "NOCLAT_WORKERS", value_name = "N")]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Use seeds 1..=N instead of the config's list.
    #[arg(long, value_name = "N")]
    seeds: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated mesh sizes such as `6x6,16x16`.
    #[arg(long, default_value = "4x4,6x6,8x8,12x12,16x16")]
    sizes: String,
    #[arg(long, default_value_t = 0.05)]
    rate: f64,
    #[arg(long, default_value_t = 0.3)]
    deflect_prob: f64,
    /// Run the per-class solves on one thread.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    output: Output,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Config { .. } | Error::InvalidParameter(_)) => EXIT_CONFIG,
            Some(Error::Unstable { .. }) => EXIT_UNSTABLE,
            Some(Error::NonConvergence { .. }) => EXIT_NOT_CONVERGED,
            _ => EXIT_FAILURE,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers = match &cli.command {
        Command::Bench(b) => b.output.workers,
        Command::Analyze(c) | Command::Simulate(c) | Command::Validate(c) | Command::DeflectionCheck(c) => {
            c.output.workers
        }
    };
    match with_workers(workers, || dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Analyze(c) => analyze(&c),
        Command::Simulate(c) => simulate(&c),
        Command::Validate(c) => validate(&c),
        Command::Bench(b) => bench(&b),
        Command::DeflectionCheck(c) => deflection_check(&c),
    }
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = ExperimentConfig::load(&c.config)
        .map_err(|e| Failure::from(anyhow::Error::from(e).context(format!("reading {}", c.config.display()))))?;
    if let Some(n) = c.seeds {
        if n == 0 {
            return Err(Error::Config {
                field: "--seeds".into(),
                message: "need at least one seed".into(),
            }
            .into());
        }
        cfg.sim.seeds = (1..=n).collect();
    }
    let out = out_dir(&c.output, cfg.out_dir.as_deref());
    Ok((cfg, out))
}

fn out_dir(o: &Output, from_config: Option<&Path>) -> PathBuf {
    let Format::Csv = o.format;
    o.out
        .clone()
        .or_else(|| from_config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn write<T: serde::Serialize>(dir: &Path, name: &str, rows: &[T]) -> CmdResult {
    let path = dir.join(name);
    report::write_csv(&path, rows)
        .map_err(anyhow::Error::from)
        .with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn analyze(c: &Common) -> CmdResult {
    let (cfg, out) = load(c)?;
    let results = harness::analyze(&cfg, Execution::default());
    let mut aggregate = Vec::new();
    let mut classes = Vec::new();
    for (point, outcome) in &results {
        aggregate.push(harness::aggregate_row(*point, outcome));
        if let Ok(r) = outcome {
            classes.extend(harness::class_rows(*point, r));
        }
    }
    write(&out, "aggregate.csv", &aggregate)?;
    write(&out, "classes.csv", &classes)?;
    print!("{}", report::to_csv_string(&aggregate)?);

    // Instability outranks non-convergence in the exit status.
    for (_, outcome) in &results {
        if let Err(e @ Error::Unstable { .. }) = outcome {
            return Err(Failure {
                code: EXIT_UNSTABLE,
                error: anyhow::anyhow!("{e}"),
            });
        }
    }
    for (_, outcome) in &results {
        match outcome {
            Ok(r) => harness::require_converged(r)?,
            Err(e) => {
                return Err(Failure {
                    code: EXIT_FAILURE,
                    error: anyhow::anyhow!("{e}"),
                })
            }
        }
    }
    Ok(())
}

fn simulate(c: &Common) -> CmdResult {
    let (cfg, out) = load(c)?;
    let mut rows = Vec::new();
    for (point, _, stats) in harness::simulate(&cfg, Execution::default()) {
        rows.push(harness::sim_row(point, &stats?));
    }
    write(&out, "sim.csv", &rows)?;
    print!("{}", report::to_csv_string(&rows)?);
    Ok(())
}

fn validate(c: &Common) -> CmdResult {
    let (cfg, out) = load(c)?;
    let rows = harness::validate(&cfg, Execution::default());
    let summary = harness::summarize(&rows);
    write(&out, "comparison.csv", &rows)?;
    write(&out, "summary.csv", std::slice::from_ref(&summary))?;
    print!("{}", report::to_csv_string(&rows)?);
    for r in rows.iter().filter(|r| r.status != Status::Ok) {
        log::warn!(
            "point rate={} burst={} p_d={}: {}",
            r.rate,
            r.burst_prob,
            r.deflect_prob,
            r.note
        );
    }
    eprint!("{}", report::to_csv_string(&[summary])?);
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<(usize, usize)>, Failure> {
    let bad = |s: &str| Failure {
        code: EXIT_CONFIG,
        error: anyhow::anyhow!("bad mesh size {s:?}, expected ROWSxCOLS"),
    };
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| bad(s))?;
            Ok((r.parse().map_err(|_| bad(s))?, c.parse().map_err(|_| bad(s))?))
        })
        .collect()
}

fn bench(b: &BenchArgs) -> CmdResult {
    let sizes = parse_sizes(&b.sizes)?;
    let exec = if b.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let rows = harness::bench(&sizes, b.rate, b.deflect_prob, exec)?;
    write(&out_dir(&b.output, None), "bench.csv", &rows)?;
    print!("{}", report::to_csv_string(&rows)?);
    Ok(())
}

fn deflection_check(c: &Common) -> CmdResult {
    let (cfg, out) = load(c)?;
    let rows = harness::deflection_check(&cfg, Execution::default())?;
    if rows.iter().all(|r| r.degenerate) {
        log::warn!("no deflections in model or simulation; accuracy is vacuous");
    }
    write(&out, "deflection.csv", &rows)?;
    print!("{}", report::to_csv_string(&rows)?);
    Ok(())
}
