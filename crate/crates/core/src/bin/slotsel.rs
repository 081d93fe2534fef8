use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use slotsel::harness::{run_sweep, solve_record, validate_record, Algo, ResultRecord, SolveOptions, SweepGrid};
use slotsel::ingest::{gen_synthetic, ExperimentParams};
use slotsel::ProblemInstance;

/// Multi-product billboard slot selection.
#[derive(Parser)]
#[command(name = "slotsel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from an experiment config (TOML).
    Gen {
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance and write a result record (JSON).
    Solve {
        instance: PathBuf,
        #[arg(short, long)]
        algo: Algo,
        #[command(flatten)]
        solver: SolverArgs,
        /// Leave out wall_ms so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep (TOML grid) and write per-run and per-cell CSVs.
    Sweep {
        config: PathBuf,
        /// Per-run CSV.
        #[arg(short, long)]
        out: PathBuf,
        /// Per-cell means CSV; defaults to <out stem>.summary.csv.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Check an instance file, and optionally a result record against it.
    Validate {
        instance: PathBuf,
        #[arg(short, long)]
        result: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Failure probability for the sampler.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Fixed number of sampled permutations (rand); sized adaptively if omitted.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pilot: usize,
    #[arg(long, default_value_t = 4096)]
    max_samples: usize,
    #[arg(long, default_value_t = 100)]
    cg_steps: usize,
    #[arg(long, default_value_t = 64)]
    mc_samples: usize,
}

impl From<SolverArgs> for SolveOptions {
    fn from(a: SolverArgs) -> Self {
        SolveOptions {
            seed: a.seed,
            epsilon: a.epsilon,
            delta: a.delta,
            samples: a.samples,
            pilot: a.pilot,
            max_samples: a.max_samples,
            cg_steps: a.cg_steps,
            mc_samples: a.mc_samples,
        }
    }
}

enum Outcome {
    Ok,
    Invalid,
    InfeasibleOnly,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}")?;
            Ok(())
        }
    }
}

fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ProblemInstance::from_json(&text).with_context(|| format!("{}", path.display()))
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let params = ExperimentParams::from_toml(&text).with_context(|| format!("{}", config.display()))?;
            let inst = gen_synthetic(&params, (params.n_slots, params.n_users))?;
            emit(out.as_deref(), &inst.to_json()?)?;
            if let Some(a) = &inst.audit {
                eprintln!(
                    "sigma*={:.3} alpha={:.4} beta={:.4} r={} slots={} users={}",
                    a.sigma_star,
                    a.alpha,
                    a.beta,
                    a.sparsity,
                    inst.n_slots(),
                    inst.matrix.n_users()
                );
            }
        }
        Command::Solve { instance, algo, solver, no_timing, out } => {
            let inst = read_instance(&instance)?;
            let rec = solve_record(&inst, algo, &solver.into(), !no_timing)?;
            emit(out.as_deref(), &rec.to_json()?)?;
            eprintln!(
                "{algo}: satisfied {}/{} cost {} slots {}",
                rec.satisfied,
                inst.n_products(),
                rec.total_cost,
                rec.slots_used
            );
        }
        Command::Sweep { config, out, summary, threads, no_timing } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut grid = SweepGrid::from_toml(&text).with_context(|| format!("{}", config.display()))?;
            if threads.is_some() {
                grid.threads = threads;
            }
            if no_timing {
                grid.timing = false;
            }
            let result = run_sweep(&grid)?;
            let summary = summary.unwrap_or_else(|| {
                let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                out.with_file_name(format!("{stem}.summary.csv"))
            });
            result.write_rows(fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?)?;
            result.write_summary(
                fs::File::create(&summary).with_context(|| format!("creating {}", summary.display()))?,
            )?;
            let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!("{} runs ({failed} failed) -> {}, {}", result.rows.len(), out.display(), summary.display());
            if result.infeasible_only() {
                eprintln!("no run met every demand");
                return Ok(Outcome::InfeasibleOnly);
            }
        }
        Command::Validate { instance, result } => {
            let inst = match read_instance(&instance) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("invalid: {e:#}");
                    return Ok(Outcome::Invalid);
                }
            };
            if let Some(path) = result {
                let checked = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))
                    .and_then(|t| serde_json::from_str::<ResultRecord>(&t).context("parsing result record"))
                    .and_then(|rec| validate_record(&inst, &rec).map_err(Into::into));
                if let Err(e) = checked {
                    eprintln!("invalid: {}: {e:#}", path.display());
                    return Ok(Outcome::Invalid);
                }
            }
            eprintln!("ok");
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Invalid) => ExitCode::from(2),
        Ok(Outcome::InfeasibleOnly) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<slotsel::Error>(), Some(slotsel::Error::Validation(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
