use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dsclust_cli::bench::{self, BenchConfig};
use dsclust_cli::frames;
use dsclust_cli::solve::{self, load_problem, Method, Problem, SolveOptions, Start};
use dsclust_core::lattice::{generate_lattice_problem, ProblemSpec};
use dsclust_core::neural::NetParams;
use dsclust_core::oracle::brute_force_min;
use dsclust_core::EvidenceSet;

/// Exit status for runs that stopped before every network row committed.
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "dsclust",
    version,
    about = "Cluster Dempster-Shafer evidence by minimizing metaconflict"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a lattice problem as JSON.
    Gen {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one problem and print its run record.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum)]
        method: Method,
        #[command(flatten)]
        solver: SolverArgs,
        /// Network iterations to capture, e.g. 1,11,21 (neural only).
        #[arg(long, value_delimiter = ',', requires = "out")]
        snapshots: Vec<usize>,
        /// Directory for record.json and snapshot frames.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded runs over sizes and methods; writes runs.csv and summary.json.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "3,4,5,6")]
        size: Vec<usize>,
        #[arg(
            long,
            value_delimiter = ',',
            value_enum,
            default_value = "iterative,neural"
        )]
        method: Vec<Method>,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Exhaustive minimum for small problems.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert text snapshot frames to PGM images.
    Render {
        #[arg(required = true)]
        frames: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Lattice size n (2^n - 1 evidences).
    #[arg(long, required_unless_present = "problem", conflicts_with = "problem")]
    size: Option<usize>,
    /// Evidence set JSON written by `gen`.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    clusters: Option<usize>,
    /// Network parameters as JSON; missing fields keep their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Use the network parameters as given instead of rescaling to the problem size.
    #[arg(long)]
    no_scale: bool,
    #[arg(long, value_enum, default_value_t = Start::Random)]
    start: Start,
}

impl SolverArgs {
    fn options(&self, snapshots: Vec<usize>) -> anyhow::Result<SolveOptions> {
        let params = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let params: NetParams = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                params.validate()?;
                params
            }
            None => NetParams::default(),
        };
        Ok(SolveOptions {
            clusters: self.clusters,
            params,
            scale: !self.no_scale,
            start: self.start,
            snapshots,
        })
    }
}

fn load(problem: &ProblemArgs) -> anyhow::Result<Option<EvidenceSet>> {
    Ok(match &problem.problem {
        Some(path) => Some(load_problem(path)?),
        None => None,
    })
}

fn write_json(out: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?
        }
        None => emit(&(text + "\n"))?,
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Gen { size, seed, out } => {
            let es = generate_lattice_problem(&ProblemSpec::new(size, seed))?;
            write_json(out.as_deref(), &es)?;
        }
        Command::Solve {
            problem,
            method,
            solver,
            snapshots,
            out,
        } => {
            if !snapshots.is_empty() && method != Method::Neural {
                bail!("--snapshots needs --method neural");
            }
            let options = solver.options(snapshots)?;
            let given = load(&problem)?;
            let source = match (&given, problem.size) {
                (Some(es), _) => Problem::Given(es),
                (None, Some(n)) => Problem::Lattice(n),
                (None, None) => unreachable!("clap requires --size or --problem"),
            };
            let result = solve::solve(source, method, 0, problem.seed, &options)?;
            if let Some(dir) = &out {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                write_json(Some(&dir.join("record.json")), &result.record)?;
                frames::write_snapshots(dir, &result.snapshots)?;
            }
            write_json(None, &result.record)?;
            if let Some(e) = &result.record.error {
                bail!("{method} failed: {e}");
            }
            if !result.record.converged {
                return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
            }
        }
        Command::Bench {
            size,
            method,
            runs,
            seed,
            solver,
            out,
        } => {
            let config = BenchConfig {
                sizes: size,
                methods: method,
                runs,
                seed,
                options: solver.options(Vec::new())?,
            };
            let records = bench::run_bench(&config, |r| {
                let mcf = r.mcf.map_or_else(|| "failed".into(), |m| format!("{m:.4}"));
                eprintln!(
                    "n={} {} run {}: mcf {mcf} ({:.1} ms)",
                    r.size, r.method, r.run_id, r.wall_ms
                );
            })?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let csv_path = out.join("runs.csv");
            let file = fs::File::create(&csv_path)
                .with_context(|| format!("creating {}", csv_path.display()))?;
            bench::write_csv(file, &records)?;
            let summaries = bench::summarize(&records);
            write_json(Some(&out.join("summary.json")), &summaries)?;
            write_json(Some(&out.join("records.json")), &records)?;
            emit(&bench::format_summary(&summaries))?;

            let failed = records.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                bail!("{failed} run(s) failed; see {}", csv_path.display());
            }
            if records.iter().any(|r| !r.converged) {
                return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
            }
        }
        Command::Oracle {
            problem,
            clusters,
            out,
        } => {
            let es = match (load(&problem)?, problem.size) {
                (Some(es), _) => es,
                (None, Some(n)) => generate_lattice_problem(&ProblemSpec::new(n, problem.seed))?,
                (None, None) => unreachable!("clap requires --size or --problem"),
            };
            let clusters = clusters.unwrap_or(es.frame().size());
            write_json(out.as_deref(), &brute_force_min(&es, clusters)?)?;
        }
        Command::Render {
            frames: inputs,
            out,
        } => {
            for path in frames::render(&inputs, &out)? {
                emit(&format!("{}\n", path.display()))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
