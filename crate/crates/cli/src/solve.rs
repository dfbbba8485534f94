//! One seeded solve of one problem, timed and recorded.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use dsclust_core::evidence::{metaconflict, EvidenceSet};
use dsclust_core::lattice::{canonical_partition, generate_lattice_problem, ProblemSpec};
use dsclust_core::neural::{self, NetParams, NeuralOutcome, Snapshot};
use dsclust_core::oracle::brute_force_min;
use dsclust_core::partition::{iterative_optimize, random_partition, Partition, PartitionRecord};
use serde::{Deserialize, Serialize};

use crate::{hash_seed, io_err, CliError, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iterative,
    Neural,
    Oracle,
}

impl Method {
    fn tag(self) -> u64 {
        match self {
            Self::Iterative => 1,
            Self::Neural => 2,
            Self::Oracle => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Iterative => "iterative",
            Self::Neural => "neural",
            Self::Oracle => "oracle",
        })
    }
}

/// Starting partition for the iterative solver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    #[default]
    Random,
    Canonical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Cluster count; `None` uses the frame size.
    pub clusters: Option<usize>,
    pub params: NetParams,
    /// Rescale `gi`, `dti` and `eb` to the problem size before a neural run.
    pub scale: bool,
    pub start: Start,
    /// Iterations to capture (neural only).
    pub snapshots: Vec<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            clusters: None,
            params: NetParams::default(),
            scale: true,
            start: Start::Random,
            snapshots: Vec::new(),
        }
    }
}

/// Seed for the solver's own randomness, derived from the run seed so
/// every method sees the same problem but draws independently.
pub fn solver_seed(seed: u64, method: Method) -> u64 {
    hash_seed(seed, &[method.tag()])
}

/// Parameters actually used for a neural run.
pub fn effective_params(
    evidence: &EvidenceSet,
    clusters: usize,
    options: &SolveOptions,
) -> NetParams {
    if options.scale {
        neural::scale_params(&options.params, evidence.len(), clusters)
    } else {
        options.params
    }
}

/// Outcome of a single run. `mcf` and `partition` are absent when the
/// solver failed, in which case `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub size: usize,
    pub method: Method,
    pub run_id: u64,
    pub seed: u64,
    pub mcf: Option<f64>,
    pub cluster_conflicts: Vec<f64>,
    /// Network iterations, transfers applied, or assignments evaluated.
    pub iterations: u64,
    pub wall_ms: f64,
    pub converged: bool,
    pub partition: Option<PartitionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    fn failed(size: usize, method: Method, run_id: u64, seed: u64, error: String) -> Self {
        Self {
            size,
            method,
            run_id,
            seed,
            mcf: None,
            cluster_conflicts: Vec::new(),
            iterations: 0,
            wall_ms: 0.0,
            converged: false,
            partition: None,
            error: Some(error),
        }
    }

    /// Recomputes the metaconflict from the stored cluster conflicts.
    pub fn recomputed_mcf(&self) -> Option<f64> {
        metaconflict(0.0, &self.cluster_conflicts).ok()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub record: RunRecord,
    pub snapshots: Vec<Snapshot>,
}

/// Where a problem comes from: a lattice of `size` seeded by the run seed,
/// or a fixed evidence set.
pub enum Problem<'a> {
    Lattice(usize),
    Given(&'a EvidenceSet),
}

pub fn load_problem(path: &Path) -> Result<EvidenceSet> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `method` once. Solver errors are returned inside the record so a
/// benchmark can keep going; only problem generation errors are fatal.
pub fn solve(
    problem: Problem<'_>,
    method: Method,
    run_id: u64,
    seed: u64,
    options: &SolveOptions,
) -> Result<SolveOutput> {
    let generated;
    let evidence = match problem {
        Problem::Lattice(n) => {
            generated = generate_lattice_problem(&ProblemSpec::new(n, seed))?;
            &generated
        }
        Problem::Given(es) => es,
    };
    let size = evidence.frame().size();
    let clusters = options.clusters.unwrap_or(size);
    match run_solver(evidence, clusters, method, seed, options) {
        Ok(solved) => {
            let record = solved.partition.to_record();
            Ok(SolveOutput {
                record: RunRecord {
                    size,
                    method,
                    run_id,
                    seed,
                    mcf: Some(record.mcf),
                    cluster_conflicts: record.cluster_conflicts.clone(),
                    iterations: solved.iterations,
                    wall_ms: solved.wall_ms,
                    converged: solved.converged,
                    partition: Some(record),
                    error: None,
                },
                snapshots: solved.snapshots,
            })
        }
        Err(e) => Ok(SolveOutput {
            record: RunRecord::failed(size, method, run_id, seed, e.to_string()),
            snapshots: Vec::new(),
        }),
    }
}

struct Solved<'a> {
    partition: Partition<'a>,
    iterations: u64,
    wall_ms: f64,
    converged: bool,
    snapshots: Vec<Snapshot>,
}

fn run_solver<'a>(
    evidence: &'a EvidenceSet,
    clusters: usize,
    method: Method,
    seed: u64,
    options: &SolveOptions,
) -> dsclust_core::Result<Solved<'a>> {
    let solver_seed = solver_seed(seed, method);
    match method {
        Method::Iterative => {
            let clock = Instant::now();
            let start = match options.start {
                Start::Random => random_partition(evidence, clusters, solver_seed)?,
                Start::Canonical => canonical_partition(evidence, clusters)?,
            };
            let out = iterative_optimize(start);
            let wall_ms = elapsed_ms(clock);
            Ok(Solved {
                iterations: out.move_count() as u64,
                partition: out.partition,
                wall_ms,
                converged: true,
                snapshots: Vec::new(),
            })
        }
        Method::Neural => {
            let params = effective_params(evidence, clusters, options);
            let clock = Instant::now();
            let outcome =
                neural::run(evidence, clusters, &params, solver_seed, &options.snapshots)?;
            let wall_ms = elapsed_ms(clock);
            let iterations = outcome.iterations() as u64;
            Ok(match outcome {
                NeuralOutcome::Converged {
                    partition,
                    snapshots,
                    ..
                } => Solved {
                    partition,
                    iterations,
                    wall_ms,
                    converged: true,
                    snapshots,
                },
                NeuralOutcome::NotConverged {
                    state, snapshots, ..
                } => Solved {
                    partition: Partition::new(evidence, state.argmax_assignment(), clusters)?,
                    iterations,
                    wall_ms,
                    converged: false,
                    snapshots,
                },
            })
        }
        Method::Oracle => {
            let clock = Instant::now();
            let out = brute_force_min(evidence, clusters)?;
            let wall_ms = elapsed_ms(clock);
            Ok(Solved {
                partition: Partition::new(evidence, out.argmin, clusters)?,
                iterations: out.evaluated,
                wall_ms,
                converged: true,
                snapshots: Vec::new(),
            })
        }
    }
}

fn elapsed_ms(clock: Instant) -> f64 {
    clock.elapsed().as_secs_f64() * 1e3
}
