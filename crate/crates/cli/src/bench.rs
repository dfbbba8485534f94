//! Seeded benchmark runs over sizes and methods, with CSV rows and a
//! per-(size, method) summary.

use std::io::Write;

use dsclust_core::lattice::average_cluster_conflict;
use serde::{Deserialize, Serialize};

use crate::hash_seed;
use crate::solve::{solve, Method, Problem, RunRecord, SolveOptions};
use crate::Result;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub runs: u64,
    pub seed: u64,
    pub options: SolveOptions,
}

/// Problem seed of one run. Independent of the method so that every
/// method is measured on the same problems.
pub fn run_seed(base: u64, size: usize, run_id: u64) -> u64 {
    hash_seed(base, &[size as u64, run_id])
}

/// Runs every (size, method, run) combination in that nesting order.
/// `progress` sees each record as it completes.
pub fn run_bench(
    config: &BenchConfig,
    mut progress: impl FnMut(&RunRecord),
) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for &size in &config.sizes {
        for &method in &config.methods {
            for run_id in 0..config.runs {
                let seed = run_seed(config.seed, size, run_id);
                let out = solve(
                    Problem::Lattice(size),
                    method,
                    run_id,
                    seed,
                    &config.options,
                )?;
                progress(&out.record);
                records.push(out.record);
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    size: usize,
    method: Method,
    run_id: u64,
    seed: u64,
    mcf: Option<f64>,
    iterations: u64,
    wall_ms: f64,
    converged: bool,
    cluster_conflicts_json: &'a str,
}

/// Writes the header and one row per record.
pub fn write_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        let conflicts = serde_json::to_string(&r.cluster_conflicts).expect("floats serialize");
        writer.serialize(CsvRow {
            size: r.size,
            method: r.method,
            run_id: r.run_id,
            seed: r.seed,
            mcf: r.mcf,
            iterations: r.iterations,
            wall_ms: r.wall_ms,
            converged: r.converged,
            cluster_conflicts_json: &conflicts,
        })?;
    }
    if records.is_empty() {
        writer.write_record([
            "size",
            "method",
            "run_id",
            "seed",
            "mcf",
            "iterations",
            "wall_ms",
            "converged",
            "cluster_conflicts_json",
        ])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Mean Mcf over ten runs reported for lattice problems of size 3 upward.
pub fn reference_mean(method: Method, size: usize) -> Option<f64> {
    let table: &[f64] = match method {
        Method::Iterative => &[0.0, 0.001, 0.003, 0.097],
        Method::Neural => &[0.016, 0.059, 0.076, 0.398, 0.856],
        Method::Oracle => &[],
    };
    size.checked_sub(3).and_then(|i| table.get(i)).copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub size: usize,
    pub method: Method,
    pub runs: usize,
    pub failed: usize,
    pub converged: usize,
    pub best_mcf: Option<f64>,
    pub median_mcf: Option<f64>,
    pub mean_mcf: Option<f64>,
    pub mean_wall_ms: Option<f64>,
    /// Per-cluster conflict implied by the median Mcf.
    pub average_cluster_conflict: Option<f64>,
    pub median_mcf_per_cluster: Option<f64>,
    pub median_mcf_per_evidence: Option<f64>,
    pub reference_mean_mcf: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// One summary per (size, method), in order of first appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut keys: Vec<(usize, Method)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.size, r.method)) {
            keys.push((r.size, r.method));
        }
    }
    keys.into_iter()
        .map(|(size, method)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.size == size && r.method == method)
                .collect();
            let ok: Vec<&RunRecord> = group.iter().copied().filter(|r| r.mcf.is_some()).collect();
            let mcfs: Vec<f64> = ok.iter().filter_map(|r| r.mcf).collect();
            let walls: Vec<f64> = ok.iter().map(|r| r.wall_ms).collect();
            let med = median(&mcfs);
            let evidences = ((1u64 << size) - 1) as f64;
            Summary {
                size,
                method,
                runs: group.len(),
                failed: group.len() - ok.len(),
                converged: ok.iter().filter(|r| r.converged).count(),
                best_mcf: mcfs.iter().copied().min_by(f64::total_cmp),
                median_mcf: med,
                mean_mcf: mean(&mcfs),
                mean_wall_ms: mean(&walls),
                average_cluster_conflict: med.and_then(|m| average_cluster_conflict(m, size).ok()),
                median_mcf_per_cluster: med.map(|m| m / size as f64),
                median_mcf_per_evidence: med.map(|m| m / evidences),
                reference_mean_mcf: reference_mean(method, size),
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Fixed-width table of the summaries.
pub fn format_summary(summaries: &[Summary]) -> String {
    let mut out = format!(
        "{:>4} {:>9} {:>5} {:>9} {:>8} {:>8} {:>8} {:>8} {:>10}\n",
        "n", "method", "conv", "best", "median", "mean", "ref", "acc", "ms"
    );
    for s in summaries {
        out.push_str(&format!(
            "{:>4} {:>9} {:>2}/{:<2} {:>9} {:>8} {:>8} {:>8} {:>8} {:>10}\n",
            s.size,
            s.method.to_string(),
            s.converged,
            s.runs,
            cell(s.best_mcf),
            cell(s.median_mcf),
            cell(s.mean_mcf),
            cell(s.reference_mean_mcf),
            cell(s.average_cluster_conflict),
            s.mean_wall_ms
                .map_or_else(|| "-".into(), |v| format!("{v:.2}")),
        ));
    }
    out
}
