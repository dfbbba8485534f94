//! Exhaustive minimization of the metaconflict over all assignments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{metaconflict_unchecked, EvidenceSet, MassFunction};

/// Refuse search spaces larger than this many assignments.
pub const ORACLE_BOUND: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub min_mcf: f64,
    /// First optimal assignment in lexicographic order.
    pub argmin: Vec<usize>,
    pub evaluated: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleOptions {
    /// Pin evidence 0 to cluster 0; cluster labels are interchangeable.
    pub fix_first: bool,
}

pub fn brute_force_min(evidence: &EvidenceSet, clusters: usize) -> Result<OracleResult> {
    brute_force_min_with(evidence, clusters, OracleOptions::default())
}

/// Depth-first walk over assignments, evidence 0 as the most significant
/// digit, so leaves are visited in lexicographic order.
pub fn brute_force_min_with(
    evidence: &EvidenceSet,
    clusters: usize,
    options: OracleOptions,
) -> Result<OracleResult> {
    if clusters < 1 {
        return Err(Error::ClusterCount {
            min: 1,
            got: clusters,
        });
    }
    let free = if options.fix_first && !evidence.is_empty() {
        evidence.len() - 1
    } else {
        evidence.len()
    };
    let space = (clusters as f64).powi(free as i32);
    if space > ORACLE_BOUND {
        return Err(Error::OracleTooLarge {
            space,
            bound: ORACLE_BOUND,
        });
    }

    let mut search = Search {
        evidence,
        clusters,
        fix_first: options.fix_first,
        accumulators: vec![MassFunction::for_frame(evidence.frame()); clusters],
        assignment: vec![0; evidence.len()],
        best: None,
        evaluated: 0,
    };
    search.descend(0);
    let (min_mcf, argmin) = search.best.expect("at least one assignment is evaluated");
    Ok(OracleResult {
        min_mcf,
        argmin,
        evaluated: search.evaluated,
    })
}

struct Search<'a> {
    evidence: &'a EvidenceSet,
    clusters: usize,
    fix_first: bool,
    accumulators: Vec<MassFunction>,
    assignment: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    evaluated: u64,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) {
        if depth == self.evidence.len() {
            self.evaluated += 1;
            let mcf = metaconflict_unchecked(0.0, self.accumulators.iter().map(|a| a.conflict()));
            if self.best.as_ref().is_none_or(|(b, _)| mcf < *b) {
                self.best = Some((mcf, self.assignment.clone()));
            }
            return;
        }
        let choices = if depth == 0 && self.fix_first {
            1
        } else {
            self.clusters
        };
        for cluster in 0..choices {
            let saved = self.accumulators[cluster].clone();
            self.accumulators[cluster].fold(&self.evidence.items()[depth]);
            self.assignment[depth] = cluster;
            self.descend(depth + 1);
            self.accumulators[cluster] = saved;
        }
    }
}
