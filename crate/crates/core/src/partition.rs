//! Partitions of an evidence set and hill-climbing by single transfers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{metaconflict_unchecked, EvidenceSet, MassFunction};

/// A transfer only counts as an improvement if it lowers the total weight
/// `-ln(1 - Mcf)` by more than this.
pub const FAVORABLE_MARGIN: f64 = 1e-12;

/// Assignment of every evidence to one of `clusters` clusters, with the exact
/// conflict of each cluster kept up to date.
#[derive(Debug, Clone)]
pub struct Partition<'a> {
    evidence: &'a EvidenceSet,
    assignment: Vec<usize>,
    clusters: usize,
    domain_conflict: f64,
    accumulators: Vec<MassFunction>,
    conflicts: Vec<f64>,
    survivals: Vec<f64>,
}

impl<'a> Partition<'a> {
    pub fn new(evidence: &'a EvidenceSet, assignment: Vec<usize>, clusters: usize) -> Result<Self> {
        if clusters < 1 {
            return Err(Error::ClusterCount {
                min: 1,
                got: clusters,
            });
        }
        if assignment.len() != evidence.len() {
            return Err(Error::AssignmentLength {
                expected: evidence.len(),
                got: assignment.len(),
            });
        }
        if let Some(&index) = assignment.iter().find(|&&c| c >= clusters) {
            return Err(Error::ClusterIndex { index, clusters });
        }
        let mut partition = Self {
            evidence,
            assignment,
            clusters,
            domain_conflict: 0.0,
            accumulators: Vec::new(),
            conflicts: Vec::new(),
            survivals: Vec::new(),
        };
        partition.recompute_conflicts();
        Ok(partition)
    }

    /// Sets the domain conflict `c0` carried into every Mcf evaluation.
    pub fn with_domain_conflict(mut self, c0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c0) {
            return Err(Error::Domain {
                what: "domain conflict",
                value: c0,
                domain: "[0, 1]",
            });
        }
        self.domain_conflict = c0;
        Ok(self)
    }

    pub fn evidence(&self) -> &'a EvidenceSet {
        self.evidence
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn domain_conflict(&self) -> f64 {
        self.domain_conflict
    }

    pub fn cluster_of(&self, q: usize) -> usize {
        self.assignment[q]
    }

    /// Evidence indices assigned to `cluster`, ascending.
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(q, _)| q)
    }

    /// Cached exact conflict of every cluster.
    pub fn cluster_conflicts(&self) -> &[f64] {
        &self.conflicts
    }

    /// Rebuilds every cluster accumulator from scratch and returns the
    /// conflicts.
    pub fn recompute_conflicts(&mut self) -> Vec<f64> {
        self.accumulators = (0..self.clusters)
            .map(|c| self.build_accumulator(c))
            .collect();
        self.conflicts = self
            .accumulators
            .iter()
            .map(MassFunction::conflict)
            .collect();
        self.survivals = self
            .accumulators
            .iter()
            .map(MassFunction::survival)
            .collect();
        self.conflicts.clone()
    }

    /// Mass left on nonempty sets in every cluster, summed directly so it
    /// stays meaningful when a conflict rounds to one.
    pub fn cluster_survivals(&self) -> &[f64] {
        &self.survivals
    }

    /// Current metaconflict.
    pub fn mcf(&self) -> f64 {
        metaconflict_unchecked(self.domain_conflict, self.conflicts.iter().copied())
    }

    /// `-ln(1 - Mcf)`, finite even where Mcf rounds to one.
    pub fn weight(&self) -> f64 {
        -(-self.domain_conflict).ln_1p() - self.survivals.iter().map(|s| s.ln()).sum::<f64>()
    }

    fn build_accumulator(&self, cluster: usize) -> MassFunction {
        let mut acc = MassFunction::for_frame(self.evidence.frame());
        for q in self.members(cluster) {
            acc.fold(&self.evidence.items()[q]);
        }
        acc
    }

    /// Conflict and survival of `q`'s cluster with `q` taken out, by
    /// recombining the rest.
    fn source_without(&self, q: usize) -> (f64, f64) {
        let source = self.assignment[q];
        let acc = self
            .evidence
            .combine(self.members(source).filter(|&k| k != q));
        (acc.conflict(), acc.survival())
    }

    fn candidate(&self, q: usize, target: usize, source_without: (f64, f64)) -> MoveCandidate {
        let source = self.assignment[q];
        let item = &self.evidence.items()[q];
        let (from_conflict, from_survival) = source_without;
        let to_conflict = self.accumulators[target].conflict_with(item);
        let to_survival = self.accumulators[target].survival_with(item);
        let replaced = |k: usize, c: f64| {
            if k == source {
                from_conflict
            } else if k == target {
                to_conflict
            } else {
                c
            }
        };
        let new_mcf = metaconflict_unchecked(
            self.domain_conflict,
            self.conflicts
                .iter()
                .enumerate()
                .map(|(k, &c)| replaced(k, c)),
        );
        let gain = (to_survival / self.survivals[target]).ln()
            + (from_survival / self.survivals[source]).ln();
        MoveCandidate {
            evidence_index: q,
            from_cluster: source,
            to_cluster: target,
            new_from_conflict: from_conflict,
            new_to_conflict: to_conflict,
            new_from_survival: from_survival,
            new_to_survival: to_survival,
            new_mcf,
            weight_gain: gain,
        }
    }

    /// Consequence of moving evidence `q` into cluster `target`. Read-only.
    pub fn evaluate_transfer(&self, q: usize, target: usize) -> Result<MoveCandidate> {
        if q >= self.evidence.len() {
            return Err(Error::EvidenceIndex {
                index: q,
                len: self.evidence.len(),
            });
        }
        if target >= self.clusters {
            return Err(Error::ClusterIndex {
                index: target,
                clusters: self.clusters,
            });
        }
        if target == self.assignment[q] {
            return Err(Error::SameCluster {
                index: q,
                cluster: target,
            });
        }
        Ok(self.candidate(q, target, self.source_without(q)))
    }

    /// Moves evidence `q` to `target` and refreshes the two affected clusters.
    pub fn transfer(&mut self, q: usize, target: usize) -> Result<()> {
        if q >= self.evidence.len() {
            return Err(Error::EvidenceIndex {
                index: q,
                len: self.evidence.len(),
            });
        }
        if target >= self.clusters {
            return Err(Error::ClusterIndex {
                index: target,
                clusters: self.clusters,
            });
        }
        let source = self.assignment[q];
        self.assignment[q] = target;
        for cluster in [source, target] {
            let acc = self.build_accumulator(cluster);
            self.conflicts[cluster] = acc.conflict();
            self.survivals[cluster] = acc.survival();
            self.accumulators[cluster] = acc;
        }
        Ok(())
    }

    pub fn to_record(&self) -> PartitionRecord {
        PartitionRecord {
            r: self.clusters,
            assignment: self.assignment.clone(),
            mcf: self.mcf(),
            cluster_conflicts: self.conflicts.clone(),
        }
    }

    pub fn from_record(evidence: &'a EvidenceSet, record: &PartitionRecord) -> Result<Self> {
        Self::new(evidence, record.assignment.clone(), record.r)
    }
}

/// Seeded uniform assignment of every evidence to one of `clusters` clusters.
pub fn random_partition(
    evidence: &EvidenceSet,
    clusters: usize,
    seed: u64,
) -> Result<Partition<'_>> {
    if clusters < 1 {
        return Err(Error::ClusterCount {
            min: 1,
            got: clusters,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = (0..evidence.len())
        .map(|_| rng.gen_range(0..clusters))
        .collect();
    Partition::new(evidence, assignment, clusters)
}

/// A single-evidence transfer and its effect on the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveCandidate {
    pub evidence_index: usize,
    pub from_cluster: usize,
    pub to_cluster: usize,
    pub new_from_conflict: f64,
    pub new_to_conflict: f64,
    pub new_from_survival: f64,
    pub new_to_survival: f64,
    pub new_mcf: f64,
    /// `ln((1 - c_j*) / (1 - c_j)) - ln((1 - c_i) / (1 - c_i*))`, the drop in
    /// `-ln(1 - Mcf)`.
    pub weight_gain: f64,
}

/// Whether `candidate` improves `partition`.
///
/// The ratio test `(1 - c_j*) / (1 - c_j) > (1 - c_i) / (1 - c_i*)` is taken
/// in log form on the survivals, with the gain required to exceed
/// [`FAVORABLE_MARGIN`] so rounding ties never count as improvements.
pub fn is_favorable(_partition: &Partition<'_>, candidate: &MoveCandidate) -> bool {
    candidate.weight_gain > FAVORABLE_MARGIN
}

/// One applied transfer in an optimization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub evidence_index: usize,
    pub from_cluster: usize,
    pub to_cluster: usize,
    /// Mcf after the move, recomputed from the refreshed clusters.
    pub mcf: f64,
    /// `-ln(1 - Mcf)` after the move.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct Optimized<'a> {
    pub partition: Partition<'a>,
    pub mcf: f64,
    pub initial_mcf: f64,
    pub trace: Vec<TraceStep>,
}

impl Optimized<'_> {
    pub fn move_count(&self) -> usize {
        self.trace.len()
    }
}

/// Best favorable transfer of the current partition: minimal Mcf* (largest
/// weight gain), ties to the lowest evidence index, then the lowest target
/// cluster.
pub fn best_transfer(partition: &Partition<'_>) -> Option<MoveCandidate> {
    let mut best: Option<MoveCandidate> = None;
    for q in 0..partition.evidence.len() {
        let source_without = partition.source_without(q);
        for target in 0..partition.clusters {
            if target == partition.assignment[q] {
                continue;
            }
            let candidate = partition.candidate(q, target, source_without);
            if !is_favorable(partition, &candidate) {
                continue;
            }
            if best.is_none_or(|b| candidate.weight_gain > b.weight_gain) {
                best = Some(candidate);
            }
        }
    }
    best
}

/// Hill-climbs by repeatedly applying the most favorable single transfer
/// until none is left.
pub fn iterative_optimize(mut partition: Partition<'_>) -> Optimized<'_> {
    let initial_mcf = partition.mcf();
    let mut current = partition.weight();
    let mut trace = Vec::new();
    while let Some(step) = best_transfer(&partition) {
        partition
            .transfer(step.evidence_index, step.to_cluster)
            .expect("candidate indices come from the partition");
        let weight = partition.weight();
        trace.push(TraceStep {
            evidence_index: step.evidence_index,
            from_cluster: step.from_cluster,
            to_cluster: step.to_cluster,
            mcf: partition.mcf(),
            weight,
        });
        if weight >= current {
            // Recombination rounding ate the predicted gain.
            break;
        }
        current = weight;
    }
    Optimized {
        mcf: partition.mcf(),
        initial_mcf,
        partition,
        trace,
    }
}

/// Serialized partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub r: usize,
    pub assignment: Vec<usize>,
    pub mcf: f64,
    pub cluster_conflicts: Vec<f64>,
}
