//! Lattice benchmark problems: one simple support per nonempty subset of
//! `{1..n}`, clustered into `n` clusters. Grouping by lowest element always
//! gives a zero-conflict partition, so the optimum is known.

use num_integer::binomial;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{EvidenceSet, FocalSet, Frame, SimpleSupport, MAX_FRAME_SIZE};
use crate::partition::Partition;

/// Bounds of the uniform mass distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassBounds {
    pub low: f64,
    pub high: f64,
}

impl Default for MassBounds {
    fn default() -> Self {
        Self {
            low: 0.001,
            high: 0.999,
        }
    }
}

impl MassBounds {
    pub fn validate(&self) -> Result<()> {
        if self.low > 0.0 && self.low <= self.high && self.high < 1.0 {
            Ok(())
        } else {
            Err(Error::MassBounds {
                low: self.low,
                high: self.high,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub masses: MassBounds,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            masses: MassBounds::default(),
            seed,
        }
    }
}

/// Generates the `2^n - 1` evidences in ascending bitmask order with masses
/// drawn i.i.d. from `Uniform[low, high]`.
pub fn generate_lattice_problem(spec: &ProblemSpec) -> Result<EvidenceSet> {
    if spec.n < 2 || spec.n > MAX_FRAME_SIZE {
        return Err(Error::FrameSize(spec.n));
    }
    spec.masses.validate()?;
    let frame = Frame::new(spec.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let MassBounds { low, high } = spec.masses;
    let items = (1..=frame.full_mask())
        .map(|bits| {
            let mass = if low == high {
                low
            } else {
                rng.gen_range(low..=high)
            };
            SimpleSupport::new(FocalSet::from_bits(bits)?, mass)
        })
        .collect::<Result<Vec<_>>>()?;
    EvidenceSet::new(frame, items)
}

/// Zero-conflict assignment: evidence goes to the cluster of its lowest
/// element. For non-lattice input this is still the lowest-element grouping,
/// but zero conflict is no longer guaranteed.
pub fn canonical_assignment(evidence: &EvidenceSet) -> Vec<usize> {
    evidence
        .items()
        .iter()
        .map(|item| item.focal().min_element() - 1)
        .collect()
}

pub fn canonical_partition(evidence: &EvidenceSet, n: usize) -> Result<Partition<'_>> {
    Partition::new(evidence, canonical_assignment(evidence), n)
}

/// Number of ordered pairs of distinct nonempty subsets of an `n`-set that
/// are disjoint.
pub fn conflicting_pairs(n: usize) -> u64 {
    let n = n as u64;
    (1..n)
        .map(|j| binomial(n, j) * (1..=n - j).map(|k| binomial(n - j, k)).sum::<u64>())
        .sum()
}

/// Probability that two distinct evidences of the lattice problem conflict.
pub fn conflict_probability(n: usize) -> Ratio<u64> {
    let items = (1u64 << n) - 1;
    let ordered = items * items - items;
    Ratio::new(conflicting_pairs(n), ordered)
}

/// Unreduced numerator and denominator of [`conflict_probability`].
pub fn conflict_probability_terms(n: usize) -> (u64, u64) {
    let items = (1u64 << n) - 1;
    (conflicting_pairs(n), items * items - items)
}

/// Per-cluster conflict `1 - (1 - mcf)^(1/n)` if all `n` clusters conflicted
/// equally.
pub fn average_cluster_conflict(mcf: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&mcf) {
        return Err(Error::Domain {
            what: "metaconflict",
            value: mcf,
            domain: "[0, 1]",
        });
    }
    if n < 1 {
        return Err(Error::ClusterCount { min: 1, got: n });
    }
    Ok(1.0 - (1.0 - mcf).powf(1.0 / n as f64))
}
