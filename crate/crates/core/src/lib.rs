//! Dempster-Shafer evidence clustering.
//!
//! Pieces of evidence (simple support functions) about several unrelated
//! events arrive mixed together. They are separated by partitioning them
//! into clusters that minimize the metaconflict
//! `Mcf = 1 - (1 - c0) * prod(1 - c_i)`, where `c_i` is the Dempster-rule
//! conflict inside cluster `i`.
//!
//! Two minimizers are provided:
//!
//! * [`partition::iterative_optimize`], a hill climber over single-evidence
//!   transfers using exact cluster conflicts;
//! * [`neural::run`], a Hopfield-style network whose couplings are the
//!   pairwise weights of conflict `-ln(1 - c_jk)`.
//!
//! [`lattice`] generates benchmark problems with a known zero optimum and
//! [`oracle`] checks small instances exhaustively.

pub mod error;
pub mod evidence;
pub mod lattice;
pub mod neural;
pub mod oracle;
pub mod partition;

pub use error::{Error, Result};
pub use evidence::{
    combine_conflict, metaconflict, pairwise_conflict, weight_of_conflict, EvidenceSet, FocalSet,
    Frame, MassFunction, SimpleSupport,
};
pub use lattice::{
    average_cluster_conflict, canonical_partition, conflict_probability, generate_lattice_problem,
    ProblemSpec,
};
pub use neural::{NetParams, NetState, NeuralOutcome};
pub use oracle::{brute_force_min, OracleResult};
pub use partition::{is_favorable, iterative_optimize, random_partition, MoveCandidate, Partition};
