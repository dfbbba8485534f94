use thiserror::Error;

/// Errors raised by the clustering core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame size {0} outside supported range 1..={max}", max = crate::evidence::MAX_FRAME_SIZE)]
    FrameSize(usize),

    #[error("focal set is empty")]
    EmptyFocalSet,

    #[error("element {element} outside frame of size {frame_size}")]
    ElementOutsideFrame { element: usize, frame_size: usize },

    #[error("mass {0} outside the open interval (0, 1)")]
    Mass(f64),

    #[error("{what} = {value} outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("cluster count must be at least {min}, got {got}")]
    ClusterCount { min: usize, got: usize },

    #[error("cluster index {index} out of range for {clusters} clusters")]
    ClusterIndex { index: usize, clusters: usize },

    #[error("evidence index {index} out of range for {len} evidences")]
    EvidenceIndex { index: usize, len: usize },

    #[error("evidence {index} is already in cluster {cluster}")]
    SameCluster { index: usize, cluster: usize },

    #[error("assignment has {got} entries, evidence set has {expected}")]
    AssignmentLength { expected: usize, got: usize },

    #[error("network state is {rows}x{cols} but evidence set has {evidences} evidences")]
    Dimension {
        rows: usize,
        cols: usize,
        evidences: usize,
    },

    #[error("invalid network parameter: {0}")]
    Params(String),

    #[error("mass bounds [{low}, {high}] must satisfy 0 < low <= high < 1")]
    MassBounds { low: f64, high: f64 },

    #[error("search space of {space:e} assignments exceeds the oracle bound {bound:e}")]
    OracleTooLarge { space: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
