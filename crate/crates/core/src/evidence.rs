//! Frames, simple support functions and Dempster-rule conflict.
//!
//! Every piece of evidence is a simple support function: mass `m` on one
//! nonempty focal set and `1 - m` on the whole frame. Combining such
//! functions with the unnormalized Dempster rule leaves the conflict on the
//! empty set, which is what the clustering criterion is built from.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported frame; focal sets are `u32` bitmasks.
pub const MAX_FRAME_SIZE: usize = 24;

/// Frames up to this many elements use a dense accumulator of `2^n` slots.
const DENSE_LIMIT: u32 = 16;

/// A frame of discernment `{1, ..., n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frame {
    size: usize,
}

impl Frame {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size > MAX_FRAME_SIZE {
            return Err(Error::FrameSize(size));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Bitmask with every element of the frame set.
    pub fn full_mask(&self) -> u32 {
        (1u32 << self.size) - 1
    }

    pub fn contains(&self, focal: FocalSet) -> bool {
        focal.bits() & !self.full_mask() == 0
    }
}

/// A nonempty subset of the frame. Element `k` (1-based) is bit `k - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FocalSet(u32);

impl FocalSet {
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(Error::EmptyFocalSet);
        }
        Ok(Self(bits))
    }

    /// Builds a focal set from 1-based element labels.
    pub fn from_elements<I>(elements: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut bits = 0u32;
        for element in elements {
            if element == 0 || element > MAX_FRAME_SIZE {
                return Err(Error::ElementOutsideFrame {
                    element,
                    frame_size: MAX_FRAME_SIZE,
                });
            }
            bits |= 1 << (element - 1);
        }
        Self::from_bits(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Sorted 1-based element labels.
    pub fn elements(self) -> Vec<usize> {
        (0..32)
            .filter(|b| self.0 & (1 << b) != 0)
            .map(|b| b as usize + 1)
            .collect()
    }

    pub fn contains(self, element: usize) -> bool {
        (1..=32).contains(&element) && self.0 & (1 << (element - 1)) != 0
    }

    pub fn is_disjoint(self, other: FocalSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Smallest element label in the set.
    pub fn min_element(self) -> usize {
        self.0.trailing_zeros() as usize + 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FocalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.elements().iter().map(|e| e.to_string()).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

/// One piece of evidence: `mass` on `focal`, the remainder on the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleSupport {
    focal: FocalSet,
    mass: f64,
}

impl SimpleSupport {
    pub fn new(focal: FocalSet, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass < 1.0) {
            return Err(Error::Mass(mass));
        }
        Ok(Self { focal, mass })
    }

    pub fn focal(&self) -> FocalSet {
        self.focal
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

/// Conflict between two simple supports: the product of their masses when
/// the focal sets are disjoint, zero otherwise.
pub fn pairwise_conflict(a: &SimpleSupport, b: &SimpleSupport) -> f64 {
    if a.focal.is_disjoint(b.focal) {
        a.mass * b.mass
    } else {
        0.0
    }
}

/// Weight of conflict `-ln(1 - c)`; `c = 1` maps to infinity.
pub fn weight_of_conflict(c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain {
            what: "conflict",
            value: c,
            domain: "[0, 1]",
        });
    }
    Ok(-(-c).ln_1p())
}

/// Metaconflict `1 - (1 - c0) * prod(1 - c_i)` of a partition.
pub fn metaconflict(c0: f64, conflicts: &[f64]) -> Result<f64> {
    check_unit("domain conflict", c0)?;
    for &c in conflicts {
        check_unit("cluster conflict", c)?;
    }
    Ok(metaconflict_unchecked(c0, conflicts.iter().copied()))
}

pub(crate) fn metaconflict_unchecked<I>(c0: f64, conflicts: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    1.0 - conflicts
        .into_iter()
        .fold(1.0 - c0, |acc, c| acc * (1.0 - c))
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(Vec<f64>),
    Sparse(BTreeMap<u32, f64>),
}

/// Unnormalized Dempster accumulator over bitmask focal elements.
///
/// Starts vacuous (all mass on the top set). Folding a simple support never
/// renormalizes, so the mass on the empty set is the running conflict.
#[derive(Debug, Clone)]
pub struct MassFunction {
    top: u32,
    storage: Storage,
}

impl MassFunction {
    /// Vacuous mass function over the given top set. Every focal set folded
    /// in afterwards must be a subset of `top`.
    pub fn vacuous(top: u32) -> Self {
        let width = 32 - top.leading_zeros();
        let storage = if width <= DENSE_LIMIT {
            let mut slots = vec![0.0; 1usize << width];
            slots[top as usize] = 1.0;
            Storage::Dense(slots)
        } else {
            Storage::Sparse(BTreeMap::from([(top, 1.0)]))
        };
        Self { top, storage }
    }

    pub fn for_frame(frame: Frame) -> Self {
        Self::vacuous(frame.full_mask())
    }

    pub fn top(&self) -> u32 {
        self.top
    }

    /// Combines one simple support into the accumulator.
    pub fn fold(&mut self, support: &SimpleSupport) {
        let a = support.focal.bits();
        debug_assert!(a & !self.top == 0, "focal set outside accumulator top");
        let m = support.mass;
        match &mut self.storage {
            Storage::Dense(slots) => {
                // mask & a <= mask, so every write lands on a slot already visited.
                for mask in 0..slots.len() {
                    let v = slots[mask];
                    if v == 0.0 {
                        continue;
                    }
                    let meet = mask & a as usize;
                    if meet != mask {
                        slots[mask] = v * (1.0 - m);
                        slots[meet] += v * m;
                    }
                }
            }
            Storage::Sparse(map) => {
                let mut next = BTreeMap::new();
                for (&mask, &v) in map.iter() {
                    let meet = mask & a;
                    if meet == mask {
                        *next.entry(mask).or_insert(0.0) += v;
                    } else {
                        *next.entry(mask).or_insert(0.0) += v * (1.0 - m);
                        *next.entry(meet).or_insert(0.0) += v * m;
                    }
                }
                *map = next;
            }
        }
    }

    /// Mass accumulated on the empty set.
    pub fn conflict(&self) -> f64 {
        self.mass_of(0)
    }

    /// Conflict that folding `support` would produce, without mutating.
    pub fn conflict_with(&self, support: &SimpleSupport) -> f64 {
        let a = support.focal.bits();
        let m = support.mass;
        let mut extra = 0.0;
        match &self.storage {
            Storage::Dense(slots) => {
                for (mask, &v) in slots.iter().enumerate().skip(1) {
                    if v != 0.0 && mask & a as usize == 0 {
                        extra += v;
                    }
                }
            }
            Storage::Sparse(map) => {
                for (&mask, &v) in map {
                    if mask != 0 && mask & a == 0 {
                        extra += v;
                    }
                }
            }
        }
        self.conflict() + extra * m
    }

    /// Mass on nonempty sets, `1 - conflict` summed directly so it stays
    /// accurate when the conflict is close to one.
    pub fn survival(&self) -> f64 {
        match &self.storage {
            Storage::Dense(slots) => slots[1..].iter().sum(),
            Storage::Sparse(map) => map.range(1..).map(|(_, v)| v).sum(),
        }
    }

    /// [`survival`](Self::survival) after folding `support`, without mutating.
    pub fn survival_with(&self, support: &SimpleSupport) -> f64 {
        let a = support.focal.bits();
        let keep = 1.0 - support.mass;
        let scale = |mask: u32| if mask & a == 0 { keep } else { 1.0 };
        match &self.storage {
            Storage::Dense(slots) => slots
                .iter()
                .enumerate()
                .skip(1)
                .map(|(mask, &v)| v * scale(mask as u32))
                .sum(),
            Storage::Sparse(map) => map.range(1..).map(|(&mask, &v)| v * scale(mask)).sum(),
        }
    }

    pub fn mass_of(&self, bits: u32) -> f64 {
        match &self.storage {
            Storage::Dense(slots) => slots.get(bits as usize).copied().unwrap_or(0.0),
            Storage::Sparse(map) => map.get(&bits).copied().unwrap_or(0.0),
        }
    }

    /// Nonzero entries as `(mask, mass)`, sorted by mask. The empty mask is
    /// the conflict entry.
    pub fn entries(&self) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = match &self.storage {
            Storage::Dense(slots) => slots
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(mask, &v)| (mask as u32, v))
                .collect(),
            Storage::Sparse(map) => map
                .iter()
                .filter(|(_, &v)| v != 0.0)
                .map(|(&mask, &v)| (mask, v))
                .collect(),
        };
        out.sort_by_key(|&(mask, _)| mask);
        out
    }

    pub fn total_mass(&self) -> f64 {
        match &self.storage {
            Storage::Dense(slots) => slots.iter().sum(),
            Storage::Sparse(map) => map.values().sum(),
        }
    }
}

/// Exact Dempster-rule conflict of combining all `evidence`.
pub fn combine_conflict(evidence: &[SimpleSupport]) -> f64 {
    if evidence.len() < 2 {
        return 0.0;
    }
    let top = evidence.iter().fold(0u32, |acc, e| acc | e.focal.bits());
    let mut acc = MassFunction::vacuous(top);
    for e in evidence {
        acc.fold(e);
    }
    acc.conflict()
}

/// Simple supports over one frame with their pairwise conflict and weight
/// matrices precomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EvidenceSetFile", into = "EvidenceSetFile")]
pub struct EvidenceSet {
    frame: Frame,
    items: Vec<SimpleSupport>,
    conflicts: Vec<f64>,
    weights: Vec<f64>,
}

impl EvidenceSet {
    pub fn new(frame: Frame, items: Vec<SimpleSupport>) -> Result<Self> {
        for item in &items {
            if !frame.contains(item.focal) {
                let element = 32 - item.focal.bits().leading_zeros() as usize;
                return Err(Error::ElementOutsideFrame {
                    element,
                    frame_size: frame.size(),
                });
            }
        }
        let len = items.len();
        let mut conflicts = vec![0.0; len * len];
        let mut weights = vec![0.0; len * len];
        for j in 0..len {
            for k in (j + 1)..len {
                let c = pairwise_conflict(&items[j], &items[k]);
                let w = -(-c).ln_1p();
                conflicts[j * len + k] = c;
                conflicts[k * len + j] = c;
                weights[j * len + k] = w;
                weights[k * len + j] = w;
            }
        }
        Ok(Self {
            frame,
            items,
            conflicts,
            weights,
        })
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn items(&self) -> &[SimpleSupport] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn conflict(&self, j: usize, k: usize) -> f64 {
        self.conflicts[j * self.len() + k]
    }

    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.weights[j * self.len() + k]
    }

    /// Row-major `len x len` conflict matrix.
    pub fn conflict_matrix(&self) -> &[f64] {
        &self.conflicts
    }

    /// Row-major `len x len` matrix of `-ln(1 - c_jk)`.
    pub fn weight_matrix(&self) -> &[f64] {
        &self.weights
    }

    /// Exact conflict of the evidences at `indices`.
    pub fn subset_conflict<I>(&self, indices: I) -> f64
    where
        I: IntoIterator<Item = usize>,
    {
        self.combine(indices).conflict()
    }

    /// Unnormalized combination of the evidences at `indices`.
    pub fn combine<I>(&self, indices: I) -> MassFunction
    where
        I: IntoIterator<Item = usize>,
    {
        let mut acc = MassFunction::for_frame(self.frame);
        for i in indices {
            acc.fold(&self.items[i]);
        }
        acc
    }
}

/// On-disk form of an [`EvidenceSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSetFile {
    pub frame_size: usize,
    pub evidences: Vec<EvidenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub focal: Vec<usize>,
    pub mass: f64,
}

impl TryFrom<EvidenceSetFile> for EvidenceSet {
    type Error = Error;

    fn try_from(file: EvidenceSetFile) -> Result<Self> {
        let frame = Frame::new(file.frame_size)?;
        let items = file
            .evidences
            .into_iter()
            .map(|entry| {
                if let Some(&element) = entry.focal.iter().find(|&&e| e == 0 || e > frame.size()) {
                    return Err(Error::ElementOutsideFrame {
                        element,
                        frame_size: frame.size(),
                    });
                }
                SimpleSupport::new(FocalSet::from_elements(entry.focal)?, entry.mass)
            })
            .collect::<Result<Vec<_>>>()?;
        EvidenceSet::new(frame, items)
    }
}

impl From<EvidenceSet> for EvidenceSetFile {
    fn from(set: EvidenceSet) -> Self {
        Self {
            frame_size: set.frame.size(),
            evidences: set
                .items
                .iter()
                .map(|item| EvidenceEntry {
                    focal: item.focal.elements(),
                    mass: item.mass,
                })
                .collect(),
        }
    }
}
