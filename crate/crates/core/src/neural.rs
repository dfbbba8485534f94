//! Neural clustering network.
//!
//! An `R x n` grid of neurons: row `m` is evidence `m`, column `p` is cluster
//! `p`. Each neuron carries an input voltage `u` and an output voltage
//! `V = (1 + tanh(u / u0)) / 2`. All neurons are updated synchronously:
//!
//! ```text
//! u'[m][p] = u[m][p] + eta * ( sum_i (dti * w[i][m] + gi) * V[i][p]
//!                            + sum_{j != p} (ri + gi) * V[m][j]
//!                            + eb - u[m][p] )
//! ```
//!
//! with `w[i][m] = -ln(1 - c_im)` the weight of conflict between evidences
//! `i` and `m`. After each update a row whose outputs all fell is lifted so
//! its least-decreased neuron is unchanged, and a row whose top output
//! reaches the snap threshold (or whose runner-up is exactly zero) is snapped
//! to a one-hot assignment and frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::EvidenceSet;
use crate::partition::Partition;

/// Row count the default inhibition strengths are tuned for (31 evidences,
/// five clusters).
pub const BASELINE_ROWS: usize = 31;

/// Output voltages are clamped to `[V_CLAMP, 1 - V_CLAMP]` before inverting
/// the transfer function.
const V_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetParams {
    /// Gain factor.
    pub eta: f64,
    /// Steepness of the tanh transfer function.
    pub u0: f64,
    /// Row inhibition.
    pub ri: f64,
    /// Global inhibition.
    pub gi: f64,
    /// Data-term inhibition, multiplies the weight of conflict.
    pub dti: f64,
    /// Excitation bias. `None` derives it from the network dimensions.
    pub eb: Option<f64>,
    /// Initial noise half-width as a fraction of `u0`.
    pub noise_amp: f64,
    pub snap_threshold: f64,
    pub max_iterations: usize,
    pub lift: Lift,
}

/// How a row whose outputs all fell in one iteration is restored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lift {
    /// Add the smallest output drop to every output of the row. Rows whose
    /// every column is inhibited can stall under this rule.
    Output,
    /// Add the input change of the least-dropped neuron to every input of
    /// the row, undoing it for that neuron.
    #[default]
    Input,
}

impl Default for NetParams {
    fn default() -> Self {
        Self {
            eta: 1e-5,
            u0: 0.02,
            ri: -500.0,
            gi: -200.0,
            dti: -2000.0,
            eb: None,
            noise_amp: 0.1,
            snap_threshold: 0.99,
            max_iterations: 10_000,
            lift: Lift::Input,
        }
    }
}

impl NetParams {
    // Negated comparisons so NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Params(msg));
        if !(self.eta > 0.0) {
            return fail(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.u0 > 0.0) {
            return fail(format!("u0 must be positive, got {}", self.u0));
        }
        for (name, value) in [("ri", self.ri), ("gi", self.gi), ("dti", self.dti)] {
            if !(value <= 0.0) {
                return fail(format!("{name} must be <= 0, got {value}"));
            }
        }
        if !(self.noise_amp >= 0.0) {
            return fail(format!("noise_amp must be >= 0, got {}", self.noise_amp));
        }
        if !(self.snap_threshold > 0.5 && self.snap_threshold <= 1.0) {
            return fail(format!(
                "snap_threshold must lie in (0.5, 1], got {}",
                self.snap_threshold
            ));
        }
        if let Some(eb) = self.eb {
            if !eb.is_finite() {
                return fail(format!("eb must be finite, got {eb}"));
            }
        }
        Ok(())
    }

    /// Excitation bias used for an `rows x cols` network.
    pub fn excitation_bias_for(&self, rows: usize, cols: usize) -> f64 {
        self.eb
            .unwrap_or_else(|| excitation_bias(rows, cols, self.gi, self.ri))
    }
}

/// Bias that exactly cancels the row and global inhibition at the uniform
/// state `V = 1/n` when no conflicts are present:
/// `-(gi * rows + (ri + gi) * (cols - 1)) / cols`.
pub fn excitation_bias(rows: usize, cols: usize, gi: f64, ri: f64) -> f64 {
    -(gi * rows as f64 + (ri + gi) * (cols as f64 - 1.0)) / cols as f64
}

/// Rescales global and data-term inhibition by `BASELINE_ROWS / rows` so the
/// column signal per neuron stays at the baseline magnitude, and fixes the
/// excitation bias for the new dimensions.
pub fn scale_params(base: &NetParams, rows: usize, cols: usize) -> NetParams {
    let factor = BASELINE_ROWS as f64 / rows.max(1) as f64;
    let gi = base.gi * factor;
    let dti = base.dti * factor;
    NetParams {
        gi,
        dti,
        eb: Some(excitation_bias(rows, cols, gi, base.ri)),
        ..*base
    }
}

/// `(1 + tanh(u / u0)) / 2`
pub fn transfer(u: f64, u0: f64) -> f64 {
    0.5 * (1.0 + (u / u0).tanh())
}

/// Inverse of [`transfer`], with `v` clamped away from 0 and 1.
pub fn inverse_transfer(v: f64, u0: f64) -> f64 {
    u0 * (2.0 * v.clamp(V_CLAMP, 1.0 - V_CLAMP) - 1.0).atanh()
}

/// Voltages of the network at one iteration. Row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    rows: usize,
    cols: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    frozen: Vec<bool>,
    iteration: usize,
}

impl NetState {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn input(&self, row: usize, col: usize) -> f64 {
        self.u[row * self.cols + col]
    }

    pub fn output(&self, row: usize, col: usize) -> f64 {
        self.v[row * self.cols + col]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.u
    }

    pub fn outputs(&self) -> &[f64] {
        &self.v
    }

    pub fn output_row(&self, row: usize) -> &[f64] {
        &self.v[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_frozen(&self, row: usize) -> bool {
        self.frozen[row]
    }

    pub fn frozen_rows(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }

    pub fn all_frozen(&self) -> bool {
        self.frozen.iter().all(|&f| f)
    }

    /// Column of the highest output per row (lowest index on ties).
    pub fn argmax_assignment(&self) -> Vec<usize> {
        (0..self.rows).map(|m| argmax(self.output_row(m))).collect()
    }

    /// Builds a state from explicit input voltages; outputs follow from the
    /// transfer function and no row is frozen.
    pub fn from_inputs(rows: usize, cols: usize, u: Vec<f64>, u0: f64) -> Result<Self> {
        if u.len() != rows * cols {
            return Err(Error::Dimension {
                rows,
                cols,
                evidences: u.len() / cols.max(1),
            });
        }
        let v = u.iter().map(|&x| transfer(x, u0)).collect();
        Ok(Self {
            rows,
            cols,
            u,
            v,
            frozen: vec![false; rows],
            iteration: 0,
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            iteration: self.iteration,
            rows: self.rows,
            cols: self.cols,
            outputs: self.v.clone(),
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (p, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = p;
        }
    }
    best
}

/// Initial state: every input at `u0 * atanh(2/n - 1)` (so `V = 1/n`) plus
/// uniform noise in `[-noise_amp * u0, noise_amp * u0]`.
pub fn init_state(rows: usize, cols: usize, params: &NetParams, seed: u64) -> Result<NetState> {
    if cols < 2 {
        return Err(Error::ClusterCount { min: 2, got: cols });
    }
    params.validate()?;
    let base = params.u0 * (2.0 / cols as f64 - 1.0).atanh();
    let amp = params.noise_amp * params.u0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = (0..rows * cols)
        .map(|_| {
            if amp > 0.0 {
                base + rng.gen_range(-amp..=amp)
            } else {
                base
            }
        })
        .collect();
    NetState::from_inputs(rows, cols, u, params.u0)
}

/// One synchronous iteration. Pure: `state` is left untouched.
pub fn step(state: &NetState, evidence: &EvidenceSet, params: &NetParams) -> Result<NetState> {
    let mut next = state.clone();
    Network::new(evidence, state.cols, params)?.advance(state, &mut next)?;
    Ok(next)
}

/// Precomputed coupling for one evidence set and parameter choice.
struct Network<'a> {
    weights: &'a [f64],
    rows: usize,
    cols: usize,
    params: NetParams,
    eb: f64,
    /// Scratch: `sum_i w[i][m] * V[i][p]`, row-major.
    data: Vec<f64>,
    column_sums: Vec<f64>,
}

impl<'a> Network<'a> {
    fn new(evidence: &'a EvidenceSet, cols: usize, params: &NetParams) -> Result<Self> {
        if cols < 2 {
            return Err(Error::ClusterCount { min: 2, got: cols });
        }
        params.validate()?;
        let rows = evidence.len();
        Ok(Self {
            weights: evidence.weight_matrix(),
            rows,
            cols,
            params: *params,
            eb: params.excitation_bias_for(rows, cols),
            data: vec![0.0; rows * cols],
            column_sums: vec![0.0; cols],
        })
    }

    fn check(&self, state: &NetState) -> Result<()> {
        if state.rows != self.rows || state.cols != self.cols {
            return Err(Error::Dimension {
                rows: state.rows,
                cols: state.cols,
                evidences: self.rows,
            });
        }
        Ok(())
    }

    /// Writes iteration `t + 1` into `next`, reading only from `prev`.
    fn advance(&mut self, prev: &NetState, next: &mut NetState) -> Result<()> {
        self.check(prev)?;
        self.check(next)?;
        let (rows, cols) = (self.rows, self.cols);
        let NetParams {
            eta,
            u0,
            ri,
            gi,
            dti,
            ..
        } = self.params;

        self.column_sums.fill(0.0);
        for m in 0..rows {
            for p in 0..cols {
                self.column_sums[p] += prev.v[m * cols + p];
            }
        }
        // data[m][p] = sum_i w[i][m] V[i][p]; w is symmetric so row m of w works.
        self.data.fill(0.0);
        for m in 0..rows {
            if prev.frozen[m] {
                continue;
            }
            let w_row = &self.weights[m * rows..(m + 1) * rows];
            let out = &mut self.data[m * cols..(m + 1) * cols];
            for (i, &w) in w_row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let v_row = &prev.v[i * cols..(i + 1) * cols];
                for p in 0..cols {
                    out[p] += w * v_row[p];
                }
            }
        }

        next.iteration = prev.iteration + 1;
        for m in 0..rows {
            let range = m * cols..(m + 1) * cols;
            if prev.frozen[m] {
                next.u[range.clone()].copy_from_slice(&prev.u[range.clone()]);
                next.v[range.clone()].copy_from_slice(&prev.v[range]);
                next.frozen[m] = true;
                continue;
            }
            let row_sum: f64 = prev.v[range.clone()].iter().sum();
            for p in 0..cols {
                let k = m * cols + p;
                let input = dti * self.data[k]
                    + gi * self.column_sums[p]
                    + (ri + gi) * (row_sum - prev.v[k])
                    + self.eb;
                let u = prev.u[k] + eta * (input - prev.u[k]);
                next.u[k] = u;
                next.v[k] = transfer(u, u0);
            }
            next.frozen[m] = false;

            let old = &prev.v[range.clone()];
            if next.v[range.clone()]
                .iter()
                .zip(old)
                .all(|(new, old)| new < old)
            {
                let least = range
                    .clone()
                    .min_by(|&a, &b| (prev.v[a] - next.v[a]).total_cmp(&(prev.v[b] - next.v[b])))
                    .expect("rows are nonempty");
                match self.params.lift {
                    Lift::Output => {
                        let lift = prev.v[least] - next.v[least];
                        for k in range.clone() {
                            next.u[k] = inverse_transfer(next.v[k] + lift, u0);
                            next.v[k] = transfer(next.u[k], u0);
                        }
                    }
                    Lift::Input => {
                        let lift = prev.u[least] - next.u[least];
                        for k in range.clone() {
                            next.u[k] += lift;
                            next.v[k] = transfer(next.u[k], u0);
                        }
                    }
                }
                // Exact restore; the shifted value can round below it.
                next.u[least] = prev.u[least];
                next.v[least] = prev.v[least];
            }

            self.snap_row(next, m);
        }
        Ok(())
    }

    fn snap_row(&self, state: &mut NetState, m: usize) {
        let cols = self.cols;
        let row = &state.v[m * cols..(m + 1) * cols];
        let top = argmax(row);
        let runner_up = row
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != top)
            .map(|(_, &x)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        if row[top] >= self.params.snap_threshold || runner_up == 0.0 {
            for p in 0..cols {
                state.v[m * cols + p] = if p == top { 1.0 } else { 0.0 };
            }
            state.frozen[m] = true;
        }
    }
}

/// Output voltages captured at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major output voltages.
    pub outputs: Vec<f64>,
}

impl Snapshot {
    pub fn output(&self, row: usize, col: usize) -> f64 {
        self.outputs[row * self.cols + col]
    }
}

/// Result of a network run.
#[derive(Debug, Clone)]
pub enum NeuralOutcome<'a> {
    /// Every row froze; the partition carries exact cluster conflicts.
    Converged {
        partition: Partition<'a>,
        iterations: usize,
        snapshots: Vec<Snapshot>,
    },
    /// The iteration cap was hit with rows still undecided.
    NotConverged {
        state: NetState,
        iterations: usize,
        snapshots: Vec<Snapshot>,
    },
}

impl<'a> NeuralOutcome<'a> {
    pub fn is_converged(&self) -> bool {
        matches!(self, Self::Converged { .. })
    }

    pub fn iterations(&self) -> usize {
        match self {
            Self::Converged { iterations, .. } | Self::NotConverged { iterations, .. } => {
                *iterations
            }
        }
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        match self {
            Self::Converged { snapshots, .. } | Self::NotConverged { snapshots, .. } => snapshots,
        }
    }

    pub fn partition(&self) -> Option<&Partition<'a>> {
        match self {
            Self::Converged { partition, .. } => Some(partition),
            Self::NotConverged { .. } => None,
        }
    }
}

/// Runs the network from a seeded initial state until every row is frozen
/// or `max_iterations` is reached. `snapshot_at` lists iterations whose
/// outputs should be recorded (0 is the initial state); requests past
/// convergence receive the final state, which no later step would change.
pub fn run<'a>(
    evidence: &'a EvidenceSet,
    clusters: usize,
    params: &NetParams,
    seed: u64,
    snapshot_at: &[usize],
) -> Result<NeuralOutcome<'a>> {
    let mut network = Network::new(evidence, clusters, params)?;
    let mut state = init_state(evidence.len(), clusters, params, seed)?;
    let mut scratch = state.clone();
    let mut wanted: Vec<usize> = snapshot_at.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut snapshots = Vec::new();
    let mut pending = wanted.iter().copied().peekable();

    while pending.peek() == Some(&state.iteration) {
        snapshots.push(state.snapshot());
        pending.next();
    }
    while !state.all_frozen() && state.iteration < params.max_iterations {
        network.advance(&state, &mut scratch)?;
        std::mem::swap(&mut state, &mut scratch);
        while pending.peek() == Some(&state.iteration) {
            snapshots.push(state.snapshot());
            pending.next();
        }
    }
    let iterations = state.iteration;

    if !state.all_frozen() {
        return Ok(NeuralOutcome::NotConverged {
            state,
            iterations,
            snapshots,
        });
    }
    for at in pending {
        let mut frame = state.snapshot();
        frame.iteration = at;
        snapshots.push(frame);
    }
    let partition = Partition::new(evidence, state.argmax_assignment(), clusters)?;
    Ok(NeuralOutcome::Converged {
        partition,
        iterations,
        snapshots,
    })
}
