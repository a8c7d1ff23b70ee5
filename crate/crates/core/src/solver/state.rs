use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_columns, check_eps, iteration_budget, scale_pair, OpCounters, SolutionPair, Variant};
use crate::error::{Error, Result};
use crate::model::SparseNonNegMatrix;
use crate::sampler::SamplableVector;
use crate::scaled::ScaledF64;

/// What happened in one outer iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    /// Sampled dual index `i'` (row).
    pub row: usize,
    /// Sampled primal index `j'` (column).
    pub col: usize,
    /// Increment added to both `x_{j'}` and `xhat_{i'}`.
    pub delta: f64,
    /// Shared uniform threshold.
    pub z: f64,
    /// `I_t`: rows whose `y` was incremented.
    pub rows_incremented: Vec<usize>,
    /// `J_t`: columns whose `yhat` was incremented.
    pub cols_incremented: Vec<usize>,
    /// `|I'_t|`, cells visited in column `j'`.
    pub rows_traversed: usize,
    /// `|J'_t|`, cells visited in row `i'`.
    pub cols_traversed: usize,
    /// Columns that left the active set at the end of the iteration.
    pub retired: Vec<usize>,
}

impl IterationTrace {
    pub fn is_empty(&self) -> bool {
        self.rows_incremented.is_empty() && self.cols_incremented.is_empty()
    }
}

/// Mutable state of one run of the full algorithm.
///
/// Cloning gives an independent frozen copy; together with [`SolverState::reseed`]
/// this is what the Monte Carlo checks in `verify` build on.
#[derive(Clone, Debug)]
pub struct SolverState {
    matrix: SparseNonNegMatrix,
    variant: Variant,
    eps: f64,
    budget: u64,
    x: Vec<f64>,
    xhat: Vec<f64>,
    x_total: f64,
    xhat_total: f64,
    y: Vec<u64>,
    yhat: Vec<u64>,
    max_y: u64,
    /// `u_j`, the largest entry of column `j` of the working matrix.
    col_bound: Vec<f64>,
    /// `uhat_i`, within `[1, 2]` times the largest active entry of row `i`.
    row_bound: Vec<f64>,
    p: SamplableVector,
    p_row_bound: SamplableVector,
    phat: SamplableVector,
    phat_col_bound: SamplableVector,
    active: Vec<bool>,
    active_count: usize,
    /// Active columns with `yhat_j < N`.
    below_budget: usize,
    rng: ChaCha8Rng,
    counters: OpCounters,
}

impl SolverState {
    /// Prepares a run on the normalized matrix `m`. The fast variant works on
    /// the range-truncated, pseudo-sorted copy; the simple variant on an
    /// exactly sorted copy. `m` itself is untouched.
    pub fn new(m: &SparseNonNegMatrix, eps: f64, variant: Variant, seed: u64) -> Result<Self> {
        check_eps(eps)?;
        check_columns(m)?;
        let matrix = match variant {
            Variant::Simple => {
                let mut w = m.clone();
                w.sort_lists();
                w
            }
            Variant::Fast => {
                let mut w = m.truncate(eps)?;
                w.pseudo_sort_lists();
                w
            }
            Variant::Slow => {
                return Err(Error::Precondition("the slow variant has no incremental state".into()))
            }
        };
        let (rows, cols) = (matrix.rows(), matrix.cols());
        let col_bound: Vec<f64> = (0..cols).map(|j| matrix.col_max(j)).collect();
        let row_bound: Vec<f64> = (0..rows).map(|i| matrix.row_max_active(i)).collect();
        Ok(SolverState {
            p: SamplableVector::build(&vec![1.0; rows])?,
            p_row_bound: SamplableVector::build(&row_bound)?,
            phat: SamplableVector::build(&vec![1.0; cols])?,
            phat_col_bound: SamplableVector::build(&col_bound)?,
            budget: iteration_budget(m.rows(), m.cols(), eps),
            x: vec![0.0; cols],
            xhat: vec![0.0; rows],
            x_total: 0.0,
            xhat_total: 0.0,
            y: vec![0; rows],
            yhat: vec![0; cols],
            max_y: 0,
            col_bound,
            row_bound,
            active: vec![true; cols],
            active_count: cols,
            below_budget: cols,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counters: OpCounters::default(),
            matrix,
            variant,
            eps,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// The working matrix (sorted or truncated and pseudo-sorted, with
    /// retired columns removed from the row lists).
    pub fn matrix(&self) -> &SparseNonNegMatrix {
        &self.matrix
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn xhat(&self) -> &[f64] {
        &self.xhat
    }

    /// Running `(|x|, |xhat|)`; both receive the same increments in the same order.
    pub fn totals(&self) -> (f64, f64) {
        (self.x_total, self.xhat_total)
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn yhat(&self) -> &[u64] {
        &self.yhat
    }

    pub fn row_bound(&self) -> &[f64] {
        &self.row_bound
    }

    pub fn col_bound(&self) -> &[f64] {
        &self.col_bound
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.active[j]
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn counters(&self) -> OpCounters {
        let mut c = self.counters;
        c.sampler_updates = [&self.p, &self.p_row_bound, &self.phat, &self.phat_col_bound]
            .iter()
            .map(|v| v.stats().updates)
            .sum();
        c
    }

    /// `|p|` summed over entries.
    pub fn p_total(&self) -> ScaledF64 {
        self.p.exact_total()
    }

    /// `|phat|` summed over entries.
    pub fn phat_total(&self) -> ScaledF64 {
        self.phat.exact_total()
    }

    pub fn p_weight(&self, i: usize) -> ScaledF64 {
        self.p.weight(i)
    }

    pub fn phat_weight(&self, j: usize) -> ScaledF64 {
        self.phat.weight(j)
    }

    /// Replaces the random stream, e.g. to run independent trials from a clone.
    pub fn reseed(&mut self, seed: u64, stream: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        self.rng = rng;
    }

    /// True once `max_i y_i >= N`, or every active column has `yhat_j >= N`
    /// (which includes the active set being empty).
    pub fn is_done(&self) -> bool {
        self.max_y >= self.budget || self.below_budget == 0
    }

    pub fn run(&mut self) -> Result<()> {
        let mut trace = IterationTrace::default();
        while !self.is_done() {
            self.step_into(&mut trace)?;
        }
        Ok(())
    }

    /// Scales the current increments against `original` (the untruncated
    /// normalized matrix).
    pub fn finalize(&self, original: &SparseNonNegMatrix) -> Result<SolutionPair> {
        if original.rows() != self.matrix.rows() || original.cols() != self.matrix.cols() {
            return Err(Error::Dimension("finalize against a matrix of another shape".into()));
        }
        scale_pair(original, &self.x, &self.xhat, self.variant, self.eps, self.budget, self.counters())
    }

    pub fn step(&mut self) -> Result<IterationTrace> {
        let mut t = IterationTrace::default();
        self.step_into(&mut t)?;
        Ok(t)
    }

    /// One outer iteration. Random draws, in order: branch choice and the
    /// pair (see [`random_pair`]), then the threshold `z`.
    pub fn step_into(&mut self, t: &mut IterationTrace) -> Result<()> {
        if self.is_done() {
            return Err(Error::Precondition("step after termination".into()));
        }
        let (i0, j0) = random_pair(
            &self.p,
            &self.phat,
            &self.p_row_bound,
            &self.phat_col_bound,
            &mut self.rng,
        )?;
        let delta = 1.0 / (self.row_bound[i0] + self.col_bound[j0]);
        self.x[j0] += delta;
        self.xhat[i0] += delta;
        self.x_total += delta;
        self.xhat_total += delta;
        debug_assert_eq!(self.x_total.to_bits(), self.xhat_total.to_bits());
        debug_assert!(self.lhs_increase_in_range(i0, j0, delta));

        let z: f64 = self.rng.random();
        let stop = match self.variant {
            Variant::Fast => z / 2.0,
            _ => z,
        };

        t.row = i0;
        t.col = j0;
        t.delta = delta;
        t.z = z;
        t.rows_incremented.clear();
        t.cols_incremented.clear();
        t.retired.clear();
        t.rows_traversed = 0;
        t.cols_traversed = 0;

        for (i, v) in self.matrix.col(j0) {
            t.rows_traversed += 1;
            let rise = v * delta;
            if rise < stop {
                break;
            }
            if rise >= z {
                t.rows_incremented.push(i);
            }
        }
        for (j, v) in self.matrix.row(i0) {
            t.cols_traversed += 1;
            let rise = v * delta;
            if rise < stop {
                break;
            }
            if rise >= z {
                t.cols_incremented.push(j);
            }
        }

        let up = 1.0 + self.eps;
        for &i in &t.rows_incremented {
            self.y[i] += 1;
            self.max_y = self.max_y.max(self.y[i]);
            self.p.scale_entry(i, up)?;
            self.p_row_bound.scale_entry(i, up)?;
        }
        let down = 1.0 - self.eps;
        for &j in &t.cols_incremented {
            self.yhat[j] += 1;
            self.phat.scale_entry(j, down)?;
            self.phat_col_bound.scale_entry(j, down)?;
            if self.yhat[j] == self.budget {
                self.below_budget -= 1;
            } else if self.yhat[j] > self.budget {
                t.retired.push(j);
            }
        }
        for k in 0..t.retired.len() {
            let j = t.retired[k];
            self.retire(j)?;
        }

        let c = &mut self.counters;
        c.iterations += 1;
        let inc = (t.rows_incremented.len() + t.cols_incremented.len()) as u64;
        c.increments += inc;
        if inc == 0 {
            c.empty_iterations += 1;
        }
        c.traversed += (t.rows_traversed + t.cols_traversed) as u64;
        Ok(())
    }

    /// Retires an active column early, as if `yhat_j` had passed `N`.
    /// Lets tests build states the run itself would not reach.
    pub fn force_retire(&mut self, j: usize) -> Result<()> {
        if j >= self.active.len() || !self.active[j] {
            return Err(Error::Precondition(format!("column {j} is not active")));
        }
        if self.yhat[j] < self.budget {
            self.below_budget -= 1;
        }
        self.retire(j)
    }

    fn retire(&mut self, j: usize) -> Result<()> {
        self.active[j] = false;
        self.active_count -= 1;
        self.phat.set_zero(j)?;
        self.phat_col_bound.set_zero(j)?;
        self.counters.deletions += self.matrix.col_len(j) as u64;
        let affected = self.matrix.delete_column(j)?;
        for i in affected {
            let new = match (self.matrix.row_head(i), self.variant) {
                (None, _) => 0.0,
                (Some(h), Variant::Fast) => 2.0 * h,
                (Some(h), _) => h,
            };
            let old = self.row_bound[i];
            self.row_bound[i] = new;
            if new == 0.0 {
                if self.p_row_bound.is_live(i) {
                    self.p_row_bound.set_zero(i)?;
                }
            } else if new != old {
                self.p_row_bound.scale_entry(i, new / old)?;
            }
        }
        Ok(())
    }

    /// Largest LHS increase over rows of `j'` and active columns of `i'` lies
    /// in `[1/4, 1]`.
    fn lhs_increase_in_range(&self, i0: usize, j0: usize, delta: f64) -> bool {
        let col_max = self.col_bound[j0] * delta;
        let row_head = self.matrix.row_head(i0).unwrap_or(0.0) * delta;
        let row_max = self.matrix.row_max_active(i0) * delta;
        col_max <= 1.0 && row_max <= 1.0 && col_max.max(row_head) >= 0.25 - 1e-12
    }

    /// Audits the state invariants. Intended for tests; cost is O(n).
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Internal(m));
        if self.x_total != self.xhat_total {
            return bad("|x| != |xhat|".into());
        }
        self.matrix.check_consistency()?;
        for (i, &y) in self.y.iter().enumerate() {
            if y > self.budget {
                return bad(format!("y[{i}] = {y} exceeds N"));
            }
            let rmax = self.matrix.row_max_active(i);
            let ub = self.row_bound[i];
            if !(ub >= rmax && ub <= 2.0 * rmax) {
                return bad(format!("row bound {ub} outside [1,2] x {rmax} for row {i}"));
            }
        }
        let mut below = 0;
        for (j, &yh) in self.yhat.iter().enumerate() {
            if yh > self.budget + 1 {
                return bad(format!("yhat[{j}] = {yh} exceeds N + 1"));
            }
            if self.active[j] != (yh <= self.budget) {
                return bad(format!("column {j} activity disagrees with yhat"));
            }
            if self.active[j] == self.matrix.is_column_deleted(j) {
                return bad(format!("column {j} activity disagrees with matrix"));
            }
            if self.phat.is_live(j) != self.active[j] {
                return bad(format!("phat liveness of column {j}"));
            }
            if self.active[j] && yh < self.budget {
                below += 1;
            }
        }
        if below != self.below_budget {
            return bad("below-budget count drifted".into());
        }
        // p_i = (1+eps)^y_i and phat_j = (1-eps)^yhat_j up to rounding
        let lu = (1.0 + self.eps).ln();
        let ld = (1.0 - self.eps).ln();
        for (i, &y) in self.y.iter().enumerate() {
            let got = log_of(self.p.weight(i));
            if (got - y as f64 * lu).abs() > 1e-9 * (1.0 + y as f64) {
                return bad(format!("p[{i}] does not match (1+eps)^y"));
            }
        }
        for (j, &yh) in self.yhat.iter().enumerate() {
            if self.active[j] {
                let got = log_of(self.phat.weight(j));
                if (got - yh as f64 * ld).abs() > 1e-9 * (1.0 + yh as f64) {
                    return bad(format!("phat[{j}] does not match (1-eps)^yhat"));
                }
            }
        }
        self.p.check_invariants(1e-9)?;
        self.phat.check_invariants(1e-9)?;
        self.p_row_bound.check_invariants(1e-9)?;
        self.phat_col_bound.check_invariants(1e-9)?;
        Ok(())
    }
}

fn log_of(v: ScaledF64) -> f64 {
    v.mantissa().ln() + v.exponent() as f64 * std::f64::consts::LN_2
}

/// Draws `(i, j)` with probability proportional to `p_i phat_j (uhat_i + u_j)`
/// as a two-branch mixture: with probability
/// `|p uhat| |phat| / (|p uhat| |phat| + |p| |phat u|)` take `i ~ p uhat` and
/// `j ~ phat`, otherwise `i ~ p` and `j ~ phat u`.
///
/// Draw order: branch uniform, then `i`, then `j`.
pub fn random_pair<R: Rng + ?Sized>(
    p: &SamplableVector,
    phat: &SamplableVector,
    p_row_bound: &SamplableVector,
    phat_col_bound: &SamplableVector,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let a = p_row_bound.total() * phat.total();
    let b = p.total() * phat_col_bound.total();
    let sum = a + b;
    if sum.is_zero() {
        return Err(Error::Internal("random_pair with no active columns".into()));
    }
    let first = a.ratio(&sum);
    let pick = |v: &SamplableVector, rng: &mut R| {
        v.sample(rng).map_err(|e| Error::Internal(format!("random_pair: {e}")))
    };
    if rng.random::<f64>() < first {
        let i = pick(p_row_bound, rng)?;
        let j = pick(phat, rng)?;
        Ok((i, j))
    } else {
        let i = pick(p, rng)?;
        let j = pick(phat_col_bound, rng)?;
        Ok((i, j))
    }
}
