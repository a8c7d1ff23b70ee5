//! The coupled randomized-increment solver.
//!
//! [`SolverState`] runs the full algorithm in two flavours: [`Variant::Simple`]
//! keeps exactly sorted lists and exact row maxima, [`Variant::Fast`] truncates
//! the matrix range, pseudo-sorts by `floor(log2)` and keeps row bounds within
//! a factor two. [`solve_slow`] is the exact-products reference algorithm.

mod slow;
mod state;

pub use slow::solve_slow;
pub use state::{random_pair, IterationTrace, SolverState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SparseNonNegMatrix;

/// Largest accepted `eps`; keeps `1 - 7 eps` positive.
pub const MAX_EPS: f64 = 1.0 / 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Exact sort, exact row maxima, no truncation.
    Simple,
    /// Range truncation, pseudo-sort, doubled row bounds.
    Fast,
    /// Reference algorithm with exact `Mx`, `M^T xhat`; entries must lie in `[0, 1]`.
    Slow,
}

impl Variant {
    /// `k` in the `1 - k eps` ratio the variant guarantees with high probability.
    pub fn guarantee_factor(self) -> f64 {
        match self {
            Variant::Simple => 6.0,
            Variant::Fast => 7.0,
            Variant::Slow => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Simple => "simple",
            Variant::Fast => "fast",
            Variant::Slow => "slow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub variant: Variant,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(eps: f64, variant: Variant, seed: u64) -> Self {
        SolverConfig { eps, variant, seed }
    }
}

/// Work counters accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    /// Outer iterations (pair samples).
    pub iterations: u64,
    /// Iterations in which no `y` or `yhat` entry moved.
    pub empty_iterations: u64,
    /// `sum_t |I_t| + |J_t|`.
    pub increments: u64,
    /// `sum_t |I'_t| + |J'_t|`: list cells visited, including the cell that stops a scan.
    pub traversed: u64,
    /// Entries unlinked from row lists by column retirement.
    pub deletions: u64,
    /// Entry updates across the four sampling structures.
    pub sampler_updates: u64,
}

/// Feasible primal/dual pair for the restricted form, already scaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionPair {
    /// `x* = x / max_i M_i x`; satisfies `M x* <= 1`.
    pub primal: Vec<f64>,
    /// `xhat* = xhat / min_j M_j^T xhat`; satisfies `M^T xhat* >= 1`.
    pub dual: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|x*| / |xhat*|`, at most one by weak duality.
    pub ratio: f64,
    pub variant: Variant,
    pub eps: f64,
    /// Iteration budget `N`.
    pub budget: u64,
    pub counters: OpCounters,
}

/// `N = ceil(2 ln(rc) / eps^2)`, at least one so a 1x1 instance still iterates.
pub fn iteration_budget(rows: usize, cols: usize, eps: f64) -> u64 {
    let n = (2.0 * ((rows * cols) as f64).ln() / (eps * eps)).ceil();
    (n as u64).max(1)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= MAX_EPS) {
        return Err(Error::Precondition(format!("eps = {eps} not in (0, 1/7]")));
    }
    Ok(())
}

pub(crate) fn check_columns(m: &SparseNonNegMatrix) -> Result<()> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidInstance("empty matrix".into()));
    }
    if let Some(j) = (0..m.cols()).find(|&j| m.col_len(j) == 0) {
        return Err(Error::ZeroColumn(j));
    }
    Ok(())
}

/// Solves the restricted form for a normalized matrix.
pub fn solve(m: &SparseNonNegMatrix, cfg: &SolverConfig) -> Result<SolutionPair> {
    match cfg.variant {
        Variant::Slow => solve_slow(m, cfg.eps, cfg.seed),
        _ => {
            let mut state = SolverState::new(m, cfg.eps, cfg.variant, cfg.seed)?;
            state.run()?;
            state.finalize(m)
        }
    }
}

/// Scales raw increments into a feasible pair against `m`.
pub(crate) fn scale_pair(
    m: &SparseNonNegMatrix,
    x: &[f64],
    xhat: &[f64],
    variant: Variant,
    eps: f64,
    budget: u64,
    counters: OpCounters,
) -> Result<SolutionPair> {
    let (mx, mtx) = m.exact_products(x, xhat)?;
    let max_load = mx.iter().copied().fold(0.0, f64::max);
    let min_cover = mtx.iter().copied().fold(f64::INFINITY, f64::min);
    if max_load.is_nan() || max_load <= 0.0 {
        return Err(Error::Internal("max_i M_i x is zero at finalization".into()));
    }
    if min_cover.is_nan() || min_cover <= 0.0 {
        return Err(Error::Internal("min_j M_j^T xhat is zero at finalization".into()));
    }
    let primal: Vec<f64> = x.iter().map(|v| v / max_load).collect();
    let dual: Vec<f64> = xhat.iter().map(|v| v / min_cover).collect();
    let primal_value: f64 = primal.iter().sum();
    let dual_value: f64 = dual.iter().sum();
    Ok(SolutionPair {
        ratio: primal_value / dual_value,
        primal,
        dual,
        primal_value,
        dual_value,
        variant,
        eps,
        budget,
        counters,
    })
}
