use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_columns, check_eps, iteration_budget, scale_pair, OpCounters, SolutionPair, Variant};
use crate::error::{Error, Result};
use crate::model::SparseNonNegMatrix;

/// Draws an index from weights given by their natural logs.
fn sample_log_weights<R: Rng + ?Sized>(logs: &[f64], rng: &mut R) -> usize {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &wk) in w.iter().enumerate() {
        if u < wk {
            return k;
        }
        u -= wk;
    }
    w.iter().rposition(|&wk| wk > 0.0).unwrap_or(0)
}

/// Reference algorithm with unit increments and exact `Mx`, `M^T xhat`.
///
/// Each iteration draws `j ~ phat / |phat|` with `phat_j = (1-eps)^{M_j^T xhat}`,
/// then `i ~ p / |p|` with `p_i = (1+eps)^{M_i x}`, and adds one to `x_j` and
/// `xhat_i`; it stops once `max_i M_i x >= N`. Every iteration costs
/// `O(r + c)`, so this is for small instances only. Requires `M_ij <= 1`.
pub fn solve_slow(m: &SparseNonNegMatrix, eps: f64, seed: u64) -> Result<SolutionPair> {
    check_eps(eps)?;
    check_columns(m)?;
    if let Some((i, j, v)) = m.entries().find(|&(_, _, v)| v > 1.0) {
        return Err(Error::Precondition(format!(
            "slow algorithm needs entries in [0,1], M[{i}][{j}] = {v}"
        )));
    }
    let (rows, cols) = (m.rows(), m.cols());
    let budget = iteration_budget(rows, cols, eps) as f64;
    let up = (1.0 + eps).ln();
    let down = (1.0 - eps).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut x = vec![0.0; cols];
    let mut xhat = vec![0.0; rows];
    let mut load = vec![0.0; rows];
    let mut cover = vec![0.0; cols];
    let mut log_p = vec![0.0; rows];
    let mut log_phat = vec![0.0; cols];
    let mut counters = OpCounters::default();

    while load.iter().copied().fold(0.0, f64::max) < budget {
        let j = sample_log_weights(&log_phat, &mut rng);
        let i = sample_log_weights(&log_p, &mut rng);
        x[j] += 1.0;
        xhat[i] += 1.0;
        for (r, v) in m.col(j) {
            load[r] += v;
            log_p[r] = load[r] * up;
        }
        for (c, v) in m.row(i) {
            cover[c] += v;
            log_phat[c] = cover[c] * down;
        }
        counters.iterations += 1;
        counters.increments += (m.col_len(j) + m.row_len(i)) as u64;
    }
    scale_pair(m, &x, &xhat, Variant::Slow, eps, budget as u64, counters)
}
