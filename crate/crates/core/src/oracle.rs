//! Exact reference values for small packing LPs.
//!
//! [`solve_exact`] runs a dense two-phase tableau simplex with Bland's rule;
//! [`brute_force_tiny`] is an independent grid search used to validate it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension accepted by [`solve_exact`].
pub const ORACLE_MAX_DIM: usize = 300;

const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub status: LpStatus,
    /// Optimal value (meaningful only when `status` is optimal).
    pub value: f64,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

impl OracleResult {
    /// `b . y`, the dual objective.
    pub fn dual_value(&self, b: &[f64]) -> f64 {
        self.dual.iter().zip(b).map(|(y, b)| y * b).sum()
    }
}

struct Tableau {
    rows: usize,
    /// Structural plus slack plus artificial columns.
    cols: usize,
    t: Vec<Vec<f64>>,
    /// Objective row: reduced costs `c_j - z_j`, last entry is `-value`.
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.t[r].clone();
        for (k, row) in self.t.iter_mut().enumerate() {
            if k != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&prow) {
                        *v -= f * p;
                    }
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&prow) {
                *v -= f * p;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index improving column, ties in the ratio test
    /// broken by lowest basic variable index. Returns false if unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && self.obj[j] > TOL) else {
                return true;
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.t[r][enter];
                if a > TOL {
                    let ratio = self.t[r][rhs] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - TOL
                                || (ratio <= lratio + TOL && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

/// Solves `max c.x s.t. A x <= b, x >= 0` exactly (up to floating point),
/// with the dual `min b.y s.t. A^T y >= c, y >= 0`.
pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<OracleResult> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("inconsistent LP dimensions".into()));
    }
    if m > ORACLE_MAX_DIM || n > ORACLE_MAX_DIM {
        return Err(Error::Precondition(format!(
            "oracle limited to {ORACLE_MAX_DIM}x{ORACLE_MAX_DIM}, got {m}x{n}"
        )));
    }
    let flipped: Vec<bool> = b.iter().map(|&v| v < 0.0).collect();
    let n_art = flipped.iter().filter(|&&f| f).count();
    let slack0 = n;
    let art0 = n + m;
    let cols = n + m + n_art;

    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut k = 0;
    for i in 0..m {
        let s = if flipped[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = s * a[i][j];
        }
        t[i][slack0 + i] = s;
        t[i][cols] = s * b[i];
        if flipped[i] {
            t[i][art0 + k] = 1.0;
            basis[i] = art0 + k;
            k += 1;
        } else {
            basis[i] = slack0 + i;
        }
    }
    let mut tab = Tableau { rows: m, cols, t, obj: vec![0.0; cols + 1], basis };

    if n_art > 0 {
        // phase one: maximize -sum(artificials)
        for j in art0..cols {
            tab.obj[j] = -1.0;
        }
        for r in 0..m {
            if tab.basis[r] >= art0 {
                let row = tab.t[r].clone();
                for (o, v) in tab.obj.iter_mut().zip(&row) {
                    *o += v;
                }
            }
        }
        tab.optimize(&|_| true);
        if -tab.obj[cols] < -1e-7 || tab.obj[cols] > 1e-7 {
            return Ok(OracleResult {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                primal: vec![],
                dual: vec![],
            });
        }
        for r in 0..m {
            if tab.basis[r] >= art0 {
                if let Some(j) = (0..art0).find(|&j| tab.t[r][j].abs() > TOL) {
                    tab.pivot(r, j);
                }
            }
        }
    }

    // phase two
    tab.obj = vec![0.0; cols + 1];
    tab.obj[..n].copy_from_slice(c);
    for r in 0..m {
        let bj = tab.basis[r];
        let cb = if bj < n { c[bj] } else { 0.0 };
        if cb != 0.0 {
            let row = tab.t[r].clone();
            for (o, v) in tab.obj.iter_mut().zip(&row) {
                *o -= cb * v;
            }
        }
    }
    if !tab.optimize(&|j| j < art0) {
        return Ok(OracleResult {
            status: LpStatus::Unbounded,
            value: f64::INFINITY,
            primal: vec![],
            dual: vec![],
        });
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.t[r][cols];
        }
    }
    let y: Vec<f64> = (0..m).map(|i| (-tab.obj[slack0 + i]).max(0.0)).collect();
    let value = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(OracleResult { status: LpStatus::Optimal, value, primal: x, dual: y })
}

/// Exact optimum of `max { |x| : M x <= 1, x >= 0 }` with its covering dual.
pub fn solve_exact(m: &[Vec<f64>]) -> Result<OracleResult> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if m.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Precondition("oracle needs a finite nonnegative matrix".into()));
    }
    simplex_max(m, &vec![1.0; rows], &vec![1.0; cols])
}

/// Grid-search value of `max { |x| : M x <= 1 }` for at most three columns.
///
/// The first `c - 1` coordinates range over a grid on `[0, c / min entry]`
/// and the last coordinate is maximized exactly along each grid line. The
/// grid is searched at step `R/200`, then repeatedly zoomed tenfold around
/// the best point down to a step of `1e-4`.
pub fn brute_force_tiny(m: &[Vec<f64>]) -> Result<f64> {
    let cols = m.first().map_or(0, |r| r.len());
    if cols == 0 || cols > 3 {
        return Err(Error::Precondition(format!("brute force handles 1..=3 columns, got {cols}")));
    }
    let last = cols - 1;
    if m.iter().all(|r| r[last] == 0.0) {
        return Ok(f64::INFINITY);
    }
    let min_entry = m.iter().flatten().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let range = cols as f64 / min_entry;

    // best |x| given the free coordinates, or None if infeasible
    let eval = |free: &[f64]| -> Option<f64> {
        let mut best_last = f64::INFINITY;
        for row in m {
            let used: f64 = free.iter().zip(row).map(|(x, a)| x * a).sum();
            if used > 1.0 + 1e-12 {
                return None;
            }
            if row[last] > 0.0 {
                best_last = best_last.min(((1.0 - used) / row[last]).max(0.0));
            }
        }
        Some(free.iter().sum::<f64>() + best_last)
    };

    let dims = last;
    let mut center = vec![range / 2.0; dims];
    let mut half = range / 2.0;
    let mut step = range / 200.0;
    let mut best = f64::NEG_INFINITY;
    loop {
        let axis: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| {
                let lo = (c - half).max(0.0);
                let hi = (c + half).min(range);
                let n = ((hi - lo) / step).round() as usize;
                (0..=n).map(|k| lo + k as f64 * step).filter(|&v| v <= hi + 1e-12).collect()
            })
            .collect();
        let mut best_pt = center.clone();
        let mut visit = |pt: &[f64]| {
            if let Some(v) = eval(pt) {
                if v > best {
                    best = v;
                    best_pt = pt.to_vec();
                }
            }
        };
        match dims {
            0 => visit(&[]),
            1 => axis[0].iter().for_each(|&a| visit(&[a])),
            _ => {
                for &a in &axis[0] {
                    for &b in &axis[1] {
                        visit(&[a, b]);
                    }
                }
            }
        }
        if dims == 0 || step <= 1e-4 {
            break;
        }
        center = best_pt;
        half = 3.0 * step;
        step /= 10.0;
    }
    Ok(best)
}
