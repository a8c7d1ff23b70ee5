//! Packing/covering instances and their normalized sparse form.

mod generate;
mod matrix;
pub mod mtx;

pub use generate::generate_random;
pub use matrix::{ColIter, ListOrder, RowIter, SparseNonNegMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max { a.x : A x <= b, x >= 0 }` and its covering dual
/// `min { b.xhat : A^T xhat >= a, xhat >= 0 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralInstance {
    pub rows: usize,
    pub cols: usize,
    /// Nonzero entries of `A` as `(row, col, value)`.
    pub entries: Vec<(usize, usize, f64)>,
    /// Packing capacities, one per row.
    pub b: Vec<f64>,
    /// Objective coefficients, one per column.
    pub a: Vec<f64>,
}

impl GeneralInstance {
    /// Instance with unit capacities and unit objective.
    pub fn unit(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        GeneralInstance { rows, cols, entries, b: vec![1.0; rows], a: vec![1.0; cols] }
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let rows = dense.len();
        let cols = dense.first().map_or(0, |r| r.len());
        let entries = dense
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter().enumerate().filter(|(_, &v)| v != 0.0).map(move |(j, &v)| (i, j, v))
            })
            .collect();
        Self::unit(rows, cols, entries)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// The restricted form `max { |x| : M x <= 1 }` together with what is needed
/// to map solutions back to the original variables.
#[derive(Clone, Debug)]
pub struct NormalizedInstance {
    pub matrix: SparseNonNegMatrix,
    /// Original row index of each retained row (all-zero rows are dropped).
    pub kept_rows: Vec<usize>,
    pub original_rows: usize,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl NormalizedInstance {
    /// Maps a restricted-form pair back to original variables:
    /// `x_j = x'_j / a_j` and `xhat_i = xhat'_i / b_i`. Dropped rows get a
    /// zero dual value.
    pub fn to_original(&self, primal: &[f64], dual: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dims(primal.len(), dual.len())?;
        let x = primal.iter().zip(&self.a).map(|(v, a)| v / a).collect();
        let mut xhat = vec![0.0; self.original_rows];
        for (k, &orig) in self.kept_rows.iter().enumerate() {
            xhat[orig] = dual[k] / self.b[orig];
        }
        Ok((x, xhat))
    }

    /// Inverse of [`Self::to_original`].
    pub fn from_original(&self, x: &[f64], xhat: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.a.len() || xhat.len() != self.original_rows {
            return Err(Error::Dimension(format!(
                "instance is {}x{}, solution has {} primal and {} dual values",
                self.original_rows,
                self.a.len(),
                x.len(),
                xhat.len()
            )));
        }
        let primal = x.iter().zip(&self.a).map(|(v, a)| v * a).collect();
        let dual = self.kept_rows.iter().map(|&orig| xhat[orig] * self.b[orig]).collect();
        Ok((primal, dual))
    }

    fn check_dims(&self, np: usize, nd: usize) -> Result<()> {
        if np != self.matrix.cols() || nd != self.matrix.rows() {
            return Err(Error::Dimension(format!(
                "normalized matrix is {}x{}, got {} primal and {} dual values",
                self.matrix.rows(),
                self.matrix.cols(),
                np,
                nd
            )));
        }
        Ok(())
    }
}

/// Rescales to the restricted form with `M_ij = A_ij / (b_i a_j)`.
///
/// All-zero rows are dropped with a warning. An all-zero column is rejected.
pub fn normalize(inst: &GeneralInstance) -> Result<NormalizedInstance> {
    if inst.b.len() != inst.rows || inst.a.len() != inst.cols {
        return Err(Error::Dimension(format!(
            "{}x{} instance with {} capacities and {} objective coefficients",
            inst.rows,
            inst.cols,
            inst.b.len(),
            inst.a.len()
        )));
    }
    if inst.rows == 0 || inst.cols == 0 {
        return Err(Error::InvalidInstance("empty instance".into()));
    }
    if let Some((i, v)) = inst.b.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInstance(format!("capacity b[{i}] = {v} must be positive")));
    }
    if let Some((j, v)) = inst.a.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInstance(format!("objective a[{j}] = {v} must be positive")));
    }

    let mut row_used = vec![false; inst.rows];
    let mut col_used = vec![false; inst.cols];
    for &(i, j, v) in &inst.entries {
        if i >= inst.rows || j >= inst.cols {
            return Err(Error::InvalidInstance(format!("entry ({i}, {j}) out of range")));
        }
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidInstance(format!("entry ({i}, {j}) = {v} is negative")));
        }
        if v > 0.0 {
            row_used[i] = true;
            col_used[j] = true;
        }
    }
    if let Some(j) = col_used.iter().position(|&u| !u) {
        return Err(Error::ZeroColumn(j));
    }

    let mut new_index = vec![usize::MAX; inst.rows];
    let mut kept_rows = Vec::with_capacity(inst.rows);
    for (i, &used) in row_used.iter().enumerate() {
        if used {
            new_index[i] = kept_rows.len();
            kept_rows.push(i);
        } else {
            log::warn!("row {i} has no nonzero entries; dropping the vacuous constraint");
        }
    }

    let trip = inst
        .entries
        .iter()
        .filter(|&&(_, _, v)| v > 0.0)
        .map(|&(i, j, v)| (new_index[i], j, v / (inst.b[i] * inst.a[j])));
    let matrix = SparseNonNegMatrix::from_triplets(kept_rows.len(), inst.cols, trip)?;
    Ok(NormalizedInstance {
        matrix,
        kept_rows,
        original_rows: inst.rows,
        b: inst.b.clone(),
        a: inst.a.clone(),
    })
}
