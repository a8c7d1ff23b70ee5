//! Cross-referenced sparse storage for a nonnegative matrix.
//!
//! Every nonzero lives once in an arena of cells. Each cell is threaded onto a
//! doubly linked row list and a doubly linked column list, so finding the
//! column cell from the row cell is free and unlinking is O(1).
//!
//! Row lists hold only entries of active columns: [`SparseNonNegMatrix::delete_column`]
//! unlinks a column from every row list but leaves the column list intact.

use crate::error::{Error, Result};
use crate::scaled::floor_log2;

const NIL: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Cell {
    row: u32,
    col: u32,
    val: f64,
    row_prev: u32,
    row_next: u32,
    col_prev: u32,
    col_next: u32,
    in_row: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct List {
    head: u32,
    tail: u32,
    len: usize,
}

impl List {
    const EMPTY: List = List { head: NIL, tail: NIL, len: 0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListOrder {
    /// Insertion order: rows by column index, columns by row index.
    Index,
    /// Exactly non-increasing by value.
    Sorted,
    /// Non-increasing by `floor(log2(value))`.
    PseudoSorted,
}

#[derive(Clone, Debug)]
pub struct SparseNonNegMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    row_lists: Vec<List>,
    col_lists: Vec<List>,
    col_max: Vec<f64>,
    col_deleted: Vec<bool>,
    order: ListOrder,
}

impl SparseNonNegMatrix {
    /// Builds the matrix from `(row, col, value)` triplets. Values must be
    /// finite and strictly positive; duplicate coordinates are rejected.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if rows >= NIL as usize || cols >= NIL as usize {
            return Err(Error::InvalidInstance("dimensions too large".into()));
        }
        let mut trip: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, v) in &trip {
            if i >= rows || j >= cols {
                return Err(Error::InvalidInstance(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "entry ({i}, {j}) = {v} is not a finite positive value"
                )));
            }
        }
        trip.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = trip.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidInstance(format!("duplicate entry ({}, {})", w[0].0, w[0].1)));
        }
        if trip.len() >= NIL as usize {
            return Err(Error::InvalidInstance("too many entries".into()));
        }

        let mut m = SparseNonNegMatrix {
            rows,
            cols,
            cells: Vec::with_capacity(trip.len()),
            row_lists: vec![List::EMPTY; rows],
            col_lists: vec![List::EMPTY; cols],
            col_max: vec![0.0; cols],
            col_deleted: vec![false; cols],
            order: ListOrder::Index,
        };
        for (i, j, v) in trip {
            let id = m.cells.len() as u32;
            m.cells.push(Cell {
                row: i as u32,
                col: j as u32,
                val: v,
                row_prev: NIL,
                row_next: NIL,
                col_prev: NIL,
                col_next: NIL,
                in_row: false,
            });
            m.push_row(i, id);
            m.push_col(j, id);
            if v > m.col_max[j] {
                m.col_max[j] = v;
            }
        }
        Ok(m)
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, |r| r.len());
        if dense.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged dense matrix".into()));
        }
        let trip = dense.iter().enumerate().flat_map(|(i, row)| {
            row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(move |(j, &v)| (i, j, v))
        });
        Self::from_triplets(rows, cols, trip)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries, including entries of deleted columns.
    pub fn nnz(&self) -> usize {
        self.cells.len()
    }

    pub fn order(&self) -> ListOrder {
        self.order
    }

    /// Largest entry of column `j` (the fixed `u_j`); zero for an empty column.
    pub fn col_max(&self, j: usize) -> f64 {
        self.col_max[j]
    }

    pub fn col_len(&self, j: usize) -> usize {
        self.col_lists[j].len
    }

    /// Number of entries of row `i` that belong to active columns.
    pub fn row_len(&self, i: usize) -> usize {
        self.row_lists[i].len
    }

    pub fn is_column_deleted(&self, j: usize) -> bool {
        self.col_deleted[j]
    }

    /// First entry of the row list, if the row still has active entries.
    pub fn row_head(&self, i: usize) -> Option<f64> {
        let h = self.row_lists[i].head;
        (h != NIL).then(|| self.cells[h as usize].val)
    }

    /// Exact maximum over the active entries of row `i`, by full scan.
    pub fn row_max_active(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).fold(0.0, f64::max)
    }

    /// Active entries of row `i` as `(col, value)`, in list order.
    pub fn row(&self, i: usize) -> RowIter<'_> {
        RowIter { m: self, cur: self.row_lists[i].head }
    }

    /// Entries of column `j` as `(row, value)`, in list order.
    pub fn col(&self, j: usize) -> ColIter<'_> {
        ColIter { m: self, cur: self.col_lists[j].head }
    }

    /// All stored entries as `(row, col, value)`, regardless of deletion.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().map(|c| (c.row as usize, c.col as usize, c.val))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (i, j, v) in self.entries() {
            d[i][j] = v;
        }
        d
    }

    fn push_row(&mut self, i: usize, id: u32) {
        let list = &mut self.row_lists[i];
        let tail = list.tail;
        self.cells[id as usize].row_prev = tail;
        self.cells[id as usize].row_next = NIL;
        self.cells[id as usize].in_row = true;
        if tail == NIL {
            list.head = id;
        } else {
            self.cells[tail as usize].row_next = id;
        }
        list.tail = id;
        list.len += 1;
    }

    fn push_col(&mut self, j: usize, id: u32) {
        let list = &mut self.col_lists[j];
        let tail = list.tail;
        self.cells[id as usize].col_prev = tail;
        self.cells[id as usize].col_next = NIL;
        if tail == NIL {
            list.head = id;
        } else {
            self.cells[tail as usize].col_next = id;
        }
        list.tail = id;
        list.len += 1;
    }

    fn unlink_row(&mut self, id: u32) {
        let (i, prev, next) = {
            let c = &self.cells[id as usize];
            (c.row as usize, c.row_prev, c.row_next)
        };
        if prev == NIL {
            self.row_lists[i].head = next;
        } else {
            self.cells[prev as usize].row_next = next;
        }
        if next == NIL {
            self.row_lists[i].tail = prev;
        } else {
            self.cells[next as usize].row_prev = prev;
        }
        self.row_lists[i].len -= 1;
        let c = &mut self.cells[id as usize];
        c.row_prev = NIL;
        c.row_next = NIL;
        c.in_row = false;
    }

    fn row_ids(&self, i: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.row_lists[i].len);
        let mut cur = self.row_lists[i].head;
        while cur != NIL {
            out.push(cur);
            cur = self.cells[cur as usize].row_next;
        }
        out
    }

    fn col_ids(&self, j: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.col_lists[j].len);
        let mut cur = self.col_lists[j].head;
        while cur != NIL {
            out.push(cur);
            cur = self.cells[cur as usize].col_next;
        }
        out
    }

    fn relink_row(&mut self, i: usize, order: &[u32]) {
        self.row_lists[i] = List::EMPTY;
        for &id in order {
            self.push_row(i, id);
        }
    }

    fn relink_col(&mut self, j: usize, order: &[u32]) {
        self.col_lists[j] = List::EMPTY;
        for &id in order {
            self.push_col(j, id);
        }
    }

    /// Orders every row and column list by non-increasing value (stable).
    pub fn sort_lists(&mut self) {
        let cmp = |cells: &[Cell], a: &u32, b: &u32| {
            cells[*b as usize].val.total_cmp(&cells[*a as usize].val)
        };
        for i in 0..self.rows {
            let mut ids = self.row_ids(i);
            ids.sort_by(|a, b| cmp(&self.cells, a, b));
            self.relink_row(i, &ids);
        }
        for j in 0..self.cols {
            let mut ids = self.col_ids(j);
            ids.sort_by(|a, b| cmp(&self.cells, a, b));
            self.relink_col(j, &ids);
        }
        self.order = ListOrder::Sorted;
    }

    /// Bucket-sorts every list by non-increasing `floor(log2(value))`.
    /// A list of `k` entries spanning `w` distinct keys costs `O(k + w)`.
    pub fn pseudo_sort_lists(&mut self) {
        let mut counts: Vec<usize> = Vec::new();
        let mut scratch: Vec<u32> = Vec::new();
        for i in 0..self.rows {
            let ids = self.row_ids(i);
            bucket_by_key(&self.cells, &ids, &mut counts, &mut scratch);
            self.relink_row(i, &scratch);
        }
        for j in 0..self.cols {
            let ids = self.col_ids(j);
            bucket_by_key(&self.cells, &ids, &mut counts, &mut scratch);
            self.relink_col(j, &scratch);
        }
        self.order = ListOrder::PseudoSorted;
    }

    /// Unlinks every entry of column `j` from the row lists. Returns the rows
    /// whose first list element was among the removed entries.
    pub fn delete_column(&mut self, j: usize) -> Result<Vec<usize>> {
        if j >= self.cols {
            return Err(Error::Dimension(format!("column {j} out of range")));
        }
        if self.col_deleted[j] {
            return Err(Error::Internal(format!("column {j} deleted twice")));
        }
        self.col_deleted[j] = true;
        let mut affected = Vec::new();
        let mut cur = self.col_lists[j].head;
        while cur != NIL {
            let (i, next) = {
                let c = &self.cells[cur as usize];
                (c.row as usize, c.col_next)
            };
            if self.row_lists[i].head == cur {
                affected.push(i);
            }
            self.unlink_row(cur);
            cur = next;
        }
        Ok(affected)
    }

    /// Applies the range truncation: with `beta = min_j max_i M_ij`, entries
    /// below `beta*eps/c` are dropped and the rest capped at `beta*c/eps`.
    pub fn truncate(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Precondition(format!("eps = {eps} not in (0,1)")));
        }
        if self.cells.is_empty() {
            return Err(Error::Precondition("empty matrix".into()));
        }
        if let Some(j) = (0..self.cols).find(|&j| self.col_lists[j].len == 0) {
            return Err(Error::ZeroColumn(j));
        }
        let c = self.cols as f64;
        let beta = self.col_max.iter().copied().fold(f64::INFINITY, f64::min);
        let lo = beta * eps / c;
        let hi = beta * c / eps;
        let trip = self
            .entries()
            .filter(|&(_, _, v)| v >= lo)
            .map(|(i, j, v)| (i, j, v.min(hi)));
        let out = Self::from_triplets(self.rows, self.cols, trip)?;
        if let Some(j) = (0..out.cols).find(|&j| out.col_lists[j].len == 0) {
            return Err(Error::Internal(format!("truncation emptied column {j}")));
        }
        Ok(out)
    }

    /// Exact `Mx` and `M^T xhat` in one pass over the stored entries.
    pub fn exact_products(&self, x: &[f64], xhat: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.cols || xhat.len() != self.rows {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, got x of length {} and xhat of length {}",
                self.rows,
                self.cols,
                x.len(),
                xhat.len()
            )));
        }
        let mut mx = vec![0.0; self.rows];
        let mut mtx = vec![0.0; self.cols];
        for c in &self.cells {
            let (i, j) = (c.row as usize, c.col as usize);
            mx[i] += c.val * x[j];
            mtx[j] += c.val * xhat[i];
        }
        Ok((mx, mtx))
    }

    /// Full-traversal audit of the structural invariants: list links,
    /// cross-reference agreement between row and column lists, list order,
    /// and the column maxima.
    pub fn check_consistency(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Internal(m));
        let mut seen_in_row = vec![false; self.cells.len()];
        for i in 0..self.rows {
            let mut prev = NIL;
            let mut cur = self.row_lists[i].head;
            let mut n = 0;
            while cur != NIL {
                let c = &self.cells[cur as usize];
                if c.row as usize != i || c.row_prev != prev || !c.in_row {
                    return bad(format!("row {i} list corrupt at cell {cur}"));
                }
                if self.col_deleted[c.col as usize] {
                    return bad(format!("row {i} holds deleted column {}", c.col));
                }
                if prev != NIL && !self.in_order(self.cells[prev as usize].val, c.val) {
                    return bad(format!("row {i} out of order"));
                }
                seen_in_row[cur as usize] = true;
                prev = cur;
                cur = c.row_next;
                n += 1;
            }
            if n != self.row_lists[i].len || self.row_lists[i].tail != prev {
                return bad(format!("row {i} length/tail mismatch"));
            }
        }
        let mut seen_in_col = vec![false; self.cells.len()];
        for j in 0..self.cols {
            let mut prev = NIL;
            let mut cur = self.col_lists[j].head;
            let mut n = 0;
            let mut max = 0.0f64;
            while cur != NIL {
                let c = &self.cells[cur as usize];
                if c.col as usize != j || c.col_prev != prev {
                    return bad(format!("column {j} list corrupt at cell {cur}"));
                }
                if prev != NIL && !self.in_order(self.cells[prev as usize].val, c.val) {
                    return bad(format!("column {j} out of order"));
                }
                max = max.max(c.val);
                seen_in_col[cur as usize] = true;
                prev = cur;
                cur = c.col_next;
                n += 1;
            }
            if n != self.col_lists[j].len || self.col_lists[j].tail != prev {
                return bad(format!("column {j} length/tail mismatch"));
            }
            if max != self.col_max[j] {
                return bad(format!("column {j} max {} != stored {}", max, self.col_max[j]));
            }
        }
        for (id, c) in self.cells.iter().enumerate() {
            if !seen_in_col[id] {
                return bad(format!("cell {id} missing from its column list"));
            }
            let should_be_in_row = !self.col_deleted[c.col as usize];
            if seen_in_row[id] != should_be_in_row {
                return bad(format!("cell {id} row membership disagrees with column state"));
            }
        }
        Ok(())
    }

    fn in_order(&self, prev: f64, next: f64) -> bool {
        match self.order {
            ListOrder::Index => true,
            ListOrder::Sorted => prev >= next,
            ListOrder::PseudoSorted => floor_log2(prev) >= floor_log2(next),
        }
    }
}

/// Stable counting sort of `ids` by descending `floor(log2(val))` into `out`.
fn bucket_by_key(cells: &[Cell], ids: &[u32], counts: &mut Vec<usize>, out: &mut Vec<u32>) {
    out.clear();
    if ids.is_empty() {
        return;
    }
    let keys: Vec<i64> = ids.iter().map(|&id| floor_log2(cells[id as usize].val)).collect();
    let hi = *keys.iter().max().unwrap();
    let lo = *keys.iter().min().unwrap();
    let width = (hi - lo + 1) as usize;
    counts.clear();
    counts.resize(width + 1, 0);
    for &k in &keys {
        counts[(hi - k) as usize + 1] += 1;
    }
    for b in 1..=width {
        counts[b] += counts[b - 1];
    }
    out.resize(ids.len(), NIL);
    for (&id, &k) in ids.iter().zip(&keys) {
        let slot = &mut counts[(hi - k) as usize];
        out[*slot] = id;
        *slot += 1;
    }
}

pub struct RowIter<'a> {
    m: &'a SparseNonNegMatrix,
    cur: u32,
}

impl Iterator for RowIter<'_> {
    type Item = (usize, f64);

    #[inline]
    fn next(&mut self) -> Option<(usize, f64)> {
        if self.cur == NIL {
            return None;
        }
        let c = &self.m.cells[self.cur as usize];
        self.cur = c.row_next;
        Some((c.col as usize, c.val))
    }
}

pub struct ColIter<'a> {
    m: &'a SparseNonNegMatrix,
    cur: u32,
}

impl Iterator for ColIter<'_> {
    type Item = (usize, f64);

    #[inline]
    fn next(&mut self) -> Option<(usize, f64)> {
        if self.cur == NIL {
            return None;
        }
        let c = &self.m.cells[self.cur as usize];
        self.cur = c.col_next;
        Some((c.row as usize, c.val))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: &SparseNonNegMatrix) -> Vec<Vec<f64>> {
        m.to_dense()
    }

    #[test]
    fn sort_row_example() {
        let mut m = SparseNonNegMatrix::from_dense(&[vec![5.0, 1.0, 3.0]]).unwrap();
        m.sort_lists();
        let vals: Vec<f64> = m.row(0).map(|(_, v)| v).collect();
        assert_eq!(vals, vec![5.0, 3.0, 1.0]);
        m.check_consistency().unwrap();
    }

    #[test]
    fn pseudo_sort_row_example() {
        let mut m = SparseNonNegMatrix::from_dense(&[vec![5.0, 1.0, 3.0]]).unwrap();
        m.pseudo_sort_lists();
        let vals: Vec<f64> = m.row(0).map(|(_, v)| v).collect();
        assert_eq!(vals, vec![5.0, 3.0, 1.0]);
        m.check_consistency().unwrap();
    }

    #[test]
    fn pseudo_sort_equal_keys_any_order() {
        let mut m = SparseNonNegMatrix::from_dense(&[vec![3.0, 2.0]]).unwrap();
        m.pseudo_sort_lists();
        let mut vals: Vec<f64> = m.row(0).map(|(_, v)| v).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![2.0, 3.0]);
        m.check_consistency().unwrap();
    }

    #[test]
    fn delete_column_reports_head_rows() {
        // [[1,2],[-,3]]
        let mut m =
            SparseNonNegMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)])
                .unwrap();
        m.sort_lists();
        let mut affected = m.delete_column(1).unwrap();
        affected.sort();
        assert_eq!(affected, vec![0, 1]);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(m.row(1).count(), 0);
        // column lists stay intact
        assert_eq!(m.col(1).count(), 2);
        assert_eq!(m.col_max(1), 3.0);
        m.check_consistency().unwrap();
    }

    #[test]
    fn delete_non_max_column_affects_nothing() {
        let mut m = SparseNonNegMatrix::from_dense(&[vec![4.0, 1.0], vec![3.0, 2.0]]).unwrap();
        m.sort_lists();
        assert!(m.delete_column(1).unwrap().is_empty());
        m.check_consistency().unwrap();
    }

    #[test]
    fn delete_last_active_column_affects_all_its_rows() {
        let mut m = SparseNonNegMatrix::from_dense(&[vec![4.0, 1.0], vec![3.0, 2.0]]).unwrap();
        m.sort_lists();
        m.delete_column(0).unwrap();
        let mut affected = m.delete_column(1).unwrap();
        affected.sort();
        assert_eq!(affected, vec![0, 1]);
        assert!(m.row_head(0).is_none() && m.row_head(1).is_none());
    }

    #[test]
    fn double_delete_is_internal_error() {
        let mut m = SparseNonNegMatrix::from_dense(&[vec![1.0]]).unwrap();
        m.delete_column(0).unwrap();
        assert!(matches!(m.delete_column(0), Err(Error::Internal(_))));
    }

    #[test]
    fn truncate_examples() {
        let m = SparseNonNegMatrix::from_dense(&[vec![4.0, 0.001], vec![2.0, 1.0]]).unwrap();
        let t = m.truncate(0.5).unwrap();
        assert_eq!(dense(&t), vec![vec![4.0, 0.0], vec![2.0, 1.0]]);
        // input untouched
        assert_eq!(m.nnz(), 4);

        let m = SparseNonNegMatrix::from_dense(&[vec![1.0]]).unwrap();
        assert_eq!(dense(&m.truncate(0.3).unwrap()), vec![vec![1.0]]);

        let m = SparseNonNegMatrix::from_dense(&[vec![10.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(dense(&m.truncate(0.1).unwrap()), dense(&m));
    }

    #[test]
    fn truncate_caps_large_entries() {
        // beta = 1, c = 2, eps = 0.5 -> cap 4
        let m = SparseNonNegMatrix::from_dense(&[vec![100.0, 1.0]]).unwrap();
        assert_eq!(dense(&m.truncate(0.5).unwrap()), vec![vec![4.0, 1.0]]);
    }

    #[test]
    fn exact_products_examples() {
        let m = SparseNonNegMatrix::from_dense(&[vec![1.0]]).unwrap();
        assert_eq!(m.exact_products(&[2.0], &[0.0]).unwrap().0, vec![2.0]);
        let id = SparseNonNegMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(id.exact_products(&[0.0, 0.0], &[1.0, 3.0]).unwrap().1, vec![1.0, 3.0]);
        let m = SparseNonNegMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(m.exact_products(&[1.0, 1.0], &[0.0, 0.0]).unwrap().0, vec![3.0, 3.0]);
        assert!(matches!(m.exact_products(&[1.0], &[0.0, 0.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(SparseNonNegMatrix::from_triplets(1, 1, vec![(0, 0, -1.0)]).is_err());
        assert!(SparseNonNegMatrix::from_triplets(1, 1, vec![(0, 0, f64::NAN)]).is_err());
        assert!(SparseNonNegMatrix::from_triplets(1, 1, vec![(1, 0, 1.0)]).is_err());
        assert!(SparseNonNegMatrix::from_triplets(1, 1, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err());
    }
}
