//! Compressed-row 0/1 pattern matrices.
//!
//! Every incidence and adjacency table in this crate is unsigned, so only the
//! sparsity pattern is stored. Column indices within a row are kept sorted and
//! unique.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrPattern {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl CsrPattern {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
        }
    }

    /// Builds a pattern from per-row column lists. Each list is sorted and
    /// deduplicated.
    ///
    /// Panics if a column index is out of range.
    pub fn from_rows<I, R>(cols: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = usize>,
    {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        for row in rows {
            let start = indices.len();
            indices.extend(row);
            let tail = &mut indices[start..];
            tail.sort_unstable();
            let mut write = start;
            for read in start..indices.len() {
                let c = indices[read];
                assert!(c < cols, "column {c} out of range for width {cols}");
                if write == start || indices[write - 1] != c {
                    indices[write] = c;
                    write += 1;
                }
            }
            indices.truncate(write);
            indptr.push(indices.len());
        }
        Self {
            rows: indptr.len() - 1,
            cols,
            indptr,
            indices,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// Fraction of nonzero entries; zero for an empty shape.
    pub fn density(&self) -> f64 {
        let cells = self.rows * self.cols;
        if cells == 0 {
            0.0
        } else {
            self.nnz() as f64 / cells as f64
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.indices.len()];
        for r in 0..self.rows {
            for &c in self.row(r) {
                indices[next[c]] = r;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
        }
    }

    /// Pattern of the boolean product `self * other`.
    pub fn product(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut mark = vec![usize::MAX; other.cols];
        let rows = (0..self.rows).map(|i| {
            let mut out = Vec::new();
            for &m in self.row(i) {
                for &j in other.row(m) {
                    if mark[j] != i {
                        mark[j] = i;
                        out.push(j);
                    }
                }
            }
            out
        });
        let rows: Vec<Vec<usize>> = rows.collect();
        Self::from_rows(other.cols, rows)
    }

    /// Entrywise union of two equally shaped patterns.
    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shapes differ");
        Self::from_rows(
            self.cols,
            (0..self.rows).map(|i| self.row(i).iter().chain(other.row(i)).copied().collect::<Vec<_>>()),
        )
    }

    /// Side-by-side concatenation `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "row counts differ");
        let split = self.cols;
        Self::from_rows(
            self.cols + other.cols,
            (0..self.rows).map(|i| {
                self.row(i)
                    .iter()
                    .copied()
                    .chain(other.row(i).iter().map(|&c| c + split))
                    .collect::<Vec<_>>()
            }),
        )
    }

    pub fn without_diagonal(&self) -> Self {
        Self::from_rows(
            self.cols,
            (0..self.rows).map(|i| self.row(i).iter().copied().filter(|&j| j != i).collect::<Vec<_>>()),
        )
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let mut out = vec![vec![0u8; self.cols]; self.rows];
        for (i, row) in out.iter_mut().enumerate() {
            for &j in self.row(i) {
                row[j] = 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_and_product() {
        let a = CsrPattern::from_rows(3, vec![vec![0, 2], vec![1], vec![]]);
        let t = a.transpose();
        assert_eq!(t.row(0), &[0]);
        assert_eq!(t.row(2), &[0]);
        let p = a.product(&t);
        assert_eq!(p.to_dense(), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 0]]);
        assert!(p.is_symmetric());
    }

    #[test]
    fn from_rows_dedups() {
        let a = CsrPattern::from_rows(4, vec![vec![3, 1, 3, 1]]);
        assert_eq!(a.row(0), &[1, 3]);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn hstack_offsets_columns() {
        let a = CsrPattern::from_rows(2, vec![vec![1]]);
        let b = CsrPattern::from_rows(3, vec![vec![0, 2]]);
        let h = a.hstack(&b);
        assert_eq!(h.cols(), 5);
        assert_eq!(h.row(0), &[1, 2, 4]);
    }

    #[test]
    fn empty_shapes() {
        let e = CsrPattern::empty(3, 0);
        assert_eq!(e.nnz(), 0);
        assert_eq!(e.density(), 0.0);
        assert_eq!(e.transpose().shape(), (0, 3));
    }
}
