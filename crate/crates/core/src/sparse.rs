//! Compressed sparse column storage for symmetric operators and a sparse
//! Cholesky factorization that reuses its symbolic analysis.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

/// Sorted CSC pattern of a square matrix (both triangles stored).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Pattern coupling every pair of dofs that share a block.
    pub fn from_blocks<'a>(n: usize, blocks: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for b in blocks {
            for &j in b {
                cols[j].extend_from_slice(b);
            }
        }
        for (j, c) in cols.iter_mut().enumerate() {
            c.push(j);
            c.sort_unstable();
            c.dedup();
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        for c in cols {
            row_idx.extend(c);
            col_ptr.push(row_idx.len());
        }
        Self { n, col_ptr, row_idx }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Storage position of entry `(row, col)`.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        self.row_idx[lo..hi].binary_search(&row).ok().map(|p| lo + p)
    }

    /// Pattern restricted to `keep` (sorted, unique), renumbered
    /// consecutively, together with the gather map
    /// `(full position, restricted position)`.
    pub fn restrict(&self, keep: &[usize]) -> (SparsityPattern, Vec<(usize, usize)>) {
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            new_index[i] = k;
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut gather = Vec::new();
        for &j in keep {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = new_index[self.row_idx[p]];
                if r != usize::MAX {
                    gather.push((p, row_idx.len()));
                    row_idx.push(r);
                }
            }
            col_ptr.push(row_idx.len());
        }
        (
            SparsityPattern {
                n: keep.len(),
                col_ptr,
                row_idx,
            },
            gather,
        )
    }
}

/// Symmetric matrix stored in full on a shared pattern.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn from_values(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Result<Self> {
        crate::error::check_len("operator values", values.len(), pattern.nnz())?;
        Ok(Self { pattern, values })
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |p| self.values[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, &v) in d.iter().enumerate() {
            let p = self.pattern.position(i, i).expect("diagonal is always stored");
            self.values[p] += v;
        }
    }

    /// `self += a * other` for operators on the same pattern.
    pub fn axpy(&mut self, a: f64, other: &SparseOperator) {
        debug_assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern);
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.values {
            *x *= a;
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        let p = &self.pattern;
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for k in p.col_ptr[j]..p.col_ptr[j + 1] {
                y[p.row_idx[k]] += self.values[k] * xj;
            }
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest `|A_ij − A_ji|` relative to the largest entry.
    pub fn symmetry_error(&self) -> f64 {
        let p = &self.pattern;
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut err = 0.0f64;
        for j in 0..self.n() {
            for k in p.col_ptr[j]..p.col_ptr[j + 1] {
                let i = p.row_idx[k];
                err = err.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        err / scale
    }

    /// Restriction onto a gathered sub-pattern (see [`SparsityPattern::restrict`]).
    pub fn gather(&self, pattern: &Arc<SparsityPattern>, map: &[(usize, usize)]) -> SparseOperator {
        let mut values = vec![0.0; pattern.nnz()];
        for &(from, to) in map {
            values[to] = self.values[from];
        }
        SparseOperator {
            pattern: Arc::clone(pattern),
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        let p = &self.pattern;
        for j in 0..n {
            for k in p.col_ptr[j]..p.col_ptr[j + 1] {
                d[p.row_idx[k]][j] = self.values[k];
            }
        }
        d
    }
}

/// Sparse Cholesky with the fill-reducing ordering and elimination tree
/// computed once per pattern.
pub struct CholeskySolver {
    pattern: Arc<SparsityPattern>,
    symbolic: SymbolicLlt<usize>,
}

impl CholeskySolver {
    pub fn new(pattern: Arc<SparsityPattern>) -> Result<Self> {
        let sym = SymbolicSparseColMatRef::new_checked(pattern.n, pattern.n, &pattern.col_ptr, None, &pattern.row_idx);
        let symbolic = SymbolicLlt::try_new(sym, Side::Lower)
            .map_err(|e| Error::Singular(format!("symbolic analysis failed: {e:?}")))?;
        Ok(Self { pattern, symbolic })
    }

    pub fn factor(&self, op: &SparseOperator) -> Result<CholeskyFactor> {
        if *op.pattern != *self.pattern {
            return Err(Error::Consistency("operator pattern differs from the analysed pattern".into()));
        }
        let p = &self.pattern;
        let sym = SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.col_ptr, None, &p.row_idx);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), SparseColMatRef::new(sym, &op.values), Side::Lower)
            .map_err(|e| Error::Singular(format!("cholesky factorization failed: {e:?}")))?;
        Ok(CholeskyFactor { n: p.n, llt })
    }
}

pub struct CholeskyFactor {
    n: usize,
    llt: Llt<usize, f64>,
}

impl CholeskyFactor {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "right-hand side length");
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(b, self.n, 1));
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
