//! Small dense/sparse kernels: vector helpers, the [`LinearOperator`] trait and the two
//! operator types used by the problem generators.

use crate::error::{Error, Result};
use crate::par::{Execution, PAR_THRESHOLD};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A real matrix seen only through products with vectors.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ y`
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]);
}

/// Row-major dense matrix. A transposed copy is kept so both products are row-wise dot
/// products, which keeps results identical between sequential and parallel execution.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    data_t: Vec<f64>,
    exec: Execution,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        check_dim(rows * cols, data.len())?;
        let mut data_t = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data_t[j * rows + i] = data[i * cols + j];
            }
        }
        Ok(Self { rows, cols, data, data_t, exec: Execution::default() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// `A x` with an explicit execution policy.
    pub fn matvec_with(&self, exec: Execution, x: &[f64], out: &mut [f64]) {
        let cols = self.cols;
        let exec = if self.rows * self.cols < PAR_THRESHOLD { Execution::Sequential } else { exec };
        exec.fill(out, |i| dot(&self.data[i * cols..(i + 1) * cols], x));
    }

    /// `Aᵀ y` with an explicit execution policy.
    pub fn matvec_t_with(&self, exec: Execution, y: &[f64], out: &mut [f64]) {
        let rows = self.rows;
        let exec = if self.rows * self.cols < PAR_THRESHOLD { Execution::Sequential } else { exec };
        exec.fill(out, |j| dot(&self.data_t[j * rows..(j + 1) * rows], y));
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_with(self.exec, x, out)
    }
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        self.matvec_t_with(self.exec, y, out)
    }
}

/// Compressed sparse row matrix, with the transpose stored in CSR form as well.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    t_indptr: Vec<usize>,
    t_indices: Vec<usize>,
    t_values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        for &(i, j, _) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!("entry ({i},{j}) out of bounds")));
            }
        }
        let (indptr, indices, values) = compress(rows, triplets.iter().map(|&(i, j, v)| (i, j, v)));
        let (t_indptr, t_indices, t_values) = compress(cols, triplets.iter().map(|&(i, j, v)| (j, i, v)));
        Ok(Self { rows, cols, indptr, indices, values, t_indptr, t_indices, t_values })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as `(col, value)` pairs.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }
}

fn compress(
    n_major: usize,
    entries: impl Iterator<Item = (usize, usize, f64)>,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_major];
    for (i, j, v) in entries {
        per_row[i].push((j, v));
    }
    let mut indptr = Vec::with_capacity(n_major + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for row in &mut per_row {
        row.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(j, v) in row.iter() {
            if last == Some(j) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                last = Some(j);
            }
        }
        indptr.push(indices.len());
    }
    (indptr, indices, values)
}

fn csr_apply(indptr: &[usize], indices: &[usize], values: &[f64], x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in indptr[i]..indptr[i + 1] {
            acc += values[k] * x[indices[k]];
        }
        *o = acc;
    }
}

impl LinearOperator for CsrMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        csr_apply(&self.indptr, &self.indices, &self.values, x, out)
    }
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        csr_apply(&self.t_indptr, &self.t_indices, &self.t_values, y, out)
    }
}

/// Estimate `‖AᵀA‖₂` by power iteration on `AᵀA`.
///
/// The start vector `vᵢ ∝ 1 + ½sin(i + 1)` is fixed and not constant, so operators that
/// annihilate constants (difference stencils) are handled.
pub fn power_iteration(op: &dyn LinearOperator, max_iter: usize, tol: f64) -> f64 {
    let n = op.cols();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i + 1) as f64).sin()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|vi| *vi /= nv);
    let mut av = vec![0.0; op.rows()];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        op.apply(&v, &mut av);
        op.apply_transpose(&av, &mut w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let done = (next - lambda).abs() <= tol * next;
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}
