use nalgebra::DMatrix;

use super::IndexSet;
use crate::error::{Error, Result};

/// Rectangular matrix in compressed sparse row format, columns sorted per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows {
                return Err(Error::IndexOutOfRange { index: i, dim: nrows });
            }
            if j >= ncols {
                return Err(Error::IndexOutOfRange { index: j, dim: ncols });
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[i];
            cols[p] = j;
            vals[p] = v;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            scratch.sort_by_key(|e| e.0);
            for &(j, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Copies the nonzero entries of a dense matrix.
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    col_idx.push(j);
                    values.push(a[(i, j)]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows: a.nrows(), ncols: a.ncols(), row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "vector length does not match column count");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.ncols, "row count of the dense factor does not match");
        let mut out = DMatrix::zeros(self.nrows, b.ncols());
        for c in 0..b.ncols() {
            let col = b.column(c);
            for i in 0..self.nrows {
                let (cols, vals) = self.row(i);
                out[(i, c)] = cols.iter().zip(vals).map(|(&j, &v)| v * col[j]).sum();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            trip.extend(cols.iter().zip(vals).map(|(&j, &v)| (j, i, v)));
        }
        Self::from_triplets(self.ncols, self.nrows, &trip).expect("transpose indices are in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Square sparse matrix with symmetric pattern and values (both triangles stored).
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSparse {
    csr: CsrMatrix,
    bandwidth: usize,
}

impl SymmetricSparse {
    /// Wraps a square CSR matrix after checking symmetry.
    pub fn new(csr: CsrMatrix) -> Result<Self> {
        if csr.nrows != csr.ncols {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                csr.nrows, csr.ncols
            )));
        }
        if csr.nrows == 0 {
            return Err(Error::Invalid("matrix dimension must be at least 1".into()));
        }
        let scale = csr.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut bandwidth = 0;
        for i in 0..csr.nrows {
            let (cols, vals) = csr.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = csr.get(j, i);
                if (v - w).abs() > 1e-12 * scale {
                    return Err(Error::Invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {v} vs {w}"
                    )));
                }
                bandwidth = bandwidth.max(i.abs_diff(j));
            }
        }
        Ok(Self { csr, bandwidth })
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(CsrMatrix::from_triplets(n, n, triplets)?)
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        Self::new(CsrMatrix::from_dense(a))
    }

    pub fn dim(&self) -> usize {
        self.csr.nrows
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.csr
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.csr.get(i, j)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.csr.mul_vec(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.csr.to_dense()
    }

    /// Dense block `K(rows, cols)`.
    pub fn extract(&self, rows: &IndexSet, cols: &IndexSet) -> Result<DMatrix<f64>> {
        rows.check_bounds(self.dim())?;
        cols.check_bounds(self.dim())?;
        let map = cols.position_map(self.dim());
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (r, i) in rows.iter().enumerate() {
            let (cs, vs) = self.csr.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                let c = map[j];
                if c != usize::MAX {
                    out[(r, c)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Sparse block `K(rows, cols)`.
    pub fn extract_sparse(&self, rows: &IndexSet, cols: &IndexSet) -> Result<CsrMatrix> {
        rows.check_bounds(self.dim())?;
        cols.check_bounds(self.dim())?;
        let map = cols.position_map(self.dim());
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in rows.iter() {
            let (cs, vs) = self.csr.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                let c = map[j];
                if c != usize::MAX {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { nrows: rows.len(), ncols: cols.len(), row_ptr, col_idx, values })
    }

    /// Principal submatrix `K(set, set)`.
    pub fn principal(&self, set: &IndexSet) -> Result<Self> {
        let csr = self.extract_sparse(set, set)?;
        let mut bandwidth = 0;
        for i in 0..csr.nrows {
            for &j in csr.row(i).0 {
                bandwidth = bandwidth.max(i.abs_diff(j));
            }
        }
        if csr.nrows == 0 {
            return Err(Error::Invalid("principal submatrix of an empty set".into()));
        }
        Ok(Self { csr, bandwidth })
    }
}
