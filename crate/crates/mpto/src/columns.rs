use nalgebra::{DMatrix, DVector};

/// Column collection where all-zero columns are not stored.
///
/// Load-case matrices (secondary loads, prescribed values, reduced loads) are
/// wide and mostly zero; only the nonzero columns cost memory and solves.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseColumns {
    nrows: usize,
    cols: Vec<Option<DVector<f64>>>,
}

impl SparseColumns {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, cols: vec![None; ncols] }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(a.nrows(), a.ncols());
        for j in 0..a.ncols() {
            out.set_column(j, a.column(j).clone_owned());
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> Option<&DVector<f64>> {
        self.cols[j].as_ref()
    }

    /// Stores the column, or drops it when it is identically zero.
    pub fn set_column(&mut self, j: usize, v: DVector<f64>) {
        assert_eq!(v.len(), self.nrows, "column length mismatch");
        self.cols[j] = if v.iter().all(|&x| x == 0.0) { None } else { Some(v) };
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(Option::is_none)
    }

    /// Indices of the stored columns.
    pub fn nonzero_columns(&self) -> Vec<usize> {
        (0..self.cols.len()).filter(|&j| self.cols[j].is_some()).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[j].as_ref().map_or(0.0, |c| c[i])
    }

    /// Copy of columns `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self { nrows: self.nrows, cols: self.cols[start..end].to_vec() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.cols.len());
        for (j, c) in self.cols.iter().enumerate() {
            if let Some(c) = c {
                out.set_column(j, c);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_drops_zero_columns() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 3.0]);
        let s = SparseColumns::from_dense(&a);
        assert_eq!(s.nonzero_columns(), vec![0, 2]);
        assert_eq!(s.to_dense(), a);
        assert_eq!(s.slice(1, 3).to_dense(), a.columns(1, 2).clone_owned());
        assert_eq!(s.get(1, 2), 3.0);
    }
}
