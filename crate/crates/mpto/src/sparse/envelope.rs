use super::SymmetricSparse;
use crate::error::{Error, Result};

/// Cholesky factor in row-envelope (skyline) storage, natural ordering.
///
/// Row `i` of `L` is stored densely from its first structural nonzero up to
/// the diagonal. No reordering is applied, so for grid numberings the cost is
/// governed by the bandwidth.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
    factor_flops: u64,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SymmetricSparse) -> Result<Self> {
        let n = a.dim();
        let csr = a.csr();
        let mut first = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            let f = csr.row(i).0.first().map_or(i, |&j| j.min(i));
            first.push(f);
            offset.push(offset[i] + i - f + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            let (cols, vals) = csr.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[offset[i] + j - first[i]] = v;
                }
            }
        }

        let mut flops = 0u64;
        for i in 0..n {
            let fi = first[i];
            let (head, tail) = data.split_at_mut(offset[i]);
            let row_i = &mut tail[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &head[offset[j]..offset[j] + j - fj + 1];
                let li = &row_i[k0 - fi..j - fi];
                let lj = &row_j[k0 - fj..j - fj];
                let dot: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
                row_i[j - fi] = (row_i[j - fi] - dot) / row_j[j - fj];
                flops += 2 * (j - k0) as u64 + 2;
            }
            let diag_in = row_i[i - fi];
            let sq: f64 = row_i[..i - fi].iter().map(|x| x * x).sum();
            let d = diag_in - sq;
            flops += 2 * (i - fi) as u64 + 2;
            if !(d > 1e-14 * diag_in.abs()) || !d.is_finite() {
                return Err(Error::Singular(format!(
                    "non-positive pivot {d:e} at row {i}"
                )));
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self { first, offset, data, factor_flops: flops })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries of the factor.
    pub fn stored(&self) -> usize {
        self.data.len()
    }

    pub fn factor_flops(&self) -> u64 {
        self.factor_flops
    }

    /// Forward and backward sweeps: 4 flops per stored off-diagonal entry.
    pub fn solve_flops(&self) -> u64 {
        4 * self.data.len() as u64
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] = (x[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let xi = x[i] / row[i - fi];
            x[i] = xi;
            for (l, y) in row[..i - fi].iter().zip(&mut x[fi..i]) {
                *y -= l * xi;
            }
        }
    }
}
