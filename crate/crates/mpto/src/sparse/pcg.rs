use super::{CsrMatrix, SymmetricSparse};
use crate::error::{Error, Result};

/// Preconditioner applied inside [`Pcg`].
#[derive(Clone, Debug)]
pub enum Preconditioner {
    /// Zero-fill incomplete Cholesky, lower factor in CSR with the diagonal last in each row.
    IncompleteCholesky(CsrMatrix),
    /// Inverse diagonal.
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    /// IC(0) of `a`, or Jacobi when a pivot turns non-positive.
    pub fn build(a: &SymmetricSparse) -> Result<Self> {
        match ic0(a) {
            Some(l) => Ok(Self::IncompleteCholesky(l)),
            None => {
                let csr = a.csr();
                let mut inv = Vec::with_capacity(a.dim());
                for i in 0..a.dim() {
                    let d = csr.get(i, i);
                    if !(d > 0.0) {
                        return Err(Error::Singular(format!("non-positive diagonal {d:e} at row {i}")));
                    }
                    inv.push(1.0 / d);
                }
                Ok(Self::Jacobi(inv))
            }
        }
    }

    pub fn is_incomplete_cholesky(&self) -> bool {
        matches!(self, Self::IncompleteCholesky(_))
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Self::IncompleteCholesky(l) => {
                let n = r.len();
                for i in 0..n {
                    let (cols, vals) = l.row(i);
                    let last = cols.len() - 1;
                    let dot: f64 = cols[..last].iter().zip(&vals[..last]).map(|(&j, &v)| v * z[j]).sum();
                    z[i] = (r[i] - dot) / vals[last];
                }
                for i in (0..n).rev() {
                    let (cols, vals) = l.row(i);
                    let last = cols.len() - 1;
                    let zi = z[i] / vals[last];
                    z[i] = zi;
                    for (&j, &v) in cols[..last].iter().zip(&vals[..last]) {
                        z[j] -= v * zi;
                    }
                }
            }
        }
    }

    fn apply_flops(&self) -> u64 {
        match self {
            Self::Jacobi(inv) => inv.len() as u64,
            Self::IncompleteCholesky(l) => 4 * l.nnz() as u64,
        }
    }
}

fn ic0(a: &SymmetricSparse) -> Option<CsrMatrix> {
    let n = a.dim();
    let csr = a.csr();
    let mut trip = Vec::new();
    for i in 0..n {
        let (cols, vals) = csr.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                trip.push((i, j, v));
            }
        }
        if csr.get(i, i) == 0.0 {
            return None;
        }
    }
    let mut l = CsrMatrix::from_triplets(n, n, &trip).ok()?;
    let row_ptr = l.row_ptr().to_vec();
    let col_idx = l.col_idx().to_vec();
    let vals = l.values_mut();
    for i in 0..n {
        let (ri0, ri1) = (row_ptr[i], row_ptr[i + 1]);
        for p in ri0..ri1 - 1 {
            let k = col_idx[p];
            let (rk0, rk1) = (row_ptr[k], row_ptr[k + 1]);
            // sum over common columns j < k of L(i,j) L(k,j)
            let (mut a, mut b) = (ri0, rk0);
            let mut s = 0.0;
            while a < p && b < rk1 - 1 {
                match col_idx[a].cmp(&col_idx[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        s += vals[a] * vals[b];
                        a += 1;
                        b += 1;
                    }
                }
            }
            vals[p] = (vals[p] - s) / vals[rk1 - 1];
        }
        let d = vals[ri1 - 1] - vals[ri0..ri1 - 1].iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        vals[ri1 - 1] = d.sqrt();
    }
    Some(l)
}

/// Preconditioned conjugate gradients on a retained matrix.
#[derive(Clone, Debug)]
pub struct Pcg {
    matrix: SymmetricSparse,
    precond: Preconditioner,
    tol: f64,
    max_iter: usize,
}

/// Default relative residual tolerance.
pub const CG_TOLERANCE: f64 = 1e-10;

impl Pcg {
    /// Builds the preconditioner with default tolerance and iteration cap `10·√n + 100`.
    pub fn new(matrix: SymmetricSparse) -> Result<Self> {
        let n = matrix.dim();
        let precond = Preconditioner::build(&matrix)?;
        let max_iter = (10.0 * (n as f64).sqrt()).ceil() as usize + 100;
        Ok(Self { matrix, precond, tol: CG_TOLERANCE, max_iter })
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn preconditioner(&self) -> &Preconditioner {
        &self.precond
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn setup_flops(&self) -> u64 {
        // IC(0) work is of the order of a few sweeps; charge the pattern size.
        2 * self.precond.apply_flops()
    }

    /// Solves `A x = b`; returns the solution and the flops spent.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, u64)> {
        let n = self.dim();
        let bnorm = norm(b);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok((x, 0));
        }
        let nnz = self.matrix.csr().nnz() as u64;
        let per_iter = 2 * nnz + self.precond.apply_flops() + 10 * n as u64;
        let mut r = b.to_vec();
        let mut z = vec![0.0; n];
        self.precond.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut flops = self.precond.apply_flops();
        let mut res = 1.0;
        for it in 0..self.max_iter {
            let q = self.matrix.mul_vec(&p);
            let alpha = rz / dot(&p, &q);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            flops += per_iter;
            res = norm(&r) / bnorm;
            if res <= self.tol {
                return Ok((x, flops));
            }
            self.precond.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            if !res.is_finite() {
                return Err(Error::NoConvergence { iterations: it + 1, residual: res });
            }
        }
        Err(Error::NoConvergence { iterations: self.max_iter, residual: res })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn laplacian(n: usize) -> SymmetricSparse {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SymmetricSparse::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn ic0_is_exact_on_tridiagonal() {
        // No fill for a tridiagonal matrix, so IC(0) is the complete factor.
        let a = laplacian(6);
        let p = Pcg::new(a.clone()).unwrap();
        assert!(p.preconditioner().is_incomplete_cholesky());
        let b = vec![1.0; 6];
        let mut z = vec![0.0; 6];
        p.preconditioner().apply(&b, &mut z);
        let r = a.mul_vec(&z);
        for v in r {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn converges_to_tolerance() {
        let a = laplacian(50);
        let p = Pcg::new(a.clone()).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let (x, _) = p.solve(&b).unwrap();
        let r = a.mul_vec(&x);
        let err: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm(&b));
    }

    #[test]
    fn jacobi_fallback() {
        // Positive diagonal but indefinite: the IC(0) pivot goes negative.
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let k = SymmetricSparse::from_dense(&bad).unwrap();
        match Preconditioner::build(&k).unwrap() {
            Preconditioner::Jacobi(inv) => assert_eq!(inv, vec![1.0, 1.0]),
            _ => panic!("expected the Jacobi fallback"),
        }
    }

    #[test]
    fn zero_rhs() {
        let p = Pcg::new(laplacian(4)).unwrap();
        assert_eq!(p.solve(&[0.0; 4]).unwrap().0, vec![0.0; 4]);
    }
}
