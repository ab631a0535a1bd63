use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{EnvelopeCholesky, Pcg, SolverStats, SymmetricSparse};
use crate::error::{Error, Result};

/// Linear solution method for large sparse systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Envelope Cholesky followed by back-substitutions.
    Direct,
    /// Conjugate gradients preconditioned with IC(0).
    Iterative,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Direct => "direct",
            Backend::Iterative => "iterative",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Backend::Direct),
            "iterative" => Ok(Backend::Iterative),
            other => Err(Error::Invalid(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Debug)]
enum Kind {
    Direct(EnvelopeCholesky),
    Iterative(Pcg),
}

/// A preprocessed large sparse system, reusable for any number of right-hand sides.
#[derive(Debug)]
pub struct Factorization {
    kind: Kind,
    stats: Arc<SolverStats>,
    solves: AtomicU64,
    flops: AtomicU64,
}

impl Factorization {
    /// Factorizes (direct) or builds the preconditioner (iterative).
    pub fn new(k: &SymmetricSparse, backend: Backend, stats: &Arc<SolverStats>) -> Result<Self> {
        let start = Instant::now();
        let (kind, flops) = match backend {
            Backend::Direct => {
                let f = EnvelopeCholesky::factor(k)?;
                let flops = f.factor_flops();
                (Kind::Direct(f), flops)
            }
            Backend::Iterative => {
                let p = Pcg::new(k.clone())?;
                let flops = p.setup_flops();
                (Kind::Iterative(p), flops)
            }
        };
        stats.add_large_factorization(flops, start.elapsed());
        Ok(Self {
            kind,
            stats: Arc::clone(stats),
            solves: AtomicU64::new(0),
            flops: AtomicU64::new(flops),
        })
    }

    pub fn backend(&self) -> Backend {
        match self.kind {
            Kind::Direct(_) => Backend::Direct,
            Kind::Iterative(_) => Backend::Iterative,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Direct(f) => f.dim(),
            Kind::Iterative(p) => p.dim(),
        }
    }

    /// Number of nonzero right-hand sides solved so far.
    pub fn solves(&self) -> u64 {
        self.solves.load(Ordering::Relaxed)
    }

    /// Flops charged to this factorization, construction included.
    pub fn flops(&self) -> u64 {
        self.flops.load(Ordering::Relaxed)
    }

    fn solve_one(&self, x: &mut [f64]) -> Result<u64> {
        match &self.kind {
            Kind::Direct(f) => {
                f.solve_in_place(x);
                Ok(f.solve_flops())
            }
            Kind::Iterative(p) => {
                let (sol, flops) = p.solve(x)?;
                x.copy_from_slice(&sol);
                Ok(flops)
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, system has {}",
                b.len(),
                self.dim()
            )));
        }
        let mut x = b.to_vec();
        if b.iter().all(|&v| v == 0.0) {
            return Ok(x);
        }
        let start = Instant::now();
        let flops = self.solve_one(&mut x)?;
        self.record(1, flops, start);
        Ok(x)
    }

    /// Solves `K X = B` column by column; zero columns are returned as zero without work.
    pub fn solve_multi(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, system has {}",
                b.nrows(),
                self.dim()
            )));
        }
        let start = Instant::now();
        let mut x = b.clone();
        let mut count = 0;
        let mut flops = 0;
        for mut col in x.column_iter_mut() {
            if col.iter().all(|&v| v == 0.0) {
                continue;
            }
            flops += self.solve_one(col.as_mut_slice())?;
            count += 1;
        }
        self.record(count, flops, start);
        Ok(x)
    }

    fn record(&self, count: u64, flops: u64, start: Instant) {
        self.solves.fetch_add(count, Ordering::Relaxed);
        self.flops.fetch_add(flops, Ordering::Relaxed);
        self.stats.add_large_solves(count, flops, start.elapsed());
    }
}

/// Dense Cholesky factorization of a reduced system.
#[derive(Debug)]
pub struct DenseCholesky {
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    dim: usize,
    stats: Arc<SolverStats>,
}

impl DenseCholesky {
    pub fn new(a: &DMatrix<f64>, stats: &Arc<SolverStats>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("dense factorization of a non-square matrix".into()));
        }
        let n = a.nrows();
        let start = Instant::now();
        let chol = if n == 0 {
            None
        } else {
            Some(
                a.clone()
                    .cholesky()
                    .ok_or_else(|| Error::Singular(format!("dense {n}x{n} matrix is not positive definite")))?,
            )
        };
        let flops = (n * n * n / 3) as u64;
        stats.add_dense_factorization(flops, start.elapsed());
        Ok(Self { chol, dim: n, stats: Arc::clone(stats) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_multi(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, system has {}",
                b.nrows(),
                self.dim
            )));
        }
        let start = Instant::now();
        let mut x = b.clone();
        let mut count = 0u64;
        if let Some(chol) = &self.chol {
            for mut col in x.column_iter_mut() {
                if col.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let mut v = DVector::from_column_slice(col.as_slice());
                chol.solve_mut(&mut v);
                col.copy_from(&v);
                count += 1;
            }
        }
        let flops = count * 2 * (self.dim * self.dim) as u64;
        self.stats.add_dense_solves(count, flops, start.elapsed());
        Ok(x)
    }
}
