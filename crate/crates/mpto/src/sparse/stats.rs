use std::ops::Sub;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

/// Shared, thread-safe solver counters.
///
/// Every factorization registers itself here on construction and every
/// nonzero right-hand side it solves is counted. "Large" refers to sparse
/// systems of the full problem size, "dense" to reduced systems.
#[derive(Debug, Default)]
pub struct SolverStats {
    large_factorizations: AtomicU64,
    large_solves: AtomicU64,
    dense_factorizations: AtomicU64,
    dense_solves: AtomicU64,
    flops: AtomicU64,
    nanos: AtomicU64,
}

impl SolverStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add_large_factorization(&self, flops: u64, time: Duration) {
        self.large_factorizations.fetch_add(1, Ordering::Relaxed);
        self.flops.fetch_add(flops, Ordering::Relaxed);
        self.nanos.fetch_add(time.as_nanos() as u64, Ordering::Relaxed);
    }

    pub(crate) fn add_large_solves(&self, count: u64, flops: u64, time: Duration) {
        self.large_solves.fetch_add(count, Ordering::Relaxed);
        self.flops.fetch_add(flops, Ordering::Relaxed);
        self.nanos.fetch_add(time.as_nanos() as u64, Ordering::Relaxed);
    }

    pub(crate) fn add_dense_factorization(&self, flops: u64, time: Duration) {
        self.dense_factorizations.fetch_add(1, Ordering::Relaxed);
        self.flops.fetch_add(flops, Ordering::Relaxed);
        self.nanos.fetch_add(time.as_nanos() as u64, Ordering::Relaxed);
    }

    pub(crate) fn add_dense_solves(&self, count: u64, flops: u64, time: Duration) {
        self.dense_solves.fetch_add(count, Ordering::Relaxed);
        self.flops.fetch_add(flops, Ordering::Relaxed);
        self.nanos.fetch_add(time.as_nanos() as u64, Ordering::Relaxed);
    }

    /// Time spent in linear-algebra work that is not a factorization or a
    /// triangular solve but belongs to the solve phase (Schur products).
    pub(crate) fn add_time(&self, flops: u64, time: Duration) {
        self.flops.fetch_add(flops, Ordering::Relaxed);
        self.nanos.fetch_add(time.as_nanos() as u64, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CostLedger {
        CostLedger {
            large_factorizations: self.large_factorizations.load(Ordering::Relaxed),
            large_solves: self.large_solves.load(Ordering::Relaxed),
            dense_factorizations: self.dense_factorizations.load(Ordering::Relaxed),
            dense_solves: self.dense_solves.load(Ordering::Relaxed),
            flops: self.flops.load(Ordering::Relaxed),
            seconds: self.nanos.load(Ordering::Relaxed) as f64 * 1e-9,
        }
    }
}

/// Plain copy of the counters at one point in time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostLedger {
    pub large_factorizations: u64,
    pub large_solves: u64,
    pub dense_factorizations: u64,
    pub dense_solves: u64,
    pub flops: u64,
    pub seconds: f64,
}

impl Sub for CostLedger {
    type Output = CostLedger;

    fn sub(self, rhs: Self) -> Self {
        CostLedger {
            large_factorizations: self.large_factorizations - rhs.large_factorizations,
            large_solves: self.large_solves - rhs.large_solves,
            dense_factorizations: self.dense_factorizations - rhs.dense_factorizations,
            dense_solves: self.dense_solves - rhs.dense_solves,
            flops: self.flops - rhs.flops,
            seconds: self.seconds - rhs.seconds,
        }
    }
}
