//! Sparse symmetric storage, index sets and the linear-solution backends.

mod csr;
mod envelope;
mod factor;
mod index_set;
mod pcg;
mod stats;

pub use csr::{CsrMatrix, SymmetricSparse};
pub use envelope::EnvelopeCholesky;
pub use factor::{Backend, DenseCholesky, Factorization};
pub use index_set::IndexSet;
pub use pcg::{Pcg, Preconditioner, CG_TOLERANCE};
pub use stats::{CostLedger, SolverStats};
