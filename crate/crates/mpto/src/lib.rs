//! Multi-partition topology optimization on structured grids.
//!
//! Two equivalent pipelines evaluate the responses of problems whose load
//! cases come with different boundary-condition partitions: an elementary
//! pipeline that factorizes the constrained system once per partition, and a
//! static-condensation pipeline that factorizes once and works on a small
//! dense reduced system afterwards.

pub mod columns;
pub mod condense;
pub mod error;
pub mod fem;
pub mod frontend;
pub mod instances;
pub mod optimizer;
pub mod partition;
pub mod perf;
pub mod problems;
pub mod sensitivity;
pub mod sparse;

pub use error::{Error, Result};
