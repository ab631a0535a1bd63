//! Structured-grid finite elements, density filter and SIMP interpolation.

mod assembly;
mod design;
pub mod element;
mod grid;

pub use assembly::{assemble, contract_add, contract_add_scaled, dk_contract};
pub use design::{DesignField, Filter, Simp};
pub use grid::{Grid, Physics};
