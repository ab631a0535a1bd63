use super::{DesignField, Grid};
use crate::error::{Error, Result};
use crate::sparse::SymmetricSparse;

/// Global matrix `K[x] = Σₑ simp(x̃ₑ) Kₑ`.
pub fn assemble(grid: &Grid, design: &DesignField) -> Result<SymmetricSparse> {
    if design.x().len() != grid.n_elements() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} entries, grid has {} elements",
            design.x().len(),
            grid.n_elements()
        )));
    }
    let mut csr = grid.pattern().clone();
    let ke = grid.element_matrix();
    let per = ke.nrows();
    let scales = design.scale_factors();
    let vals = csr.values_mut();
    for (e, &s) in scales.iter().enumerate() {
        let slots = grid.element_slots(e);
        for a in 0..per {
            for b in 0..per {
                vals[slots[a * per + b]] += s * ke[(a, b)];
            }
        }
    }
    SymmetricSparse::new(csr)
}

/// Adds `leftₑᵀ Kₑ rightₑ` (unit material) of every element to `raw`.
pub fn contract_add(grid: &Grid, left: &[f64], right: &[f64], raw: &mut [f64]) {
    contract_add_scaled(grid, 1.0, left, right, raw)
}

/// Adds `w · leftₑᵀ Kₑ rightₑ` of every element to `raw`.
pub fn contract_add_scaled(grid: &Grid, w: f64, left: &[f64], right: &[f64], raw: &mut [f64]) {
    let ke = grid.element_matrix();
    let per = ke.nrows();
    let mut l = [0.0; 8];
    let mut r = [0.0; 8];
    for (e, out) in raw.iter_mut().enumerate() {
        let dofs = grid.element_dofs(e);
        let mut any = false;
        for a in 0..per {
            l[a] = left[dofs[a]];
            r[a] = right[dofs[a]];
            any |= l[a] != 0.0;
        }
        if !any {
            continue;
        }
        let mut s = 0.0;
        for a in 0..per {
            if l[a] == 0.0 {
                continue;
            }
            let mut t = 0.0;
            for b in 0..per {
                t += ke[(a, b)] * r[b];
            }
            s += l[a] * t;
        }
        *out += w * s;
    }
}

/// `dg/dx` of `g = leftᵀ K[x] right` with `left`, `right` held fixed.
pub fn dk_contract(grid: &Grid, design: &DesignField, left: &[f64], right: &[f64]) -> Vec<f64> {
    let mut raw = vec![0.0; grid.n_elements()];
    contract_add(grid, left, right, &mut raw);
    design.chain_contractions(&raw)
}
