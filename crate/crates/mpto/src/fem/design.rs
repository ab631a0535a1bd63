use std::sync::Arc;

use super::Grid;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Modified SIMP interpolation `emin + x̃^p (1 − emin)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Simp {
    pub penal: f64,
    pub emin: f64,
}

impl Default for Simp {
    fn default() -> Self {
        Self { penal: 3.0, emin: 1e-9 }
    }
}

impl Simp {
    pub fn scale(&self, xt: f64) -> f64 {
        self.emin + xt.powf(self.penal) * (1.0 - self.emin)
    }

    pub fn derivative(&self, xt: f64) -> f64 {
        self.penal * xt.powf(self.penal - 1.0) * (1.0 - self.emin)
    }
}

/// Linear-hat density filter with weights renormalized at the boundary.
#[derive(Clone, Debug)]
pub struct Filter {
    radius: f64,
    weights: CsrMatrix,
    transpose: CsrMatrix,
}

impl Filter {
    pub fn new(grid: &Grid, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::Invalid(format!("filter radius must be non-negative, got {radius}")));
        }
        let (nelx, nely) = (grid.nelx(), grid.nely());
        let reach = radius.ceil() as isize;
        let mut trip = Vec::new();
        for ex in 0..nelx as isize {
            for ey in 0..nely as isize {
                let e = grid.element(ex as usize, ey as usize);
                let mut row = Vec::new();
                for dx in -reach..=reach {
                    for dy in -reach..=reach {
                        let (jx, jy) = (ex + dx, ey + dy);
                        if jx < 0 || jy < 0 || jx >= nelx as isize || jy >= nely as isize {
                            continue;
                        }
                        let w = radius - ((dx * dx + dy * dy) as f64).sqrt();
                        if w > 0.0 {
                            row.push((grid.element(jx as usize, jy as usize), w));
                        }
                    }
                }
                if row.is_empty() {
                    row.push((e, 1.0));
                }
                let total: f64 = row.iter().map(|r| r.1).sum();
                trip.extend(row.into_iter().map(|(j, w)| (e, j, w / total)));
            }
        }
        let n = grid.n_elements();
        let weights = CsrMatrix::from_triplets(n, n, &trip)?;
        let transpose = weights.transpose();
        Ok(Self { radius, weights, transpose })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    /// `x̃ = W x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights.mul_vec(x)
    }

    /// `Wᵀ v`, chaining a derivative with respect to `x̃` back to `x`.
    pub fn chain(&self, v: &[f64]) -> Vec<f64> {
        self.transpose.mul_vec(v)
    }
}

/// Design variables, filtered densities and material interpolation.
#[derive(Clone, Debug)]
pub struct DesignField {
    x: Vec<f64>,
    xt: Vec<f64>,
    filter: Arc<Filter>,
    simp: Simp,
}

impl DesignField {
    pub fn new(x: Vec<f64>, filter: Arc<Filter>, simp: Simp) -> Result<Self> {
        if x.len() != filter.weights().nrows() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} entries, grid has {} elements",
                x.len(),
                filter.weights().nrows()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("design variable {v}")));
        }
        let xt = filter.apply(&x);
        Ok(Self { x, xt, filter, simp })
    }

    /// Uniform design `x = value` with a freshly built filter.
    pub fn uniform(grid: &Grid, value: f64, radius: f64, simp: Simp) -> Result<Self> {
        let filter = Arc::new(Filter::new(grid, radius)?);
        Self::new(vec![value; grid.n_elements()], filter, simp)
    }

    /// Same filter and interpolation, new variables.
    pub fn with_x(&self, x: Vec<f64>) -> Result<Self> {
        Self::new(x, Arc::clone(&self.filter), self.simp)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn filtered(&self) -> &[f64] {
        &self.xt
    }

    pub fn filter(&self) -> &Arc<Filter> {
        &self.filter
    }

    pub fn simp(&self) -> Simp {
        self.simp
    }

    pub fn scale_factors(&self) -> Vec<f64> {
        self.xt.iter().map(|&v| self.simp.scale(v)).collect()
    }

    /// Turns per-element contractions `leftᵀ Kₑ right` into `dg/dx`.
    pub fn chain_contractions(&self, raw: &[f64]) -> Vec<f64> {
        let dxt: Vec<f64> = raw
            .iter()
            .zip(&self.xt)
            .map(|(&r, &xt)| r * self.simp.derivative(xt))
            .collect();
        self.filter.chain(&dxt)
    }

    /// `dg/dx` for a response with `dg/dx̃ = v`.
    pub fn chain_filtered(&self, v: &[f64]) -> Vec<f64> {
        self.filter.chain(v)
    }
}
