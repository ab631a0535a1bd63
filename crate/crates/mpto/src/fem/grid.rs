use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::element;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Governing equation on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Physics {
    /// Scalar heat conduction, one DOF per node.
    Conduction,
    /// Plane-stress elasticity, two DOFs per node.
    PlaneStress,
}

impl Physics {
    pub fn dofs_per_node(self) -> usize {
        match self {
            Physics::Conduction => 1,
            Physics::PlaneStress => 2,
        }
    }
}

impl fmt::Display for Physics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Physics::Conduction => "conduction",
            Physics::PlaneStress => "plane-stress",
        })
    }
}

impl FromStr for Physics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conduction" => Ok(Physics::Conduction),
            "plane-stress" => Ok(Physics::PlaneStress),
            other => Err(Error::Invalid(format!("unknown physics '{other}'"))),
        }
    }
}

/// Structured grid of `nelx × nely` unit square elements.
///
/// Node `(col, row)` has id `row + col·(nely+1)`; element `(col, row)` has
/// id `row + col·nely`. Elastic DOFs are interleaved as `2·node` (x) and
/// `2·node+1` (y).
#[derive(Clone, Debug)]
pub struct Grid {
    nelx: usize,
    nely: usize,
    physics: Physics,
    ke: DMatrix<f64>,
    edofs: Vec<usize>,
    pattern: CsrMatrix,
    slots: Vec<usize>,
}

impl Grid {
    pub fn new(nelx: usize, nely: usize, physics: Physics) -> Result<Self> {
        if nelx == 0 || nely == 0 {
            return Err(Error::Invalid("grid needs at least one element per direction".into()));
        }
        let ke = match physics {
            Physics::Conduction => element::conduction(),
            Physics::PlaneStress => element::plane_stress(),
        };
        let dpn = physics.dofs_per_node();
        let per = 4 * dpn;
        let mut edofs = Vec::with_capacity(nelx * nely * per);
        for ex in 0..nelx {
            for ey in 0..nely {
                let corners = [
                    ey + ex * (nely + 1),
                    ey + (ex + 1) * (nely + 1),
                    ey + 1 + (ex + 1) * (nely + 1),
                    ey + 1 + ex * (nely + 1),
                ];
                for node in corners {
                    for c in 0..dpn {
                        edofs.push(dpn * node + c);
                    }
                }
            }
        }
        let n = (nelx + 1) * (nely + 1) * dpn;
        let mut trip = Vec::with_capacity(edofs.len() * per);
        for e in edofs.chunks(per) {
            for &i in e {
                for &j in e {
                    trip.push((i, j, 0.0));
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(n, n, &trip)?;
        let slots = edofs
            .chunks(per)
            .flat_map(|e| {
                let pattern = &pattern;
                e.iter().flat_map(move |&i| e.iter().map(move |&j| pattern.slot(i, j).unwrap()))
            })
            .collect();
        Ok(Self { nelx, nely, physics, ke, edofs, pattern, slots })
    }

    pub fn nelx(&self) -> usize {
        self.nelx
    }

    pub fn nely(&self) -> usize {
        self.nely
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn dofs_per_node(&self) -> usize {
        self.physics.dofs_per_node()
    }

    pub fn n_elements(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn n_nodes(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes() * self.dofs_per_node()
    }

    pub fn node(&self, col: usize, row: usize) -> usize {
        debug_assert!(col <= self.nelx && row <= self.nely);
        row + col * (self.nely + 1)
    }

    pub fn element(&self, col: usize, row: usize) -> usize {
        row + col * self.nely
    }

    /// Column and row of the element center, in element units.
    pub fn element_center(&self, e: usize) -> (f64, f64) {
        ((e / self.nely) as f64 + 0.5, (e % self.nely) as f64 + 0.5)
    }

    /// DOF of component `comp` at `node`.
    pub fn dof(&self, node: usize, comp: usize) -> usize {
        self.dofs_per_node() * node + comp
    }

    pub fn element_matrix(&self) -> &DMatrix<f64> {
        &self.ke
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let per = self.ke.nrows();
        &self.edofs[e * per..(e + 1) * per]
    }

    pub(crate) fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    pub(crate) fn element_slots(&self, e: usize) -> &[usize] {
        let per = self.ke.nrows() * self.ke.nrows();
        &self.slots[e * per..(e + 1) * per]
    }
}
