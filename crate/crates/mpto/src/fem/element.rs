//! Bilinear quadrilateral element matrices on the unit square.
//!
//! Local node order is counter-clockwise starting at the corner with the
//! smallest row and column: (0,0), (1,0), (1,1), (0,1) in (column, row).

use nalgebra::{DMatrix, Matrix3};

/// Poisson ratio used for plane stress.
pub const POISSON: f64 = 0.3;

const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Shape-function gradients in physical coordinates at `(xi, eta)`.
fn gradients(xi: f64, eta: f64) -> [(f64, f64); 4] {
    // x = (xi + 1) / 2 on a unit element, so d/dx = 2 d/dxi.
    let mut g = [(0.0, 0.0); 4];
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        let dxi = 0.25 * xa * (1.0 + eta * ya);
        let deta = 0.25 * ya * (1.0 + xi * xa);
        g[a] = (2.0 * dxi, 2.0 * deta);
    }
    g
}

fn gauss_points() -> [(f64, f64); 4] {
    let q = 1.0 / 3f64.sqrt();
    [(-q, -q), (q, -q), (q, q), (-q, q)]
}

/// 4×4 conduction matrix, unit conductivity.
pub fn conduction() -> DMatrix<f64> {
    let mut ke = DMatrix::zeros(4, 4);
    let det = 0.25;
    for (xi, eta) in gauss_points() {
        let g = gradients(xi, eta);
        for a in 0..4 {
            for b in 0..4 {
                ke[(a, b)] += det * (g[a].0 * g[b].0 + g[a].1 * g[b].1);
            }
        }
    }
    ke
}

/// 8×8 plane-stress stiffness, unit modulus and thickness, DOFs `(ux, uy)` per node.
pub fn plane_stress() -> DMatrix<f64> {
    let nu = POISSON;
    let c = 1.0 / (1.0 - nu * nu);
    let d = Matrix3::new(c, c * nu, 0.0, c * nu, c, 0.0, 0.0, 0.0, c * (1.0 - nu) / 2.0);
    let det = 0.25;
    let mut ke = DMatrix::zeros(8, 8);
    for (xi, eta) in gauss_points() {
        let g = gradients(xi, eta);
        let mut b = DMatrix::zeros(3, 8);
        for a in 0..4 {
            b[(0, 2 * a)] = g[a].0;
            b[(1, 2 * a + 1)] = g[a].1;
            b[(2, 2 * a)] = g[a].1;
            b[(2, 2 * a + 1)] = g[a].0;
        }
        let db = DMatrix::from_fn(3, 3, |i, j| d[(i, j)]) * &b;
        ke += b.transpose() * db * det;
    }
    ke
}
