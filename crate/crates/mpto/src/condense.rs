//! Static condensation onto the primary DOFs.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::columns::SparseColumns;
use crate::error::{Error, Result};
use crate::partition::{AnalysisSet, PartitionPlan};
use crate::sparse::{Backend, CsrMatrix, Factorization, SolverStats, SymmetricSparse};

/// Reduced system on the primary DOFs plus everything needed to recover
/// secondary quantities and sensitivities without refactorizing.
#[derive(Debug)]
pub struct ReducedModel {
    pub plan: PartitionPlan,
    /// `K̃ = K_MM − K_MF̌ X̌`, symmetrized.
    pub ktilde: DMatrix<f64>,
    /// `F̃ = K_MF̌ V̌ − K_MP̌ Ǔp`, `m × l`.
    pub ftilde: SparseColumns,
    /// `X̌ = Ǩff⁻¹ Ǩ_F̌M`, `f̌ × m`.
    pub xstates: DMatrix<f64>,
    /// `V̌ = Ǩff⁻¹ (Ǩfp Ǔp − F̌f)`, `f̌ × l`.
    pub vstates: SparseColumns,
    /// Secondary loads `F̌f`, `f̌ × l`.
    pub secondary_loads: SparseColumns,
    /// Secondary prescribed values `Ǔp`, `p̌ × l`.
    pub secondary_prescribed: SparseColumns,
    kff: Option<Factorization>,
    blocks: Blocks,
}

#[derive(Debug)]
pub(crate) struct Blocks {
    pub mf: CsrMatrix,
    pub mp: CsrMatrix,
    pub fp: CsrMatrix,
    pub pm: CsrMatrix,
    pub pf: CsrMatrix,
    pub pp: CsrMatrix,
}

/// Secondary loads and prescribed values collected from the analysis sets.
///
/// Columns follow the global load-case order (sets in declaration order).
pub fn secondary_inputs(plan: &PartitionPlan, sets: &[AnalysisSet]) -> Result<(SparseColumns, SparseColumns)> {
    let l = plan.total_cases();
    let mut loads = SparseColumns::zeros(plan.n_secondary_free(), l);
    let mut values = SparseColumns::zeros(plan.n_secondary_prescribed(), l);
    for (i, s) in sets.iter().enumerate() {
        let off = plan.splits[i].case_offset;
        let f = s.load_matrix(&plan.secondary_free);
        let p = s.prescribed_matrix(&plan.secondary_prescribed)?;
        for c in 0..s.cases() {
            loads.set_column(off + c, f.column(c).clone_owned());
            values.set_column(off + c, p.column(c).clone_owned());
        }
    }
    Ok((loads, values))
}

/// Builds the reduced model with one factorization of `Ǩff` and one
/// multi-RHS solve for `[X̌ V̌]`.
pub fn condense(
    k: &SymmetricSparse,
    plan: &PartitionPlan,
    secondary_loads: &SparseColumns,
    secondary_prescribed: &SparseColumns,
    backend: Backend,
    stats: &Arc<SolverStats>,
) -> Result<ReducedModel> {
    let (m, fc, pc, l) = (
        plan.m(),
        plan.n_secondary_free(),
        plan.n_secondary_prescribed(),
        plan.total_cases(),
    );
    if m == 0 {
        return Err(Error::EmptyPrimary);
    }
    if k.dim() != plan.n {
        return Err(Error::DimensionMismatch(format!("matrix has dimension {}, plan {}", k.dim(), plan.n)));
    }
    if secondary_loads.nrows() != fc || secondary_loads.ncols() != l {
        return Err(Error::DimensionMismatch(format!(
            "secondary loads are {}x{}, expected {fc}x{l}",
            secondary_loads.nrows(),
            secondary_loads.ncols()
        )));
    }
    if secondary_prescribed.nrows() != pc || secondary_prescribed.ncols() != l {
        return Err(Error::DimensionMismatch(format!(
            "secondary prescribed values are {}x{}, expected {pc}x{l}",
            secondary_prescribed.nrows(),
            secondary_prescribed.ncols()
        )));
    }
    let (pm_set, fm_set, mm_set) = (&plan.secondary_prescribed, &plan.secondary_free, &plan.primary);
    let blocks = Blocks {
        mf: k.extract_sparse(mm_set, fm_set)?,
        mp: k.extract_sparse(mm_set, pm_set)?,
        fp: k.extract_sparse(fm_set, pm_set)?,
        pm: k.extract_sparse(pm_set, mm_set)?,
        pf: k.extract_sparse(pm_set, fm_set)?,
        pp: k.extract_sparse(pm_set, pm_set)?,
    };
    let kmm = k.extract(mm_set, mm_set)?;

    let mut vstates = SparseColumns::zeros(fc, l);
    let (kff, xstates) = if fc == 0 {
        (None, DMatrix::zeros(0, m))
    } else {
        let kff = Factorization::new(&k.principal(fm_set)?, backend, stats)?;
        // right-hand sides [Ǩ_F̌M, Ǩfp Ǔp − F̌f] for the nonzero load columns
        let active: Vec<usize> = (0..l)
            .filter(|&c| secondary_loads.column(c).is_some() || secondary_prescribed.column(c).is_some())
            .collect();
        let mut rhs = DMatrix::zeros(fc, m + active.len());
        let kfm = blocks.mf.transpose();
        for i in 0..fc {
            let (cols, vals) = kfm.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                rhs[(i, j)] = v;
            }
        }
        for (a, &c) in active.iter().enumerate() {
            let mut col = DVector::zeros(fc);
            if let Some(up) = secondary_prescribed.column(c) {
                col += DVector::from_vec(blocks.fp.mul_vec(up.as_slice()));
            }
            if let Some(f) = secondary_loads.column(c) {
                col -= f;
            }
            rhs.set_column(m + a, &col);
        }
        let sol = kff.solve_multi(&rhs)?;
        for (a, &c) in active.iter().enumerate() {
            vstates.set_column(c, sol.column(m + a).clone_owned());
        }
        (Some(kff), sol.columns(0, m).clone_owned())
    };

    let start = Instant::now();
    let mut ktilde = kmm - blocks.mf.mul_dense(&xstates);
    ktilde = (&ktilde + ktilde.transpose()) * 0.5;
    let mut ftilde = SparseColumns::zeros(m, l);
    for c in 0..l {
        let mut col = DVector::zeros(m);
        if let Some(v) = vstates.column(c) {
            col += DVector::from_vec(blocks.mf.mul_vec(v.as_slice()));
        }
        if let Some(up) = secondary_prescribed.column(c) {
            col -= DVector::from_vec(blocks.mp.mul_vec(up.as_slice()));
        }
        ftilde.set_column(c, col);
    }
    let schur_flops = 2 * (blocks.mf.nnz() * m) as u64;
    stats.add_time(schur_flops, start.elapsed());

    Ok(ReducedModel {
        plan: plan.clone(),
        ktilde,
        ftilde,
        xstates,
        vstates,
        secondary_loads: secondary_loads.clone(),
        secondary_prescribed: secondary_prescribed.clone(),
        kff,
        blocks,
    })
}

impl ReducedModel {
    pub fn m(&self) -> usize {
        self.plan.m()
    }

    /// Retained factorization of `Ǩff` (absent when `F̌` is empty).
    pub fn kff(&self) -> Option<&Factorization> {
        self.kff.as_ref()
    }

    pub(crate) fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    /// Solves `Ǩff Y = B` with the retained factorization.
    pub fn solve_secondary(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.kff {
            Some(f) => f.solve_multi(b),
            None => Ok(DMatrix::zeros(0, b.ncols())),
        }
    }

    /// Secondary free states `Ǔf = −(X̌ Û + V̌)` and reactions
    /// `F̌p = Ǩ_P̌M Û + Ǩpf Ǔf + Ǩpp Ǔp` for the global columns `cols`.
    ///
    /// `uhat` has one column per entry of `cols`.
    pub fn recover_columns(
        &self,
        uhat: &DMatrix<f64>,
        cols: std::ops::Range<usize>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if uhat.nrows() != self.m() || uhat.ncols() != cols.len() {
            return Err(Error::DimensionMismatch(format!(
                "primary states are {}x{}, expected {}x{}",
                uhat.nrows(),
                uhat.ncols(),
                self.m(),
                cols.len()
            )));
        }
        let mut uf = -(&self.xstates * uhat);
        let mut up = DMatrix::zeros(self.plan.n_secondary_prescribed(), cols.len());
        for (k, c) in cols.clone().enumerate() {
            if let Some(v) = self.vstates.column(c) {
                let mut col = uf.column_mut(k);
                col -= v;
            }
            if let Some(p) = self.secondary_prescribed.column(c) {
                up.set_column(k, p);
            }
        }
        let mut fp = self.blocks.pm.mul_dense(uhat) + self.blocks.pf.mul_dense(&uf);
        fp += self.blocks.pp.mul_dense(&up);
        Ok((uf, fp))
    }

    /// [`recover_columns`](Self::recover_columns) over all `l` load cases.
    pub fn recover_secondary(&self, uhat: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.recover_columns(uhat, 0..self.plan.total_cases())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::build_plan;

    fn chain3() -> SymmetricSparse {
        SymmetricSparse::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0],
        ))
        .unwrap()
    }

    fn swap_plan() -> (Vec<AnalysisSet>, PartitionPlan) {
        let sets = vec![
            AnalysisSet::homogeneous([0].as_slice().into(), [2].as_slice().into(), vec![vec![]]).unwrap(),
            AnalysisSet::homogeneous([2].as_slice().into(), [0].as_slice().into(), vec![vec![]]).unwrap(),
        ];
        let plan = build_plan(&sets, 3).unwrap();
        (sets, plan)
    }

    #[test]
    fn identity_has_no_coupling() {
        let (_, plan) = swap_plan();
        let k = SymmetricSparse::from_dense(&DMatrix::identity(3, 3)).unwrap();
        let stats = Arc::new(SolverStats::new());
        let model = condense(&k, &plan, &SparseColumns::zeros(1, 2), &SparseColumns::zeros(0, 2), Backend::Direct, &stats)
            .unwrap();
        assert_eq!(model.ktilde, DMatrix::identity(2, 2));
        assert!(model.ftilde.is_zero());
    }

    #[test]
    fn chain_schur_complement() {
        let (_, plan) = swap_plan();
        let stats = Arc::new(SolverStats::new());
        let model = condense(&chain3(), &plan, &SparseColumns::zeros(1, 2), &SparseColumns::zeros(0, 2), Backend::Direct, &stats)
            .unwrap();
        assert!((&model.xstates - DMatrix::from_row_slice(1, 2, &[-0.5, -0.5])).amax() < 1e-15);
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -0.5, 1.5]);
        assert!((&model.ktilde - expected).amax() < 1e-15);
        assert_eq!(stats.snapshot().large_factorizations, 1);
    }

    #[test]
    fn chain_secondary_load() {
        let (_, plan) = swap_plan();
        let stats = Arc::new(SolverStats::new());
        let mut loads = SparseColumns::zeros(1, 2);
        loads.set_column(0, DVector::from_vec(vec![1.0]));
        let model = condense(&chain3(), &plan, &loads, &SparseColumns::zeros(0, 2), Backend::Direct, &stats).unwrap();
        assert!((model.vstates.get(0, 0) + 0.5).abs() < 1e-15);
        assert!((model.ftilde.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((model.ftilde.get(1, 0) - 0.5).abs() < 1e-15);
        // full solve with both primaries prescribed to (a, b): middle DOF is
        // (1 + a + b)/2 and the primary rows give K̃ Û − F̃ as reactions.
        let (a, b) = (0.3, -0.7);
        let mid = (1.0 + a + b) / 2.0;
        let r0 = 2.0 * a - mid;
        let r2 = 2.0 * b - mid;
        let uhat = DVector::from_vec(vec![a, b]);
        let lhs = &model.ktilde * &uhat;
        assert!((lhs[0] - (r0 + 0.5)).abs() < 1e-15);
        assert!((lhs[1] - (r2 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn recover_midpoint() {
        let (_, plan) = swap_plan();
        let stats = Arc::new(SolverStats::new());
        let model = condense(&chain3(), &plan, &SparseColumns::zeros(1, 2), &SparseColumns::zeros(0, 2), Backend::Direct, &stats)
            .unwrap();
        let uhat = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let before = stats.snapshot();
        let (uf, fp) = model.recover_secondary(&uhat).unwrap();
        assert!((uf[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(uf[(0, 1)], 0.0);
        assert_eq!(fp.nrows(), 0);
        let after = stats.snapshot();
        assert_eq!(after.large_factorizations, before.large_factorizations);
        assert_eq!(after.large_solves, before.large_solves);
    }

    #[test]
    fn refuses_empty_primary() {
        let sets = [AnalysisSet::homogeneous([0].as_slice().into(), crate::sparse::IndexSet::new(), vec![vec![]]).unwrap()];
        let plan = build_plan(&sets, 3).unwrap();
        let stats = Arc::new(SolverStats::new());
        let err = condense(&chain3(), &plan, &SparseColumns::zeros(2, 1), &SparseColumns::zeros(1, 1), Backend::Direct, &stats);
        assert!(matches!(err, Err(Error::EmptyPrimary)));
    }
}
