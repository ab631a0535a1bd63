//! End-to-end response evaluation: the elementary pipeline (one
//! factorization per analysis set) and the condensed pipeline (reduced
//! analyses on `K̃`).

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::condense::ReducedModel;
use crate::error::{Error, Result};
use crate::partition::{AnalysisSet, PartitionPlan};
use crate::sparse::{Backend, DenseCholesky, Factorization, IndexSet, SolverStats, SymmetricSparse};

/// Which pipeline evaluates the responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pipeline {
    Elementary,
    Condensed,
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pipeline::Elementary => "elementary",
            Pipeline::Condensed => "condensed",
        })
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elementary" => Ok(Pipeline::Elementary),
            "condensed" => Ok(Pipeline::Condensed),
            other => Err(Error::Invalid(format!("unknown pipeline '{other}'"))),
        }
    }
}

/// Solution of one analysis set by the elementary pipeline.
#[derive(Debug)]
pub struct ElementarySet {
    pub free: IndexSet,
    pub prescribed: IndexSet,
    /// Full states, `n × cases`, prescribed rows hold the prescribed values.
    pub states: DMatrix<f64>,
    /// Reactions on the prescribed DOFs, `|prescribed| × cases`.
    pub reactions: Option<DMatrix<f64>>,
    factor: Factorization,
}

impl ElementarySet {
    /// Retained factorization of `K_ff` of this set.
    pub fn factor(&self) -> &Factorization {
        &self.factor
    }
}

#[derive(Debug)]
pub struct ElementarySolution {
    pub sets: Vec<ElementarySet>,
}

impl ElementarySolution {
    /// States of set `i` restricted to the primary DOFs, `m × cases`.
    pub fn primary_states(&self, plan: &PartitionPlan, i: usize) -> DMatrix<f64> {
        let s = &self.sets[i].states;
        DMatrix::from_fn(plan.m(), s.ncols(), |r, c| s[(plan.primary.as_slice()[r], c)])
    }
}

/// Solves one analysis set: factorize `K_ff` once, then all load cases.
pub fn solve_elementary_set(
    k: &SymmetricSparse,
    set: &AnalysisSet,
    backend: Backend,
    stats: &Arc<SolverStats>,
    with_reactions: bool,
) -> Result<ElementarySet> {
    let n = k.dim();
    set.validate(n)?;
    let free = set.free(n);
    let prescribed = set.prescribed.clone();
    if free.is_empty() {
        return Err(Error::Invalid("analysis set without free DOFs".into()));
    }
    let factor = Factorization::new(&k.principal(&free)?, backend, stats)?;
    let kfp = k.extract_sparse(&free, &prescribed)?;
    let mut rhs = set.load_matrix(&free);
    if !prescribed.is_empty() {
        rhs -= kfp.mul_dense(&set.prescribed_values);
    }
    let uf = factor.solve_multi(&rhs)?;
    let cases = set.cases();
    let mut states = DMatrix::zeros(n, cases);
    for (r, d) in free.iter().enumerate() {
        states.set_row(d, &uf.row(r));
    }
    for (r, d) in prescribed.iter().enumerate() {
        states.set_row(d, &set.prescribed_values.row(r));
    }
    let reactions = if with_reactions && !prescribed.is_empty() {
        let kpf = kfp.transpose();
        let kpp = k.extract_sparse(&prescribed, &prescribed)?;
        Some(kpf.mul_dense(&uf) + kpp.mul_dense(&set.prescribed_values))
    } else {
        None
    };
    Ok(ElementarySet { free, prescribed, states, reactions, factor })
}

/// Elementary pipeline over all analysis sets.
pub fn solve_elementary(
    k: &SymmetricSparse,
    sets: &[AnalysisSet],
    backend: Backend,
    stats: &Arc<SolverStats>,
    with_reactions: bool,
) -> Result<ElementarySolution> {
    let sets = sets
        .iter()
        .map(|s| solve_elementary_set(k, s, backend, stats, with_reactions))
        .collect::<Result<Vec<_>>>()?;
    Ok(ElementarySolution { sets })
}

/// Loads and prescribed values of one set on its reduced split.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimaryInputs {
    /// `F̂f`, `|F̂| × cases`.
    pub loads: DMatrix<f64>,
    /// `Ûp`, `|P̂| × cases`.
    pub prescribed: DMatrix<f64>,
}

/// Collects `F̂f` and `Ûp` of every set from the analysis sets.
pub fn primary_inputs(plan: &PartitionPlan, sets: &[AnalysisSet]) -> Result<Vec<PrimaryInputs>> {
    sets.iter()
        .zip(&plan.splits)
        .map(|(s, split)| {
            Ok(PrimaryInputs {
                loads: s.load_matrix(&split.free),
                prescribed: s.prescribed_matrix(&split.prescribed)?,
            })
        })
        .collect()
}

/// Solution of one analysis set on the reduced system.
#[derive(Debug)]
pub struct CondensedSet {
    /// Primary states `Û`, `m × cases`, including the prescribed rows.
    pub states: DMatrix<f64>,
    /// Reduced reactions `F̂p`, `|P̂| × cases`.
    pub reactions: Option<DMatrix<f64>>,
    factor: Option<DenseCholesky>,
}

impl CondensedSet {
    /// Dense factorization of `K̃ff` of this set (absent when `F̂` is empty).
    pub fn factor(&self) -> Option<&DenseCholesky> {
        self.factor.as_ref()
    }
}

#[derive(Debug)]
pub struct CondensedSolution {
    pub sets: Vec<CondensedSet>,
}

/// Principal and coupling blocks of `K̃` for one reduced split.
pub(crate) fn split_blocks(kt: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| kt[(rows[i], cols[j])])
}

/// Condensed pipeline with explicit primary inputs.
pub fn solve_condensed_with(
    model: &ReducedModel,
    inputs: &[PrimaryInputs],
    stats: &Arc<SolverStats>,
    with_reactions: bool,
) -> Result<CondensedSolution> {
    let plan = &model.plan;
    if inputs.len() != plan.splits.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} input blocks for {} analysis sets",
            inputs.len(),
            plan.splits.len()
        )));
    }
    let m = plan.m();
    let kt = &model.ktilde;
    let mut out = Vec::with_capacity(inputs.len());
    for (i, (split, inp)) in plan.splits.iter().zip(inputs).enumerate() {
        let (f, p) = (&split.free_local, &split.prescribed_local);
        let cases = split.cases;
        if inp.loads.shape() != (f.len(), cases) || inp.prescribed.shape() != (p.len(), cases) {
            return Err(Error::DimensionMismatch(format!("primary inputs of set {i} do not match its split")));
        }
        let ft = model.ftilde.slice(split.case_offset, split.case_offset + cases).to_dense();
        let kff = split_blocks(kt, f, f);
        let kfp = split_blocks(kt, f, p);
        let mut states = DMatrix::zeros(m, cases);
        for (r, &q) in p.iter().enumerate() {
            states.set_row(q, &inp.prescribed.row(r));
        }
        let factor = if f.is_empty() {
            None
        } else {
            let mut rhs = inp.loads.clone() - &kfp * &inp.prescribed;
            for (r, &q) in f.iter().enumerate() {
                let mut row = rhs.row_mut(r);
                row += ft.row(q);
            }
            let factor = DenseCholesky::new(&kff, stats)?;
            let uf = factor.solve_multi(&rhs)?;
            for (r, &q) in f.iter().enumerate() {
                states.set_row(q, &uf.row(r));
            }
            Some(factor)
        };
        let reactions = if with_reactions && !p.is_empty() {
            let kpm = split_blocks(kt, p, &(0..m).collect::<Vec<_>>());
            let mut r = kpm * &states;
            for (row, &q) in p.iter().enumerate() {
                let mut rr = r.row_mut(row);
                rr -= ft.row(q);
            }
            Some(r)
        } else {
            None
        };
        out.push(CondensedSet { states, reactions, factor });
    }
    Ok(CondensedSolution { sets: out })
}

/// Condensed pipeline reading `F̂f` and `Ûp` from the analysis sets.
pub fn solve_condensed(
    model: &ReducedModel,
    sets: &[AnalysisSet],
    stats: &Arc<SolverStats>,
    with_reactions: bool,
) -> Result<CondensedSolution> {
    let inputs = primary_inputs(&model.plan, sets)?;
    solve_condensed_with(model, &inputs, stats, with_reactions)
}
