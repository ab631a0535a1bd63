//! Central-difference check of all six dependency cases.
//!
//! Each case is paired with a fixed weight pattern `W` and the response
//! `g = ⟨W, quantity⟩`. The analytic derivatives with respect to the design,
//! the secondary loads and prescribed values and the per-set primary inputs
//! are compared with central differences of the full condense-solve-recover
//! chain.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{gather_rows, table_a_case, Dependency, DependencyKind};
use crate::columns::SparseColumns;
use crate::condense::{condense, secondary_inputs};
use crate::error::{Error, Result};
use crate::fem::{assemble, DesignField, Filter, Grid, Simp};
use crate::frontend::{primary_inputs, solve_condensed_with, PrimaryInputs};
use crate::partition::{build_plan, AnalysisSet, PartitionPlan};
use crate::sparse::{Backend, SolverStats};

/// Largest relative error per input category of one dependency case.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseReport {
    pub kind: DependencyKind,
    pub design: f64,
    pub secondary_loads: f64,
    pub secondary_prescribed: f64,
    pub primary_loads: f64,
    pub primary_prescribed: f64,
}

impl CaseReport {
    pub fn max_error(&self) -> f64 {
        [self.design, self.secondary_loads, self.secondary_prescribed, self.primary_loads, self.primary_prescribed]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Smooth deterministic weights.
pub fn weights(rows: usize, cols: usize, seed: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| (seed + 1.3 * i as f64 + 0.7 * j as f64).sin())
}

struct Chain<'a> {
    grid: &'a Grid,
    filter: &'a Arc<Filter>,
    plan: PartitionPlan,
}

struct Outputs {
    ktilde: DMatrix<f64>,
    ftilde: DMatrix<f64>,
    uhat_free: Vec<DMatrix<f64>>,
    fhat_p: Vec<DMatrix<f64>>,
    ucheck: DMatrix<f64>,
    fcheck: DMatrix<f64>,
}

impl Chain<'_> {
    fn design(&self, x: &[f64]) -> Result<DesignField> {
        DesignField::new(x.to_vec(), Arc::clone(self.filter), Simp::default())
    }

    fn outputs(&self, x: &[f64], fl: &SparseColumns, up: &SparseColumns, inputs: &[PrimaryInputs]) -> Result<Outputs> {
        let stats = Arc::new(SolverStats::new());
        let k = assemble(self.grid, &self.design(x)?)?;
        let model = condense(&k, &self.plan, fl, up, Backend::Direct, &stats)?;
        let sol = solve_condensed_with(&model, inputs, &stats, true)?;
        let mut all = DMatrix::zeros(model.m(), self.plan.total_cases());
        for (i, s) in sol.sets.iter().enumerate() {
            let r = self.plan.case_range(i);
            all.columns_mut(r.start, r.len()).copy_from(&s.states);
        }
        let (ucheck, fcheck) = model.recover_secondary(&all)?;
        Ok(Outputs {
            ktilde: model.ktilde.clone(),
            ftilde: model.ftilde.to_dense(),
            uhat_free: sol.sets.iter().zip(&self.plan.splits).map(|(s, sp)| gather_rows(&s.states, &sp.free_local)).collect(),
            fhat_p: sol.sets.iter().map(|s| s.reactions.clone().unwrap_or_else(|| DMatrix::zeros(0, 0))).collect(),
            ucheck,
            fcheck,
        })
    }
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn response(dep: &Dependency, o: &Outputs) -> f64 {
    match dep {
        Dependency::Ktilde(w) => dot(w, &o.ktilde),
        Dependency::Ftilde(w) => dot(w, &o.ftilde),
        Dependency::UhatFree(w) => w.iter().zip(&o.uhat_free).map(|(w, u)| dot(w, u)).sum(),
        Dependency::FhatPrescribed(w) => w.iter().zip(&o.fhat_p).map(|(w, u)| dot(w, u)).sum(),
        Dependency::UcheckFree(w) => dot(w, &o.ucheck),
        Dependency::FcheckPrescribed(w) => dot(w, &o.fcheck),
    }
}

/// One weighted response per dependency case.
pub fn weighted_dependencies(plan: &PartitionPlan) -> Vec<Dependency> {
    let (m, l) = (plan.m(), plan.total_cases());
    let per_set = |prescribed: bool, seed: f64| -> Vec<DMatrix<f64>> {
        plan.splits
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let rows = if prescribed { s.prescribed.len() } else { s.free.len() };
                weights(rows, s.cases, seed + i as f64)
            })
            .collect()
    };
    vec![
        Dependency::Ktilde(weights(m, m, 0.1)),
        Dependency::Ftilde(weights(m, l, 0.2)),
        Dependency::UhatFree(per_set(false, 0.3)),
        Dependency::FhatPrescribed(per_set(true, 0.4)),
        Dependency::UcheckFree(weights(plan.n_secondary_free(), l, 0.5)),
        Dependency::FcheckPrescribed(weights(plan.n_secondary_prescribed(), l, 0.6)),
    ]
}

fn perturbed(c: &SparseColumns, i: usize, j: usize, d: f64) -> SparseColumns {
    let mut dense = c.to_dense();
    dense[(i, j)] += d;
    SparseColumns::from_dense(&dense)
}

/// Runs the check at design `x` with central step `eps`.
///
/// Design components are compared relative to `max(|analytic|, 1e-3·max|analytic|)`,
/// all other inputs relative to `max(|analytic|, 1e-2)`.
pub fn check_dependency_cases(
    grid: &Grid,
    filter: &Arc<Filter>,
    x: &[f64],
    sets: &[AnalysisSet],
    eps: f64,
) -> Result<Vec<CaseReport>> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    let plan = build_plan(sets, grid.n_dofs())?;
    let (fl, up) = secondary_inputs(&plan, sets)?;
    let inputs = primary_inputs(&plan, sets)?;
    let chain = Chain { grid, filter, plan };
    let rel = |fd: f64, an: f64, floor: f64| (fd - an).abs() / an.abs().max(floor).max(1e-12);
    let mut out = Vec::new();
    for dep in weighted_dependencies(&chain.plan) {
        let stats = Arc::new(SolverStats::new());
        let design = chain.design(x)?;
        let k = assemble(grid, &design)?;
        let model = condense(&k, &chain.plan, &fl, &up, Backend::Direct, &stats)?;
        let sol = solve_condensed_with(&model, &inputs, &stats, false)?;
        let b = table_a_case(grid, &design, &model, &sol, &dep)?;
        let g = |x: &[f64], fl: &SparseColumns, up: &SparseColumns, inp: &[PrimaryInputs]| -> Result<f64> {
            Ok(response(&dep, &chain.outputs(x, fl, up, inp)?))
        };
        let central = |plus: f64, minus: f64| (plus - minus) / (2.0 * eps);
        let mut rep = CaseReport {
            kind: dep.kind(),
            design: 0.0,
            secondary_loads: 0.0,
            secondary_prescribed: 0.0,
            primary_loads: 0.0,
            primary_prescribed: 0.0,
        };

        let scale = b.design.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[k] += eps;
            xm[k] -= eps;
            let fd = central(g(&xp, &fl, &up, &inputs)?, g(&xm, &fl, &up, &inputs)?);
            rep.design = rep.design.max(rel(fd, b.design[k], 1e-3 * scale));
        }
        for i in 0..fl.nrows() {
            for j in 0..fl.ncols() {
                let fd = central(
                    g(x, &perturbed(&fl, i, j, eps), &up, &inputs)?,
                    g(x, &perturbed(&fl, i, j, -eps), &up, &inputs)?,
                );
                rep.secondary_loads = rep.secondary_loads.max(rel(fd, b.secondary_loads[(i, j)], 1e-2));
            }
        }
        for i in 0..up.nrows() {
            for j in 0..up.ncols() {
                let fd = central(
                    g(x, &fl, &perturbed(&up, i, j, eps), &inputs)?,
                    g(x, &fl, &perturbed(&up, i, j, -eps), &inputs)?,
                );
                rep.secondary_prescribed = rep.secondary_prescribed.max(rel(fd, b.secondary_prescribed[(i, j)], 1e-2));
            }
        }
        for s in 0..inputs.len() {
            for prescribed in [false, true] {
                let base = if prescribed { &inputs[s].prescribed } else { &inputs[s].loads };
                for r in 0..base.nrows() {
                    for c in 0..base.ncols() {
                        let shifted = |d: f64| {
                            let mut inp = inputs.clone();
                            let t = if prescribed { &mut inp[s].prescribed } else { &mut inp[s].loads };
                            t[(r, c)] += d;
                            inp
                        };
                        let fd = central(g(x, &fl, &up, &shifted(eps))?, g(x, &fl, &up, &shifted(-eps))?);
                        if prescribed {
                            let e = rel(fd, b.primary_prescribed[s][(r, c)], 1e-2);
                            rep.primary_prescribed = rep.primary_prescribed.max(e);
                        } else {
                            let e = rel(fd, b.primary_loads[s][(r, c)], 1e-2);
                            rep.primary_loads = rep.primary_loads.max(e);
                        }
                    }
                }
            }
        }
        out.push(rep);
    }
    Ok(out)
}
