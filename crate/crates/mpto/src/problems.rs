//! The two benchmark problems: multi-port heat conduction and a
//! multi-input multi-output compliant mechanism.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::columns::SparseColumns;
use crate::condense::{condense, secondary_inputs};
use crate::error::{Error, Result};
use crate::fem::{assemble, DesignField, Filter, Grid, Physics, Simp};
use crate::frontend::{
    primary_inputs, solve_condensed_with, solve_elementary, solve_elementary_set, Pipeline, PrimaryInputs,
};
use crate::partition::{build_plan, validate_plan, AnalysisSet, PartitionPlan};
use crate::sensitivity::{add_elementary_term, sens_condensed_state, sens_elementary, Adjoint};
use crate::sparse::{Backend, CostLedger, IndexSet, SolverStats};

/// Density filter radius in element widths.
pub const FILTER_RADIUS: f64 = 2.0;

/// Problem-specific data.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    /// Heat conduction between `m` ports; set `i` sinks port `i` and loads
    /// each other port in its own load case.
    HeatPorts { ports: Vec<usize>, magnitudes: Vec<f64>, vbar: f64, seed: u64 },
    /// Compliant mechanism; set `j` drives input `j` with a unit horizontal
    /// displacement, `J_ij` is the horizontal displacement of output `i`.
    Mechanism { inputs: Vec<usize>, outputs: Vec<usize>, jbar: DMatrix<f64> },
}

/// A fully specified optimization problem with its precomputed partition.
#[derive(Debug)]
pub struct Problem {
    pub grid: Grid,
    pub filter: Arc<Filter>,
    pub simp: Simp,
    pub sets: Vec<AnalysisSet>,
    pub plan: PartitionPlan,
    pub kind: ProblemKind,
    secondary_loads: SparseColumns,
    secondary_prescribed: SparseColumns,
    primary: Vec<PrimaryInputs>,
}

/// Responses, their design gradients and the solver work of one evaluation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// `g₀, g₁, …, g_h`.
    pub values: Vec<f64>,
    /// `dg/dx` per response; empty when gradients were not requested.
    pub gradients: Vec<Vec<f64>>,
    pub ledger: CostLedger,
}

impl Problem {
    fn from_sets(grid: Grid, sets: Vec<AnalysisSet>, kind: ProblemKind) -> Result<Self> {
        let filter = Arc::new(Filter::new(&grid, FILTER_RADIUS)?);
        let plan = build_plan(&sets, grid.n_dofs())?;
        validate_plan(&plan, &sets)?;
        let (secondary_loads, secondary_prescribed) = secondary_inputs(&plan, &sets)?;
        let primary = primary_inputs(&plan, &sets)?;
        Ok(Self {
            grid,
            filter,
            simp: Simp::default(),
            sets,
            plan,
            kind,
            secondary_loads,
            secondary_prescribed,
            primary,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.grid.n_elements()
    }

    /// Number of constraints `h`.
    pub fn n_constraints(&self) -> usize {
        match &self.kind {
            ProblemKind::HeatPorts { .. } => 1,
            ProblemKind::Mechanism { jbar, .. } => jbar.len(),
        }
    }

    /// `g0`, then the constraint names.
    pub fn response_names(&self) -> Vec<String> {
        let mut names = vec!["g0".to_string()];
        match &self.kind {
            ProblemKind::HeatPorts { .. } => names.push("g1".into()),
            ProblemKind::Mechanism { jbar, .. } => {
                for i in 0..jbar.nrows() {
                    for j in 0..jbar.ncols() {
                        names.push(format!("g{}{}", i + 1, j + 1));
                    }
                }
            }
        }
        names
    }

    /// Uniform starting design: `v̄` for heat conduction, full material for the mechanism.
    pub fn initial_design(&self) -> Vec<f64> {
        let v = match &self.kind {
            ProblemKind::HeatPorts { vbar, .. } => *vbar,
            ProblemKind::Mechanism { .. } => 1.0,
        };
        vec![v; self.n_elements()]
    }

    pub fn design(&self, x: &[f64]) -> Result<DesignField> {
        DesignField::new(x.to_vec(), Arc::clone(&self.filter), self.simp)
    }

    /// Evaluates all responses (and gradients if asked) with a fresh counter set.
    pub fn evaluate(&self, pipeline: Pipeline, backend: Backend, x: &[f64], gradients: bool) -> Result<Evaluation> {
        self.evaluate_with(pipeline, backend, x, gradients, &Arc::new(SolverStats::new()))
    }

    /// As [`evaluate`](Self::evaluate), charging the work to `stats`.
    pub fn evaluate_with(
        &self,
        pipeline: Pipeline,
        backend: Backend,
        x: &[f64],
        gradients: bool,
        stats: &Arc<SolverStats>,
    ) -> Result<Evaluation> {
        let before = stats.snapshot();
        let design = self.design(x)?;
        let (values, grads) = match (&self.kind, pipeline) {
            (ProblemKind::HeatPorts { vbar, .. }, p) => {
                let (g0, d0) = match p {
                    Pipeline::Elementary => self.heat_elementary(&design, backend, gradients, stats)?,
                    Pipeline::Condensed => self.heat_condensed(&design, backend, gradients, stats)?,
                };
                let n = self.n_elements() as f64;
                let g1 = design.filtered().iter().sum::<f64>() / (n * vbar) - 1.0;
                let mut grads = Vec::new();
                if gradients {
                    grads.push(d0);
                    grads.push(design.chain_filtered(&vec![1.0 / (n * vbar); self.n_elements()]));
                }
                (vec![g0, g1], grads)
            }
            (ProblemKind::Mechanism { outputs, jbar, .. }, p) => {
                let n = self.n_elements() as f64;
                let mut values = vec![-design.filtered().iter().sum::<f64>() / n];
                let mut grads = Vec::new();
                if gradients {
                    grads.push(design.chain_filtered(&vec![-1.0 / n; self.n_elements()]));
                }
                let (jac, jgrads) = self.mechanism(&design, p, backend, outputs, jbar, gradients, stats)?;
                for i in 0..jbar.nrows() {
                    for j in 0..jbar.ncols() {
                        values.push(jac[(i, j)] / jbar[(i, j)] + 1.0);
                    }
                }
                grads.extend(jgrads);
                (values, grads)
            }
        };
        for v in &values {
            if !v.is_finite() {
                return Err(Error::NonFinite("response value".into()));
            }
        }
        Ok(Evaluation { values, gradients: grads, ledger: stats.snapshot() - before })
    }

    /// `Σ u·K u` over all sets and cases, one set at a time.
    fn heat_elementary(
        &self,
        design: &DesignField,
        backend: Backend,
        gradients: bool,
        stats: &Arc<SolverStats>,
    ) -> Result<(f64, Vec<f64>)> {
        let k = assemble(&self.grid, design)?;
        let mut g0 = 0.0;
        let mut raw = vec![0.0; self.n_elements()];
        for set in &self.sets {
            let es = solve_elementary_set(&k, set, backend, stats, false)?;
            for u in es.states.column_iter() {
                let ku = k.mul_vec(u.as_slice());
                g0 += ku.iter().zip(u.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
            if gradients {
                // ∂g0/∂U_f = 2 F_f, offset by the explicit K term: λ = u overall
                add_elementary_term(&self.grid, &es, &Adjoint::SelfAdjoint(1.0), &mut raw)?;
            }
        }
        let grad = if gradients { design.chain_contractions(&raw) } else { Vec::new() };
        Ok((g0, grad))
    }

    /// `Σ û·K̃ û` on the reduced system.
    fn heat_condensed(
        &self,
        design: &DesignField,
        backend: Backend,
        gradients: bool,
        stats: &Arc<SolverStats>,
    ) -> Result<(f64, Vec<f64>)> {
        let k = assemble(&self.grid, design)?;
        let model = condense(&k, &self.plan, &self.secondary_loads, &self.secondary_prescribed, backend, stats)?;
        let sol = solve_condensed_with(&model, &self.primary, stats, false)?;
        let g0: f64 = sol.sets.iter().map(|s| (&model.ktilde * &s.states).component_mul(&s.states).sum()).sum();
        let grad = if gradients {
            let adj = vec![Adjoint::SelfAdjoint(1.0); sol.sets.len()];
            sens_condensed_state(&self.grid, design, &model, &sol, &adj)?
        } else {
            Vec::new()
        };
        Ok((g0, grad))
    }

    /// Jacobian `J` (outputs × inputs) and, optionally, `dg_ij/dx` in row-major order.
    #[allow(clippy::too_many_arguments)]
    fn mechanism(
        &self,
        design: &DesignField,
        pipeline: Pipeline,
        backend: Backend,
        outputs: &[usize],
        jbar: &DMatrix<f64>,
        gradients: bool,
        stats: &Arc<SolverStats>,
    ) -> Result<(DMatrix<f64>, Vec<Vec<f64>>)> {
        let x = outputs.len();
        let k = assemble(&self.grid, design)?;
        let mut jac = DMatrix::zeros(x, x);
        let mut grads = Vec::new();
        match pipeline {
            Pipeline::Elementary => {
                let sol = solve_elementary(&k, &self.sets, backend, stats, false)?;
                for j in 0..x {
                    for i in 0..x {
                        jac[(i, j)] = sol.sets[j].states[(outputs[i], 0)];
                    }
                }
                if gradients {
                    for i in 0..x {
                        for j in 0..x {
                            let adj: Vec<Adjoint> = (0..x)
                                .map(|s| {
                                    if s != j {
                                        return Adjoint::Zero;
                                    }
                                    let free = &sol.sets[s].free;
                                    let mut w = DMatrix::zeros(free.len(), 1);
                                    w[(free.position(outputs[i]).expect("outputs are free"), 0)] = 1.0 / jbar[(i, j)];
                                    Adjoint::Partial(w)
                                })
                                .collect();
                            grads.push(sens_elementary(&self.grid, design, &sol, &adj)?);
                        }
                    }
                }
            }
            Pipeline::Condensed => {
                let model =
                    condense(&k, &self.plan, &self.secondary_loads, &self.secondary_prescribed, backend, stats)?;
                let sol = solve_condensed_with(&model, &self.primary, stats, false)?;
                let prim: Vec<usize> =
                    outputs.iter().map(|&o| self.plan.primary.position(o).expect("outputs are primary")).collect();
                for j in 0..x {
                    for i in 0..x {
                        jac[(i, j)] = sol.sets[j].states[(prim[i], 0)];
                    }
                }
                if gradients {
                    for i in 0..x {
                        for j in 0..x {
                            let adj: Vec<Adjoint> = (0..x)
                                .map(|s| {
                                    if s != j {
                                        return Adjoint::Zero;
                                    }
                                    let free = &self.plan.splits[s].free;
                                    let mut w = DMatrix::zeros(free.len(), 1);
                                    w[(free.position(outputs[i]).expect("outputs are free"), 0)] = 1.0 / jbar[(i, j)];
                                    Adjoint::Partial(w)
                                })
                                .collect();
                            grads.push(sens_condensed_state(&self.grid, design, &model, &sol, &adj)?);
                        }
                    }
                }
            }
        }
        Ok((jac, grads))
    }
}

/// Heat conduction between `m` randomly placed ports on an `nelx × nely` grid.
pub fn build_problem1(nelx: usize, nely: usize, m: usize, vbar: f64, seed: u64) -> Result<Problem> {
    let grid = Grid::new(nelx, nely, Physics::Conduction)?;
    let n = grid.n_dofs();
    if m < 2 {
        return Err(Error::Invalid(format!("need at least two ports, got {m}")));
    }
    if m > n {
        return Err(Error::Invalid(format!("{m} ports exceed the {n} DOFs")));
    }
    if !(vbar > 0.0 && vbar <= 1.0) {
        return Err(Error::Invalid(format!("volume fraction must lie in (0, 1], got {vbar}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ports = rand::seq::index::sample(&mut rng, n, m).into_vec();
    let magnitudes: Vec<f64> = (0..m)
        .map(|_| loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    let interest: IndexSet = ports.iter().copied().collect();
    let sets = (0..m)
        .map(|i| {
            let loads = (0..m).filter(|&j| j != i).map(|j| vec![(ports[j], magnitudes[j])]).collect();
            AnalysisSet::homogeneous([ports[i]].as_slice().into(), interest.clone(), loads)
        })
        .collect::<Result<Vec<_>>>()?;
    Problem::from_sets(grid, sets, ProblemKind::HeatPorts { ports, magnitudes, vbar, seed })
}

/// Node rows of `count` ports evenly spaced along a vertical edge.
fn port_rows(nely: usize, count: usize) -> Result<Vec<usize>> {
    let rows: Vec<usize> =
        (1..=count).map(|k| ((k * nely) as f64 / (count + 1) as f64).round() as usize).collect();
    let distinct = rows.windows(2).all(|w| w[0] < w[1]);
    if !distinct || rows.first() == Some(&0) || rows.last() == Some(&nely) {
        return Err(Error::Invalid(format!("{count} ports do not fit on an edge of {nely} elements")));
    }
    Ok(rows)
}

/// `x`-input `x`-output compliant mechanism with target Jacobian `jbar`.
pub fn build_problem2(nelx: usize, nely: usize, jbar: DMatrix<f64>) -> Result<Problem> {
    let x = jbar.nrows();
    if x == 0 || jbar.ncols() != x {
        return Err(Error::Invalid(format!("target Jacobian must be square and nonempty, got {}x{}", x, jbar.ncols())));
    }
    if jbar.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::Invalid("target Jacobian entries must be finite and nonzero".into()));
    }
    let grid = Grid::new(nelx, nely, Physics::PlaneStress)?;
    let rows = port_rows(nely, x)?;
    let inputs: Vec<usize> = rows.iter().map(|&r| grid.dof(grid.node(0, r), 0)).collect();
    let outputs: Vec<usize> = rows.iter().map(|&r| grid.dof(grid.node(nelx, r), 0)).collect();
    let ports: IndexSet = inputs.iter().chain(&outputs).copied().collect();
    let edges: IndexSet = (0..=nely)
        .flat_map(|r| [grid.node(0, r), grid.node(nelx, r)])
        .flat_map(|node| [grid.dof(node, 0), grid.dof(node, 1)])
        .filter(|d| !ports.contains(*d))
        .collect();
    let sets = (0..x)
        .map(|j| {
            let prescribed = edges.union(&[inputs[j]].as_slice().into());
            let mut values = DMatrix::zeros(prescribed.len(), 1);
            values[(prescribed.position(inputs[j]).expect("input is prescribed"), 0)] = 1.0;
            AnalysisSet::new(prescribed, ports.clone(), values, vec![vec![]])
        })
        .collect::<Result<Vec<_>>>()?;
    Problem::from_sets(grid, sets, ProblemKind::Mechanism { inputs, outputs, jbar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensitivity::fd_verify;

    fn jbar_ref() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.5, 2.0, 1.0, -1.0])
    }

    fn wavy(n: usize, base: f64) -> Vec<f64> {
        (0..n).map(|e| base + 0.25 * ((e as f64) * 0.9).sin()).collect()
    }

    #[test]
    fn problem1_layout() {
        let p = build_problem1(6, 5, 4, 0.3, 7).unwrap();
        assert_eq!(p.sets.len(), 4);
        assert_eq!(p.plan.m(), 4);
        assert!(p.sets.iter().all(|s| s.cases() == 3 && s.prescribed.len() == 1));
        assert_eq!(p.plan.total_cases(), 12);
        assert_eq!(p.plan.n_secondary_prescribed(), 0);
        assert!(p.secondary_loads.is_zero());
        if let ProblemKind::HeatPorts { ports, magnitudes, .. } = &p.kind {
            let distinct: IndexSet = ports.iter().copied().collect();
            assert_eq!(distinct.len(), 4);
            assert!(magnitudes.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        let again = build_problem1(6, 5, 4, 0.3, 7).unwrap();
        assert_eq!(again.kind, p.kind);
        assert_ne!(build_problem1(6, 5, 4, 0.3, 8).unwrap().kind, p.kind);
    }

    #[test]
    fn problem1_rejects_bad_sizes() {
        assert!(build_problem1(2, 2, 1, 0.3, 0).is_err());
        assert!(build_problem1(1, 1, 5, 0.3, 0).is_err());
        assert!(build_problem1(2, 2, 2, 0.0, 0).is_err());
    }

    #[test]
    fn volume_constraint_tight_at_vbar() {
        let p = build_problem1(5, 5, 3, 0.2, 1).unwrap();
        let e = p.evaluate(Pipeline::Condensed, Backend::Direct, &p.initial_design(), false).unwrap();
        assert!(e.values[1].abs() < 1e-14);
    }

    #[test]
    fn problem2_layout() {
        let p = build_problem2(6, 6, jbar_ref()).unwrap();
        assert_eq!(p.plan.m(), 4);
        assert_eq!(p.sets.len(), 2);
        let n_edge = 2 * 7 * 2 - 4;
        assert_eq!(p.plan.n_secondary_prescribed(), n_edge);
        assert!(p.secondary_prescribed.is_zero());
        if let ProblemKind::Mechanism { inputs, outputs, .. } = &p.kind {
            // rows 2 and 4 of a 6-element edge
            assert_eq!(inputs, &vec![p.grid.dof(p.grid.node(0, 2), 0), p.grid.dof(p.grid.node(0, 4), 0)]);
            assert_eq!(outputs, &vec![p.grid.dof(p.grid.node(6, 2), 0), p.grid.dof(p.grid.node(6, 4), 0)]);
        }
        assert_eq!(p.response_names(), vec!["g0", "g11", "g12", "g21", "g22"]);
        let single = build_problem2(4, 4, DMatrix::from_element(1, 1, 1.0)).unwrap();
        if let ProblemKind::Mechanism { inputs, .. } = &single.kind {
            assert_eq!(inputs[0], single.grid.dof(single.grid.node(0, 2), 0));
        }
    }

    #[test]
    fn problem2_rejects_zero_target() {
        let mut j = jbar_ref();
        j[(1, 0)] = 0.0;
        assert!(build_problem2(6, 6, j).is_err());
        assert!(build_problem2(6, 2, jbar_ref()).is_err());
    }

    #[test]
    fn pipelines_agree_problem1() {
        let p = build_problem1(4, 4, 4, 0.3, 3).unwrap();
        let x = wavy(p.n_elements(), 0.45);
        let e = p.evaluate(Pipeline::Elementary, Backend::Direct, &x, true).unwrap();
        let c = p.evaluate(Pipeline::Condensed, Backend::Direct, &x, true).unwrap();
        assert!(((e.values[0] - c.values[0]) / e.values[0]).abs() < 1e-9);
        for (ge, gc) in e.gradients.iter().zip(&c.gradients) {
            let norm = ge.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(ge.iter().zip(gc).all(|(a, b)| (a - b).abs() <= 1e-9 * norm));
        }
        assert_eq!(e.ledger.large_factorizations, 4);
        assert_eq!(c.ledger.large_factorizations, 1);
        assert_eq!(c.ledger.large_solves, 4);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p1 = build_problem1(4, 4, 4, 0.3, 11).unwrap();
        let p2 = build_problem2(6, 6, jbar_ref()).unwrap();
        for (p, base) in [(&p1, 0.45), (&p2, 0.6)] {
            let x = wavy(p.n_elements(), base);
            for pipeline in [Pipeline::Elementary, Pipeline::Condensed] {
                let e = p.evaluate(pipeline, Backend::Direct, &x, true).unwrap();
                for r in 0..e.values.len() {
                    let g = |x: &[f64]| Ok(p.evaluate(pipeline, Backend::Direct, x, false)?.values[r]);
                    let err = fd_verify(g, &x, &e.gradients[r], 1e-6).unwrap();
                    assert!(err < 1e-5, "{pipeline} response {r}: {err}");
                }
            }
        }
    }

    #[test]
    fn mechanism_ledgers() {
        let p = build_problem2(6, 6, jbar_ref()).unwrap();
        let x = wavy(p.n_elements(), 0.6);
        let e = p.evaluate(Pipeline::Elementary, Backend::Direct, &x, true).unwrap();
        let c = p.evaluate(Pipeline::Condensed, Backend::Direct, &x, true).unwrap();
        assert_eq!(e.ledger.large_factorizations, 2);
        // two state solves, four adjoint solves (b = x per set)
        assert_eq!(e.ledger.large_solves, 2 + 4);
        assert_eq!(c.ledger.large_factorizations, 1);
        assert_eq!(c.ledger.large_solves, 4);
        assert_eq!(c.ledger.dense_factorizations, 2);
        for (a, b) in e.values.iter().zip(&c.values) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
