use std::sync::Arc;

use nalgebra::DMatrix;

use super::*;
use crate::columns::SparseColumns;
use crate::condense::{condense, secondary_inputs};
use crate::fem::{assemble, Filter, Physics, Simp};
use crate::frontend::{primary_inputs, solve_condensed_with, solve_elementary, PrimaryInputs};
use crate::partition::{build_plan, AnalysisSet, PartitionPlan};
use crate::sparse::{Backend, IndexSet, SolverStats, SymmetricSparse};

fn weights(rows: usize, cols: usize, seed: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| (seed + 1.3 * i as f64 + 0.7 * j as f64).sin())
}

fn set(prescribed: &[usize], values: &[&[f64]], interest: &[usize], loads: Vec<Vec<(usize, f64)>>) -> AnalysisSet {
    let cases = loads.len();
    let vals = DMatrix::from_fn(prescribed.len(), cases, |r, c| values[r][c]);
    AnalysisSet::new(prescribed.into(), interest.into(), vals, loads).unwrap()
}

/// 3×3 conduction grid with a common sink at DOF 0 (secondary prescribed),
/// swapped primary splits and loads on secondary free DOFs.
struct Fixture {
    grid: Grid,
    filter: Arc<Filter>,
    x: Vec<f64>,
    plan: PartitionPlan,
    fl: SparseColumns,
    up: SparseColumns,
    inputs: Vec<PrimaryInputs>,
}

fn fixture() -> Fixture {
    let grid = Grid::new(3, 3, Physics::Conduction).unwrap();
    let filter = Arc::new(Filter::new(&grid, 1.5).unwrap());
    let x: Vec<f64> = (0..9).map(|e| 0.3 + 0.07 * e as f64).collect();
    let sets = vec![
        set(
            &[0, 5],
            &[&[0.3, 0.3], &[0.2, -0.5]],
            &[10, 15],
            vec![vec![(10, 1.0), (7, 0.5)], vec![(7, -0.4), (12, 0.8), (15, 0.3)]],
        ),
        set(&[0, 10], &[&[0.3], &[-0.1]], &[5, 15], vec![vec![(5, 0.7), (12, 0.2)]]),
    ];
    let plan = build_plan(&sets, grid.n_dofs()).unwrap();
    assert_eq!(plan.primary.as_slice(), &[5, 10, 15]);
    assert_eq!(plan.secondary_prescribed.as_slice(), &[0]);
    let (fl, up) = secondary_inputs(&plan, &sets).unwrap();
    let inputs = primary_inputs(&plan, &sets).unwrap();
    Fixture { grid, filter, x, plan, fl, up, inputs }
}

impl Fixture {
    fn design(&self, x: &[f64]) -> DesignField {
        DesignField::new(x.to_vec(), Arc::clone(&self.filter), Simp::default()).unwrap()
    }

    fn model(&self, x: &[f64], fl: &SparseColumns, up: &SparseColumns, stats: &Arc<SolverStats>) -> ReducedModel {
        let k = assemble(&self.grid, &self.design(x)).unwrap();
        condense(&k, &self.plan, fl, up, Backend::Direct, stats).unwrap()
    }
}

#[test]
fn table_cases_match_finite_differences() {
    let fx = fixture();
    let inst = crate::instances::two_set_grid3();
    assert_eq!(inst.x, fx.x);
    let reports = check::check_dependency_cases(&inst.grid, &inst.filter, &inst.x, &inst.sets, FD_STEP).unwrap();
    assert_eq!(reports.len(), 6);
    for r in reports {
        assert!(r.max_error() < 1e-5, "{r:?}");
    }
}

#[test]
fn check_rejects_zero_step() {
    let inst = crate::instances::two_set_grid3();
    let plan = build_plan(&inst.sets, inst.grid.n_dofs()).unwrap();
    assert_eq!(check::weighted_dependencies(&plan).len(), 6);
    assert!(check::check_dependency_cases(&inst.grid, &inst.filter, &inst.x, &inst.sets, 0.0).is_err());
}

#[test]
fn ktilde_case_equals_reduced_matrix_route() {
    let fx = fixture();
    let stats = Arc::new(SolverStats::new());
    let model = fx.model(&fx.x, &fx.fl, &fx.up, &stats);
    let sol = solve_condensed_with(&model, &fx.inputs, &stats, false).unwrap();
    let w = weights(3, 3, 0.9);
    let d = fx.design(&fx.x);
    let before = stats.snapshot();
    let a = sens_reduced_matrix(&fx.grid, &d, &model, &w).unwrap();
    let after = stats.snapshot();
    assert_eq!(after.large_solves, before.large_solves);
    assert_eq!(after.dense_solves, before.dense_solves);
    let b = table_a_case(&fx.grid, &d, &model, &sol, &Dependency::Ktilde(w)).unwrap();
    assert_eq!(a, b.design);
}

#[test]
fn ftilde_case_equals_reduced_load_route() {
    let fx = fixture();
    let stats = Arc::new(SolverStats::new());
    let model = fx.model(&fx.x, &fx.fl, &fx.up, &stats);
    let sol = solve_condensed_with(&model, &fx.inputs, &stats, false).unwrap();
    let w = weights(3, 3, 1.9);
    let d = fx.design(&fx.x);
    let before = stats.snapshot();
    let a = sens_reduced_load(&fx.grid, &d, &model, &w).unwrap();
    assert_eq!(stats.snapshot().large_solves, before.large_solves);
    let b = table_a_case(&fx.grid, &d, &model, &sol, &Dependency::Ftilde(w)).unwrap();
    assert_eq!(a.design, b.design);
    assert_eq!(a.secondary_loads, b.secondary_loads);
    assert_eq!(a.secondary_prescribed, b.secondary_prescribed);
}

#[test]
fn secondary_state_case_solve_counts() {
    // one set, one case: one extra large solve and one dense solve
    let grid = Grid::new(2, 2, Physics::Conduction).unwrap();
    let d = DesignField::uniform(&grid, 0.5, 1.2, Simp::default()).unwrap();
    let k = assemble(&grid, &d).unwrap();
    let sets = vec![set(&[0], &[&[0.0]], &[8, 4], vec![vec![(8, 1.0)]])];
    let plan = build_plan(&sets, 9).unwrap();
    let (fl, up) = secondary_inputs(&plan, &sets).unwrap();
    let stats = Arc::new(SolverStats::new());
    let model = condense(&k, &plan, &fl, &up, Backend::Direct, &stats).unwrap();
    let sol = crate::frontend::solve_condensed(&model, &sets, &stats, false).unwrap();
    let before = stats.snapshot();
    let w = weights(plan.n_secondary_free(), 1, 0.4);
    table_a_case(&grid, &d, &model, &sol, &Dependency::UcheckFree(w)).unwrap();
    let after = stats.snapshot();
    assert_eq!(after.large_factorizations, before.large_factorizations);
    assert_eq!(after.large_solves - before.large_solves, 1);
    assert_eq!(after.dense_solves - before.dense_solves, 1);
    assert_eq!(after.dense_factorizations, before.dense_factorizations);
}

#[test]
fn unknown_case_name_is_rejected() {
    assert!("Uhat_f".parse::<DependencyKind>().is_ok());
    assert!(matches!("Uhat_x".parse::<DependencyKind>(), Err(Error::Invalid(_))));
}

fn chain3(k11: f64) -> SymmetricSparse {
    SymmetricSparse::from_dense(&DMatrix::from_row_slice(
        3,
        3,
        &[2.0, -1.0, 0.0, -1.0, k11, -1.0, 0.0, -1.0, 2.0],
    ))
    .unwrap()
}

fn swap_plan(load_on_middle: f64) -> (Vec<AnalysisSet>, PartitionPlan) {
    let loads = if load_on_middle == 0.0 { vec![] } else { vec![(1, load_on_middle)] };
    let sets = vec![
        AnalysisSet::homogeneous([0].as_slice().into(), [2].as_slice().into(), vec![loads.clone()]).unwrap(),
        AnalysisSet::homogeneous([2].as_slice().into(), [0].as_slice().into(), vec![loads]).unwrap(),
    ];
    let plan = build_plan(&sets, 3).unwrap();
    (sets, plan)
}

fn chain_model(k11: f64, load: f64) -> ReducedModel {
    let (sets, plan) = swap_plan(load);
    let (fl, up) = secondary_inputs(&plan, &sets).unwrap();
    condense(&chain3(k11), &plan, &fl, &up, Backend::Direct, &Arc::new(SolverStats::new())).unwrap()
}

#[test]
fn chain_operator_a() {
    let model = chain_model(2.0, 0.0);
    let a = SensitivityContext::new(&model).a_matrix();
    let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -(-0.5), -(-0.5), 0.0, 1.0]);
    assert!((a - expected).amax() < 1e-15);
}

#[test]
fn chain_reduced_matrix_slope_on_secondary_diagonal() {
    // d(K̃)/dK(1,1) = A₁ᵀA₁ = 0.25 in every entry
    let eps = 1e-6;
    let kp = chain_model(2.0 + eps, 0.0).ktilde;
    let km = chain_model(2.0 - eps, 0.0).ktilde;
    let fd = (kp - km) / (2.0 * eps);
    let model = chain_model(2.0, 0.0);
    let a = SensitivityContext::new(&model).a_matrix();
    let predicted = a.row(1).transpose() * a.row(1);
    for v in fd.iter().chain(predicted.iter()) {
        assert!((v - 0.25).abs() < 1e-8);
    }
}

#[test]
fn chain_reduced_matrix_slope_on_primary_diagonal() {
    let eps = 1e-6;
    let make = |k00: f64| {
        let mut k = chain3(2.0).to_dense();
        k[(0, 0)] = k00;
        let (sets, plan) = swap_plan(0.0);
        let (fl, up) = secondary_inputs(&plan, &sets).unwrap();
        let k = SymmetricSparse::from_dense(&k).unwrap();
        condense(&k, &plan, &fl, &up, Backend::Direct, &Arc::new(SolverStats::new())).unwrap().ktilde
    };
    let fd = (make(2.0 + eps) - make(2.0 - eps)) / (2.0 * eps);
    let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    assert!((fd - expected).amax() < 1e-8);
}

#[test]
fn chain_reduced_load_slopes() {
    // F̌f = [1] on the middle DOF
    let eps = 1e-6;
    let fp = chain_model(2.0 + eps, 1.0).ftilde.to_dense();
    let fm = chain_model(2.0 - eps, 1.0).ftilde.to_dense();
    let fd = (fp - fm) / (2.0 * eps);
    let model = chain_model(2.0, 1.0);
    let ctx = SensitivityContext::new(&model);
    let a = ctx.a_matrix();
    let b = ctx.b_columns(0..2);
    for c in 0..2 {
        for r in 0..2 {
            let predicted = a[(1, r)] * b[(1, c)];
            assert!((fd[(r, c)] - predicted).abs() < 1e-7);
        }
    }
    // ∂F̃/∂F̌f applied to a unit load is −X̌ᵀ
    let unit = DMatrix::from_element(2, 1, 1.0);
    let lin = -model.xstates.transpose() * DMatrix::from_element(1, 1, 1.0);
    assert!((lin - unit * 0.5).amax() < 1e-15);
}

#[test]
fn reconstruction_matches_full_state() {
    let grid = Grid::new(3, 2, Physics::PlaneStress).unwrap();
    let d = DesignField::uniform(&grid, 0.7, 1.3, Simp::default()).unwrap();
    let k = assemble(&grid, &d).unwrap();
    let left: Vec<usize> = (0..3).flat_map(|r| [2 * r, 2 * r + 1]).collect();
    let out = grid.dof(grid.node(3, 1), 0);
    let sets = vec![AnalysisSet::homogeneous(left.as_slice().into(), [out].as_slice().into(), vec![vec![(out, 1.0)]]).unwrap()];
    let plan = build_plan(&sets, grid.n_dofs()).unwrap();
    let (fl, up) = secondary_inputs(&plan, &sets).unwrap();
    assert!(fl.is_zero() && up.is_zero());
    let stats = Arc::new(SolverStats::new());
    let model = condense(&k, &plan, &fl, &up, Backend::Direct, &stats).unwrap();
    let cond = crate::frontend::solve_condensed(&model, &sets, &stats, false).unwrap();
    let elem = solve_elementary(&k, &sets, Backend::Direct, &stats, false).unwrap();
    let rec = SensitivityContext::new(&model).apply_a(&cond.sets[0].states);
    assert!((rec - &elem.sets[0].states).amax() < 1e-10);
}

/// Random partial on the primary free DOFs, evaluated by both pipelines.
#[test]
fn cross_pipeline_gradients_agree() {
    let fx = fixture();
    let grid = &fx.grid;
    let d = fx.design(&fx.x);
    let k = assemble(grid, &d).unwrap();
    // rebuild the analysis sets of the fixture
    let sets = vec![
        set(
            &[0, 5],
            &[&[0.3, 0.3], &[0.2, -0.5]],
            &[10, 15],
            vec![vec![(10, 1.0), (7, 0.5)], vec![(7, -0.4), (12, 0.8), (15, 0.3)]],
        ),
        set(&[0, 10], &[&[0.3], &[-0.1]], &[5, 15], vec![vec![(5, 0.7), (12, 0.2)]]),
    ];
    let stats = Arc::new(SolverStats::new());
    let model = condense(&k, &fx.plan, &fx.fl, &fx.up, Backend::Direct, &stats).unwrap();
    let cond = crate::frontend::solve_condensed(&model, &sets, &stats, false).unwrap();
    let elem = solve_elementary(&k, &sets, Backend::Direct, &stats, false).unwrap();
    let mut ad_c = Vec::new();
    let mut ad_e = Vec::new();
    for (i, split) in fx.plan.splits.iter().enumerate() {
        let w = weights(split.free.len(), split.cases, 3.0 + i as f64);
        let free = &elem.sets[i].free;
        let mut we = DMatrix::zeros(free.len(), split.cases);
        for (r, dof) in split.free.iter().enumerate() {
            we.set_row(free.position(dof).unwrap(), &w.row(r));
        }
        ad_c.push(Adjoint::Partial(w));
        ad_e.push(Adjoint::Partial(we));
    }
    let large = stats.snapshot().large_solves;
    let gc = sens_condensed_state(grid, &d, &model, &cond, &ad_c).unwrap();
    assert_eq!(stats.snapshot().large_solves, large);
    let ge = sens_elementary(grid, &d, &elem, &ad_e).unwrap();
    let norm = ge.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(norm > 0.0);
    for (a, b) in gc.iter().zip(&ge) {
        assert!((a - b).abs() <= 1e-9 * norm, "{a} vs {b}");
    }
}

#[test]
fn grouped_state_term_equals_direct_sum() {
    let fx = fixture();
    let stats = Arc::new(SolverStats::new());
    let model = fx.model(&fx.x, &fx.fl, &fx.up, &stats);
    let sol = solve_condensed_with(&model, &fx.inputs, &stats, false).unwrap();
    let ctx = SensitivityContext::new(&model);
    let pieces: Vec<(usize, DMatrix<f64>)> = fx
        .plan
        .splits
        .iter()
        .enumerate()
        .map(|(i, s)| (i, weights(model.m(), s.cases, 7.0 + i as f64)))
        .collect();
    let mut direct = vec![0.0; fx.grid.n_elements()];
    for (i, a) in &pieces {
        let dm = ctx.d_columns(&sol.sets[*i].states, fx.plan.case_range(*i));
        contract_columns(&fx.grid, 1.0, &ctx.apply_a(a), &dm, &mut direct);
    }
    let mut grouped = vec![0.0; fx.grid.n_elements()];
    ctx.add_grouped_state_term(&fx.grid, &sol, &pieces, &mut grouped);
    for (a, b) in direct.iter().zip(&grouped) {
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn self_adjoint_compliance() {
    // g = Σ Fᵀu with u_p = 0: λ = u and dg/dx = −Σ uᵀ(∂K/∂x)u
    let grid = Grid::new(2, 2, Physics::Conduction).unwrap();
    let filter = Arc::new(Filter::new(&grid, 1.2).unwrap());
    let x0 = vec![0.4, 0.6, 0.5, 0.9];
    let sets = vec![AnalysisSet::homogeneous([0].as_slice().into(), IndexSet::new(), vec![vec![(8, 1.0), (5, 0.3)]]).unwrap()];
    let compliance = |x: &[f64]| -> Result<f64> {
        let d = DesignField::new(x.to_vec(), Arc::clone(&filter), Simp::default())?;
        let k = assemble(&grid, &d)?;
        let s = solve_elementary(&k, &sets, Backend::Direct, &Arc::new(SolverStats::new()), false)?;
        Ok(s.sets[0].states[(8, 0)] + 0.3 * s.sets[0].states[(5, 0)])
    };
    let d = DesignField::new(x0.clone(), Arc::clone(&filter), Simp::default()).unwrap();
    let k = assemble(&grid, &d).unwrap();
    let stats = Arc::new(SolverStats::new());
    let sol = solve_elementary(&k, &sets, Backend::Direct, &stats, false).unwrap();
    let solves = stats.snapshot().large_solves;
    let g = sens_elementary(&grid, &d, &sol, &[Adjoint::SelfAdjoint(1.0)]).unwrap();
    assert_eq!(stats.snapshot().large_solves, solves);
    assert!(g.iter().all(|&v| v < 0.0));
    assert!(fd_verify(compliance, &x0, &g, FD_STEP).unwrap() < 1e-5);
    let zero = sens_elementary(&grid, &d, &sol, &[Adjoint::Zero]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
}

#[test]
fn fd_verify_exact_for_linear() {
    let c = [1.5, -2.0, 0.25];
    let g = |x: &[f64]| -> Result<f64> { Ok(x.iter().zip(&c).map(|(a, b)| a * b).sum()) };
    for eps in [1e-3, 1e-6, 0.5] {
        assert!(fd_verify(g, &[0.1, 0.2, 0.3], &c, eps).unwrap() <= 1e-10);
    }
    assert!(fd_verify(g, &[0.0; 3], &c, 0.0).is_err());
}
