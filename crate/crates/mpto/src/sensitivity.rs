//! Design sensitivities for both pipelines.
//!
//! Every design derivative is assembled element by element as
//! `Σ leftᵀ (∂K/∂x) right`; the global `∂K/∂x` is never formed.
//!
//! Full-space operators of a reduced model (`n` rows):
//! - `A v`: `v` on the primary DOFs, `−X̌ v` on the secondary free DOFs, 0 elsewhere.
//! - `B`: `V̌` on the secondary free DOFs, `−Ǔp` on the secondary prescribed DOFs.
//! - `D = B − A Û`, the negated full state.
//! - `C = Ǩpf X̌ − Ǩ_P̌M`, `p̌ × m`.

use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::condense::ReducedModel;
use crate::error::{Error, Result};
use crate::fem::{contract_add_scaled, DesignField, Grid};
use crate::frontend::{split_blocks, CondensedSolution, ElementarySet, ElementarySolution};

/// Adjoint right-hand sides below this column norm are treated as zero.
pub const ADJOINT_SKIP_NORM: f64 = 1e-14;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-6;

/// Partial derivative of a response with respect to the free states of one set.
#[derive(Clone, Debug, PartialEq)]
pub enum Adjoint {
    /// The response does not depend on this set.
    Zero,
    /// `∂g/∂U_f = s · K_ff U_f`, so the adjoint is `s · U_f` without a solve.
    SelfAdjoint(f64),
    /// Explicit partial, `free × cases` of the set.
    Partial(DMatrix<f64>),
}

/// Zeroes columns whose norm is below [`ADJOINT_SKIP_NORM`]; returns the
/// pruned matrix and the number of remaining columns.
fn prune(w: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let mut out = w.clone();
    let mut kept = 0;
    for mut c in out.column_iter_mut() {
        if c.norm() < ADJOINT_SKIP_NORM {
            c.fill(0.0);
        } else {
            kept += 1;
        }
    }
    (out, kept)
}

fn scatter_rows(src: &DMatrix<f64>, rows: &[usize], nrows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nrows, src.ncols());
    for (r, &q) in rows.iter().enumerate() {
        out.set_row(q, &src.row(r));
    }
    out
}

fn gather_rows(src: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), src.ncols(), |r, c| src[(rows[r], c)])
}

/// Adds `w · Σⱼ leftⱼᵀ (∂K/∂x̃ₑ at unit material) rightⱼ` to `raw`.
fn contract_columns(grid: &Grid, w: f64, left: &DMatrix<f64>, right: &DMatrix<f64>, raw: &mut [f64]) {
    let n = left.nrows();
    let (ls, rs) = (left.as_slice(), right.as_slice());
    for j in 0..left.ncols() {
        let l = &ls[j * n..(j + 1) * n];
        if l.iter().all(|&v| v == 0.0) {
            continue;
        }
        let r = &rs[j * n..(j + 1) * n];
        if r.iter().all(|&v| v == 0.0) {
            continue;
        }
        contract_add_scaled(grid, w, l, r, raw);
    }
}

fn check_design(grid: &Grid, design: &DesignField, n: usize) -> Result<()> {
    if design.x().len() != grid.n_elements() {
        return Err(Error::DimensionMismatch("design does not match the grid".into()));
    }
    if grid.n_dofs() != n {
        return Err(Error::DimensionMismatch(format!("grid has {} DOFs, model {n}", grid.n_dofs())));
    }
    Ok(())
}

/// Elementary adjoint sensitivity: per set `K_ff Λ = ∂g/∂U_f`, then
/// `dg/dx = −Σ λ · (∂K/∂x) u`. Reuses the retained factorizations.
pub fn sens_elementary(
    grid: &Grid,
    design: &DesignField,
    sol: &ElementarySolution,
    adjoints: &[Adjoint],
) -> Result<Vec<f64>> {
    if adjoints.len() != sol.sets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} adjoint blocks for {} analysis sets",
            adjoints.len(),
            sol.sets.len()
        )));
    }
    check_design(grid, design, grid.n_dofs())?;
    let mut raw = vec![0.0; grid.n_elements()];
    for (set, adj) in sol.sets.iter().zip(adjoints) {
        add_elementary_term(grid, set, adj, &mut raw)?;
    }
    Ok(design.chain_contractions(&raw))
}

/// Adds `−Σ λ · (∂K/∂x̃) u` of one set to the unchained contractions `raw`.
pub fn add_elementary_term(grid: &Grid, set: &ElementarySet, adj: &Adjoint, raw: &mut [f64]) -> Result<()> {
    let n = set.states.nrows();
    let free = set.free.as_slice();
    let lam = match adj {
        Adjoint::Zero => return Ok(()),
        Adjoint::SelfAdjoint(s) => gather_rows(&set.states, free) * *s,
        Adjoint::Partial(w) => {
            if w.shape() != (free.len(), set.states.ncols()) {
                return Err(Error::DimensionMismatch("adjoint partial does not match its set".into()));
            }
            let (w, kept) = prune(w);
            if kept == 0 {
                return Ok(());
            }
            set.factor().solve_multi(&w)?
        }
    };
    contract_columns(grid, -1.0, &scatter_rows(&lam, free, n), &set.states, raw);
    Ok(())
}

/// Full-space operators of a reduced model.
#[derive(Debug, Clone, Copy)]
pub struct SensitivityContext<'a> {
    model: &'a ReducedModel,
}

impl<'a> SensitivityContext<'a> {
    pub fn new(model: &'a ReducedModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &'a ReducedModel {
        self.model
    }

    fn n(&self) -> usize {
        self.model.plan.n
    }

    /// Places blocks on the primary, secondary free and secondary prescribed rows.
    fn embed(
        &self,
        cols: usize,
        primary: Option<&DMatrix<f64>>,
        sfree: Option<&DMatrix<f64>>,
        spres: Option<&DMatrix<f64>>,
    ) -> DMatrix<f64> {
        let plan = &self.model.plan;
        let mut out = DMatrix::zeros(self.n(), cols);
        for (block, set) in [
            (primary, &plan.primary),
            (sfree, &plan.secondary_free),
            (spres, &plan.secondary_prescribed),
        ] {
            if let Some(b) = block {
                for (r, d) in set.iter().enumerate() {
                    out.set_row(d, &b.row(r));
                }
            }
        }
        out
    }

    /// `A v` for the columns of `v` (`m × k` to `n × k`).
    pub fn apply_a(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let xv = -(&self.model.xstates * v);
        self.embed(v.ncols(), Some(v), Some(&xv), None)
    }

    /// `A` as a dense `n × m` matrix.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        self.apply_a(&DMatrix::identity(self.model.m(), self.model.m()))
    }

    /// Columns `cols` of `B`.
    pub fn b_columns(&self, cols: Range<usize>) -> DMatrix<f64> {
        let k = cols.len();
        let v = self.model.vstates.slice(cols.start, cols.end).to_dense();
        let up = -self.model.secondary_prescribed.slice(cols.start, cols.end).to_dense();
        self.embed(k, None, Some(&v), Some(&up))
    }

    /// Columns `cols` of `D = B − A Û`, with `uhat` holding the matching primary states.
    pub fn d_columns(&self, uhat: &DMatrix<f64>, cols: Range<usize>) -> DMatrix<f64> {
        self.b_columns(cols) - self.apply_a(uhat)
    }

    /// `C v` (`m × k` to `p̌ × k`).
    pub fn apply_c(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.model.blocks();
        b.pf.mul_dense(&(&self.model.xstates * v)) - b.pm.mul_dense(v)
    }

    /// `Cᵀ h` (`p̌ × k` to `m × k`).
    pub fn apply_ct(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.model.blocks();
        self.model.xstates.tr_mul(&b.fp.mul_dense(h)) - b.mp.mul_dense(h)
    }

    /// `C` as a dense `p̌ × m` matrix.
    pub fn c_matrix(&self) -> DMatrix<f64> {
        self.apply_c(&DMatrix::identity(self.model.m(), self.model.m()))
    }

    /// Adds `Σᵢⱼ (A aᵢⱼ) · (∂K/∂x̃) Dᵢⱼ` over the sets listed in `pieces`.
    ///
    /// With more adjoint columns than primary DOFs the sum is regrouped as
    /// `Σ_c (A e_c) · (∂K/∂x̃) (Z e_c)` with `Z = Σⱼ Dⱼ aⱼᵀ`, which needs only
    /// `m` element contractions.
    fn add_state_term(
        &self,
        grid: &Grid,
        sol: &CondensedSolution,
        pieces: &[(usize, DMatrix<f64>)],
        raw: &mut [f64],
    ) {
        let m = self.model.m();
        let count: usize = pieces
            .iter()
            .map(|(_, a)| a.column_iter().filter(|c| c.iter().any(|&v| v != 0.0)).count())
            .sum();
        if count <= m {
            for (i, a) in pieces {
                let cols = self.model.plan.case_range(*i);
                let d = self.d_columns(&sol.sets[*i].states, cols);
                contract_columns(grid, 1.0, &self.apply_a(a), &d, raw);
            }
            return;
        }
        self.add_grouped_state_term(grid, sol, pieces, raw);
    }

    fn add_grouped_state_term(
        &self,
        grid: &Grid,
        sol: &CondensedSolution,
        pieces: &[(usize, DMatrix<f64>)],
        raw: &mut [f64],
    ) {
        let m = self.model.m();
        let mut g = DMatrix::zeros(m, m);
        let mut zv = DMatrix::zeros(self.model.plan.n_secondary_free(), m);
        let mut zp = DMatrix::zeros(self.model.plan.n_secondary_prescribed(), m);
        for (i, a) in pieces {
            g += &sol.sets[*i].states * a.transpose();
            for (k, c) in self.model.plan.case_range(*i).enumerate() {
                let ak = a.column(k);
                if let Some(v) = self.model.vstates.column(c) {
                    zv += v * ak.transpose();
                }
                if let Some(u) = self.model.secondary_prescribed.column(c) {
                    zp += u * ak.transpose();
                }
            }
        }
        let zf = zv + &self.model.xstates * &g;
        let z = self.embed(m, Some(&-g), Some(&zf), Some(&-zp));
        contract_columns(grid, 1.0, &self.a_matrix(), &z, raw);
    }
}

/// Condensed adjoint sensitivity: per set the `m`-scale adjoint
/// `K̃ff Λ̂ = ∂g/∂Ûf`, then `dg/dx = Σ (A λ̂) · (∂K/∂x) D`. No large solves.
pub fn sens_condensed_state(
    grid: &Grid,
    design: &DesignField,
    model: &ReducedModel,
    sol: &CondensedSolution,
    adjoints: &[Adjoint],
) -> Result<Vec<f64>> {
    if adjoints.len() != sol.sets.len() || sol.sets.len() != model.plan.splits.len() {
        return Err(Error::DimensionMismatch("adjoint blocks do not match the analysis sets".into()));
    }
    check_design(grid, design, model.plan.n)?;
    let m = model.m();
    let mut pieces = Vec::new();
    for (i, adj) in adjoints.iter().enumerate() {
        let split = &model.plan.splits[i];
        let set = &sol.sets[i];
        let lam = match adj {
            Adjoint::Zero => continue,
            Adjoint::SelfAdjoint(s) => gather_rows(&set.states, &split.free_local) * *s,
            Adjoint::Partial(w) => {
                if w.shape() != (split.free_local.len(), split.cases) {
                    return Err(Error::DimensionMismatch("adjoint partial does not match its split".into()));
                }
                let (w, kept) = prune(w);
                match set.factor() {
                    Some(f) if kept > 0 => f.solve_multi(&w)?,
                    _ => continue,
                }
            }
        };
        pieces.push((i, scatter_rows(&lam, &split.free_local, m)));
    }
    let mut raw = vec![0.0; grid.n_elements()];
    SensitivityContext::new(model).add_state_term(grid, sol, &pieces, &mut raw);
    Ok(design.chain_contractions(&raw))
}

/// `dg/dx` for a response depending on `K̃` through `∂g/∂K̃ = w` (`m × m`).
///
/// `∂K̃/∂K = A ⊗ A`, so this is a contraction of already known quantities
/// and performs no linear solve.
pub fn sens_reduced_matrix(
    grid: &Grid,
    design: &DesignField,
    model: &ReducedModel,
    w: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let m = model.m();
    if w.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("∂g/∂K̃ must be {m}x{m}")));
    }
    check_design(grid, design, model.plan.n)?;
    let ctx = SensitivityContext::new(model);
    let mut raw = vec![0.0; grid.n_elements()];
    contract_columns(grid, 1.0, &ctx.apply_a(w), &ctx.a_matrix(), &mut raw);
    Ok(design.chain_contractions(&raw))
}

/// Sensitivities of a response depending on `F̃` through `∂g/∂F̃ = w`.
#[derive(Clone, Debug)]
pub struct ReducedLoadSensitivity {
    pub design: Vec<f64>,
    /// `dg/dF̌f = −X̌ w`, `f̌ × l`.
    pub secondary_loads: DMatrix<f64>,
    /// `dg/dǓp = C w`, `p̌ × l`.
    pub secondary_prescribed: DMatrix<f64>,
}

/// `∂F̃/∂K = A ⊗ B` plus the linear maps to the secondary inputs. No solves.
pub fn sens_reduced_load(
    grid: &Grid,
    design: &DesignField,
    model: &ReducedModel,
    w: &DMatrix<f64>,
) -> Result<ReducedLoadSensitivity> {
    let (m, l) = (model.m(), model.plan.total_cases());
    if w.shape() != (m, l) {
        return Err(Error::DimensionMismatch(format!("∂g/∂F̃ must be {m}x{l}")));
    }
    check_design(grid, design, model.plan.n)?;
    let ctx = SensitivityContext::new(model);
    let mut raw = vec![0.0; grid.n_elements()];
    add_load_term(&ctx, grid, w, &mut raw);
    Ok(ReducedLoadSensitivity {
        design: design.chain_contractions(&raw),
        secondary_loads: -(&model.xstates * w),
        secondary_prescribed: ctx.apply_c(w),
    })
}

fn add_load_term(ctx: &SensitivityContext<'_>, grid: &Grid, w: &DMatrix<f64>, raw: &mut [f64]) {
    let model = ctx.model();
    for j in 0..w.ncols() {
        if model.vstates.column(j).is_none() && model.secondary_prescribed.column(j).is_none() {
            continue;
        }
        let wj = w.columns(j, 1).clone_owned();
        if wj.iter().all(|&v| v == 0.0) {
            continue;
        }
        contract_columns(grid, 1.0, &ctx.apply_a(&wj), &ctx.b_columns(j..j + 1), raw);
    }
}

/// Name of a response dependency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DependencyKind {
    Ktilde,
    Ftilde,
    UhatFree,
    FhatPrescribed,
    UcheckFree,
    FcheckPrescribed,
}

impl FromStr for DependencyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Ktilde" => Self::Ktilde,
            "Ftilde" => Self::Ftilde,
            "Uhat_f" => Self::UhatFree,
            "Fhat_p" => Self::FhatPrescribed,
            "Ucheck_f" => Self::UcheckFree,
            "Fcheck_p" => Self::FcheckPrescribed,
            other => return Err(Error::Invalid(format!("unknown dependency case '{other}'"))),
        })
    }
}

/// Partial derivatives of a response with respect to one dependency.
#[derive(Clone, Debug, PartialEq)]
pub enum Dependency {
    /// `∂g/∂K̃`, `m × m`.
    Ktilde(DMatrix<f64>),
    /// `∂g/∂F̃`, `m × l`.
    Ftilde(DMatrix<f64>),
    /// `∂g/∂Ûf` per set, `f̂ × cases`.
    UhatFree(Vec<DMatrix<f64>>),
    /// `∂g/∂F̂p` per set, `p̂ × cases`.
    FhatPrescribed(Vec<DMatrix<f64>>),
    /// `∂g/∂Ǔf`, `f̌ × l`.
    UcheckFree(DMatrix<f64>),
    /// `∂g/∂F̌p`, `p̌ × l`.
    FcheckPrescribed(DMatrix<f64>),
}

impl Dependency {
    pub fn kind(&self) -> DependencyKind {
        match self {
            Dependency::Ktilde(_) => DependencyKind::Ktilde,
            Dependency::Ftilde(_) => DependencyKind::Ftilde,
            Dependency::UhatFree(_) => DependencyKind::UhatFree,
            Dependency::FhatPrescribed(_) => DependencyKind::FhatPrescribed,
            Dependency::UcheckFree(_) => DependencyKind::UcheckFree,
            Dependency::FcheckPrescribed(_) => DependencyKind::FcheckPrescribed,
        }
    }
}

/// Total derivatives of a response with respect to every model input.
#[derive(Clone, Debug)]
pub struct SensitivityBundle {
    /// `dg/dx`.
    pub design: Vec<f64>,
    /// `dg/dF̌f`, `f̌ × l`.
    pub secondary_loads: DMatrix<f64>,
    /// `dg/dǓp`, `p̌ × l`.
    pub secondary_prescribed: DMatrix<f64>,
    /// `dg/dF̂f` per set.
    pub primary_loads: Vec<DMatrix<f64>>,
    /// `dg/dÛp` per set.
    pub primary_prescribed: Vec<DMatrix<f64>>,
}

impl SensitivityBundle {
    fn zeros(model: &ReducedModel, n_elements: usize) -> Self {
        let plan = &model.plan;
        let l = plan.total_cases();
        Self {
            design: vec![0.0; n_elements],
            secondary_loads: DMatrix::zeros(plan.n_secondary_free(), l),
            secondary_prescribed: DMatrix::zeros(plan.n_secondary_prescribed(), l),
            primary_loads: plan.splits.iter().map(|s| DMatrix::zeros(s.free.len(), s.cases)).collect(),
            primary_prescribed: plan.splits.iter().map(|s| DMatrix::zeros(s.prescribed.len(), s.cases)).collect(),
        }
    }
}

fn per_set_shapes_ok(model: &ReducedModel, w: &[DMatrix<f64>], prescribed: bool) -> Result<()> {
    let splits = &model.plan.splits;
    let ok = w.len() == splits.len()
        && w.iter().zip(splits).all(|(w, s)| {
            let rows = if prescribed { s.prescribed.len() } else { s.free.len() };
            w.shape() == (rows, s.cases)
        });
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch("per-set partials do not match the reduced splits".into()))
    }
}

fn check_global(w: &DMatrix<f64>, rows: usize, l: usize, what: &str) -> Result<()> {
    if w.shape() != (rows, l) {
        return Err(Error::DimensionMismatch(format!("{what} must be {rows}x{l}")));
    }
    Ok(())
}

/// Sensitivities for one dependency of a response on the condensed model.
///
/// The secondary cases (`UcheckFree`, `FcheckPrescribed`) need one extra
/// solve with the retained `Ǩff` factorization plus one `m`-scale solve per set.
pub fn table_a_case(
    grid: &Grid,
    design: &DesignField,
    model: &ReducedModel,
    sol: &CondensedSolution,
    dep: &Dependency,
) -> Result<SensitivityBundle> {
    check_design(grid, design, model.plan.n)?;
    if sol.sets.len() != model.plan.splits.len() {
        return Err(Error::DimensionMismatch("solution does not match the model".into()));
    }
    let ctx = SensitivityContext::new(model);
    let plan = &model.plan;
    let (m, l, n) = (plan.m(), plan.total_cases(), plan.n);
    let mut out = SensitivityBundle::zeros(model, grid.n_elements());
    let mut raw = vec![0.0; grid.n_elements()];
    let kt = &model.ktilde;
    let blocks = model.blocks();

    match dep {
        Dependency::Ktilde(w) => {
            check_global(w, m, m, "∂g/∂K̃")?;
            contract_columns(grid, 1.0, &ctx.apply_a(w), &ctx.a_matrix(), &mut raw);
        }
        Dependency::Ftilde(w) => {
            check_global(w, m, l, "∂g/∂F̃")?;
            add_load_term(&ctx, grid, w, &mut raw);
            out.secondary_loads = -(&model.xstates * w);
            out.secondary_prescribed = ctx.apply_c(w);
        }
        _ => {
            // Per-set adjoint quantities shared by the state-like cases.
            let (lam_check, h_check) = match dep {
                Dependency::UcheckFree(w) => {
                    check_global(w, plan.n_secondary_free(), l, "∂g/∂Ǔf")?;
                    (Some(model.solve_secondary(&-prune(w).0)?), None)
                }
                Dependency::FcheckPrescribed(h) => {
                    check_global(h, plan.n_secondary_prescribed(), l, "∂g/∂F̌p")?;
                    (Some(model.solve_secondary(&-blocks.fp.mul_dense(h))?), Some(h))
                }
                Dependency::UhatFree(w) => {
                    per_set_shapes_ok(model, w, false)?;
                    (None, None)
                }
                Dependency::FhatPrescribed(w) => {
                    per_set_shapes_ok(model, w, true)?;
                    (None, None)
                }
                _ => unreachable!(),
            };
            for (i, split) in plan.splits.iter().enumerate() {
                let cols = plan.case_range(i);
                let (f, p) = (&split.free_local, &split.prescribed_local);
                // m-scale right-hand side, and the part of dÛp not involving Λ̂
                let (rhs, mut dup, extra_p) = match dep {
                    Dependency::UhatFree(w) => (w[i].clone(), DMatrix::zeros(p.len(), split.cases), None),
                    Dependency::FhatPrescribed(h) => {
                        let kfp = split_blocks(kt, f, p);
                        let kpp = split_blocks(kt, p, p);
                        (&kfp * &h[i], &kpp * &h[i], Some(scatter_rows(&h[i], p, m)))
                    }
                    Dependency::UcheckFree(w) => {
                        let t = model.xstates.tr_mul(&w.columns(cols.start, cols.len()));
                        (-gather_rows(&t, f), -gather_rows(&t, p), None)
                    }
                    Dependency::FcheckPrescribed(h) => {
                        let t = ctx.apply_ct(&h.columns(cols.start, cols.len()).clone_owned());
                        (-gather_rows(&t, f), -gather_rows(&t, p), None)
                    }
                    _ => unreachable!(),
                };
                let (rhs, _) = prune(&rhs);
                let lam_hat = match sol.sets[i].factor() {
                    Some(fc) => fc.solve_multi(&rhs)?,
                    None => DMatrix::zeros(0, split.cases),
                };
                dup -= split_blocks(kt, p, f) * &lam_hat;
                let mut a = scatter_rows(&lam_hat, f, m);
                if let Some(hp) = extra_p {
                    // E = S̃f Λ̂ − S̃p H
                    a -= hp;
                }
                let mut left = ctx.apply_a(&a);
                let mut dff = -(&model.xstates * &a);
                let mut dup_check = ctx.apply_c(&a);
                if let Some(lc) = &lam_check {
                    let lc = lc.columns(cols.start, cols.len()).clone_owned();
                    for (r, d) in plan.secondary_free.iter().enumerate() {
                        for c in 0..split.cases {
                            left[(d, c)] -= lc[(r, c)];
                        }
                    }
                    dff -= &lc;
                    dup_check += blocks.pf.mul_dense(&lc);
                }
                if let Some(h) = h_check {
                    let hc = h.columns(cols.start, cols.len()).clone_owned();
                    for (r, d) in plan.secondary_prescribed.iter().enumerate() {
                        for c in 0..split.cases {
                            left[(d, c)] -= hc[(r, c)];
                        }
                    }
                    dup_check += blocks.pp.mul_dense(&hc);
                }
                debug_assert_eq!(left.nrows(), n);
                let d = ctx.d_columns(&sol.sets[i].states, cols.clone());
                contract_columns(grid, 1.0, &left, &d, &mut raw);
                out.secondary_loads.columns_mut(cols.start, cols.len()).copy_from(&dff);
                out.secondary_prescribed.columns_mut(cols.start, cols.len()).copy_from(&dup_check);
                out.primary_loads[i] = lam_hat;
                out.primary_prescribed[i] = dup;
            }
        }
    }
    out.design = design.chain_contractions(&raw);
    Ok(out)
}

/// Largest relative error between `grad` and central differences of `g` at
/// `x`, over the components with `|grad| > 1e-12`.
pub fn fd_verify<G>(mut g: G, x: &[f64], grad: &[f64], eps: f64) -> Result<f64>
where
    G: FnMut(&[f64]) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    if grad.len() != x.len() {
        return Err(Error::DimensionMismatch("gradient length differs from x".into()));
    }
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        if grad[k].abs() <= 1e-12 {
            continue;
        }
        xp[k] = x[k] + eps;
        let gp = g(&xp)?;
        xp[k] = x[k] - eps;
        let gm = g(&xp)?;
        xp[k] = x[k];
        let fd = (gp - gm) / (2.0 * eps);
        worst = worst.max((fd - grad[k]).abs() / grad[k].abs());
    }
    Ok(worst)
}

pub mod check;

#[cfg(test)]
mod tests;
