//! Method of Moving Asymptotes and the nested analysis and design loop.
//!
//! The MMA subproblem follows Svanberg's formulation with artificial
//! variables `y`, `z` and is solved by a primal-dual interior point method.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frontend::Pipeline;
use crate::problems::{Problem, ProblemKind};
use crate::sparse::{Backend, CostLedger, SolverStats};

/// Lower design bound, keeps every element strictly positive.
pub const XMIN: f64 = 1e-3;
/// Moves shorter than this fraction of the box leave the asymptotes in place.
const STILL: f64 = 1e-10;

pub const XMAX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmaSettings {
    pub move_limit: f64,
    pub asyinit: f64,
    pub asyincr: f64,
    pub asydecr: f64,
    pub albefa: f64,
    /// Smallest asymptote distance, relative to the box width.
    pub asymin: f64,
    pub raa0: f64,
    pub a0: f64,
    /// Penalty on the constraint slack `y`.
    pub c: f64,
    pub d: f64,
    pub xmin: f64,
    pub xmax: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        Self {
            move_limit: 0.2,
            asyinit: 0.5,
            asyincr: 1.2,
            asydecr: 0.7,
            albefa: 0.1,
            asymin: 1e-4,
            raa0: 1e-5,
            a0: 1.0,
            c: 1000.0,
            d: 1.0,
            xmin: XMIN,
            xmax: XMAX,
        }
    }
}

impl MmaSettings {
    /// Defaults per problem family.
    ///
    /// The mechanism uses a move limit of 0.05: with 0.2 the first updates
    /// cut the load path of an input whose transmission starts with the
    /// wrong sign and the run settles on a disconnected design.
    pub fn for_problem(problem: &Problem) -> Self {
        match problem.kind {
            ProblemKind::HeatPorts { .. } => Self::default(),
            ProblemKind::Mechanism { .. } => Self { move_limit: 0.05, ..Self::default() },
        }
    }
}

/// Optimizer state between design updates.
#[derive(Clone, Debug)]
pub struct Mma {
    settings: MmaSettings,
    n: usize,
    m: usize,
    /// Number of completed steps.
    pub iteration: usize,
    pub xold1: Vec<f64>,
    pub xold2: Vec<f64>,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
}

impl Mma {
    /// `n` design variables, `m` inequality constraints.
    pub fn new(n: usize, m: usize, settings: MmaSettings) -> Self {
        Self {
            settings,
            n,
            m,
            iteration: 0,
            xold1: Vec::new(),
            xold2: Vec::new(),
            low: vec![settings.xmin; n],
            upp: vec![settings.xmax; n],
        }
    }

    pub fn settings(&self) -> &MmaSettings {
        &self.settings
    }

    /// One design update for `min f0 s.t. g ≤ 0`; `dg` holds one gradient per constraint.
    pub fn step(&mut self, x: &[f64], f0: f64, df0: &[f64], g: &[f64], dg: &[Vec<f64>]) -> Result<Vec<f64>> {
        let (n, m, s) = (self.n, self.m, self.settings);
        if x.len() != n || df0.len() != n || g.len() != m || dg.len() != m || dg.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("MMA inputs do not match the problem size".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        if !f0.is_finite() || !finite(df0) || !finite(g) || !dg.iter().all(|r| finite(r)) || !finite(x) {
            return Err(Error::NonFinite("MMA received non-finite responses or gradients".into()));
        }
        self.iteration += 1;
        let range = s.xmax - s.xmin;
        if self.iteration <= 2 {
            for j in 0..n {
                self.low[j] = x[j] - s.asyinit * range;
                self.upp[j] = x[j] + s.asyinit * range;
            }
        } else {
            for j in 0..n {
                let (d1, d2) = (x[j] - self.xold1[j], self.xold1[j] - self.xold2[j]);
                let zzz = if d1.abs().min(d2.abs()) <= STILL * range { 0.0 } else { d1 * d2 };
                let factor = if zzz > 0.0 {
                    s.asyincr
                } else if zzz < 0.0 {
                    s.asydecr
                } else {
                    1.0
                };
                let low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                self.low[j] = low.max(x[j] - 10.0 * range).min(x[j] - s.asymin * range);
                self.upp[j] = upp.min(x[j] + 10.0 * range).max(x[j] + s.asymin * range);
            }
        }
        let xmami = range.max(1e-5);
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut pm = DMatrix::zeros(m, n);
        let mut qm = DMatrix::zeros(m, n);
        let mut b = DVector::from_iterator(m, g.iter().map(|v| -v));
        for j in 0..n {
            let (lo, up) = (self.low[j], self.upp[j]);
            alfa[j] = (lo + s.albefa * (x[j] - lo)).max(x[j] - s.move_limit * range).max(s.xmin);
            beta[j] = (up - s.albefa * (up - x[j])).min(x[j] + s.move_limit * range).min(s.xmax);
            let ux1 = up - x[j];
            let xl1 = x[j] - lo;
            let (ux2, xl2) = (ux1 * ux1, xl1 * xl1);
            let (pp, qq) = (df0[j].max(0.0), (-df0[j]).max(0.0));
            let pq = 0.001 * (pp + qq) + s.raa0 / xmami;
            p0[j] = (pp + pq) * ux2;
            q0[j] = (qq + pq) * xl2;
            for i in 0..m {
                let dv = dg[i][j];
                let (pp, qq) = (dv.max(0.0), (-dv).max(0.0));
                let pq = 0.001 * (pp + qq) + s.raa0 / xmami;
                pm[(i, j)] = (pp + pq) * ux2;
                qm[(i, j)] = (qq + pq) * xl2;
                b[i] += pm[(i, j)] / ux1 + qm[(i, j)] / xl1;
            }
        }
        let sub = Subproblem {
            low: &self.low,
            upp: &self.upp,
            alfa: &alfa,
            beta: &beta,
            p0: &p0,
            q0: &q0,
            p: &pm,
            q: &qm,
            b: &b,
            a0: s.a0,
            a: DVector::zeros(m),
            c: DVector::from_element(m, s.c),
            d: DVector::from_element(m, s.d),
        };
        let xnew = sub.solve()?;
        self.xold2 = std::mem::replace(&mut self.xold1, x.to_vec());
        if self.xold2.is_empty() {
            self.xold2 = x.to_vec();
        }
        Ok(xnew)
    }
}

struct Subproblem<'a> {
    low: &'a [f64],
    upp: &'a [f64],
    alfa: &'a [f64],
    beta: &'a [f64],
    p0: &'a [f64],
    q0: &'a [f64],
    p: &'a DMatrix<f64>,
    q: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    a0: f64,
    a: DVector<f64>,
    c: DVector<f64>,
    d: DVector<f64>,
}

#[derive(Clone)]
struct Point {
    x: DVector<f64>,
    y: DVector<f64>,
    z: f64,
    lam: DVector<f64>,
    xsi: DVector<f64>,
    eta: DVector<f64>,
    mu: DVector<f64>,
    zet: f64,
    s: DVector<f64>,
}

impl Subproblem<'_> {
    fn n(&self) -> usize {
        self.alfa.len()
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    /// `(plam, qlam, gvec)` at `x` for multipliers `lam`.
    fn terms(&self, x: &DVector<f64>, lam: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = self.n();
        let uxinv = DVector::from_fn(n, |j, _| 1.0 / (self.upp[j] - x[j]));
        let xlinv = DVector::from_fn(n, |j, _| 1.0 / (x[j] - self.low[j]));
        let plam = DVector::from_column_slice(self.p0) + self.p.tr_mul(lam);
        let qlam = DVector::from_column_slice(self.q0) + self.q.tr_mul(lam);
        let gvec = self.p * &uxinv + self.q * &xlinv;
        (plam, qlam, gvec)
    }

    fn residual(&self, pt: &Point, epsi: f64) -> DVector<f64> {
        let (n, m) = (self.n(), self.m());
        let (plam, qlam, gvec) = self.terms(&pt.x, &pt.lam);
        let mut r = Vec::with_capacity(3 * n + 4 * m + 2);
        for j in 0..n {
            let (ux, xl) = (self.upp[j] - pt.x[j], pt.x[j] - self.low[j]);
            r.push(plam[j] / (ux * ux) - qlam[j] / (xl * xl) - pt.xsi[j] + pt.eta[j]);
        }
        for i in 0..m {
            r.push(self.c[i] + self.d[i] * pt.y[i] - pt.mu[i] - pt.lam[i]);
        }
        r.push(self.a0 - pt.zet - self.a.dot(&pt.lam));
        for i in 0..m {
            r.push(gvec[i] - self.a[i] * pt.z - pt.y[i] + pt.s[i] - self.b[i]);
        }
        for j in 0..n {
            r.push(pt.xsi[j] * (pt.x[j] - self.alfa[j]) - epsi);
        }
        for j in 0..n {
            r.push(pt.eta[j] * (self.beta[j] - pt.x[j]) - epsi);
        }
        for i in 0..m {
            r.push(pt.mu[i] * pt.y[i] - epsi);
        }
        r.push(pt.zet * pt.z - epsi);
        for i in 0..m {
            r.push(pt.lam[i] * pt.s[i] - epsi);
        }
        DVector::from_vec(r)
    }

    fn solve(&self) -> Result<Vec<f64>> {
        let (n, m) = (self.n(), self.m());
        let epsimin = 1e-7;
        let x = DVector::from_fn(n, |j, _| 0.5 * (self.alfa[j] + self.beta[j]));
        let mut pt = Point {
            xsi: DVector::from_fn(n, |j, _| (1.0 / (x[j] - self.alfa[j])).max(1.0)),
            eta: DVector::from_fn(n, |j, _| (1.0 / (self.beta[j] - x[j])).max(1.0)),
            x,
            y: DVector::from_element(m, 1.0),
            z: 1.0,
            lam: DVector::from_element(m, 1.0),
            mu: DVector::from_fn(m, |i, _| (0.5 * self.c[i]).max(1.0)),
            zet: 1.0,
            s: DVector::from_element(m, 1.0),
        };
        let mut epsi = 1.0;
        while epsi > epsimin {
            let mut res = self.residual(&pt, epsi);
            let mut resnorm = res.norm();
            let mut resmax = res.amax();
            let mut it = 0;
            while resmax > 0.9 * epsi && it < 200 {
                it += 1;
                let dir = self.newton_direction(&pt, epsi)?;
                // largest step keeping all slack variables positive
                let mut stm: f64 = 1.0;
                let ratio = |v: f64, dv: f64| -1.01 * dv / v;
                for i in 0..m {
                    stm = stm
                        .max(ratio(pt.y[i], dir.y[i]))
                        .max(ratio(pt.lam[i], dir.lam[i]))
                        .max(ratio(pt.mu[i], dir.mu[i]))
                        .max(ratio(pt.s[i], dir.s[i]));
                }
                stm = stm.max(ratio(pt.z, dir.z)).max(ratio(pt.zet, dir.zet));
                for j in 0..n {
                    stm = stm
                        .max(ratio(pt.xsi[j], dir.xsi[j]))
                        .max(ratio(pt.eta[j], dir.eta[j]))
                        .max(-1.01 * dir.x[j] / (pt.x[j] - self.alfa[j]))
                        .max(1.01 * dir.x[j] / (self.beta[j] - pt.x[j]));
                }
                let mut steg = 1.0 / stm;
                let old = pt.clone();
                let mut inner = 0;
                let mut newnorm = 2.0 * resnorm;
                while newnorm > resnorm && inner < 50 {
                    inner += 1;
                    pt = Point {
                        x: &old.x + &dir.x * steg,
                        y: &old.y + &dir.y * steg,
                        z: old.z + dir.z * steg,
                        lam: &old.lam + &dir.lam * steg,
                        xsi: &old.xsi + &dir.xsi * steg,
                        eta: &old.eta + &dir.eta * steg,
                        mu: &old.mu + &dir.mu * steg,
                        zet: old.zet + dir.zet * steg,
                        s: &old.s + &dir.s * steg,
                    };
                    res = self.residual(&pt, epsi);
                    newnorm = res.norm();
                    steg /= 2.0;
                }
                resnorm = newnorm;
                resmax = res.amax();
            }
            epsi *= 0.1;
        }
        if pt.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
        }
        Ok(pt
            .x
            .iter()
            .zip(self.alfa.iter().zip(self.beta))
            .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
            .collect())
    }

    fn newton_direction(&self, pt: &Point, epsi: f64) -> Result<Point> {
        let (n, m) = (self.n(), self.m());
        let (plam, qlam, gvec) = self.terms(&pt.x, &pt.lam);
        let mut gg = DMatrix::zeros(m, n);
        let mut delx = DVector::zeros(n);
        let mut diagx = DVector::zeros(n);
        for j in 0..n {
            let ux = self.upp[j] - pt.x[j];
            let xl = pt.x[j] - self.low[j];
            let (ux2, xl2) = (ux * ux, xl * xl);
            for i in 0..m {
                gg[(i, j)] = self.p[(i, j)] / ux2 - self.q[(i, j)] / xl2;
            }
            let xa = pt.x[j] - self.alfa[j];
            let bx = self.beta[j] - pt.x[j];
            delx[j] = plam[j] / ux2 - qlam[j] / xl2 - epsi / xa + epsi / bx;
            diagx[j] = 2.0 * (plam[j] / (ux2 * ux) + qlam[j] / (xl2 * xl)) + pt.xsi[j] / xa + pt.eta[j] / bx;
        }
        let dely = DVector::from_fn(m, |i, _| self.c[i] + self.d[i] * pt.y[i] - pt.lam[i] - epsi / pt.y[i]);
        let delz = self.a0 - self.a.dot(&pt.lam) - epsi / pt.z;
        let dellam =
            DVector::from_fn(m, |i, _| gvec[i] - self.a[i] * pt.z - pt.y[i] - self.b[i] + epsi / pt.lam[i]);
        let diagy = DVector::from_fn(m, |i, _| self.d[i] + pt.mu[i] / pt.y[i]);
        let diaglamyi = DVector::from_fn(m, |i, _| pt.s[i] / pt.lam[i] + 1.0 / diagy[i]);

        let singular = || Error::Singular("MMA subproblem Newton system".into());
        let (dx, dz, dlam);
        if m < n {
            let dxd = delx.component_div(&diagx);
            let blam = &dellam + dely.component_div(&diagy) - &gg * &dxd;
            let mut aa = DMatrix::zeros(m + 1, m + 1);
            let ggs = DMatrix::from_fn(m, n, |i, j| gg[(i, j)] / diagx[j]);
            let alam = &ggs * gg.transpose();
            for i in 0..m {
                for k in 0..m {
                    aa[(i, k)] = alam[(i, k)];
                }
                aa[(i, i)] += diaglamyi[i];
                aa[(i, m)] = self.a[i];
                aa[(m, i)] = self.a[i];
            }
            aa[(m, m)] = -pt.zet / pt.z;
            let mut bb = DVector::zeros(m + 1);
            bb.rows_mut(0, m).copy_from(&blam);
            bb[m] = delz;
            let sol = aa.lu().solve(&bb).ok_or_else(singular)?;
            dlam = sol.rows(0, m).clone_owned();
            dz = sol[m];
            dx = -dxd - gg.tr_mul(&dlam).component_div(&diagx);
        } else {
            let dellamyi = &dellam + dely.component_div(&diagy);
            let inv = diaglamyi.map(|v| 1.0 / v);
            let mut axx = gg.tr_mul(&DMatrix::from_fn(m, n, |i, j| gg[(i, j)] * inv[i]));
            for j in 0..n {
                axx[(j, j)] += diagx[j];
            }
            let a_inv = self.a.component_mul(&inv);
            let azz = pt.zet / pt.z + self.a.dot(&a_inv);
            let axz = -gg.tr_mul(&a_inv);
            let bx = &delx + gg.tr_mul(&dellamyi.component_mul(&inv));
            let bz = delz - self.a.dot(&dellamyi.component_mul(&inv));
            let mut aa = DMatrix::zeros(n + 1, n + 1);
            aa.view_mut((0, 0), (n, n)).copy_from(&axx);
            for j in 0..n {
                aa[(j, n)] = axz[j];
                aa[(n, j)] = axz[j];
            }
            aa[(n, n)] = azz;
            let mut bb = DVector::zeros(n + 1);
            bb.rows_mut(0, n).copy_from(&(-bx));
            bb[n] = -bz;
            let sol = aa.lu().solve(&bb).ok_or_else(singular)?;
            dx = sol.rows(0, n).clone_owned();
            dz = sol[n];
            dlam = (&gg * &dx).component_mul(&inv) - a_inv * dz + dellamyi.component_mul(&inv);
        }
        let dy = DVector::from_fn(m, |i, _| (-dely[i] + dlam[i]) / diagy[i]);
        let dxsi = DVector::from_fn(n, |j, _| {
            let xa = pt.x[j] - self.alfa[j];
            -pt.xsi[j] + epsi / xa - pt.xsi[j] * dx[j] / xa
        });
        let deta = DVector::from_fn(n, |j, _| {
            let bx = self.beta[j] - pt.x[j];
            -pt.eta[j] + epsi / bx + pt.eta[j] * dx[j] / bx
        });
        let dmu = DVector::from_fn(m, |i, _| -pt.mu[i] + epsi / pt.y[i] - pt.mu[i] * dy[i] / pt.y[i]);
        let dzet = -pt.zet + epsi / pt.z - pt.zet * dz / pt.z;
        let ds = DVector::from_fn(m, |i, _| -pt.s[i] + epsi / pt.lam[i] - pt.s[i] * dlam[i] / pt.lam[i]);
        Ok(Point { x: dx, y: dy, z: dz, lam: dlam, xsi: dxsi, eta: deta, mu: dmu, zet: dzet, s: ds })
    }
}

/// Stopping rule and iteration budget of the outer loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Stop when `max|Δx|` falls below this.
    pub tol: f64,
    pub backend: Backend,
    pub settings: MmaSettings,
    /// Magnitude the objective is scaled to at the first iteration.
    pub objective_scale: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { max_iters: 50, tol: 0.01, backend: Backend::Direct, settings: MmaSettings::default(), objective_scale: 10.0 }
    }
}

/// One design iteration.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Responses at the design evaluated in this iteration.
    pub values: Vec<f64>,
    /// `max|Δx|` of the update that followed.
    pub change: f64,
    /// Solver work of the evaluation.
    pub ledger: CostLedger,
    /// Wall time of the whole iteration (evaluation plus update).
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub x: Vec<f64>,
    pub history: Vec<IterationRecord>,
    /// Responses at the returned design.
    pub final_values: Vec<f64>,
    /// Accumulated solver work, final evaluation included.
    pub ledger: CostLedger,
    pub converged: bool,
}

/// Nested analysis and design loop: evaluate, record, update.
///
/// `observer` sees every record as soon as it is complete.
pub fn optimize<F>(problem: &Problem, pipeline: Pipeline, opts: &OptimizeOptions, mut observer: F) -> Result<OptimizeResult>
where
    F: FnMut(&IterationRecord),
{
    let stats = Arc::new(SolverStats::new());
    let mut x = problem.initial_design();
    let h = problem.n_constraints();
    let mut mma = Mma::new(x.len(), h, opts.settings);
    let mut history = Vec::new();
    let mut scale = 1.0;
    let mut converged = false;
    for k in 1..=opts.max_iters {
        let start = Instant::now();
        let at = |e: Error| Error::AtIteration { iteration: k, source: Box::new(e) };
        let ev = problem.evaluate_with(pipeline, opts.backend, &x, true, &stats).map_err(at)?;
        if k == 1 {
            scale = if ev.values[0].abs() > 1e-12 { opts.objective_scale / ev.values[0].abs() } else { 1.0 };
        }
        let df0: Vec<f64> = ev.gradients[0].iter().map(|v| v * scale).collect();
        let xnew = mma
            .step(&x, ev.values[0] * scale, &df0, &ev.values[1..], &ev.gradients[1..])
            .map_err(at)?;
        let change = x.iter().zip(&xnew).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let rec = IterationRecord {
            iteration: k,
            values: ev.values,
            change,
            ledger: ev.ledger,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        observer(&rec);
        history.push(rec);
        x = xnew;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let fin = problem.evaluate_with(pipeline, opts.backend, &x, false, &stats)?;
    Ok(OptimizeResult { x, history, final_values: fin.values, ledger: stats.snapshot(), converged })
}
