//! FLOP cost model of the two pipelines and the measured runtime gain.
//!
//! Sizes are real-valued so gain curves can be evaluated on log-spaced grids.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frontend::Pipeline;
use crate::problems::Problem;
use crate::sparse::{Backend, SolverStats};

/// Cost of preprocessing an `n`-system and solving `l` right-hand sides.
///
/// Direct: banded Cholesky with bandwidth `√n`, `n² + 2 l n^{3/2}`.
/// Iterative: CG with `n` iterations of `2n`, `2 l n²`.
pub fn beta_sparse(method: Backend, n: f64, l: f64) -> f64 {
    match method {
        Backend::Direct => n * n + 2.0 * l * n.powf(1.5),
        Backend::Iterative => 2.0 * l * n * n,
    }
}

/// Dense Cholesky `n³/3` plus `2n²` per right-hand side.
pub fn beta_dense(n: f64, l: f64) -> f64 {
    n * n * n / 3.0 + 2.0 * l * n * n
}

/// Load and prescribed-value column counts `(l, b)` of one analysis set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetSize {
    pub loads: f64,
    pub prescribed: f64,
}

/// Predicted ratio of elementary to condensed cost.
pub fn gain_general(method: Backend, n: f64, m: f64, sets: &[SetSize]) -> Result<f64> {
    if !(m >= 1.0 && m < n) {
        return Err(Error::Invalid(format!("gain needs 1 <= m < n, got m={m}, n={n}")));
    }
    let num: f64 = sets.iter().map(|s| beta_sparse(method, n, s.loads + s.prescribed)).sum();
    let den = beta_sparse(method, n - m, m) + sets.iter().map(|s| beta_dense(m, s.loads + s.prescribed)).sum::<f64>();
    Ok(num / den)
}

/// Heat problem: `m` sets with `m − 1` load cases each.
pub fn gain_problem1(method: Backend, n: f64, m: f64) -> f64 {
    m * beta_sparse(method, n, m - 1.0) / (beta_sparse(method, n - m, m) + m * beta_dense(m, m - 1.0))
}

/// Mechanism problem: `m/2` sets, each with `m` prescribed or loaded columns.
pub fn gain_problem2(method: Backend, n: f64, m: usize) -> Result<f64> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::Invalid(format!("mechanism gain needs an even m >= 2, got {m}")));
    }
    let (m, h) = (m as f64, m as f64 / 2.0);
    Ok(h * beta_sparse(method, n, m) / (beta_sparse(method, n - m, m) + h * beta_dense(m, m)))
}

/// Median solver time of both pipelines on one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeGain {
    pub elementary_seconds: f64,
    pub condensed_seconds: f64,
    pub repeats: usize,
    pub xi_t: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Times factorizations and solves of one design evaluation per pipeline.
///
/// Assembly, filtering and response algebra are not timed.
pub fn measure_runtime_gain(problem: &Problem, backend: Backend, repeats: usize) -> Result<RuntimeGain> {
    measure_between(problem, backend, (Pipeline::Elementary, Pipeline::Condensed), repeats)
}

/// Same as [`measure_runtime_gain`] for an arbitrary pipeline pair.
pub fn measure_between(
    problem: &Problem,
    backend: Backend,
    (first, second): (Pipeline, Pipeline),
    repeats: usize,
) -> Result<RuntimeGain> {
    if repeats == 0 {
        return Err(Error::Invalid("at least one repeat is needed".into()));
    }
    let x = problem.initial_design();
    let time = |p: Pipeline| -> Result<f64> {
        let stats = Arc::new(SolverStats::new());
        problem.evaluate_with(p, backend, &x, true, &stats)?;
        Ok(stats.snapshot().seconds)
    };
    let mut a = Vec::with_capacity(repeats);
    let mut b = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        a.push(time(first)?);
        b.push(time(second)?);
    }
    let (ta, tb) = (median(a), median(b));
    Ok(RuntimeGain { elementary_seconds: ta, condensed_seconds: tb, repeats, xi_t: ta / tb })
}

/// One row of a gain table.
#[derive(Clone, Debug, PartialEq)]
pub struct GainRow {
    pub n: f64,
    pub m: f64,
    pub model: Backend,
    pub xi_beta: f64,
    pub xi_t: Option<f64>,
}

pub const GAIN_CSV_HEADER: &str = "n,m,model,xi_beta,xi_t";

impl GainRow {
    /// CSV line; a missing measurement is an empty field.
    pub fn to_csv(&self) -> String {
        let t = self.xi_t.map(|v| format!("{v}")).unwrap_or_default();
        format!("{},{},{},{},{}", self.n, self.m, self.model, self.xi_beta, t)
    }
}

/// `count` log-spaced points from `lo` to `hi`, both included.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plug_in_values() {
        assert_eq!(beta_sparse(Backend::Direct, 1e4, 0.0), 1e8);
        assert_eq!(beta_sparse(Backend::Iterative, 123.0, 0.0), 0.0);
        assert_eq!(beta_sparse(Backend::Direct, 100.0, 1.0), 12000.0);
        assert!((beta_dense(1.0, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((beta_dense(100.0, 99.0) - 2_313_333.333_333_333).abs() < 1e-6);
    }

    #[test]
    fn general_specializes() {
        for method in [Backend::Direct, Backend::Iterative] {
            for &(n, m) in &[(1e4, 8.0), (1e6, 120.0), (500.0, 3.0)] {
                let sets = vec![SetSize { loads: m - 1.0, prescribed: 0.0 }; m as usize];
                let g = gain_general(method, n, m, &sets).unwrap();
                assert!((g - gain_problem1(method, n, m)).abs() <= 1e-12 * g.abs().max(1.0));
            }
            let sets = vec![SetSize { loads: 0.0, prescribed: 8.0 }; 4];
            let g = gain_general(method, 1e6, 8.0, &sets).unwrap();
            assert!((g - gain_problem2(method, 1e6, 8).unwrap()).abs() < 1e-12 * g);
        }
    }

    #[test]
    fn general_edges() {
        let one = [SetSize { loads: 1.0, prescribed: 0.0 }];
        assert!(gain_general(Backend::Direct, 100.0, 90.0, &one).unwrap() < 1.0);
        assert!(gain_general(Backend::Direct, 100.0, 100.0, &one).is_err());
        let g1 = gain_general(Backend::Direct, 1e4, 10.0, &one).unwrap();
        let g2 = gain_general(Backend::Direct, 1e4, 10.0, &[one[0], one[0]]).unwrap();
        // only the numerator scales with the number of sets, the dense part is tiny here
        assert!(g2 > 1.99 * g1 && g2 < 2.0 * g1);
    }

    #[test]
    fn mechanism_gain() {
        let g = gain_problem2(Backend::Direct, 1e6, 8).unwrap();
        assert!((g - 4.0).abs() < 0.05, "{g}");
        let g = gain_problem2(Backend::Direct, 1e6, 2).unwrap();
        assert!((g - 1.0).abs() < 0.01, "{g}");
        assert!(gain_problem2(Backend::Direct, 1e6, 7).is_err());
        assert!(gain_problem2(Backend::Direct, 1e6, 0).is_err());
    }

    #[test]
    fn heat_gain_spot_values() {
        assert_eq!(gain_problem1(Backend::Iterative, 1e4, 1.0), 0.0);
        let g = gain_problem1(Backend::Direct, 1e4, 1.0);
        assert!((g - 0.9801).abs() / 0.9801 < 0.005, "{g}");
    }

    #[test]
    fn heat_gain_has_interior_maximum() {
        for method in [Backend::Direct, Backend::Iterative] {
            let ms = log_space(1.0, 5000.0, 80);
            let g: Vec<f64> = ms.iter().map(|&m| gain_problem1(method, 1e4, m)).collect();
            let k = (0..g.len()).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
            assert!(k > 0 && k < g.len() - 1);
            assert!(g[..=k].windows(2).all(|w| w[1] >= w[0]));
            assert!(g[k..].windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1.0, 1000.0, 4);
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[3] - 1000.0).abs() < 1e-9);
        assert_eq!(log_space(3.0, 9.0, 1), vec![3.0]);
    }

    #[test]
    fn csv_row() {
        let r = GainRow { n: 1e4, m: 2.0, model: Backend::Iterative, xi_beta: 0.5, xi_t: None };
        assert_eq!(r.to_csv(), "10000,2,iterative,0.5,");
    }

    #[test]
    fn self_comparison_is_near_one() {
        let p = crate::problems::build_problem1(30, 30, 6, 0.3, 1).unwrap();
        let r = measure_between(&p, Backend::Direct, (Pipeline::Condensed, Pipeline::Condensed), 5).unwrap();
        assert!(r.xi_t > 0.3 && r.xi_t < 3.0, "{}", r.xi_t);
    }

    proptest! {
        #[test]
        fn costs_monotone(n in 1.0f64..1e6, l in 0.0f64..1e3, dn in 0.0f64..1e3, dl in 0.0f64..10.0) {
            for method in [Backend::Direct, Backend::Iterative] {
                let b = beta_sparse(method, n, l);
                prop_assert!(b >= 0.0);
                prop_assert!(beta_sparse(method, n + dn, l) >= b);
                prop_assert!(beta_sparse(method, n, l + dl) >= b);
            }
            let d = beta_dense(n, l);
            prop_assert!(d >= 0.0 && beta_dense(n + dn, l) >= d && beta_dense(n, l + dl) >= d);
        }
    }
}
