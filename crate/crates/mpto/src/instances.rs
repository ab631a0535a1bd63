//! Seeded random multi-partition conduction instances.
//!
//! Each instance has a common prescribed DOF group with identical values in
//! every set (so the secondary prescribed set is nonempty), set-specific
//! prescribed DOFs, random DOFs of interest and loads anywhere on free DOFs.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::condense::{condense, secondary_inputs};
use crate::error::Result;
use crate::fem::{assemble, DesignField, Filter, Grid, Physics, Simp};
use crate::frontend::{solve_condensed, solve_elementary};
use crate::partition::{build_plan, AnalysisSet, PartitionPlan};
use crate::sparse::{Backend, IndexSet, SolverStats, SymmetricSparse};

#[derive(Debug)]
pub struct Instance {
    pub grid: Grid,
    pub design: DesignField,
    pub k: SymmetricSparse,
    pub sets: Vec<AnalysisSet>,
    pub plan: PartitionPlan,
}

/// Grid of 3 to `max_el` elements per side with `1..=max_sets` analysis sets.
pub fn random_conduction(seed: u64, max_el: usize, max_sets: usize) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nelx = rng.random_range(3..=max_el.max(3));
    let nely = rng.random_range(3..=max_el.max(3));
    let grid = Grid::new(nelx, nely, Physics::Conduction)?;
    let n = grid.n_dofs();
    let filter = Arc::new(Filter::new(&grid, 1.5)?);
    let x: Vec<f64> = (0..grid.n_elements()).map(|_| rng.random_range(0.05..1.0)).collect();
    let design = DesignField::new(x, filter, Simp::default())?;
    let k = assemble(&grid, &design)?;

    let a = rng.random_range(1..=max_sets.max(1));
    // disjoint pools: common prescribed, per-set prescribed, the rest
    let n_common = rng.random_range(1..=3);
    let n_extra = 2 * a;
    let picked = sample(&mut rng, n, n_common + n_extra).into_vec();
    let common: Vec<usize> = picked[..n_common].to_vec();
    let common_values: Vec<f64> = common.iter().map(|_| rng.random_range(-1.0..1.0)).collect();

    let others = common.iter().copied().collect::<IndexSet>().complement(n);
    let mut sets = Vec::with_capacity(a);
    for i in 0..a {
        let cases = rng.random_range(1..=3);
        // distinct prescribed sets: only the first set may lack own DOFs
        let own = rng.random_range(usize::from(i > 0)..=2);
        let extra: Vec<usize> = picked[n_common + 2 * i..n_common + 2 * i + own].to_vec();
        let prescribed: IndexSet = common.iter().chain(&extra).copied().collect();
        let mut values = DMatrix::zeros(prescribed.len(), cases);
        for (c, &d) in common.iter().enumerate() {
            let r = prescribed.position(d).expect("common DOF");
            values.row_mut(r).fill(common_values[c]);
        }
        for &d in &extra {
            let r = prescribed.position(d).expect("extra DOF");
            for c in 0..cases {
                values[(r, c)] = rng.random_range(-1.0..1.0);
            }
        }
        let free = prescribed.complement(n);
        let loads = (0..cases)
            .map(|_| {
                let count = rng.random_range(1..=3).min(free.len());
                sample(&mut rng, free.len(), count)
                    .into_iter()
                    .map(|p| (free.as_slice()[p], rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let interest_count = rng.random_range(1..=4);
        let interest: IndexSet =
            sample(&mut rng, n - n_common, interest_count).into_iter().map(|p| others.as_slice()[p]).collect();
        sets.push(AnalysisSet::new(prescribed, interest, values, loads)?);
    }
    let plan = build_plan(&sets, n)?;
    Ok(Instance { grid, design, k, sets, plan })
}

/// Small two-set instance exercising every dependency case.
#[derive(Debug)]
pub struct SmallInstance {
    pub grid: Grid,
    pub filter: Arc<Filter>,
    pub x: Vec<f64>,
    pub sets: Vec<AnalysisSet>,
}

/// 3×3 conduction grid, two sets sharing a sink at DOF 0 with swapped
/// primary DOFs 5 and 10, loads on secondary free DOFs and two load cases
/// in the first set. Primary DOFs are {5, 10, 15}.
pub fn two_set_grid3() -> SmallInstance {
    let grid = Grid::new(3, 3, Physics::Conduction).expect("valid grid");
    let filter = Arc::new(Filter::new(&grid, 1.5).expect("valid radius"));
    let x: Vec<f64> = (0..9).map(|e| 0.3 + 0.07 * e as f64).collect();
    let set = |p: &[usize], v: &[f64], interest: &[usize], loads: Vec<Vec<(usize, f64)>>| {
        let vals = DMatrix::from_row_slice(p.len(), loads.len(), v);
        AnalysisSet::new(p.into(), interest.into(), vals, loads).expect("consistent set")
    };
    let sets = vec![
        set(
            &[0, 5],
            &[0.3, 0.3, 0.2, -0.5],
            &[10, 15],
            vec![vec![(10, 1.0), (7, 0.5)], vec![(7, -0.4), (12, 0.8), (15, 0.3)]],
        ),
        set(&[0, 10], &[0.3, -0.1], &[5, 15], vec![vec![(5, 0.7), (12, 0.2)]]),
    ];
    SmallInstance { grid, filter, x, sets }
}

/// Largest primary-state difference between the pipelines relative to the
/// largest primary state.
pub fn pipeline_state_error(inst: &Instance, backend: Backend) -> Result<f64> {
    let stats = Arc::new(SolverStats::new());
    let (fl, up) = secondary_inputs(&inst.plan, &inst.sets)?;
    let model = condense(&inst.k, &inst.plan, &fl, &up, backend, &stats)?;
    let cond = solve_condensed(&model, &inst.sets, &stats, false)?;
    let elem = solve_elementary(&inst.k, &inst.sets, backend, &stats, false)?;
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..inst.sets.len() {
        let e = elem.primary_states(&inst.plan, i);
        diff = diff.max((&cond.sets[i].states - &e).amax());
        scale = scale.max(e.amax());
    }
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::validate_plan;

    #[test]
    fn instances_are_reproducible_and_reducible() {
        for seed in 0..20 {
            let a = random_conduction(seed, 6, 4).unwrap();
            let b = random_conduction(seed, 6, 4).unwrap();
            assert_eq!(a.sets, b.sets);
            validate_plan(&a.plan, &a.sets).unwrap();
            assert!(a.plan.n_secondary_prescribed() >= 1);
            assert!(pipeline_state_error(&a, Backend::Direct).unwrap() < 1e-9);
        }
    }
}
