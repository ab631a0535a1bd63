//! Analysis sets and the split of the DOFs into secondary-prescribed,
//! secondary-free and primary sets.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::IndexSet;

/// One boundary-condition pattern with its load cases.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSet {
    /// DOFs with prescribed state.
    pub prescribed: IndexSet,
    /// DOFs whose states or reactions enter a response.
    pub interest: IndexSet,
    /// Prescribed values, `|prescribed| × cases`.
    pub prescribed_values: DMatrix<f64>,
    /// Applied loads per case as `(dof, value)` pairs on free DOFs.
    pub loads: Vec<Vec<(usize, f64)>>,
}

impl AnalysisSet {
    pub fn new(
        prescribed: IndexSet,
        interest: IndexSet,
        prescribed_values: DMatrix<f64>,
        loads: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        if loads.is_empty() {
            return Err(Error::Invalid("an analysis set needs at least one load case".into()));
        }
        if prescribed_values.nrows() != prescribed.len() || prescribed_values.ncols() != loads.len() {
            return Err(Error::DimensionMismatch(format!(
                "prescribed values are {}x{}, expected {}x{}",
                prescribed_values.nrows(),
                prescribed_values.ncols(),
                prescribed.len(),
                loads.len()
            )));
        }
        Ok(Self { prescribed, interest, prescribed_values, loads })
    }

    /// Zero prescribed values for every case.
    pub fn homogeneous(prescribed: IndexSet, interest: IndexSet, loads: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let values = DMatrix::zeros(prescribed.len(), loads.len());
        Self::new(prescribed, interest, values, loads)
    }

    pub fn cases(&self) -> usize {
        self.loads.len()
    }

    pub fn free(&self, n: usize) -> IndexSet {
        self.prescribed.complement(n)
    }

    /// Checks index bounds and that no load acts on a prescribed DOF.
    pub fn validate(&self, n: usize) -> Result<()> {
        self.prescribed.check_bounds(n)?;
        self.interest.check_bounds(n)?;
        for case in &self.loads {
            for &(d, v) in case {
                if d >= n {
                    return Err(Error::IndexOutOfRange { index: d, dim: n });
                }
                if self.prescribed.contains(d) {
                    return Err(Error::Invalid(format!("load on prescribed DOF {d}")));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("load on DOF {d}")));
                }
            }
        }
        Ok(())
    }

    /// Loads restricted to `rows`, `|rows| × cases`; loads elsewhere are dropped.
    pub fn load_matrix(&self, rows: &IndexSet) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), self.cases());
        for (c, case) in self.loads.iter().enumerate() {
            for &(d, v) in case {
                if let Some(r) = rows.position(d) {
                    out[(r, c)] += v;
                }
            }
        }
        out
    }

    /// Prescribed values on `rows ⊆ prescribed`.
    pub fn prescribed_matrix(&self, rows: &IndexSet) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(rows.len(), self.cases());
        for (r, d) in rows.iter().enumerate() {
            let p = self
                .prescribed
                .position(d)
                .ok_or_else(|| Error::Partition(format!("DOF {d} is not prescribed in this set")))?;
            out.set_row(r, &self.prescribed_values.row(p));
        }
        Ok(out)
    }
}

/// Reduced partition of one analysis set over the primary DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct SetSplit {
    /// Free primary DOFs, global numbering.
    pub free: IndexSet,
    /// Prescribed primary DOFs, global numbering.
    pub prescribed: IndexSet,
    /// Positions of `free` inside the primary set.
    pub free_local: Vec<usize>,
    /// Positions of `prescribed` inside the primary set.
    pub prescribed_local: Vec<usize>,
    /// Load cases of the set.
    pub cases: usize,
    /// First column of the set in the global load-case numbering.
    pub case_offset: usize,
}

/// The disjoint split `D = P̌ ⊔ F̌ ⊔ M` plus per-set reduced splits.
///
/// The order of `primary` defines the numbering of the reduced system.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    pub n: usize,
    pub secondary_prescribed: IndexSet,
    pub secondary_free: IndexSet,
    pub primary: IndexSet,
    pub splits: Vec<SetSplit>,
}

impl PartitionPlan {
    pub fn m(&self) -> usize {
        self.primary.len()
    }

    pub fn n_secondary_free(&self) -> usize {
        self.secondary_free.len()
    }

    pub fn n_secondary_prescribed(&self) -> usize {
        self.secondary_prescribed.len()
    }

    /// Total number of load cases `l`.
    pub fn total_cases(&self) -> usize {
        self.splits.iter().map(|s| s.cases).sum()
    }

    /// Column range of set `i` in the global load-case numbering.
    pub fn case_range(&self, i: usize) -> std::ops::Range<usize> {
        let s = &self.splits[i];
        s.case_offset..s.case_offset + s.cases
    }

    /// True when condensation eliminates nothing free.
    pub fn no_reduction(&self) -> bool {
        self.secondary_free.is_empty()
    }
}

/// Builds the plan from the analysis sets.
///
/// A DOF prescribed in every set stays secondary only if its prescribed value
/// is the same in every set and case; otherwise it is promoted to primary.
pub fn build_plan(sets: &[AnalysisSet], n: usize) -> Result<PartitionPlan> {
    if sets.is_empty() {
        return Err(Error::Partition("at least one analysis set is required".into()));
    }
    for s in sets {
        s.validate(n)?;
    }
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if sets[i].prescribed == sets[j].prescribed {
                return Err(Error::Partition(format!(
                    "analysis sets {i} and {j} have the same prescribed set"
                )));
            }
        }
    }
    let mut all_prescribed = sets[0].prescribed.clone();
    let mut any_prescribed = sets[0].prescribed.clone();
    let mut interest = sets[0].interest.clone();
    for s in &sets[1..] {
        all_prescribed = all_prescribed.intersection(&s.prescribed);
        any_prescribed = any_prescribed.union(&s.prescribed);
        interest = interest.union(&s.interest);
    }
    let never_prescribed = any_prescribed.complement(n);

    let mut pcheck = Vec::new();
    for d in all_prescribed.difference(&interest).iter() {
        let mut value: Option<f64> = None;
        let mut uniform = true;
        for s in sets {
            let p = s.prescribed.position(d).expect("DOF prescribed in every set");
            for &v in s.prescribed_values.row(p).iter() {
                match value {
                    None => value = Some(v),
                    Some(w) if w != v => uniform = false,
                    _ => {}
                }
            }
        }
        if uniform {
            pcheck.push(d);
        }
    }
    let secondary_prescribed = IndexSet::from_sorted(pcheck)?;
    let secondary_free = never_prescribed.difference(&interest);
    let primary = secondary_prescribed.union(&secondary_free).complement(n);

    let mut splits = Vec::with_capacity(sets.len());
    let mut offset = 0;
    for s in sets {
        let prescribed = primary.intersection(&s.prescribed);
        let free = primary.difference(&prescribed);
        let local = |set: &IndexSet| set.iter().map(|d| primary.position(d).unwrap()).collect();
        splits.push(SetSplit {
            free_local: local(&free),
            prescribed_local: local(&prescribed),
            free,
            prescribed,
            cases: s.cases(),
            case_offset: offset,
        });
        offset += s.cases();
    }
    Ok(PartitionPlan { n, secondary_prescribed, secondary_free, primary, splits })
}

/// Result of [`validate_plan`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanReport {
    pub warnings: Vec<String>,
}

/// Checks the cover, disjointness and freedom rules of a plan.
pub fn validate_plan(plan: &PartitionPlan, sets: &[AnalysisSet]) -> Result<PlanReport> {
    let n = plan.n;
    let mut owner = vec![0u8; n];
    for (tag, set) in [
        (1u8, &plan.secondary_prescribed),
        (2, &plan.secondary_free),
        (4, &plan.primary),
    ] {
        set.check_bounds(n)?;
        for d in set.iter() {
            if owner[d] != 0 {
                return Err(Error::Partition(format!("DOF {d} belongs to more than one of P̌, F̌, M")));
            }
            owner[d] = tag;
        }
    }
    if let Some(d) = owner.iter().position(|&t| t == 0) {
        return Err(Error::Partition(format!("DOF {d} is in none of P̌, F̌, M")));
    }
    if sets.len() != plan.splits.len() {
        return Err(Error::Partition("plan and analysis sets differ in count".into()));
    }
    for (i, s) in sets.iter().enumerate() {
        if let Some(d) = s.interest.iter().find(|&d| owner[d] != 4) {
            return Err(Error::Partition(format!("DOF {d} of interest in set {i} is not primary")));
        }
        for d in 0..n {
            let prescribed = s.prescribed.contains(d);
            if owner[d] == 1 && !prescribed {
                return Err(Error::Partition(format!(
                    "DOF {d} changes freedom (free in set {i}) but is not primary"
                )));
            }
            if owner[d] == 2 && prescribed {
                return Err(Error::Partition(format!(
                    "DOF {d} changes freedom (prescribed in set {i}) but is not primary"
                )));
            }
        }
    }
    for (i, split) in plan.splits.iter().enumerate() {
        if split.free.union(&split.prescribed) != plan.primary
            || !split.free.intersection(&split.prescribed).is_empty()
        {
            return Err(Error::Partition(format!("reduced split of set {i} does not cover M")));
        }
    }
    let mut report = PlanReport::default();
    if plan.no_reduction() {
        report.warnings.push("no reduction: the secondary free set is empty".into());
    }
    if plan.primary.is_empty() {
        report.warnings.push("the primary set is empty".into());
    }
    Ok(report)
}
