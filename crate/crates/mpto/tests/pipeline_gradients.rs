//! Both pipelines return the same responses and gradients at random designs.

use mpto::frontend::Pipeline;
use mpto::problems::{build_problem1, build_problem2, Problem};
use mpto::sparse::Backend;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn agree(p: &Problem, x: &[f64]) -> Result<(), TestCaseError> {
    let e = p.evaluate(Pipeline::Elementary, Backend::Direct, x, true).unwrap();
    let c = p.evaluate(Pipeline::Condensed, Backend::Direct, x, true).unwrap();
    for (r, (ge, gc)) in e.gradients.iter().zip(&c.gradients).enumerate() {
        let scale = ge.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let diff = ge.iter().zip(gc).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        prop_assert!(diff / scale < 1e-9, "response {}: {:e}", r, diff / scale);
        let vs = e.values[r].abs().max(1.0);
        prop_assert!((e.values[r] - c.values[r]).abs() / vs < 1e-10);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn heat_problem(seed in 0u64..1000, m in 2usize..7, x in proptest::collection::vec(0.001f64..1.0, 36)) {
        let p = build_problem1(6, 6, m, 0.4, seed).unwrap();
        agree(&p, &x)?;
    }

    #[test]
    fn mechanism(x in proptest::collection::vec(0.001f64..1.0, 49), j in proptest::collection::vec(0.2f64..3.0, 4)) {
        let jbar = DMatrix::from_row_slice(2, 2, &[j[0], -j[1], j[2], j[3]]);
        let p = build_problem2(7, 7, jbar).unwrap();
        agree(&p, &x)?;
    }
}
