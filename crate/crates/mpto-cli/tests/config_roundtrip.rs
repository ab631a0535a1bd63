//! Writing a configuration and reading it back is the identity.

use std::path::PathBuf;

use mpto::sparse::Backend;
use mpto_cli::{GainConfig, PipelineChoice, ProblemChoice, RunConfig};
use proptest::prelude::*;

fn backend() -> impl Strategy<Value = Backend> {
    prop_oneof![Just(Backend::Direct), Just(Backend::Iterative)]
}

fn gain() -> impl Strategy<Value = GainConfig> {
    (
        proptest::collection::vec(2.0f64..1e9, 1..4),
        1.0f64..10.0,
        10.0f64..1e3,
        1usize..60,
        proptest::collection::vec(backend(), 1..3),
        proptest::collection::vec(2usize..100, 0..4),
        1.0f64..1e5,
        1usize..5,
    )
        .prop_map(|(n, m_min, m_max, m_points, models, measure_m, measure_max_n, repeats)| GainConfig {
            n,
            m_min,
            m_max,
            m_points,
            models,
            measure_m,
            measure_max_n,
            repeats,
        })
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        prop_oneof![Just(ProblemChoice::Problem1), Just(ProblemChoice::Problem2)],
        (1usize..500, 1usize..500, 2usize..200, 1e-3f64..1.0, any::<u64>()),
        (1usize..4).prop_flat_map(|x| proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, x), x)),
        prop_oneof![Just(PipelineChoice::Elementary), Just(PipelineChoice::Condensed), Just(PipelineChoice::Both)],
        (backend(), 1usize..64, 0usize..1000, 0.0f64..0.5, proptest::option::of(0.01f64..1.0)),
        "[a-z][a-z0-9_/]{0,20}",
        proptest::option::of(gain()),
    )
        .prop_map(|(problem, (nelx, nely, ports, vbar, seed), jbar, pipeline, (backend, threads, max_iters, tol, move_limit), dir, gain)| {
            RunConfig {
                problem,
                nelx,
                nely,
                ports,
                vbar,
                seed,
                jbar,
                pipeline,
                backend,
                threads,
                max_iters,
                tol,
                move_limit,
                output_dir: PathBuf::from(dir),
                gain,
            }
        })
}

proptest! {
    #[test]
    fn write_then_read(cfg in config()) {
        let text = cfg.to_text();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }
}
